//! Nasty-noise adversary: sees the clean sample and the ground truth, then
//! replaces exactly `⌊η n⌋` labeled pairs according to a fixed strategy.

use std::fmt;
use std::str::FromStr;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data_gen::GroundTruth;
use crate::error::{Error, Result};
use crate::linalg::{axpy, dist, norm, sub};
use crate::model::{margin_from_scores, LabeledPoint, LabeledSet};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    None,
    /// Uniform `x` in the clean bounding box, uniform label.
    RandomReplace,
    /// Relabel the smallest-margin clean points to their runner-up class.
    LabelFlipNearest,
    /// Points between pairs of component means, labeled as the farther mean.
    BoundaryInject,
    /// A tight ball of identically mislabeled points away from every mean.
    FakeCluster,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::None,
        Strategy::RandomReplace,
        Strategy::LabelFlipNearest,
        Strategy::BoundaryInject,
        Strategy::FakeCluster,
    ];

    /// The four strategies that actually replace points.
    pub const ATTACKS: [Strategy; 4] = [
        Strategy::RandomReplace,
        Strategy::LabelFlipNearest,
        Strategy::BoundaryInject,
        Strategy::FakeCluster,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Strategy::None => "none",
            Strategy::RandomReplace => "random-replace",
            Strategy::LabelFlipNearest => "label-flip-nearest",
            Strategy::BoundaryInject => "boundary-inject",
            Strategy::FakeCluster => "fake-cluster",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Strategy::ALL
            .iter()
            .copied()
            .find(|st| st.name() == s.trim())
            .ok_or_else(|| {
                let names: Vec<_> = Strategy::ALL.iter().map(|s| s.name()).collect();
                Error::invalid(format!("unknown strategy '{s}' (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttackConfig {
    pub eta: f64,
    pub strategy: Strategy,
    pub seed: u64,
}

impl AttackConfig {
    pub fn new(eta: f64, strategy: Strategy, seed: u64) -> Result<Self> {
        if !(0.0..1.0).contains(&eta) {
            return Err(Error::invalid(format!("eta must lie in [0, 1), got {eta}")));
        }
        Ok(Self { eta, strategy, seed })
    }

    /// `⌊η n⌋`, robust to the product landing a hair under an integer.
    pub fn budget(&self, n: usize) -> usize {
        if self.strategy == Strategy::None {
            return 0;
        }
        let raw = self.eta * n as f64;
        let r = raw.round();
        let count = if (raw - r).abs() <= 1e-9 * r.max(1.0) { r } else { raw.floor() };
        (count as usize).min(n)
    }
}

#[derive(Debug, Clone)]
pub struct Corruption {
    pub set: LabeledSet,
    /// Replaced positions. Harness-only; never passed to the learner.
    pub dirty_mask: Vec<bool>,
}

impl Corruption {
    pub fn dirty_count(&self) -> usize {
        self.dirty_mask.iter().filter(|&&b| b).count()
    }
}

pub fn corrupt(clean: &LabeledSet, gt: &GroundTruth, cfg: &AttackConfig) -> Result<Corruption> {
    AttackConfig::new(cfg.eta, cfg.strategy, cfg.seed)?;
    if clean.d() != gt.d() || clean.k() != gt.k() {
        return Err(Error::invalid("clean sample and ground truth disagree on d or k"));
    }
    let n = clean.len();
    let budget = cfg.budget(n);
    let mut set = clean.clone();
    let mut dirty_mask = vec![false; n];
    if budget == 0 {
        return Ok(Corruption { set, dirty_mask });
    }
    let mut rng = rng_from_seed(cfg.seed);
    let k = gt.k();

    let positions: Vec<usize> = match cfg.strategy {
        Strategy::LabelFlipNearest => {
            let mut by_margin: Vec<(f64, usize)> = clean
                .iter()
                .enumerate()
                .map(|(i, p)| (margin_from_scores(&gt.wstar.scores(&p.x), p.y), i))
                .collect();
            by_margin.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            by_margin.into_iter().take(budget).map(|(_, i)| i).collect()
        }
        _ => {
            let mut pos = index::sample(&mut rng, n, budget).into_vec();
            pos.sort_unstable();
            pos
        }
    };

    let replacements: Vec<LabeledPoint> = match cfg.strategy {
        Strategy::None => unreachable!("zero budget handled above"),
        Strategy::RandomReplace => {
            let d = clean.d();
            let mut lo = vec![f64::INFINITY; d];
            let mut hi = vec![f64::NEG_INFINITY; d];
            for x in clean.xs() {
                for j in 0..d {
                    lo[j] = lo[j].min(x[j]);
                    hi[j] = hi[j].max(x[j]);
                }
            }
            (0..budget)
                .map(|_| {
                    let x = (0..d)
                        .map(|j| if hi[j] > lo[j] { rng.random_range(lo[j]..hi[j]) } else { lo[j] })
                        .collect();
                    LabeledPoint::new(x, rng.random_range(1..=k))
                })
                .collect()
        }
        Strategy::LabelFlipNearest => positions
            .iter()
            .map(|&i| {
                let p = clean.get(i);
                LabeledPoint::new(p.x.clone(), runner_up(&gt.wstar.scores(&p.x), p.y))
            })
            .collect(),
        Strategy::BoundaryInject => boundary_points(gt, budget),
        Strategy::FakeCluster => fake_cluster_points(gt, budget, &mut rng),
    };

    for (&i, p) in positions.iter().zip(replacements) {
        set.points_mut()[i] = p;
        dirty_mask[i] = true;
    }
    Ok(Corruption { set, dirty_mask })
}

/// Highest-scoring label other than `y` (smallest label on ties).
fn runner_up(scores: &[f64], y: usize) -> usize {
    let mut best: Option<usize> = None;
    for (i, &s) in scores.iter().enumerate() {
        if i + 1 == y {
            continue;
        }
        if best.is_none_or(|b| s > scores[b]) {
            best = Some(i);
        }
    }
    best.map_or(y, |b| b + 1)
}

fn boundary_points(gt: &GroundTruth, budget: usize) -> Vec<LabeledPoint> {
    let comps = &gt.spec.components;
    let pairs: Vec<(usize, usize)> = (0..comps.len())
        .flat_map(|a| ((a + 1)..comps.len()).map(move |b| (a, b)))
        .collect();
    (0..budget)
        .map(|i| {
            if pairs.is_empty() {
                let mean = comps[0].mean.clone();
                let y = runner_up(&gt.wstar.scores(&mean), gt.component_labels[0]);
                return LabeledPoint::new(mean, y);
            }
            let (a, b) = pairs[i % pairs.len()];
            let (ma, mb) = (&comps[a].mean, &comps[b].mean);
            let mut x: Vec<f64> = ma.iter().zip(mb).map(|(u, v)| 0.5 * (u + v)).collect();
            // Nudge toward `a` so `b` is strictly the farther mean.
            let gap = sub(ma, mb);
            let len = norm(&gap);
            if len > 0.0 {
                axpy(&mut x, 1e-6, &gap);
            }
            LabeledPoint::new(x, gt.component_labels[b])
        })
        .collect()
}

/// Center of the fake cluster: outward from the first component, at least
/// `1.5 C² 2σ/√α` from every true mean.
pub fn fake_cluster_center(gt: &GroundTruth) -> Vec<f64> {
    let comps = &gt.spec.components;
    let d = gt.d();
    let sigma = comps.iter().map(|c| c.sigma).fold(0.0, f64::max);
    let min_gap = gt.c * gt.c * 2.0 * sigma / gt.spec.alpha.sqrt();
    let anchor = &comps[0].mean;
    let centroid = crate::linalg::mean_of(comps.iter().map(|c| c.mean.as_slice()), d);
    let mut dir = sub(anchor, &centroid);
    if norm(&dir) == 0.0 {
        dir = vec![0.0; d];
        dir[d - 1] = 1.0;
    }
    let len = norm(&dir);
    dir.iter_mut().for_each(|v| *v /= len);
    let mut reach = (1.5 * min_gap).max(f64::MIN_POSITIVE);
    loop {
        let mut center = anchor.clone();
        axpy(&mut center, reach, &dir);
        if comps.iter().all(|c| dist(&c.mean, &center) >= min_gap) || reach > 1e12 {
            return center;
        }
        reach *= 2.0;
    }
}

fn fake_cluster_points<R: Rng>(gt: &GroundTruth, budget: usize, rng: &mut R) -> Vec<LabeledPoint> {
    let d = gt.d();
    let sigma = gt.spec.components.iter().map(|c| c.sigma).fold(0.0, f64::max);
    let radius = sigma / 10.0;
    let center = fake_cluster_center(gt);
    let honest = crate::model::predict(&gt.wstar, &center).unwrap_or(1);
    let label = honest % gt.k() + 1;
    (0..budget)
        .map(|_| {
            let dir: Vec<f64> = (0..d).map(|_| StandardNormal.sample(rng)).collect();
            let len = norm(&dir);
            let u: f64 = rng.random();
            let r = radius * u.powf(1.0 / d as f64);
            let mut x = center.clone();
            if len > 0.0 {
                axpy(&mut x, r / len, &dir);
            }
            LabeledPoint::new(x, label)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::{make_ground_truth, sample_clean};
    use crate::model::margin_of;

    fn setup(n: usize) -> (GroundTruth, LabeledSet) {
        let gt = make_ground_truth(3, 4, 0.5, 0.05, 2.0, 1.0 / 3.0, 1).unwrap();
        let clean = sample_clean(&gt, n, 2).unwrap().set;
        (gt, clean)
    }

    #[test]
    fn zero_eta_is_identity() {
        let (gt, clean) = setup(100);
        for st in Strategy::ALL {
            let c = corrupt(&clean, &gt, &AttackConfig::new(0.0, st, 3).unwrap()).unwrap();
            assert_eq!(c.set, clean);
            assert!(c.dirty_mask.iter().all(|&b| !b));
        }
    }

    #[test]
    fn replaces_exact_budget() {
        let (gt, clean) = setup(100);
        for st in Strategy::ATTACKS {
            let c = corrupt(&clean, &gt, &AttackConfig::new(0.1, st, 3).unwrap()).unwrap();
            assert_eq!(c.set.len(), 100);
            assert_eq!(c.dirty_count(), 10, "{st}");
            for (i, &dirty) in c.dirty_mask.iter().enumerate() {
                if !dirty {
                    assert_eq!(c.set.get(i), clean.get(i));
                }
            }
        }
        let none = corrupt(&clean, &gt, &AttackConfig::new(0.5, Strategy::None, 3).unwrap()).unwrap();
        assert_eq!(none.dirty_count(), 0);
    }

    #[test]
    fn budget_floors() {
        let cfg = AttackConfig::new(0.01 / 3.0, Strategy::FakeCluster, 0).unwrap();
        assert_eq!(cfg.budget(6000), 20);
        let cfg = AttackConfig::new(0.019, Strategy::FakeCluster, 0).unwrap();
        assert_eq!(cfg.budget(100), 1);
        let cfg = AttackConfig::new(1.0 / (4096.0 * 9.0), Strategy::FakeCluster, 0).unwrap();
        assert_eq!(cfg.budget(6000), 0);
        assert!(AttackConfig::new(1.0, Strategy::FakeCluster, 0).is_err());
    }

    #[test]
    fn label_flip_makes_margin_negative() {
        let (gt, clean) = setup(300);
        let c = corrupt(&clean, &gt, &AttackConfig::new(0.1, Strategy::LabelFlipNearest, 3).unwrap()).unwrap();
        for (i, &dirty) in c.dirty_mask.iter().enumerate() {
            if dirty {
                let p = c.set.get(i);
                assert_eq!(p.x, clean.get(i).x);
                assert!(margin_of(&gt.wstar, &p.x, p.y).unwrap() < 0.0);
            }
        }
    }

    #[test]
    fn fake_cluster_is_tight_and_far() {
        let (gt, clean) = setup(400);
        let c = corrupt(&clean, &gt, &AttackConfig::new(0.05, Strategy::FakeCluster, 9).unwrap()).unwrap();
        let fakes: Vec<&LabeledPoint> = c
            .dirty_mask
            .iter()
            .enumerate()
            .filter(|(_, &b)| b)
            .map(|(i, _)| c.set.get(i))
            .collect();
        let sigma = 0.05;
        let min_gap = 4.0 * 2.0 * sigma / (1.0f64 / 3.0).sqrt();
        for a in &fakes {
            assert_eq!(a.y, fakes[0].y);
            for b in &fakes {
                assert!(dist(&a.x, &b.x) <= sigma / 5.0);
            }
            for comp in &gt.spec.components {
                assert!(dist(&comp.mean, &a.x) >= min_gap - sigma / 10.0);
            }
        }
        // adversarial label disagrees with w* at the cluster
        let honest = crate::model::predict(&gt.wstar, &fakes[0].x).unwrap();
        assert_ne!(fakes[0].y, honest);
    }

    #[test]
    fn boundary_points_take_farther_label() {
        let (gt, clean) = setup(200);
        let c = corrupt(&clean, &gt, &AttackConfig::new(0.05, Strategy::BoundaryInject, 1).unwrap()).unwrap();
        for (i, &dirty) in c.dirty_mask.iter().enumerate() {
            if dirty {
                let p = c.set.get(i);
                let near = gt.nearest_component(&p.x);
                assert_ne!(gt.component_labels[near], p.y);
            }
        }
    }

    #[test]
    fn strategy_names_roundtrip() {
        for st in Strategy::ALL {
            assert_eq!(st.name().parse::<Strategy>().unwrap(), st);
        }
        assert!("flip".parse::<Strategy>().is_err());
    }
}
