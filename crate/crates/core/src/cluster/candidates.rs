use rayon::prelude::*;

use super::{ceil_guarded, ClusterConfig};
use crate::error::{Error, Result};
use crate::linalg::{dist, sq_dist};
use crate::model::LabeledSet;

/// Evenly strided subsample of `0..n` with at most `cap` indices.
fn strided(n: usize, cap: usize) -> Vec<usize> {
    if n <= cap {
        return (0..n).collect();
    }
    (0..cap).map(|i| i * n / cap).collect()
}

fn quantile(sorted: &[f64], p: f64) -> f64 {
    let idx = (p * (sorted.len() - 1) as f64).floor() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Geometric grid (ratio 2) spanning the 1% to 99% quantiles of pairwise
/// distances, rescaled by `1/√d` to per-coordinate standard deviations.
pub fn candidate_stdevs(set: &LabeledSet, cfg: &ClusterConfig) -> Result<Vec<f64>> {
    let n = set.len();
    if n < 2 {
        return Err(Error::invalid("candidate scales need at least two points"));
    }
    let idx = strided(n, cfg.thresholds.stdev_subsample);
    let mut dists: Vec<f64> = idx
        .par_iter()
        .enumerate()
        .flat_map_iter(|(a, &i)| idx[a + 1..].iter().map(move |&j| (i, j)))
        .map(|(i, j)| dist(&set.get(i).x, &set.get(j).x))
        .collect();
    dists.sort_by(f64::total_cmp);

    let root_d = (set.d().max(1) as f64).sqrt();
    let mut lo = quantile(&dists, 0.01);
    let hi = quantile(&dists, 0.99);
    if !hi.is_finite() {
        let index = (0..n)
            .find(|&i| set.get(i).x.iter().any(|v| !(v * v).is_finite()))
            .unwrap_or(0);
        return Err(Error::NumericFailure {
            index,
            message: "pairwise distances overflow".into(),
        });
    }
    if hi <= 0.0 {
        let scale = set
            .xs()
            .flat_map(|x| x.iter())
            .fold(1.0f64, |m, v| m.max(v.abs()));
        return Ok(vec![f64::EPSILON * scale]);
    }
    if lo <= 0.0 {
        // Duplicate-heavy data: start from the smallest positive distance.
        lo = dists.iter().copied().find(|&v| v > 0.0).unwrap_or(hi);
    }
    let steps = (hi / lo).log2().ceil().max(0.0) as usize;
    Ok((0..=steps).map(|i| lo * 2f64.powi(i as i32) / root_d).collect())
}

/// Neighborhood means of subsampled anchor points, computed once and reused
/// across scales.
///
/// Each anchor contributes the mean of its `⌈0.9 α n⌉` nearest points; its
/// tightness is the distance to the farthest of them.
#[derive(Debug, Clone)]
pub struct NeighborhoodMeans {
    means: Vec<Vec<f64>>,
    radii: Vec<f64>,
    /// Anchor ids ordered tightest first.
    order: Vec<usize>,
}

impl NeighborhoodMeans {
    pub fn compute(set: &LabeledSet, cfg: &ClusterConfig) -> Self {
        let n = set.len();
        let d = set.d();
        let m = ceil_guarded(cfg.thresholds.neighborhood_frac * cfg.alpha * n as f64).clamp(1, n.max(1));
        let anchors = strided(n, cfg.thresholds.mean_subsample);
        let results: Vec<(Vec<f64>, f64)> = anchors
            .par_iter()
            .map(|&a| {
                let center = &set.get(a).x;
                let mut ds: Vec<(f64, usize)> = set
                    .iter()
                    .enumerate()
                    .map(|(i, p)| (sq_dist(center, &p.x), i))
                    .collect();
                let cmp = |u: &(f64, usize), v: &(f64, usize)| u.0.total_cmp(&v.0).then(u.1.cmp(&v.1));
                if m < n {
                    ds.select_nth_unstable_by(m - 1, cmp);
                }
                let near = &mut ds[..m];
                near.sort_unstable_by(cmp);
                let mut mean = vec![0.0; d];
                for &(_, i) in near.iter() {
                    for (acc, v) in mean.iter_mut().zip(&set.get(i).x) {
                        *acc += v;
                    }
                }
                mean.iter_mut().for_each(|v| *v /= m as f64);
                (mean, near[m - 1].0.sqrt())
            })
            .collect();
        let (means, radii): (Vec<_>, Vec<_>) = results.into_iter().unzip();
        let mut order: Vec<usize> = (0..means.len()).collect();
        order.sort_by(|&a, &b| radii[a].total_cmp(&radii[b]).then(a.cmp(&b)));
        Self { means, radii, order }
    }

    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn mean(&self, id: usize) -> &[f64] {
        &self.means[id]
    }

    pub fn radius(&self, id: usize) -> f64 {
        self.radii[id]
    }

    /// Greedy deduplication at scale `sigma_hat`: walk anchors tightest
    /// first, keep a mean if it is farther than `C σ̂/√α` from every kept
    /// one, stop at `⌈4/α⌉` kept. Returns anchor ids.
    pub fn dedup(&self, sigma_hat: f64, cfg: &ClusterConfig) -> Vec<usize> {
        let radius = cfg.unit() * sigma_hat;
        let cap = cfg.candidate_cap();
        let mut kept: Vec<usize> = Vec::new();
        for &id in &self.order {
            if kept.len() >= cap {
                break;
            }
            if kept.iter().all(|&k| dist(&self.means[k], &self.means[id]) > radius) {
                kept.push(id);
            }
        }
        kept
    }
}

/// Candidate means at scale `sigma_hat`, at most `⌈4/α⌉` of them.
pub fn candidate_means(set: &LabeledSet, sigma_hat: f64, cfg: &ClusterConfig) -> Result<Vec<Vec<f64>>> {
    if !(sigma_hat > 0.0) {
        return Err(Error::invalid(format!("sigma_hat must be positive, got {sigma_hat}")));
    }
    if set.is_empty() {
        return Ok(Vec::new());
    }
    let hoods = NeighborhoodMeans::compute(set, cfg);
    Ok(hoods
        .dedup(sigma_hat, cfg)
        .into_iter()
        .map(|id| hoods.mean(id).to_vec())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::{ComponentSpec, Shape};
    use crate::model::{LabeledPoint, LabeledSet};

    fn set_from(xs: Vec<Vec<f64>>) -> LabeledSet {
        let d = xs[0].len();
        LabeledSet::new(d, 1, xs.into_iter().map(|x| LabeledPoint::new(x, 1)).collect()).unwrap()
    }

    fn blob(mean: Vec<f64>, sigma: f64, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let c = ComponentSpec::new(mean, sigma, Shape::Gaussian).unwrap();
        crate::data_gen::sample_component(&c, n, seed).unwrap()
    }

    #[test]
    fn two_points_grid() {
        let d = 4;
        let a = vec![0.0; d];
        let mut b = vec![0.0; d];
        b[0] = 2.0 * (d as f64).sqrt();
        let s = candidate_stdevs(&set_from(vec![a, b]), &ClusterConfig::new(0.3, 2.0)).unwrap();
        assert!(s.iter().any(|&v| (0.5..=2.0).contains(&v)), "{s:?}");
    }

    #[test]
    fn identical_points_single_scale() {
        let s = candidate_stdevs(&set_from(vec![vec![1.0, 1.0]; 5]), &ClusterConfig::new(0.3, 2.0)).unwrap();
        assert_eq!(s.len(), 1);
        assert!(s[0] > 0.0 && s[0] < 1e-12);
    }

    #[test]
    fn gaussian_blob_scale_and_monotone_grid() {
        let set = set_from(blob(vec![0.0; 10], 1.0, 1000, 3));
        let s = candidate_stdevs(&set, &ClusterConfig::new(0.3, 2.0)).unwrap();
        assert!(s.windows(2).all(|w| w[0] < w[1]));
        assert!(s.iter().any(|&v| (0.5..=2.0).contains(&v)), "{s:?}");
        assert!(candidate_stdevs(&set_from(vec![vec![0.0]]), &ClusterConfig::new(0.3, 2.0)).is_err());
    }

    #[test]
    fn tight_cluster_gives_one_candidate() {
        let sigma_hat = 0.1;
        let m = vec![3.0, -1.0, 2.0];
        // Uniform in a ball of radius σ̂ around m.
        let c = ComponentSpec::new(m.clone(), sigma_hat / (5f64).sqrt(), Shape::UniformBall).unwrap();
        let xs = crate::data_gen::sample_component(&c, 500, 1).unwrap();
        assert!(xs.iter().all(|x| dist(x, &m) <= sigma_hat));
        let cands = candidate_means(&set_from(xs), sigma_hat, &ClusterConfig::new(0.3, 2.0)).unwrap();
        assert_eq!(cands.len(), 1);
        assert!(dist(&cands[0], &m) <= 2.0 * sigma_hat);
    }

    #[test]
    fn three_blobs_one_candidate_each() {
        let (sigma, alpha, c) = (0.05, 1.0 / 3.0, 2.0);
        let centers = [vec![0.0; 8], {
            let mut v = vec![0.0; 8];
            v[0] = 5.0;
            v
        }, {
            let mut v = vec![0.0; 8];
            v[1] = 5.0;
            v
        }];
        let mut xs = Vec::new();
        for (j, ctr) in centers.iter().enumerate() {
            xs.extend(blob(ctr.clone(), sigma, 700, 10 + j as u64));
        }
        let cfg = ClusterConfig::new(alpha, c);
        let cands = candidate_means(&set_from(xs), sigma, &cfg).unwrap();
        assert!(cands.len() >= 3 && cands.len() <= cfg.candidate_cap());
        for ctr in &centers {
            let best = cands.iter().map(|m| dist(m, ctr)).fold(f64::INFINITY, f64::min);
            assert!(best <= c * sigma / alpha.sqrt(), "closest candidate {best}");
        }
    }

    #[test]
    fn candidate_count_capped() {
        // Many small far-apart groups: more anchors than the cap allows.
        let mut xs = Vec::new();
        for g in 0..40 {
            for i in 0..5 {
                xs.push(vec![g as f64 * 100.0, i as f64 * 1e-3]);
            }
        }
        let cfg = ClusterConfig::new(0.5, 2.0);
        let cands = candidate_means(&set_from(xs), 0.01, &cfg).unwrap();
        assert!(cands.len() <= cfg.candidate_cap());
        assert!(candidate_means(&set_from(vec![vec![0.0]]), 0.0, &cfg).is_err());
    }
}
