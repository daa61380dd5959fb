//! Heuristic decision of the weighted-covariance feasibility program
//!
//! ```text
//! find q ∈ [0,1]^n  s.t.  ‖Σ q_i (x_i−μ)(x_i−μ)ᵀ‖_(r) ≤ (2C²σ̂²/α) Σ q_i,   Σ q_i ≥ 0.97 α n
//! ```
//!
//! with `‖·‖_(r)` the Ky Fan `r = ⌈1/α⌉` norm, decided by multiplicative
//! downweighting along the top-`r` eigenspace. A "feasible" answer always
//! carries a `q` that satisfies both constraints; "infeasible" is heuristic.

use super::ClusterConfig;
use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist, top_eigen, SquareMatrix};
use crate::model::LabeledSet;

#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityOutcome {
    pub feasible: bool,
    pub q: Vec<f64>,
    /// Ky Fan norm of the weighted second moment at the last iterate.
    pub norm: f64,
    /// Right-hand side `(2C²σ̂²/α) Σ q` at the last iterate.
    pub bound: f64,
    pub mass: f64,
    pub mass_floor: f64,
    pub iterations: usize,
}

pub fn feasibility_check(
    set: &LabeledSet,
    mu: &[f64],
    sigma_hat: f64,
    cfg: &ClusterConfig,
) -> Result<FeasibilityOutcome> {
    if !(sigma_hat > 0.0) {
        return Err(Error::invalid(format!("sigma_hat must be positive, got {sigma_hat}")));
    }
    if mu.len() != set.d() {
        return Err(Error::invalid("candidate mean has the wrong dimension"));
    }
    let t = &cfg.thresholds;
    let n = set.len();
    let d = set.d();
    let r = cfg.kyfan_rank(d);
    let per_mass = t.feasibility_scale * cfg.c * cfg.c * sigma_hat * sigma_hat / cfg.alpha;
    let mass_floor = t.feasibility_mass * cfg.alpha * n as f64;
    let init_radius = t.feasibility_init_radius * cfg.unit() * sigma_hat;

    let centered: Vec<Vec<f64>> = set
        .xs()
        .map(|x| x.iter().zip(mu).map(|(a, b)| a - b).collect())
        .collect();
    let r2 = init_radius * init_radius;
    let mut q: Vec<f64> = set
        .xs()
        .map(|x| if sq_dist(x, mu) <= r2 { 1.0 } else { 0.0 })
        .collect();

    let mut outcome = FeasibilityOutcome {
        feasible: false,
        q: Vec::new(),
        norm: f64::NAN,
        bound: f64::NAN,
        mass: 0.0,
        mass_floor,
        iterations: 0,
    };
    for iter in 0..cfg.max_filter_iters {
        let mass: f64 = q.iter().sum();
        outcome.mass = mass;
        outcome.iterations = iter;
        if mass < mass_floor {
            break;
        }
        let mut moment = SquareMatrix::zeros(d);
        for (qi, v) in q.iter().zip(&centered) {
            if *qi > 0.0 {
                moment.add_outer(*qi, v);
            }
        }
        let eig = top_eigen(&moment, r);
        let norm: f64 = eig.values.iter().sum();
        let bound = per_mass * mass;
        outcome.norm = norm;
        outcome.bound = bound;
        if norm <= bound {
            outcome.feasible = true;
            break;
        }
        let proj: Vec<f64> = centered
            .iter()
            .zip(&q)
            .map(|(v, &qi)| {
                if qi > 0.0 {
                    eig.vectors.iter().map(|e| dot(e, v).powi(2)).sum()
                } else {
                    0.0
                }
            })
            .collect();
        let pmax = proj.iter().copied().fold(0.0f64, f64::max);
        if pmax <= 0.0 {
            break;
        }
        for (qi, p) in q.iter_mut().zip(&proj) {
            *qi *= 1.0 - p / pmax;
        }
    }
    if outcome.feasible {
        outcome.q = q;
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::{sample_component, ComponentSpec, Shape};
    use crate::linalg::kyfan_norm;
    use crate::model::LabeledPoint;

    fn set_from(xs: Vec<Vec<f64>>) -> LabeledSet {
        let d = xs[0].len();
        LabeledSet::new(d, 1, xs.into_iter().map(|x| LabeledPoint::new(x, 1)).collect()).unwrap()
    }

    fn assert_constraints(set: &LabeledSet, mu: &[f64], sigma_hat: f64, cfg: &ClusterConfig, out: &FeasibilityOutcome) {
        let d = set.d();
        let mut m = SquareMatrix::zeros(d);
        for (qi, x) in out.q.iter().zip(set.xs()) {
            assert!((0.0..=1.0).contains(qi));
            let v: Vec<f64> = x.iter().zip(mu).map(|(a, b)| a - b).collect();
            m.add_outer(*qi, &v);
        }
        let mass: f64 = out.q.iter().sum();
        let lhs = kyfan_norm(&m, cfg.kyfan_rank(d)).unwrap();
        let rhs = 2.0 * cfg.c * cfg.c * sigma_hat * sigma_hat / cfg.alpha * mass;
        assert!(lhs <= rhs * (1.0 + 1e-9), "{lhs} > {rhs}");
        assert!(mass >= 0.97 * cfg.alpha * set.len() as f64);
    }

    #[test]
    fn all_points_at_mean() {
        let mu = vec![1.0, 2.0];
        let set = set_from(vec![mu.clone(); 50]);
        let cfg = ClusterConfig::new(0.3, 2.0);
        let out = feasibility_check(&set, &mu, 0.1, &cfg).unwrap();
        assert!(out.feasible);
        assert!(out.q.iter().all(|&q| q == 1.0));
        assert_eq!(out.norm, 0.0);
    }

    #[test]
    fn far_shell_is_infeasible() {
        let (alpha, c, sigma_hat) = (0.3, 2.0, 0.1);
        let cfg = ClusterConfig::new(alpha, c);
        let far = 10.0 * c * sigma_hat / f64::sqrt(alpha);
        let mu = vec![0.0, 0.0, 0.0];
        let xs: Vec<Vec<f64>> = (0..200).map(|i| vec![if i % 2 == 0 { far } else { -far }, 0.0, 0.0]).collect();
        // Every point contributes far² = 100 C²σ̂²/α per unit weight against a
        // budget of 2 C²σ̂²/α: a factor 50 on any q.
        let out = feasibility_check(&set_from(xs), &mu, sigma_hat, &cfg).unwrap();
        assert!(!out.feasible);
        assert!(out.q.is_empty());
    }

    #[test]
    fn gaussian_blob_is_feasible() {
        let comp = ComponentSpec::new(vec![0.5; 6], 0.2, Shape::Gaussian).unwrap();
        let set = set_from(sample_component(&comp, 2000, 4).unwrap());
        let cfg = ClusterConfig::new(0.3, 2.0);
        let out = feasibility_check(&set, &comp.mean, 0.2, &cfg).unwrap();
        assert!(out.feasible);
        assert_constraints(&set, &comp.mean, 0.2, &cfg, &out);
    }

    #[test]
    fn feasible_answers_meet_both_constraints_after_filtering() {
        // Blob plus a few distant points inside the initial radius: the filter
        // has to downweight them before the norm constraint holds.
        let comp = ComponentSpec::new(vec![0.0; 4], 0.1, Shape::Gaussian).unwrap();
        let mut xs = sample_component(&comp, 1000, 8).unwrap();
        for i in 0..15 {
            xs.push(vec![5.0 + i as f64 * 0.01, 0.0, 0.0, 0.0]);
        }
        let set = set_from(xs);
        let cfg = ClusterConfig::new(0.5, 2.0);
        let out = feasibility_check(&set, &comp.mean, 0.1, &cfg).unwrap();
        assert!(out.feasible);
        assert!(out.iterations > 0);
        assert_constraints(&set, &comp.mean, 0.1, &cfg, &out);
    }
}
