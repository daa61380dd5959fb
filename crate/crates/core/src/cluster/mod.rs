//! Robust clustering of a corrupted sample under bounded covariance.
//!
//! Pipeline: candidate scales → candidate means → scale-by-scale admission
//! through a convex feasibility test → size-based pruning → distance-based
//! pruning → filtered Voronoi partition. Every step is deterministic given
//! the input order and the configuration.

mod candidates;
mod diagnostics;
mod feasibility;
mod prune;
mod voronoi;

pub use candidates::{candidate_means, candidate_stdevs, NeighborhoodMeans};
pub use diagnostics::{
    ClusterDiagnostics, DistancePruneRecord, FeasibilityRecord, SizePruneRecord, VoronoiRecord,
};
pub use feasibility::{feasibility_check, FeasibilityOutcome};
pub use prune::{distance_prune, size_prune};
pub use voronoi::{filtered_voronoi, filtered_voronoi_with_records, voronoi_assign};

pub use crate::linalg::kyfan_norm;

use crate::error::{Error, Result};
use crate::linalg::{dist, SquareMatrix};
use crate::model::LabeledSet;

/// Numeric thresholds of the clustering pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct Thresholds {
    /// A mean is only tested if it is farther than `admission · C σ̂/√α`
    /// from every admitted mean.
    pub admission: f64,
    /// Feasibility mass floor, as a multiple of `α n`.
    pub feasibility_mass: f64,
    /// Feasibility norm bound `feasibility_scale · C² σ̂² / α` per unit mass.
    pub feasibility_scale: f64,
    /// Initial feasibility support radius, in units of `C σ̂/√α`.
    pub feasibility_init_radius: f64,
    /// Size-prune floor, as a multiple of `α n`.
    pub size_prune: f64,
    /// Distance-prune threshold factor on `C (σ_a + σ_b)/√α`.
    pub distance_prune: f64,
    /// Pairwise separation between returned clusters that the theory
    /// promises, on `C (σ_a + σ_b)/√α`. Reported only.
    pub surviving_separation: f64,
    /// Smallest returned cluster, as a multiple of `α n`.
    pub min_cluster: f64,
    /// Neighborhood size of the candidate-mean generator, multiple of `α n`.
    pub neighborhood_frac: f64,
    /// Candidate list cap `⌈candidate_cap / α⌉`.
    pub candidate_cap: f64,
    pub stdev_subsample: usize,
    pub mean_subsample: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            admission: 99.0,
            feasibility_mass: 0.97,
            feasibility_scale: 2.0,
            feasibility_init_radius: 200.0,
            size_prune: 0.96,
            distance_prune: 4761.0,
            surviving_separation: 366.0,
            min_cluster: 0.92,
            neighborhood_frac: 0.9,
            candidate_cap: 4.0,
            stdev_subsample: 2000,
            mean_subsample: 4000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterConfig {
    /// Known lower bound on the mixing weights.
    pub alpha: f64,
    pub c: f64,
    pub max_filter_iters: usize,
    /// Upper bound on the Ky Fan rank `⌈1/α⌉`.
    pub kyfan_rank_cap: usize,
    pub thresholds: Thresholds,
}

impl ClusterConfig {
    pub fn new(alpha: f64, c: f64) -> Self {
        Self {
            alpha,
            c,
            max_filter_iters: 5000,
            kyfan_rank_cap: usize::MAX,
            thresholds: Thresholds::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::invalid(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if !(self.c >= 1.0 && self.c.is_finite()) {
            return Err(Error::invalid(format!("C must be >= 1, got {}", self.c)));
        }
        if self.max_filter_iters == 0 || self.kyfan_rank_cap == 0 {
            return Err(Error::invalid("max_filter_iters and kyfan_rank_cap must be positive"));
        }
        Ok(())
    }

    /// `C / √α`, the unit most radii are expressed in.
    pub(crate) fn unit(&self) -> f64 {
        self.c / self.alpha.sqrt()
    }

    /// Ky Fan rank `min(⌈1/α⌉, d, cap)`.
    pub fn kyfan_rank(&self, d: usize) -> usize {
        ceil_guarded(1.0 / self.alpha).min(d).min(self.kyfan_rank_cap).max(1)
    }

    pub fn candidate_cap(&self) -> usize {
        ceil_guarded(self.thresholds.candidate_cap / self.alpha).max(1)
    }
}

/// `⌈x⌉` that ignores rounding noise just above an integer (`1/(1/3)`).
pub(crate) fn ceil_guarded(x: f64) -> usize {
    let r = x.round();
    if (x - r).abs() <= 1e-9 * r.abs().max(1.0) {
        r as usize
    } else {
        x.ceil() as usize
    }
}

/// A candidate mean together with the scale that admitted it.
#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub mean: Vec<f64>,
    pub sigma_hat: f64,
}

/// Ordered candidate lists produced by the pipeline.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CandidateList {
    /// Candidate scales, strictly increasing.
    pub stdevs: Vec<f64>,
    /// Union of candidate means over all scales.
    pub means: Vec<Vec<f64>>,
    /// Admitted candidates after the feasibility step.
    pub admitted: Vec<Candidate>,
    /// Candidates left after size and distance pruning.
    pub survivors: Vec<Candidate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Cluster {
    /// Sorted indices into the input set.
    pub indices: Vec<usize>,
    /// Candidate mean this cell belongs to.
    pub center: Vec<f64>,
    pub emp_mean: Vec<f64>,
    /// Square root of the top eigenvalue of the empirical covariance.
    pub emp_sigma: f64,
    /// Scale recorded for the candidate; the filter bound is `C² σ̂²`.
    pub sigma_hat: f64,
}

impl Cluster {
    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn top_eigenvalue(&self) -> f64 {
        self.emp_sigma * self.emp_sigma
    }
}

/// Empirical mean and covariance (about that mean) of the selected rows.
pub fn empirical_moments(set: &LabeledSet, indices: &[usize]) -> (Vec<f64>, SquareMatrix) {
    let d = set.d();
    let mean = crate::linalg::mean_of(indices.iter().map(|&i| set.get(i).x.as_slice()), d);
    let mut cov = SquareMatrix::zeros(d);
    let mut centered = vec![0.0; d];
    for &i in indices {
        for (c, (x, m)) in centered.iter_mut().zip(set.get(i).x.iter().zip(&mean)) {
            *c = x - m;
        }
        cov.add_outer(1.0, &centered);
    }
    cov.scale(1.0 / indices.len() as f64);
    (mean, cov)
}

/// Top eigenvalue of the empirical covariance of the selected rows.
pub fn top_covariance_eigenvalue(set: &LabeledSet, indices: &[usize]) -> f64 {
    let (_, cov) = empirical_moments(set, indices);
    crate::linalg::top_eigen(&cov, 1).values[0].max(0.0)
}

/// Output of [`cluster_with_diagnostics`].
#[derive(Debug, Clone)]
pub struct ClusterOutcome {
    pub clusters: Vec<Cluster>,
    pub candidates: CandidateList,
    pub diagnostics: ClusterDiagnostics,
}

/// Full clustering pipeline; see [`cluster_with_diagnostics`].
pub fn cluster(set: &LabeledSet, cfg: &ClusterConfig) -> Result<Vec<Cluster>> {
    Ok(cluster_with_diagnostics(set, cfg)?.clusters)
}

pub fn cluster_with_diagnostics(set: &LabeledSet, cfg: &ClusterConfig) -> Result<ClusterOutcome> {
    cfg.validate()?;
    let n = set.len();
    if (n as f64) < 1.0 / cfg.alpha {
        return Err(Error::invalid(format!(
            "clustering needs at least 1/alpha = {:.1} points, got {n}",
            1.0 / cfg.alpha
        )));
    }
    let t = &cfg.thresholds;
    let mut diag = ClusterDiagnostics::default();

    // Scales.
    let stdevs = candidate_stdevs(set, cfg)?;

    // Candidate means for every scale, merged by source neighborhood.
    let hoods = NeighborhoodMeans::compute(set, cfg);
    let mut seen = vec![false; hoods.len()];
    let mut union: Vec<usize> = Vec::new();
    for &s in &stdevs {
        for id in hoods.dedup(s, cfg) {
            if !seen[id] {
                seen[id] = true;
                union.push(id);
            }
        }
    }
    let means: Vec<Vec<f64>> = union.iter().map(|&id| hoods.mean(id).to_vec()).collect();

    // Scale-by-scale admission.
    let mut admitted: Vec<Candidate> = Vec::new();
    for &s in &stdevs {
        let block = t.admission * cfg.unit() * s;
        for (ci, mu) in means.iter().enumerate() {
            if admitted.iter().any(|a| dist(&a.mean, mu) <= block) {
                continue;
            }
            let outcome = feasibility_check(set, mu, s, cfg)?;
            diag.feasibility.push(FeasibilityRecord {
                sigma_hat: s,
                candidate: ci,
                feasible: outcome.feasible,
                norm: outcome.norm,
                bound: outcome.bound,
                mass: outcome.mass,
                iterations: outcome.iterations,
            });
            if outcome.feasible {
                admitted.push(Candidate {
                    mean: mu.clone(),
                    sigma_hat: s,
                });
            }
        }
    }

    // Size-based pruning.
    let (after_size, size_records) = prune::size_prune_with_records(&admitted, set, cfg);
    diag.size_prune = size_records;

    // Distance-based pruning.
    let (survivors, dist_records) = prune::distance_prune_with_records(&after_size, set, cfg)?;
    diag.distance_prune = dist_records;

    // Filtered Voronoi partition, then the size floor on the output.
    let mut clusters = Vec::new();
    if !survivors.is_empty() {
        let (cells, records) = filtered_voronoi_with_records(&survivors, set, cfg)?;
        diag.voronoi = records;
        let floor = t.min_cluster * cfg.alpha * n as f64;
        for cell in cells {
            if (cell.len() as f64) < floor {
                diag.warnings.push(format!(
                    "dropped cluster of {} points below floor {floor:.1}",
                    cell.len()
                ));
                diag.dropped_small.push(cell.len());
            } else {
                clusters.push(cell);
            }
        }
    }
    if clusters.is_empty() {
        diag.warnings.push("no cluster survived".to_string());
        log::warn!("clustering returned no clusters");
    }

    for a in 0..clusters.len() {
        for b in (a + 1)..clusters.len() {
            let gap = dist(&clusters[a].emp_mean, &clusters[b].emp_mean);
            let need = t.surviving_separation * cfg.unit() * (clusters[a].emp_sigma + clusters[b].emp_sigma);
            if gap <= need {
                diag.warnings.push(format!(
                    "clusters {a} and {b} are {gap:.4e} apart, below the {need:.4e} separation"
                ));
            }
        }
    }

    diag.stdevs = stdevs.clone();
    diag.candidate_means = means.len();
    diag.admitted = admitted.iter().map(|c| (c.mean.clone(), c.sigma_hat)).collect();
    diag.survivors = survivors.len();
    diag.clusters = clusters.iter().map(|c| c.len()).collect();

    Ok(ClusterOutcome {
        clusters,
        candidates: CandidateList {
            stdevs,
            means,
            admitted,
            survivors,
        },
        diagnostics: diag,
    })
}
