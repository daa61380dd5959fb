//! Cluster-pruned multiclass hinge-loss learning.
//!
//! [`learn`] clusters the sample, keeps the majority label inside every
//! cluster, merges clusters by label, and minimizes the summed scaled hinge
//! loss over the unit ball with projected subgradient descent.

use std::fmt::{self, Write as _};

use rayon::prelude::*;

use crate::cluster::{cluster_with_diagnostics, Cluster, ClusterConfig, ClusterDiagnostics};
use crate::error::{Error, Result};
use crate::linalg::norm;
use crate::model::{accumulate_subgradient, hinge_from_scores, LabeledSet, WeightMatrix};

/// Points per block of the objective/subgradient reduction. Blocks are
/// summed in index order, so results do not depend on the thread count.
const REDUCE_BLOCK: usize = 512;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepRule {
    /// `s_t = s0 / √t`; `s0` defaults to `γ / maxᵢ ‖xᵢ‖`.
    InvSqrt { s0: Option<f64> },
    Constant(f64),
}

impl Default for StepRule {
    fn default() -> Self {
        StepRule::InvSqrt { s0: None }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptConfig {
    pub max_iters: usize,
    pub step_rule: StepRule,
    /// An iterate counts as an improvement only if it lowers the best
    /// objective by more than `tolerance · n`.
    pub tolerance: f64,
    /// Stop after this many consecutive non-improving iterations.
    pub patience: usize,
}

impl Default for OptConfig {
    fn default() -> Self {
        Self {
            max_iters: 2000,
            step_rule: StepRule::default(),
            tolerance: 1e-9,
            patience: 300,
        }
    }
}

impl OptConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iters == 0 {
            return Err(Error::invalid("max_iters must be positive"));
        }
        if !(self.tolerance >= 0.0 && self.tolerance.is_finite()) {
            return Err(Error::invalid(format!("tolerance must be >= 0, got {}", self.tolerance)));
        }
        match self.step_rule {
            StepRule::InvSqrt { s0: Some(s) } | StepRule::Constant(s) if !(s > 0.0 && s.is_finite()) => {
                Err(Error::invalid(format!("step size must be positive, got {s}")))
            }
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnConfig {
    pub gamma: f64,
    pub alpha: f64,
    pub cluster_cfg: ClusterConfig,
    pub opt: OptConfig,
}

impl LearnConfig {
    pub fn new(gamma: f64, alpha: f64, c: f64) -> Self {
        Self {
            gamma,
            alpha,
            cluster_cfg: ClusterConfig::new(alpha, c),
            opt: OptConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!("gamma must be positive, got {}", self.gamma)));
        }
        self.opt.validate()
    }
}

/// Result of [`minimize_hinge`].
#[derive(Debug, Clone, PartialEq)]
pub struct HingeSolution {
    /// Best iterate found.
    pub w: WeightMatrix,
    /// `Σ ℓ_γ(w; xᵢ, yᵢ)` at `w`.
    pub objective: f64,
    pub iterations: usize,
    /// Best objective after each iteration.
    pub best_trace: Vec<f64>,
}

/// One cluster after majority-label pruning.
#[derive(Debug, Clone, PartialEq)]
pub struct PrunedCluster {
    pub label: usize,
    /// Candidate mean the cluster formed around.
    pub center: Vec<f64>,
    pub size_before: usize,
    /// Kept indices into the input set, sorted.
    pub indices: Vec<usize>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct LearnReport {
    pub clusters: Vec<PrunedCluster>,
    /// `|𝓑_j|` for `j = 1..=k`.
    pub class_sizes: Vec<usize>,
    /// Indices of `Ŝ` into the input set, sorted.
    pub kept: Vec<usize>,
    pub objective: f64,
    pub iterations: usize,
    pub fallback: bool,
    pub warnings: Vec<String>,
    pub cluster_diagnostics: Option<ClusterDiagnostics>,
}

impl LearnReport {
    pub fn n_kept(&self) -> usize {
        self.kept.len()
    }

    /// Structured-text form: `key = value` lines grouped in sections.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[learn]");
        let _ = writeln!(s, "fallback = {}", self.fallback);
        let _ = writeln!(s, "objective = {:.12e}", self.objective);
        let _ = writeln!(s, "iterations = {}", self.iterations);
        let _ = writeln!(s, "kept = {}", self.kept.len());
        let _ = writeln!(s, "\n[clusters]");
        for (i, c) in self.clusters.iter().enumerate() {
            let _ = writeln!(
                s,
                "cluster {i}: label = {} before = {} after = {}",
                c.label,
                c.size_before,
                c.indices.len()
            );
        }
        let _ = writeln!(s, "\n[classes]");
        for (j, n) in self.class_sizes.iter().enumerate() {
            let _ = writeln!(s, "class {} = {n}", j + 1);
        }
        let _ = writeln!(s, "\n[warnings]");
        for w in &self.warnings {
            let _ = writeln!(s, "{w}");
        }
        if let Some(d) = &self.cluster_diagnostics {
            let _ = writeln!(s, "\n# clustering");
            s.push_str(&d.to_report());
        }
        s
    }
}

impl fmt::Display for LearnReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

fn majority_of(labels: impl Iterator<Item = usize>, k: usize) -> usize {
    let mut counts = vec![0usize; k + 1];
    for y in labels {
        counts[y] += 1;
    }
    // max_by_key keeps the last maximum; scan in reverse so ties go to the smallest label.
    (1..=k).rev().max_by_key(|&y| counts[y]).unwrap_or(1)
}

/// Keeps the points of `cluster` whose label is the cluster's most frequent
/// one (ties: smallest label).
pub fn majority_label_prune(cluster: &Cluster, set: &LabeledSet) -> Cluster {
    let k = set.k();
    let maj = majority_of(cluster.indices.iter().map(|&i| set.get(i).y), k);
    let mut out = cluster.clone();
    out.indices.retain(|&i| set.get(i).y == maj);
    out
}

/// Per-class index sets `𝓑_1..𝓑_k` (sorted), plus a warning for every class
/// no cluster carries.
pub fn merge_by_label(clusters: &[Cluster], set: &LabeledSet, k: usize) -> (Vec<Vec<usize>>, Vec<String>) {
    let mut classes = vec![Vec::new(); k];
    for c in clusters {
        let Some(&first) = c.indices.first() else { continue };
        let y = set.get(first).y;
        classes[y - 1].extend_from_slice(&c.indices);
    }
    let mut warnings = Vec::new();
    for (j, b) in classes.iter_mut().enumerate() {
        b.sort_unstable();
        b.dedup();
        if b.is_empty() {
            warnings.push(format!("class {} has no cluster", j + 1));
        }
    }
    (classes, warnings)
}

/// Summed hinge objective and subgradient at `w`, reduced in fixed order.
fn objective_and_subgradient(set: &LabeledSet, w: &WeightMatrix, gamma: f64) -> Result<(f64, WeightMatrix)> {
    let (k, d) = (w.k(), w.d());
    let blocks: Vec<Result<(f64, WeightMatrix)>> = set
        .points()
        .par_chunks(REDUCE_BLOCK)
        .enumerate()
        .map(|(b, chunk)| {
            let mut g = WeightMatrix::zeros(k, d);
            let mut obj = 0.0;
            for (off, p) in chunk.iter().enumerate() {
                let (value, yhat) = hinge_from_scores(&w.scores(&p.x), p.y, gamma);
                if !value.is_finite() {
                    return Err(Error::NumericFailure {
                        index: b * REDUCE_BLOCK + off,
                        message: format!("hinge loss evaluated to {value}"),
                    });
                }
                obj += value;
                accumulate_subgradient(&mut g, &p.x, p.y, yhat, 1.0 / gamma);
            }
            Ok((obj, g))
        })
        .collect();
    let mut total = 0.0;
    let mut grad = WeightMatrix::zeros(k, d);
    for block in blocks {
        let (obj, g) = block?;
        total += obj;
        for (a, v) in grad.as_flat_mut().iter_mut().zip(g.as_flat()) {
            *a += v;
        }
    }
    Ok((total, grad))
}

/// Summed hinge objective `Σ ℓ_γ(w; xᵢ, yᵢ)`.
pub fn hinge_objective(set: &LabeledSet, w: &WeightMatrix, gamma: f64) -> Result<f64> {
    Ok(objective_and_subgradient(set, w, gamma)?.0)
}

/// Projected subgradient descent on `Σ ℓ_γ` over `‖w‖ ≤ 1`, starting at 0.
/// Returns the best iterate seen.
pub fn minimize_hinge(s_hat: &LabeledSet, gamma: f64, k: usize, d: usize, opt: &OptConfig) -> Result<HingeSolution> {
    if s_hat.is_empty() {
        return Err(Error::invalid("cannot minimize the hinge loss on an empty set"));
    }
    if !(gamma > 0.0 && gamma.is_finite()) {
        return Err(Error::invalid(format!("gamma must be positive, got {gamma}")));
    }
    if s_hat.k() != k || s_hat.d() != d {
        return Err(Error::invalid(format!(
            "set has k={} d={}, expected k={k} d={d}",
            s_hat.k(),
            s_hat.d()
        )));
    }
    opt.validate()?;
    for (i, p) in s_hat.iter().enumerate() {
        if p.x.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericFailure {
                index: i,
                message: "non-finite coordinate".into(),
            });
        }
    }

    let max_norm = s_hat.xs().map(norm).fold(0.0f64, f64::max);
    let step = |t: usize| -> f64 {
        match opt.step_rule {
            StepRule::InvSqrt { s0 } => {
                let s0 = s0.unwrap_or(if max_norm > 0.0 { gamma / max_norm } else { gamma });
                s0 / (t as f64).sqrt()
            }
            StepRule::Constant(s) => s,
        }
    };
    let slack = opt.tolerance * s_hat.len() as f64;

    let mut w = WeightMatrix::zeros(k, d);
    let mut best_w = w.clone();
    let mut best = f64::INFINITY;
    let mut trace = Vec::new();
    let mut stale = 0;
    let mut iterations = 0;
    for t in 1..=opt.max_iters {
        iterations = t;
        let (obj, g) = objective_and_subgradient(s_hat, &w, gamma)?;
        if obj < best {
            if obj < best - slack {
                stale = 0;
            } else {
                stale += 1;
            }
            best = obj;
            best_w = w.clone();
        } else {
            stale += 1;
        }
        trace.push(best);
        if best == 0.0 || stale >= opt.patience {
            break;
        }
        let s = step(t);
        for (a, v) in w.as_flat_mut().iter_mut().zip(g.as_flat()) {
            *a -= s * v;
        }
        w.project_to_ball(1.0);
    }
    Ok(HingeSolution {
        w: best_w,
        objective: best,
        iterations,
        best_trace: trace,
    })
}

/// Cluster, prune to majority labels, merge by label, and minimize the hinge
/// loss on the merged set. Falls back to the raw set when clustering fails
/// or returns nothing.
pub fn learn(set: &LabeledSet, cfg: &LearnConfig) -> Result<(WeightMatrix, LearnReport)> {
    if set.is_empty() {
        return Err(Error::invalid("cannot learn from an empty set"));
    }
    cfg.validate()?;
    let (k, d) = (set.k(), set.d());
    let mut report = LearnReport::default();

    let outcome = match cluster_with_diagnostics(set, &cfg.cluster_cfg) {
        Ok(o) => Some(o),
        Err(e @ Error::NumericFailure { .. }) => return Err(e),
        Err(e) => {
            report.warnings.push(format!("clustering failed: {e}"));
            None
        }
    };
    let clusters: Vec<Cluster> = match outcome {
        Some(o) => {
            let clusters = o.clusters;
            report.cluster_diagnostics = Some(o.diagnostics);
            clusters
        }
        None => Vec::new(),
    };

    if clusters.is_empty() {
        report.fallback = true;
        report.warnings.push("no cluster survived; optimizing on the raw sample".into());
        log::warn!("clustering returned no clusters; falling back to the raw sample");
        report.kept = (0..set.len()).collect();
        let mut sizes = vec![0; k];
        for p in set.iter() {
            sizes[p.y - 1] += 1;
        }
        report.class_sizes = sizes;
        let sol = minimize_hinge(set, cfg.gamma, k, d, &cfg.opt)?;
        report.objective = sol.objective;
        report.iterations = sol.iterations;
        return Ok((sol.w, report));
    }

    let pruned: Vec<Cluster> = clusters.iter().map(|c| majority_label_prune(c, set)).collect();
    for (before, after) in clusters.iter().zip(&pruned) {
        report.clusters.push(PrunedCluster {
            label: after.indices.first().map(|&i| set.get(i).y).unwrap_or(0),
            center: after.center.clone(),
            size_before: before.len(),
            indices: after.indices.clone(),
        });
    }
    let (classes, warnings) = merge_by_label(&pruned, set, k);
    report.warnings.extend(warnings);
    report.class_sizes = classes.iter().map(Vec::len).collect();
    let mut kept: Vec<usize> = classes.into_iter().flatten().collect();
    kept.sort_unstable();
    kept.dedup();

    let s_hat = set.select(&kept);
    let sol = minimize_hinge(&s_hat, cfg.gamma, k, d, &cfg.opt)?;
    report.kept = kept;
    report.objective = sol.objective;
    report.iterations = sol.iterations;
    Ok((sol.w, report))
}
