use rayon::prelude::*;

use super::{empirical_moments, Candidate, Cluster, ClusterConfig, VoronoiRecord};
use crate::error::{Error, Result};
use crate::linalg::{dot, sq_dist, top_eigen};
use crate::model::LabeledSet;

/// Nearest-candidate cells (lower candidate index wins ties). Cell `j`
/// lists input indices in increasing order.
pub fn voronoi_assign(means: &[Vec<f64>], set: &LabeledSet) -> Vec<Vec<usize>> {
    let mut cells = vec![Vec::new(); means.len()];
    if means.is_empty() {
        return cells;
    }
    for (i, p) in set.iter().enumerate() {
        let mut best = 0;
        let mut best_d = sq_dist(&means[0], &p.x);
        for (j, m) in means.iter().enumerate().skip(1) {
            let dd = sq_dist(m, &p.x);
            if dd < best_d {
                best = j;
                best_d = dd;
            }
        }
        cells[best].push(i);
    }
    cells
}

/// Removes, one at a time, the point with the largest squared projection on
/// the top covariance eigenvector until the top eigenvalue is at most
/// `bound`. Returns the kept indices, the number removed, the final top
/// eigenvalue, and whether the bound was met.
fn filter_cell(
    set: &LabeledSet,
    mut cell: Vec<usize>,
    bound: f64,
    max_iters: usize,
) -> (Vec<usize>, usize, f64, bool) {
    let mut removed = 0;
    loop {
        if cell.is_empty() {
            return (cell, removed, 0.0, true);
        }
        let (mean, cov) = empirical_moments(set, &cell);
        let eig = top_eigen(&cov, 1);
        let top = eig.values[0].max(0.0);
        if top <= bound {
            return (cell, removed, top, true);
        }
        if removed >= max_iters {
            return (cell, removed, top, false);
        }
        let v = &eig.vectors[0];
        let mut worst = 0;
        let mut worst_p = f64::NEG_INFINITY;
        for (pos, &i) in cell.iter().enumerate() {
            let centered: Vec<f64> = set.get(i).x.iter().zip(&mean).map(|(a, b)| a - b).collect();
            let p = dot(v, &centered).powi(2);
            if p > worst_p {
                worst_p = p;
                worst = pos;
            }
        }
        cell.remove(worst);
        removed += 1;
    }
}

pub fn filtered_voronoi(cands: &[Candidate], set: &LabeledSet, cfg: &ClusterConfig) -> Result<Vec<Cluster>> {
    Ok(filtered_voronoi_with_records(cands, set, cfg)?.0)
}

/// Nearest-candidate partition followed by per-cell covariance filtering
/// down to `C² σ̂²` of the cell's candidate. Cells that empty out, or that
/// hit `max_filter_iters` before meeting the bound, are dropped.
pub fn filtered_voronoi_with_records(
    cands: &[Candidate],
    set: &LabeledSet,
    cfg: &ClusterConfig,
) -> Result<(Vec<Cluster>, Vec<VoronoiRecord>)> {
    if cands.is_empty() {
        return Err(Error::invalid("filtered Voronoi needs at least one candidate"));
    }
    let means: Vec<Vec<f64>> = cands.iter().map(|c| c.mean.clone()).collect();
    let cells = voronoi_assign(&means, set);
    let c2 = cfg.c * cfg.c;
    let filtered: Vec<(Vec<usize>, usize, f64, bool, usize)> = cells
        .into_par_iter()
        .zip(cands.par_iter())
        .map(|(cell, cand)| {
            let initial = cell.len();
            let bound = c2 * cand.sigma_hat * cand.sigma_hat;
            let (kept, removed, top, ok) = filter_cell(set, cell, bound, cfg.max_filter_iters);
            (kept, removed, top, ok, initial)
        })
        .collect();

    let mut clusters = Vec::new();
    let mut records = Vec::with_capacity(cands.len());
    for (j, ((kept, removed, top, ok, initial), cand)) in filtered.into_iter().zip(cands).enumerate() {
        let bound = c2 * cand.sigma_hat * cand.sigma_hat;
        let dropped = kept.is_empty() || !ok;
        if dropped {
            let why = if kept.is_empty() { "filtered to emptiness" } else { "filter iteration cap reached" };
            log::warn!("Voronoi cell {j} dropped: {why}");
        }
        records.push(VoronoiRecord {
            candidate: j,
            initial,
            removed,
            top_eigenvalue: top,
            bound,
            dropped,
        });
        if dropped {
            continue;
        }
        let (emp_mean, _) = empirical_moments(set, &kept);
        clusters.push(Cluster {
            indices: kept,
            center: cand.mean.clone(),
            emp_mean,
            emp_sigma: top.sqrt(),
            sigma_hat: cand.sigma_hat,
        });
    }
    Ok((clusters, records))
}
