use super::{filtered_voronoi, voronoi_assign, Candidate, ClusterConfig, DistancePruneRecord, SizePruneRecord};
use crate::error::Result;
use crate::linalg::dist;
use crate::model::LabeledSet;

/// Drops candidates whose Voronoi cell holds fewer than `0.96 α n` points,
/// smallest cell first, re-partitioning after each removal.
pub fn size_prune(cands: &[Candidate], set: &LabeledSet, cfg: &ClusterConfig) -> Vec<Candidate> {
    size_prune_with_records(cands, set, cfg).0
}

pub(crate) fn size_prune_with_records(
    cands: &[Candidate],
    set: &LabeledSet,
    cfg: &ClusterConfig,
) -> (Vec<Candidate>, Vec<SizePruneRecord>) {
    let floor = cfg.thresholds.size_prune * cfg.alpha * set.len() as f64;
    let mut live: Vec<Candidate> = cands.to_vec();
    let mut records = Vec::new();
    while !live.is_empty() {
        let means: Vec<Vec<f64>> = live.iter().map(|c| c.mean.clone()).collect();
        let sizes: Vec<usize> = voronoi_assign(&means, set).iter().map(Vec::len).collect();
        let smallest = (0..live.len())
            .filter(|&j| (sizes[j] as f64) < floor)
            .min_by_key(|&j| (sizes[j], j));
        let Some(j) = smallest else { break };
        records.push(SizePruneRecord {
            mean: live[j].mean.clone(),
            cell_size: sizes[j],
            floor,
        });
        live.remove(j);
    }
    (live, records)
}

/// Removes one member of any pair whose filtered cells have empirical means
/// within `4761 C (σ_a + σ_b)/√α`: the smaller filtered cell goes (ties:
/// larger `emp_sigma`, then later index). The closest pair relative to its
/// threshold is resolved first and cells are recomputed after each removal.
pub fn distance_prune(cands: &[Candidate], set: &LabeledSet, cfg: &ClusterConfig) -> Result<Vec<Candidate>> {
    Ok(distance_prune_with_records(cands, set, cfg)?.0)
}

pub(crate) fn distance_prune_with_records(
    cands: &[Candidate],
    set: &LabeledSet,
    cfg: &ClusterConfig,
) -> Result<(Vec<Candidate>, Vec<DistancePruneRecord>)> {
    let factor = cfg.thresholds.distance_prune * cfg.unit();
    let mut live: Vec<Candidate> = cands.to_vec();
    let mut records = Vec::new();
    while live.len() >= 2 {
        let cells = filtered_voronoi(&live, set, cfg)?;
        // Dropped cells have no statistics; map cells back to candidates by center.
        let stats: Vec<Option<(Vec<f64>, f64, usize)>> = live
            .iter()
            .map(|c| {
                cells
                    .iter()
                    .find(|cell| cell.center == c.mean)
                    .map(|cell| (cell.emp_mean.clone(), cell.emp_sigma, cell.len()))
            })
            .collect();

        let mut worst: Option<(f64, usize, usize, f64, f64)> = None;
        for a in 0..live.len() {
            let Some((ma, sa, _)) = &stats[a] else { continue };
            for b in (a + 1)..live.len() {
                let Some((mb, sb, _)) = &stats[b] else { continue };
                let gap = dist(ma, mb);
                let threshold = factor * (sa + sb);
                if gap <= threshold {
                    let ratio = if threshold > 0.0 { gap / threshold } else { 0.0 };
                    if worst.is_none_or(|w| ratio < w.0) {
                        worst = Some((ratio, a, b, gap, threshold));
                    }
                }
            }
        }
        let Some((_, a, b, gap, threshold)) = worst else { break };
        let (_, sa, na) = stats[a].as_ref().unwrap();
        let (_, sb, nb) = stats[b].as_ref().unwrap();
        // Keep the larger, then tighter, cell.
        let drop_b = match na.cmp(nb) {
            std::cmp::Ordering::Greater => true,
            std::cmp::Ordering::Less => false,
            std::cmp::Ordering::Equal => sb >= sa,
        };
        let (removed, kept) = if drop_b { (b, a) } else { (a, b) };
        records.push(DistancePruneRecord {
            removed: live[removed].mean.clone(),
            kept: live[kept].mean.clone(),
            distance: gap,
            threshold,
        });
        live.remove(removed);
    }
    Ok((live, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::{sample_component, ComponentSpec, Shape};
    use crate::model::LabeledPoint;

    fn blob_set(centers: &[Vec<f64>], sigma: f64, per: usize, seed: u64) -> LabeledSet {
        let mut pts = Vec::new();
        for (j, c) in centers.iter().enumerate() {
            let comp = ComponentSpec::new(c.clone(), sigma, Shape::Gaussian).unwrap();
            for x in sample_component(&comp, per, seed + j as u64).unwrap() {
                pts.push(LabeledPoint::new(x, 1));
            }
        }
        LabeledSet::new(centers[0].len(), 1, pts).unwrap()
    }

    fn cand(mean: Vec<f64>, sigma_hat: f64) -> Candidate {
        Candidate { mean, sigma_hat }
    }

    #[test]
    fn single_candidate_survives_size_prune() {
        let set = blob_set(&[vec![0.0, 0.0]], 0.1, 100, 1);
        let out = size_prune(&[cand(vec![0.0, 0.0], 0.1)], &set, &ClusterConfig::new(0.9, 2.0));
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn tiny_cell_is_pruned() {
        // 99 points near the origin, 1 point (1%) near (10, 0).
        let mut set = blob_set(&[vec![0.0, 0.0]], 0.1, 99, 2);
        let mut pts = set.points().to_vec();
        pts.push(LabeledPoint::new(vec![10.0, 0.0], 1));
        set = LabeledSet::new(2, 1, pts).unwrap();
        let cands = [cand(vec![0.0, 0.0], 0.1), cand(vec![10.0, 0.0], 0.1)];
        let out = size_prune(&cands, &set, &ClusterConfig::new(0.3, 2.0));
        assert_eq!(out, vec![cands[0].clone()]);
    }

    #[test]
    fn spurious_candidates_pruned_one_survivor_per_blob() {
        let centers = vec![vec![0.0, 0.0, 0.0], vec![50.0, 0.0, 0.0], vec![0.0, 50.0, 0.0]];
        let set = blob_set(&centers, 0.1, 300, 7);
        let mut cands: Vec<Candidate> = centers.iter().map(|c| cand(c.clone(), 0.1)).collect();
        // Three spurious candidates around the first blob split its cell.
        for (i, off) in [0.05, -0.05, 0.2].iter().enumerate() {
            let mut m = centers[0].clone();
            m[i % 3] += off;
            cands.push(cand(m, 0.1));
        }
        let cfg = ClusterConfig::new(1.0 / 3.0, 2.0);
        let (out, records) = size_prune_with_records(&cands, &set, &cfg);
        let floor = 0.96 / 3.0 * 900.0;
        for r in &records {
            assert!((r.cell_size as f64) < floor);
        }
        // The final partition has every cell above the floor.
        let means: Vec<Vec<f64>> = out.iter().map(|c| c.mean.clone()).collect();
        assert!(voronoi_assign(&means, &set).iter().all(|c| c.len() as f64 >= floor));
        for c in &centers {
            assert!(out.iter().any(|s| dist(&s.mean, c) < 1.0));
        }
    }

    #[test]
    fn colocated_candidates_collapse() {
        let set = blob_set(&[vec![1.0, 1.0]], 0.1, 200, 3);
        let cands = [cand(vec![1.0, 1.0], 0.1), cand(vec![1.0, 1.0], 0.1)];
        let out = distance_prune(&cands, &set, &ClusterConfig::new(0.3, 2.0)).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn far_tight_cells_are_kept() {
        let sigma = 0.01;
        let cfg = ClusterConfig::new(0.5, 2.0);
        // 4761 * C * (2 * ~0.01) / sqrt(0.5) ≈ 270; put them 1000 apart.
        let centers = vec![vec![0.0, 0.0], vec![1000.0, 0.0]];
        let set = blob_set(&centers, sigma, 200, 5);
        let cands: Vec<Candidate> = centers.iter().map(|c| cand(c.clone(), sigma)).collect();
        let out = distance_prune(&cands, &set, &cfg).unwrap();
        assert_eq!(out.len(), 2);
    }

    #[test]
    fn duplicates_on_one_blob_collapse_to_one() {
        let set = blob_set(&[vec![0.0; 4]], 0.2, 1000, 11);
        let cands: Vec<Candidate> = (0..4)
            .map(|i| {
                let mut m = vec![0.0; 4];
                m[i] = 0.1;
                cand(m, 0.2)
            })
            .collect();
        let cfg = ClusterConfig::new(0.25, 2.0);
        let (out, recs) = distance_prune_with_records(&cands, &set, &cfg).unwrap();
        assert_eq!(out.len(), 1);
        assert_eq!(recs.len(), 3);
    }
}
