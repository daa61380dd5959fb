use std::fmt::Write as _;

/// One feasibility test run during admission.
#[derive(Debug, Clone, PartialEq)]
pub struct FeasibilityRecord {
    pub sigma_hat: f64,
    /// Index into the candidate-mean union.
    pub candidate: usize,
    pub feasible: bool,
    pub norm: f64,
    pub bound: f64,
    pub mass: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SizePruneRecord {
    pub mean: Vec<f64>,
    pub cell_size: usize,
    pub floor: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistancePruneRecord {
    pub removed: Vec<f64>,
    pub kept: Vec<f64>,
    /// Distance between the two filtered-cell means.
    pub distance: f64,
    pub threshold: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct VoronoiRecord {
    /// Index into the survivor list.
    pub candidate: usize,
    pub initial: usize,
    pub removed: usize,
    pub top_eigenvalue: f64,
    pub bound: f64,
    pub dropped: bool,
}

/// What every step of the clustering pipeline did.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ClusterDiagnostics {
    pub stdevs: Vec<f64>,
    pub candidate_means: usize,
    pub feasibility: Vec<FeasibilityRecord>,
    /// `(mean, σ̂)` of every admitted candidate, in admission order.
    pub admitted: Vec<(Vec<f64>, f64)>,
    pub size_prune: Vec<SizePruneRecord>,
    pub distance_prune: Vec<DistancePruneRecord>,
    pub survivors: usize,
    pub voronoi: Vec<VoronoiRecord>,
    /// Sizes of cells dropped by the final floor.
    pub dropped_small: Vec<usize>,
    /// Sizes of returned clusters.
    pub clusters: Vec<usize>,
    pub warnings: Vec<String>,
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().take(4).map(|x| format!("{x:.4}")).collect();
    let tail = if v.len() > 4 { ", ..." } else { "" };
    format!("[{}{tail}]", parts.join(", "))
}

impl ClusterDiagnostics {
    /// Plain-text report, one section per pipeline step.
    pub fn to_report(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "[scales]");
        let _ = writeln!(s, "count = {}", self.stdevs.len());
        let _ = writeln!(
            s,
            "values = {}",
            self.stdevs.iter().map(|v| format!("{v:.6e}")).collect::<Vec<_>>().join(" ")
        );

        let _ = writeln!(s, "\n[candidate_means]");
        let _ = writeln!(s, "count = {}", self.candidate_means);

        let _ = writeln!(s, "\n[feasibility]");
        let tested = self.feasibility.len();
        let passed = self.feasibility.iter().filter(|r| r.feasible).count();
        let _ = writeln!(s, "tested = {tested}");
        let _ = writeln!(s, "feasible = {passed}");
        for r in &self.feasibility {
            let _ = writeln!(
                s,
                "sigma={:.4e} candidate={} feasible={} norm={:.4e} bound={:.4e} mass={:.1} iters={}",
                r.sigma_hat, r.candidate, r.feasible, r.norm, r.bound, r.mass, r.iterations
            );
        }

        let _ = writeln!(s, "\n[admitted]");
        let _ = writeln!(s, "count = {}", self.admitted.len());
        for (m, sig) in &self.admitted {
            let _ = writeln!(s, "sigma={sig:.4e} mean={}", fmt_vec(m));
        }

        let _ = writeln!(s, "\n[size_prune]");
        let _ = writeln!(s, "removed = {}", self.size_prune.len());
        for r in &self.size_prune {
            let _ = writeln!(s, "cell={} floor={:.1} mean={}", r.cell_size, r.floor, fmt_vec(&r.mean));
        }

        let _ = writeln!(s, "\n[distance_prune]");
        let _ = writeln!(s, "removed = {}", self.distance_prune.len());
        for r in &self.distance_prune {
            let _ = writeln!(
                s,
                "distance={:.4e} threshold={:.4e} removed={} kept={}",
                r.distance,
                r.threshold,
                fmt_vec(&r.removed),
                fmt_vec(&r.kept)
            );
        }
        let _ = writeln!(s, "survivors = {}", self.survivors);

        let _ = writeln!(s, "\n[voronoi]");
        for r in &self.voronoi {
            let _ = writeln!(
                s,
                "cell={} initial={} removed={} top_eig={:.4e} bound={:.4e} dropped={}",
                r.candidate, r.initial, r.removed, r.top_eigenvalue, r.bound, r.dropped
            );
        }
        if !self.dropped_small.is_empty() {
            let _ = writeln!(s, "dropped_small = {:?}", self.dropped_small);
        }

        let _ = writeln!(s, "\n[clusters]");
        let _ = writeln!(s, "sizes = {:?}", self.clusters);

        let _ = writeln!(s, "\n[warnings]");
        for w in &self.warnings {
            let _ = writeln!(s, "{w}");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn report_has_every_section() {
        let mut d = ClusterDiagnostics {
            stdevs: vec![0.1, 0.2],
            clusters: vec![10, 12],
            ..Default::default()
        };
        d.warnings.push("something".into());
        let r = d.to_report();
        for sec in [
            "[scales]",
            "[candidate_means]",
            "[feasibility]",
            "[admitted]",
            "[size_prune]",
            "[distance_prune]",
            "[voronoi]",
            "[clusters]",
            "[warnings]",
        ] {
            assert!(r.contains(sec), "missing {sec}");
        }
        assert!(r.contains("sizes = [10, 12]"));
    }
}
