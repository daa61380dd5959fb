use rayon::prelude::*;

use crate::data_gen::{sample_clean, GroundTruth};
use crate::error::{Error, Result};
use crate::model::{pancake_contains_unchecked, LabeledSet, WeightMatrix};

/// Monte-Carlo disagreement rate with a 95% Wald half-width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErrorEstimate {
    pub err: f64,
    pub ci_halfwidth: f64,
    pub draws: usize,
}

/// Fraction of `m` fresh clean draws on which `w_hat` and `w*` predict
/// different labels.
pub fn measure_error(w_hat: &WeightMatrix, gt: &GroundTruth, m: usize, seed: u64) -> Result<ErrorEstimate> {
    if m == 0 {
        return Err(Error::invalid("error estimate needs at least one draw"));
    }
    if w_hat.k() != gt.k() || w_hat.d() != gt.d() {
        return Err(Error::invalid(format!(
            "model is {}x{}, ground truth is {}x{}",
            w_hat.k(),
            w_hat.d(),
            gt.k(),
            gt.d()
        )));
    }
    let sample = sample_clean(gt, m, seed)?;
    // Clean labels are the w*-predictions by construction.
    let wrong = sample
        .set
        .points()
        .par_iter()
        .filter(|p| argmax(&w_hat.scores(&p.x)) != p.y)
        .count();
    let err = wrong as f64 / m as f64;
    Ok(ErrorEstimate {
        err,
        ci_halfwidth: 1.96 * (err * (1.0 - err) / m as f64).sqrt(),
        draws: m,
    })
}

/// 1-based argmax, ties to the smallest label.
fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if *s > scores[best] {
            best = i;
        }
    }
    best + 1
}

#[derive(Debug, Clone, PartialEq)]
pub struct PancakeDensity {
    /// Fraction of the reference sample inside each center's pancake.
    pub rho_hat: Vec<f64>,
    /// Fraction of centers with `rho_hat < rho`.
    pub beta_hat: f64,
}

/// Empirical pancake masses of `centers` against `s_ref`.
pub fn pancake_density(
    s_ref: &LabeledSet,
    w: &WeightMatrix,
    tau: f64,
    centers: &LabeledSet,
    rho: f64,
) -> Result<PancakeDensity> {
    if !(tau >= 0.0) {
        return Err(Error::invalid(format!("tau must be non-negative, got {tau}")));
    }
    if s_ref.is_empty() {
        return Err(Error::invalid("reference sample is empty"));
    }
    if s_ref.d() != w.d() || centers.d() != w.d() {
        return Err(Error::invalid("dimension mismatch between model and samples"));
    }
    let n = s_ref.len() as f64;
    let rho_hat: Vec<f64> = centers
        .points()
        .par_iter()
        .map(|c| s_ref.iter().filter(|p| pancake_contains_unchecked(w, tau, c, p)).count() as f64 / n)
        .collect();
    let below = rho_hat.iter().filter(|&&r| r < rho).count();
    let beta_hat = if rho_hat.is_empty() { 0.0 } else { below as f64 / rho_hat.len() as f64 };
    Ok(PancakeDensity { rho_hat, beta_hat })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data_gen::{make_ground_truth, sample_clean_with, Allocation};

    #[test]
    fn truth_has_zero_error_and_negation_has_full_error() {
        let gt = make_ground_truth(2, 4, 0.5, 0.05, 2.0, 0.5, 1).unwrap();
        let e = measure_error(&gt.wstar, &gt, 5000, 2).unwrap();
        assert_eq!(e.err, 0.0);
        assert_eq!(e.ci_halfwidth, 0.0);
        let neg = measure_error(&gt.wstar.scaled(-1.0), &gt, 5000, 2).unwrap();
        assert!((1.0 - neg.err) <= neg.ci_halfwidth.max(1e-12), "{neg:?}");
    }

    #[test]
    fn half_width_bound() {
        let gt = make_ground_truth(3, 4, 0.5, 0.05, 2.0, 1.0 / 3.0, 5).unwrap();
        let w = WeightMatrix::from_rows(vec![
            vec![0.0, 1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0, 0.0],
            vec![0.0, 0.0, 1.0, 0.0],
        ])
        .unwrap();
        for m in [1, 10, 1000] {
            let e = measure_error(&w, &gt, m, 6).unwrap();
            assert!((0.0..=1.0).contains(&e.err));
            assert!(e.ci_halfwidth <= 1.96 * (0.25 / m as f64).sqrt() + 1e-15);
        }
        assert!(measure_error(&w, &gt, 0, 6).is_err());
    }

    #[test]
    fn huge_tau_gives_label_frequency() {
        let gt = make_ground_truth(3, 4, 0.5, 0.05, 2.0, 1.0 / 3.0, 7).unwrap();
        let s = sample_clean_with(&gt, 300, 8, Allocation::Iid).unwrap().set;
        let dens = pancake_density(&s, &gt.wstar, 1e12, &s, 0.0).unwrap();
        let mut freq = [0.0; 4];
        for p in s.iter() {
            freq[p.y] += 1.0 / 300.0;
        }
        for (r, p) in dens.rho_hat.iter().zip(s.iter()) {
            assert!((r - freq[p.y]).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_tau_counts_only_the_center() {
        let gt = make_ground_truth(3, 4, 0.5, 0.05, 2.0, 1.0 / 3.0, 9).unwrap();
        let s = sample_clean_with(&gt, 200, 10, Allocation::Iid).unwrap().set;
        let dens = pancake_density(&s, &gt.wstar, 0.0, &s, 0.5).unwrap();
        assert!(dens.rho_hat.iter().all(|&r| (r - 1.0 / 200.0).abs() < 1e-15));
        assert_eq!(dens.beta_hat, 1.0);
        assert!(pancake_density(&s, &gt.wstar, -1.0, &s, 0.5).is_err());
    }
}
