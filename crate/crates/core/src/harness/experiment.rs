use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::metrics::measure_error;
use crate::adversary::{corrupt, AttackConfig, Corruption, Strategy};
use crate::data_gen::{make_ground_truth_with, sample_clean_with, GroundTruth};
use crate::error::{Error, Result};
use crate::io::write_text;
use crate::learner::{learn, LearnReport};
use crate::model::{LabeledSet, WeightMatrix};
use crate::rng::{derive_seed, stream};

/// CSV header written by [`format_csv`].
pub const CSV_COLUMNS: &[&str] = &[
    "trial",
    "seed",
    "k",
    "d",
    "n",
    "eta",
    "strategy",
    "gamma",
    "sigma",
    "alpha",
    "C",
    "err_hat",
    "ci_halfwidth",
    "objective",
    "n_pruned",
    "clean_retained_frac",
    "dirty_surviving_frac",
    "fallback",
    "wallclock_ms",
    "in_regime",
];

/// Seeds of one trial. Trial `t` uses `derive_seed(cfg.seed, t)` and every
/// stage draws from its own child of that seed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrialSeeds {
    pub trial: u64,
    pub ground_truth: u64,
    pub clean: u64,
    pub attack: u64,
    pub evaluation: u64,
}

impl TrialSeeds {
    pub fn new(seed: u64, trial: usize) -> Self {
        let t = derive_seed(seed, trial as u64);
        Self {
            trial: t,
            ground_truth: derive_seed(t, stream::GROUND_TRUTH),
            clean: derive_seed(t, stream::CLEAN_SAMPLE),
            attack: derive_seed(t, stream::ATTACK),
            evaluation: derive_seed(t, stream::EVALUATION),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub trial: usize,
    pub seed: u64,
    pub k: usize,
    pub d: usize,
    pub n: usize,
    pub eta: f64,
    pub strategy: Strategy,
    pub gamma: f64,
    pub sigma: f64,
    pub alpha: f64,
    pub c: f64,
    pub err_hat: f64,
    pub ci_halfwidth: f64,
    pub objective: f64,
    pub n_pruned: usize,
    /// Fraction of unreplaced points kept in `Ŝ`.
    pub clean_retained_frac: f64,
    /// Fraction of replaced points kept in `Ŝ` (0 when nothing was replaced).
    pub dirty_surviving_frac: f64,
    pub fallback: bool,
    /// 0 unless timing is enabled.
    pub wallclock_ms: u64,
    pub in_regime: bool,
}

/// Everything one trial produced, for callers that need more than the CSV row.
#[derive(Debug, Clone)]
pub struct TrialArtifacts {
    pub result: TrialResult,
    pub ground_truth: GroundTruth,
    pub corruption: Corruption,
    pub w_hat: WeightMatrix,
    pub report: LearnReport,
}

/// Ground truth and corrupted sample of trial `trial`.
pub fn trial_data(cfg: &ExperimentConfig, trial: usize) -> Result<(GroundTruth, LabeledSet, Corruption)> {
    let seeds = TrialSeeds::new(cfg.seed, trial);
    let gt = make_ground_truth_with(&cfg.truth_params(seeds.ground_truth))?;
    let clean = sample_clean_with(&gt, cfg.n, seeds.clean, cfg.allocation)?.set;
    let attack = AttackConfig::new(cfg.eta, cfg.strategy, seeds.attack)?;
    let corruption = corrupt(&clean, &gt, &attack)?;
    Ok((gt, clean, corruption))
}

/// Generate, corrupt, learn, and measure one trial.
pub fn run_trial_detailed(cfg: &ExperimentConfig, trial: usize) -> Result<TrialArtifacts> {
    let wrap = |e: Error| Error::Trial {
        trial,
        source: Box::new(e),
    };
    let start = Instant::now();
    let seeds = TrialSeeds::new(cfg.seed, trial);
    let (gt, _, corruption) = trial_data(cfg, trial).map_err(wrap)?;
    let (w_hat, report) = learn(&corruption.set, &cfg.learn_config()).map_err(wrap)?;
    let est = measure_error(&w_hat, &gt, cfg.eval_draws, seeds.evaluation).map_err(wrap)?;

    let n = corruption.set.len();
    let dirty = corruption.dirty_count();
    let clean = n - dirty;
    let kept_dirty = report.kept.iter().filter(|&&i| corruption.dirty_mask[i]).count();
    let kept_clean = report.kept.len() - kept_dirty;
    let frac = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let result = TrialResult {
        trial,
        seed: seeds.trial,
        k: cfg.k,
        d: cfg.d,
        n: cfg.n,
        eta: cfg.eta,
        strategy: cfg.strategy,
        gamma: cfg.gamma,
        sigma: cfg.sigma,
        alpha: cfg.alpha,
        c: cfg.c,
        err_hat: est.err,
        ci_halfwidth: est.ci_halfwidth,
        objective: report.objective,
        n_pruned: n - report.kept.len(),
        clean_retained_frac: frac(kept_clean, clean),
        dirty_surviving_frac: frac(kept_dirty, dirty),
        fallback: report.fallback,
        wallclock_ms: if cfg.timing { start.elapsed().as_millis() as u64 } else { 0 },
        in_regime: cfg.regime_violations().is_empty(),
    };
    Ok(TrialArtifacts {
        result,
        ground_truth: gt,
        corruption,
        w_hat,
        report,
    })
}

pub fn run_trial(cfg: &ExperimentConfig, trial: usize) -> Result<TrialResult> {
    Ok(run_trial_detailed(cfg, trial)?.result)
}

fn with_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if threads == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::invalid(format!("cannot build a pool of {threads} threads: {e}")))?;
    Ok(pool.install(f))
}

fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    (0..cfg.trials).into_par_iter().map(|t| run_trial(cfg, t)).collect()
}

/// Runs `cfg.trials` trials in parallel and returns them in trial order.
/// Writes the CSV to `cfg.output` when set.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    for w in cfg.regime_violations() {
        log::warn!("outside the guaranteed regime: {w}");
    }
    let results = with_pool(cfg.threads, || run_trials(cfg))??;
    if let Some(path) = &cfg.output {
        write_csv(path, &results)?;
    }
    Ok(results)
}

/// Configurations of a sweep: the cartesian product of `sweep_eta`,
/// `sweep_n`, `sweep_gamma` and `sweep_strategy` (empty lists keep the base
/// value), ordered with eta outermost.
pub fn sweep_configs(cfg: &ExperimentConfig) -> Vec<ExperimentConfig> {
    let or_base = |v: &[f64], base: f64| if v.is_empty() { vec![base] } else { v.to_vec() };
    let etas = or_base(&cfg.sweep_eta, cfg.eta);
    let gammas = or_base(&cfg.sweep_gamma, cfg.gamma);
    let ns = if cfg.sweep_n.is_empty() { vec![cfg.n] } else { cfg.sweep_n.clone() };
    let strategies = if cfg.sweep_strategy.is_empty() {
        vec![cfg.strategy]
    } else {
        cfg.sweep_strategy.clone()
    };
    let mut out = Vec::new();
    for &eta in &etas {
        for &n in &ns {
            for &gamma in &gammas {
                for &strategy in &strategies {
                    let mut c = cfg.clone();
                    c.eta = eta;
                    c.n = n;
                    c.gamma = gamma;
                    c.strategy = strategy;
                    c.sweep_eta.clear();
                    c.sweep_n.clear();
                    c.sweep_gamma.clear();
                    c.sweep_strategy.clear();
                    c.output = None;
                    out.push(c);
                }
            }
        }
    }
    out
}

/// Runs every sweep point with the same trial seeds; rows are grouped by
/// sweep point in [`sweep_configs`] order.
pub fn sweep(cfg: &ExperimentConfig) -> Result<Vec<TrialResult>> {
    cfg.validate()?;
    let points = sweep_configs(cfg);
    for p in &points {
        for w in p.regime_violations() {
            log::warn!("sweep point eta={} n={} gamma={}: outside the guaranteed regime: {w}", p.eta, p.n, p.gamma);
        }
    }
    let groups = with_pool(cfg.threads, || {
        points.par_iter().map(run_trials).collect::<Result<Vec<_>>>()
    })??;
    let results: Vec<TrialResult> = groups.into_iter().flatten().collect();
    if let Some(path) = &cfg.output {
        write_csv(path, &results)?;
    }
    Ok(results)
}

pub fn format_csv(results: &[TrialResult]) -> String {
    let mut s = CSV_COLUMNS.join(",");
    s.push('\n');
    for r in results {
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.trial,
            r.seed,
            r.k,
            r.d,
            r.n,
            r.eta,
            r.strategy,
            r.gamma,
            r.sigma,
            r.alpha,
            r.c,
            r.err_hat,
            r.ci_halfwidth,
            r.objective,
            r.n_pruned,
            r.clean_retained_frac,
            r.dirty_surviving_frac,
            r.fallback,
            r.wallclock_ms,
            r.in_regime
        );
    }
    s
}

pub fn write_csv(path: &Path, results: &[TrialResult]) -> Result<()> {
    write_text(path, &format_csv(results))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> ExperimentConfig {
        ExperimentConfig {
            n: 300,
            d: 4,
            trials: 2,
            eval_draws: 2000,
            seed: 17,
            ..ExperimentConfig::default()
        }
    }

    #[test]
    fn seeds_differ_per_trial_and_stream() {
        let a = TrialSeeds::new(1, 0);
        let b = TrialSeeds::new(1, 1);
        assert_ne!(a.trial, b.trial);
        assert_ne!(a.clean, a.attack);
        assert_eq!(a, TrialSeeds::new(1, 0));
    }

    #[test]
    fn tiny_run_produces_one_row_per_trial() {
        let cfg = tiny();
        let results = run_experiment(&cfg).unwrap();
        assert_eq!(results.len(), 2);
        for (t, r) in results.iter().enumerate() {
            assert_eq!(r.trial, t);
            assert!((0.0..=1.0).contains(&r.err_hat));
            assert!(!r.fallback);
            assert_eq!(r.wallclock_ms, 0);
        }
        let csv = format_csv(&results);
        assert_eq!(csv.lines().count(), 3);
        assert_eq!(csv.lines().next().unwrap().split(',').count(), CSV_COLUMNS.len());
    }

    #[test]
    fn csv_is_reproducible_across_thread_counts() {
        let mut cfg = tiny();
        cfg.eta = 0.02;
        cfg.strategy = Strategy::RandomReplace;
        cfg.threads = 1;
        let one = format_csv(&run_experiment(&cfg).unwrap());
        cfg.threads = 4;
        let four = format_csv(&run_experiment(&cfg).unwrap());
        assert_eq!(one, four);
    }

    #[test]
    fn sweep_groups_by_eta() {
        let mut cfg = tiny();
        cfg.trials = 1;
        cfg.strategy = Strategy::RandomReplace;
        cfg.sweep_eta = vec![0.0, 0.01, 0.02, 0.05];
        let results = sweep(&cfg).unwrap();
        assert_eq!(results.len(), 4);
        let etas: Vec<f64> = results.iter().map(|r| r.eta).collect();
        assert_eq!(etas, vec![0.0, 0.01, 0.02, 0.05]);
        assert!(results.iter().all(|r| r.strategy == Strategy::RandomReplace));
        assert_eq!(sweep_configs(&cfg).len(), 4);
    }

    #[test]
    fn failing_trial_is_wrapped_with_its_index() {
        let mut cfg = tiny();
        cfg.d = 2;
        match run_experiment(&cfg) {
            Err(e @ Error::Trial { trial: 0, .. }) => assert_eq!(e.exit_code(), 2),
            other => panic!("unexpected {other:?}"),
        }
    }
}
