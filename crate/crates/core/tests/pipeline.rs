use mlc_core::adversary::Strategy;
use mlc_core::harness::{format_csv, run_experiment, run_trial, run_trial_detailed, ExperimentConfig};
use mlc_core::learner::minimize_hinge;

fn tiny() -> ExperimentConfig {
    ExperimentConfig {
        n: 600,
        trials: 1,
        eval_draws: 20_000,
        seed: 2024,
        ..ExperimentConfig::default()
    }
}

#[test]
fn noiseless_instance_is_learned() {
    let r = run_trial(&tiny(), 0).unwrap();
    assert!(!r.fallback);
    assert!(r.err_hat <= 0.05, "err {}", r.err_hat);
    assert_eq!(r.n_pruned, 0);
    assert_eq!(r.clean_retained_frac, 1.0);
}

#[test]
fn golden_tiny_run() {
    // Frozen from the first verified run of this configuration.
    let results = run_experiment(&tiny()).unwrap();
    assert_eq!(results.len(), 1);
    let r = &results[0];
    let reference = 0.0;
    assert!((r.err_hat - reference).abs() <= r.ci_halfwidth.max(1.96 * (0.25f64 / 20_000.0).sqrt()));
    assert_eq!(r.objective, 0.0);
    assert_eq!(r.n_pruned, 0);
}

#[test]
fn transparent_when_nothing_is_pruned() {
    let art = run_trial_detailed(&tiny(), 0).unwrap();
    assert_eq!(art.report.kept.len(), art.corruption.set.len());
    let cfg = tiny().learn_config();
    let direct = minimize_hinge(&art.corruption.set, cfg.gamma, 3, 8, &cfg.opt).unwrap();
    assert_eq!(direct.w, art.w_hat);
    assert!(art.w_hat.norm() <= 1.0 + 1e-9);
}

#[test]
fn fake_cluster_survivors_agree_with_their_cluster() {
    let mut cfg = tiny();
    cfg.n = 3000;
    cfg.eta = 0.01 / 3.0;
    cfg.strategy = Strategy::FakeCluster;
    let art = run_trial_detailed(&cfg, 0).unwrap();
    let gt = &art.ground_truth;
    for c in &art.report.clusters {
        let truth = gt.component_labels[gt.nearest_component(&c.center)];
        assert_eq!(c.label, truth);
        for &i in &c.indices {
            assert_eq!(art.corruption.set.get(i).y, c.label);
        }
    }
    assert!(art.result.err_hat <= 0.05);
}

#[test]
fn negligible_eta_matches_clean_run() {
    let base = tiny();
    let mut tiny_eta = base.clone();
    tiny_eta.eta = 1.0 / (4096.0 * 9.0);
    tiny_eta.strategy = Strategy::FakeCluster;
    let a = run_trial_detailed(&base, 0).unwrap();
    let b = run_trial_detailed(&tiny_eta, 0).unwrap();
    assert_eq!(b.corruption.dirty_count(), 0);
    assert_eq!(a.w_hat, b.w_hat);
    assert_eq!(a.result.err_hat, b.result.err_hat);
}

#[test]
fn csv_is_deterministic() {
    let mut cfg = tiny();
    cfg.trials = 2;
    cfg.eta = 0.01;
    cfg.strategy = Strategy::LabelFlipNearest;
    let a = format_csv(&run_experiment(&cfg).unwrap());
    let b = format_csv(&run_experiment(&cfg).unwrap());
    assert_eq!(a, b);
}
