use mlc_core::adversary::{corrupt, AttackConfig, Strategy};
use mlc_core::cluster::{cluster, cluster_with_diagnostics, top_covariance_eigenvalue, ClusterConfig};
use mlc_core::data_gen::{
    make_ground_truth, make_ground_truth_with, sample_clean_with, sample_component, Allocation, ComponentSpec, Shape,
    TruthParams,
};
use mlc_core::{LabeledPoint, LabeledSet};

const ALPHA: f64 = 1.0 / 3.0;
const C: f64 = 2.0;

#[test]
fn three_components_give_three_clusters() {
    let gt = make_ground_truth(3, 8, 0.5, 0.05, C, ALPHA, 101).unwrap();
    let sample = sample_clean_with(&gt, 3000, 102, Allocation::Proportional).unwrap();
    let cfg = ClusterConfig::new(ALPHA, C);
    let out = cluster_with_diagnostics(&sample.set, &cfg).unwrap();
    assert_eq!(out.clusters.len(), 3, "{}", out.diagnostics.to_report());

    let mut matched = vec![false; 3];
    for cl in &out.clusters {
        let j = gt.nearest_component(&cl.emp_mean);
        assert!(!matched[j]);
        matched[j] = true;
        let own = cl.indices.iter().filter(|&&i| sample.components[i] == j).count();
        let size_j = sample.components.iter().filter(|&&c| c == j).count();
        assert!(own as f64 >= 0.955 * size_j as f64);
        assert!((cl.len() - own) as f64 <= 0.03 * ALPHA * 3000.0);
        assert!(cl.len() as f64 >= 0.92 * ALPHA * 3000.0);
        let top = top_covariance_eigenvalue(&sample.set, &cl.indices);
        assert!(top <= C * C * cl.sigma_hat * cl.sigma_hat * (1.0 + 1e-6));
    }
}

#[test]
fn single_blob_gives_one_cluster() {
    let comp = ComponentSpec::new(vec![1.0, -2.0, 0.5, 3.0, 0.0, 0.0, 1.0, 1.0], 0.1, Shape::Gaussian).unwrap();
    let xs = sample_component(&comp, 1200, 7).unwrap();
    let set = LabeledSet::new(8, 1, xs.into_iter().map(|x| LabeledPoint::new(x, 1)).collect()).unwrap();
    let out = cluster_with_diagnostics(&set, &ClusterConfig::new(0.5, C)).unwrap();
    let clusters = out.clusters;
    assert_eq!(clusters.len(), 1, "{}", out.diagnostics.to_report());
    assert!(clusters[0].len() as f64 >= 0.955 * 1200.0, "{}", out.diagnostics.to_report());
}

#[test]
fn fake_cluster_does_not_split_or_merge_components() {
    let gt = make_ground_truth(3, 8, 0.5, 0.05, C, ALPHA, 201).unwrap();
    let clean = sample_clean_with(&gt, 3000, 202, Allocation::Proportional).unwrap();
    let attack = AttackConfig::new(0.01 * ALPHA, Strategy::FakeCluster, 203).unwrap();
    let dirty = corrupt(&clean.set, &gt, &attack).unwrap();
    let clusters = cluster(&dirty.set, &ClusterConfig::new(ALPHA, C)).unwrap();
    assert_eq!(clusters.len(), 3);
    for cl in &clusters {
        let top = top_covariance_eigenvalue(&dirty.set, &cl.indices);
        assert!(top <= C * C * cl.sigma_hat * cl.sigma_hat * (1.0 + 1e-6));
    }
}

#[test]
fn student_t_components_cluster_too() {
    let mut p = TruthParams::new(3, 8, 0.5, 0.05, C, ALPHA, 301);
    p.shape = Shape::StudentT { nu: 4.0 };
    let gt = make_ground_truth_with(&p).unwrap();
    let sample = sample_clean_with(&gt, 3000, 302, Allocation::Proportional).unwrap();
    let clusters = cluster(&sample.set, &ClusterConfig::new(ALPHA, C)).unwrap();
    assert_eq!(clusters.len(), 3);
}

#[test]
fn too_few_points_is_an_error() {
    let set = LabeledSet::new(1, 1, vec![LabeledPoint::new(vec![0.0], 1), LabeledPoint::new(vec![1.0], 1)]).unwrap();
    assert!(cluster(&set, &ClusterConfig::new(0.1, C)).is_err());
}
