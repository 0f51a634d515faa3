use m3p_core::belief::{
    apply_weight_update, negative_information, Belief, GaussianMode, WeightDiagnostics,
};
use m3p_core::uniqueness_graph::{shared_count, UGraphNode, UniquenessGraph};
use m3p_core::world::Pose;
use nalgebra::Matrix3;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const DT: f64 = 0.1;
pub const NORMALIZATION_TOL: f64 = 1e-9;

pub fn diag(n_z: usize, n_pred: usize, n_matched: usize, d2: f64) -> WeightDiagnostics {
    WeightDiagnostics {
        n_z,
        n_pred,
        n_matched,
        d2,
        alpha: 0.0,
        gamma: 1.0,
    }
}

pub fn alpha_cases() {
    assert_eq!(
        negative_information(3, 3, 3, 0.7, DT, 1e-4),
        (0.0, 0.0, 1.0)
    );
    let (alpha, beta, gamma) = negative_information(3, 2, 2, 0.0, DT, 1e-4);
    assert_eq!(alpha, 2.0);
    assert!((beta - DT).abs() < 1e-15);
    assert!((gamma - (-2.0 * DT * 1e-4f64).exp()).abs() < 1e-15);
    // predicted more than observed
    assert_eq!(negative_information(1, 4, 1, 0.0, DT, 1e-4).0, 4.0);
    // equal counts but an incomplete association
    assert_eq!(negative_information(2, 2, 1, 0.0, DT, 1e-4).0, 2.0);
}

pub fn persistent_mismatch_decays_by_gamma_product() {
    for gamma_scale in [1e-4, 0.5, 3.0] {
        let mut b = Belief::new(vec![
            GaussianMode::new(0, Pose::new(0.0, 0.0, 0.0), Matrix3::identity(), 0.5),
            GaussianMode::new(1, Pose::new(1.0, 0.0, 0.0), Matrix3::identity(), 0.5),
        ]);
        let mut beta_sum = 0.0;
        for k in 1..=30 {
            let diags = vec![diag(3, 2, 2, 1.5), diag(3, 3, 3, 1.5)];
            b = apply_weight_update(&b, diags, DT, gamma_scale).0;
            beta_sum += k as f64 * DT;
            let ratio = b.modes[0].weight / b.modes[1].weight;
            let expect = (-2.0 * gamma_scale * beta_sum).exp();
            assert!(
                (ratio - expect).abs() <= 1e-12 * expect.max(1e-300) + 1e-300,
                "step {k}: {ratio} vs {expect}"
            );
            assert!((b.weight_sum() - 1.0).abs() <= NORMALIZATION_TOL);
        }
    }
}

pub fn likelihood_only_update_matches_exponential() {
    let b = Belief::new(vec![
        GaussianMode::new(0, Pose::new(0.0, 0.0, 0.0), Matrix3::identity(), 0.3),
        GaussianMode::new(1, Pose::new(1.0, 0.0, 0.0), Matrix3::identity(), 0.7),
    ]);
    let (out, _) = apply_weight_update(&b, vec![diag(2, 2, 2, 4.0), diag(2, 2, 2, 1.0)], DT, 1e-4);
    let a = 0.3 * (-2.0f64).exp();
    let c = 0.7 * (-0.5f64).exp();
    assert!((out.modes[0].weight - a / (a + c)).abs() < 1e-12);
    assert!((out.modes[1].weight - c / (a + c)).abs() < 1e-12);
}

pub fn worked_edge_weight_example() {
    // {s1, s2, s3} and {s1, s2, s4} share two signatures
    assert_eq!(shared_count(&[1, 2, 3], &[1, 2, 4]), 2);
    let g = UniquenessGraph::from_nodes(vec![
        UGraphNode {
            pose: Pose::new(0.0, 0.0, 0.0),
            signatures: vec![1, 2, 3],
        },
        UGraphNode {
            pose: Pose::new(1.0, 0.0, 0.0),
            signatures: vec![1, 2, 4],
        },
    ]);
    assert_eq!(g.weight(0, 1), 2);
}

/// Chains many random updates on random mixtures; the weights must sum to one
/// after each of them.
pub fn weights_normalized_after_every_update() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    for _ in 0..200 {
        let n = rng.random_range(1..10);
        let raw: Vec<f64> = (0..n).map(|_| rng.random_range(0.01..1.0)).collect();
        let total: f64 = raw.iter().sum();
        let mut b = Belief::new(
            raw.iter()
                .enumerate()
                .map(|(i, w)| {
                    GaussianMode::new(
                        i as u64,
                        Pose::new(i as f64, 0.0, 0.0),
                        Matrix3::identity(),
                        w / total,
                    )
                })
                .collect(),
        );
        let gamma_scale = [1e-4, 0.5, 3.0, 50.0][rng.random_range(0..4)];
        for _ in 0..50 {
            let diags = (0..b.len())
                .map(|_| {
                    let z = rng.random_range(0..6);
                    let p = rng.random_range(0..6);
                    let m = rng.random_range(0..=z.min(p));
                    diag(z, p, m, rng.random_range(0.0..200.0))
                })
                .collect();
            b = apply_weight_update(&b, diags, DT, gamma_scale).0;
            let s = b.weight_sum();
            assert!((s - 1.0).abs() <= NORMALIZATION_TOL, "weights sum to {s}");
        }
    }
}
