use proptest::prelude::*;
use topomine::theory::{
    three_cluster_f, two_cluster_f, two_cluster_gain_at, two_cluster_w_at, AlphaSystem,
    ThreeClusterParams, TwoClusterParams,
};

/// Wastage written from its definition: blocks lost per phase over blocks
/// mined per phase by the dominant cluster.
fn wastage_reference(p: f64) -> f64 {
    let q = 1.0 - p;
    let d = p * p + q * q;
    let kept = p / q + 2.0 * p * p * q / (d * d);
    let lost = 2.0 * q.powi(3) / (d * d);
    lost / (kept + lost)
}

#[test]
fn wastage_strictly_decreasing_on_grid() {
    let mut prev = f64::INFINITY;
    for k in 1..100 {
        let p = 0.5 + 0.005 * k as f64;
        let w = two_cluster_w_at(p);
        assert!(w < prev, "W({p}) = {w} not below {prev}");
        assert!((w - wastage_reference(p)).abs() < 1e-12);
        prev = w;
    }
    assert!(two_cluster_w_at(0.7) < 0.05);
}

#[test]
fn symmetric_three_clusters_are_fair() {
    let third = 1.0 / 3.0;
    let e = three_cluster_f(&ThreeClusterParams::new(
        third,
        third,
        1.0 - 2.0 * third,
        30,
        0.3,
        1.5,
    ))
    .unwrap();
    for f in e.f {
        assert!((f - 1.0 / 30.0).abs() < 1e-12, "{f}");
    }
    assert!(e.residual < 1e-9);
}

proptest! {
    #[test]
    fn alpha_system_solves_accurately(a in 0.01f64..1.0, b in 0.01f64..1.0, c in 0.01f64..1.0) {
        let s = a + b + c;
        let sys = AlphaSystem::build([a / s, b / s, c / s]);
        let x = sys.solve().unwrap();
        prop_assert!(sys.residual(&x) < 1e-9);
        prop_assert!(x.iter().all(|&v| v >= 0.0 && v.is_finite()));
    }

    #[test]
    fn three_cluster_shares_sum_to_one(a in 0.01f64..1.0, b in 0.01f64..1.0, c in 0.01f64..1.0) {
        let s = a + b + c;
        let p = [a / s, b / s, 1.0 - a / s - b / s];
        let e = three_cluster_f(&ThreeClusterParams::new(p[0], p[1], p[2], 50, 0.3, 1.5)).unwrap();
        let total: f64 = (0..3).map(|i| p[i] * 50.0 * e.f[i]).sum();
        prop_assert!((total - 1.0).abs() < 1e-9);
    }

    #[test]
    fn vanishing_third_cluster_reduces_to_two(p in 0.5f64..0.95) {
        let tiny = 1e-9;
        let e = three_cluster_f(&ThreeClusterParams::new(p, 1.0 - p - tiny, tiny, 20, 0.3, 1.5)).unwrap();
        let two = two_cluster_f(&TwoClusterParams::new(p, 20, 0.3, 1.5)).unwrap();
        prop_assert!((e.f[0] - two).abs() < 1e-6);
        let exact = three_cluster_f(&ThreeClusterParams::new(p, 1.0 - p, 0.0, 20, 0.3, 1.5)).unwrap();
        prop_assert!((exact.f[0] - two).abs() < 1e-15);
    }

    #[test]
    fn two_cluster_rewards_conserve(p in 0.01f64..0.99) {
        let total = p * two_cluster_gain_at(p) + (1.0 - p) * two_cluster_gain_at(1.0 - p);
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn dominant_cluster_gains(p in 0.501f64..0.99) {
        prop_assert!(two_cluster_gain_at(p) > 1.0);
        prop_assert!(two_cluster_gain_at(1.0 - p) < 1.0);
    }
}
