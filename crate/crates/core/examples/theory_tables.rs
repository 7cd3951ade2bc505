//! Closed-form rewards for one, two and three clusters, and the most
//! profitable cluster sizes.

use topomine::theory::{
    optimal_cluster_fraction, single_cluster, three_cluster_f, two_cluster_f, two_cluster_gain_at,
    two_cluster_w_at, two_equal_dominant_gain, ThreeClusterParams, TwoClusterParams,
};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n = 246;
    for eps in [0.5, 1.5] {
        let (f, w) = single_cluster(n, eps)?;
        println!("single cluster, eps {eps}: F = {f:.6}, W = {w:.3}");
    }

    println!("\ntwo clusters, n = {n}, eps = 0.3, delta = 1.5");
    println!("    p      F         gain    W");
    for k in 0..9 {
        let p = 0.55 + 0.05 * k as f64;
        let f = two_cluster_f(&TwoClusterParams::new(p, n, 0.3, 1.5))?;
        println!(
            "  {p:.2}  {f:.6}  {:.4}  {:.4}",
            f * n as f64,
            two_cluster_w_at(p)
        );
    }
    let (p, g) = optimal_cluster_fraction(|p| Ok(two_cluster_gain_at(p)), 0.505, 0.995, 0.005)?;
    println!("  best p = {p:.3}, gain {g:.4}");

    println!("\nthree clusters, second and third equal");
    for p1 in [0.4, 0.5, 0.6, 0.7, 0.8] {
        let q = (1.0 - p1) / 2.0;
        let e = three_cluster_f(&ThreeClusterParams::new(p1, q, q, n, 0.3, 1.5))?;
        println!(
            "  p1 {p1:.2}: gains {:.4} {:.4} {:.4} (residual {:.1e})",
            e.gain[0], e.gain[1], e.gain[2], e.residual
        );
    }

    println!("\ntwo equal dominant clusters");
    for p in [0.25, 1.0 / 3.0, 0.36, 0.4, 0.45] {
        println!(
            "  p_each {p:.3}: gain {:.4}",
            two_equal_dominant_gain(p, n)?
        );
    }
    Ok(())
}
