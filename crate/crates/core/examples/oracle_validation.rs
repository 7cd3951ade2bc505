//! Round-model Monte Carlo estimates next to the two-cluster formulas.
//!
//! cargo run --release --example oracle_validation -- [rounds]

use topomine::netmodel::DeltaMatrix;
use topomine::theory::{round_oracle, two_cluster_f, two_cluster_w, TwoClusterParams};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let rounds: u64 = std::env::args().nth(1).map_or(Ok(200_000), |s| s.parse())?;
    let n = 20;
    println!("n = {n}, eps = 0.3, delta = 1.5, {rounds} rounds");
    println!("   p    F formula  F oracle (se)        W formula  W oracle (se)");
    for k in 0..8 {
        let p = 0.55 + 0.05 * k as f64;
        let params = TwoClusterParams::new(p, n, 0.3, 1.5);
        let size = (p * n as f64).round() as usize;
        let labels: Vec<u8> = (0..n).map(|i| (i >= size) as u8).collect();
        let delta = DeltaMatrix::clustered(&labels, 0.3, 1.5);
        let trace = round_oracle(&delta, &vec![1.0; n], rounds, k)?;
        let members: Vec<u32> = (0..size as u32).collect();
        let est = trace.group_estimate(&members);
        println!(
            "  {p:.2}  {:.6}   {:.6} ({:.6})   {:.4}     {:.4} ({:.4})",
            two_cluster_f(&params)?,
            est.f,
            est.f_se,
            two_cluster_w(&params)?,
            est.w,
            est.w_se
        );
    }
    Ok(())
}
