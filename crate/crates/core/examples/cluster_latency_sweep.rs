//! Two clusters in the event simulator: the best dominant-cluster size for
//! several inter-cluster latencies.
//!
//! cargo run --release --example cluster_latency_sweep -- [runs] [blocks]

use topomine::experiment::{derive_seeds, load_network, run_cell, ExperimentConfig};

const CONFIG: &str = include_str!("../configs/two_cluster_delay.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let runs: usize = args.next().map_or(Ok(2), |s| s.parse())?;
    let blocks: u32 = args.next().map_or(Ok(1_000), |s| s.parse())?;

    let mut cfg = ExperimentConfig::from_toml(CONFIG, std::path::Path::new("."))?;
    cfg.sim.target_chain_length = blocks;
    let seeds = derive_seeds(cfg.seed, runs);
    let sweep = cfg.sweep.clone().unwrap_or_default();
    for &delta in sweep.delta.as_deref().unwrap_or(&[10.0]) {
        let mut best = (0.0, f64::MIN);
        print!("delta {delta:>6}:");
        for &fraction in sweep.fraction.as_deref().unwrap_or(&[0.7]) {
            let mut spec = cfg.network.clone();
            spec.fraction = Some(fraction);
            spec.delta = Some(delta);
            let net = load_network(&spec, 0.0)?;
            let cell = run_cell(&cfg, &net, &cfg.topology, &seeds, 1)?;
            let gain = cell.group_f_pct(net.dominant.as_deref().unwrap()) / cell.aggregate.fair_pct;
            print!(" {:.0}%:{gain:.3}", fraction * 100.0);
            if gain > best.1 {
                best = (fraction, gain);
            }
        }
        println!(
            "\n  best size {:.0}% with gain {:.3}",
            best.0 * 100.0,
            best.1
        );
    }
    Ok(())
}
