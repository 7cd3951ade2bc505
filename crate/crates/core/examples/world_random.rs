//! Ten seeded runs on the 246-miner world dataset with a random out-degree-6
//! overlay, summarized per miner and per continent.

use std::time::Instant;
use topomine::engine::{run_simulation, SimConfig};
use topomine::metrics::{aggregate, compute_rewards, continent_summary};
use topomine::netmodel::*;

fn main() {
    let dir = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let miners = load_placement_csv(format!("{dir}/placement.csv")).unwrap();
    let lat = load_latency_csv(format!("{dir}/latency.csv")).unwrap();
    let lm = lat.miner_matrix(&miners, 0.5).unwrap();
    let target: u32 = std::env::args()
        .nth(1)
        .map(|s| s.parse().unwrap())
        .unwrap_or(2000);
    let mut reps = vec![];
    for seed in 0..2 {
        let topo = build_topology(&TopologyPolicy::random(6), &miners, seed).unwrap();
        let cfg = SimConfig::new(miners.len(), 15000.0, target, seed);
        let t = Instant::now();
        let r = run_simulation(&cfg, &topo, &lm).unwrap();
        println!(
            "seed {seed}: {:?} events {} forks {:.4} incons {}",
            t.elapsed(),
            r.wall_events,
            r.fork_rate(),
            r.inconsistent_replicas.len()
        );
        reps.push(compute_rewards(&r, &miners, 100).unwrap());
    }
    for s in continent_summary(&aggregate(&reps).unwrap()) {
        println!("{:?}", s);
    }
}
