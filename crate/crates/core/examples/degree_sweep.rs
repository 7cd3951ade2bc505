//! A node joining a 99-node random graph picks its own degree. Reward
//! first rises with degree and then falls.
//!
//! cargo run --release --example degree_sweep -- [runs] [blocks]

use topomine::experiment::{derive_seeds, load_network, run_cell, ExperimentConfig};
use topomine::netmodel::{Override, Selector};

const CONFIG: &str = include_str!("../configs/toy_focal_degree.toml");

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let runs: usize = args.next().map_or(Ok(3), |s| s.parse())?;
    let blocks: u32 = args.next().map_or(Ok(3_000), |s| s.parse())?;

    let mut cfg = ExperimentConfig::from_toml(CONFIG, std::path::Path::new("."))?;
    cfg.sim.target_chain_length = blocks;
    let net = load_network(&cfg.network, cfg.sim.same_city_floor)?;
    let seeds = derive_seeds(cfg.seed, runs);
    println!("fair share {:.2}%", 100.0 / net.miners.len() as f64);
    for d in [1, 4, 10, 25, 50, 80] {
        let mut policy = cfg.topology.clone();
        policy.overrides.push(Override {
            select: Selector::Ids(vec![99]),
            out_degree: d,
        });
        let cell = run_cell(&cfg, &net, &policy, &seeds, 1)?;
        let row = &cell.aggregate.rows[99];
        println!(
            "degree {d:>2}: F {:.3}% +- {:.3}, W {:.2}%",
            row.f_mean, row.f_ci95, row.w_mean
        );
    }
    Ok(())
}
