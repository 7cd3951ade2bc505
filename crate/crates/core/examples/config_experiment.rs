//! Runs a bundled TOML config end to end and writes its CSVs and manifest.
//!
//! cargo run --release --example config_experiment -- [config] [out_dir]

use std::path::PathBuf;

use topomine::experiment::{parse_config, run_experiment};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().map_or_else(
        || PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("configs/uniform_small.toml"),
        PathBuf::from,
    );
    let mut cfg = parse_config(&path)?;
    cfg.output_dir = args.next().map_or_else(
        || std::env::temp_dir().join("topomine_example"),
        PathBuf::from,
    );
    let cell = run_experiment(&cfg, 1)?;
    for r in &cell.runs {
        println!(
            "run {} seed {}: {} blocks, fork rate {:.4}",
            r.run, r.seed, r.blocks_mined, r.fork_rate
        );
    }
    println!("outputs in {}", cfg.output_dir.display());
    Ok(())
}
