use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use topomine::experiment::{
    parse_config, run_experiment, run_sweep, ExperimentConfig, ExperimentError,
};
use topomine::netmodel::{
    build_topology, delta_matrix, load_latency_csv, load_placement_csv, DeltaMatrix, TopologyPolicy,
};
use topomine::theory::{
    optimal_cluster_fraction, round_oracle, single_cluster, three_cluster_f, two_cluster_f,
    two_cluster_gain_at, two_cluster_w, two_equal_dominant_gain, ThreeClusterParams,
    TwoClusterParams,
};

#[derive(Parser)]
#[command(
    name = "topomine",
    version,
    about = "Proof-of-work mining over p2p topologies"
)]
struct Cli {
    /// Log progress (repeat for more detail).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the simulator on a config and write per-run and aggregate CSVs.
    Simulate(RunArgs),
    /// Run every grid point of a config's sweep section.
    Sweep(RunArgs),
    /// Evaluate the closed-form reward formulas.
    #[command(subcommand)]
    Theory(TheoryCmd),
    /// Estimate rewards with the round-model Monte Carlo oracle.
    #[command(subcommand)]
    Oracle(OracleCmd),
    /// Grid search for the most profitable dominant-cluster size.
    #[command(subcommand)]
    Optimum(OptimumCmd),
    /// Check placement and latency files and report their statistics.
    ValidateData(DataArgs),
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Root seed; overrides the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; overrides the config.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Number of seeded runs; overrides the config.
    #[arg(long)]
    runs: Option<usize>,
    /// Worker threads.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Args)]
struct Common {
    /// Miner count.
    #[arg(long, default_value_t = 246)]
    n: usize,
    /// Intra-cluster latency in rounds.
    #[arg(long, default_value_t = 0.3)]
    eps: f64,
    /// Write the table as CSV here as well as to stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum TheoryCmd {
    /// One cluster with pairwise latency `eps`.
    Single(Common),
    /// Dominant cluster of fraction `p` against the rest.
    Two {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.5)]
        delta: f64,
        /// Dominant fractions to tabulate.
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.5, 0.6, 0.7, 0.8, 0.9])]
        p: Vec<f64>,
    },
    /// Three clusters with fractions p1, p2, p3.
    Three {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 1.5)]
        delta: f64,
        #[arg(long)]
        p1: f64,
        #[arg(long)]
        p2: f64,
        #[arg(long)]
        p3: f64,
    },
    /// Two equal dominant clusters of `p` each plus a third of 1 - 2p.
    TwoEqual {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.2, 0.3, 0.4, 0.45])]
        p: Vec<f64>,
    },
}

#[derive(Args)]
struct OracleArgs {
    #[command(flatten)]
    common: Common,
    /// Rounds to simulate.
    #[arg(long, default_value_t = 1_000_000)]
    rounds: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Subcommand)]
enum OracleCmd {
    Single(OracleArgs),
    Two {
        #[command(flatten)]
        args: OracleArgs,
        #[arg(long, default_value_t = 1.5)]
        delta: f64,
        #[arg(long, value_delimiter = ',', default_values_t = vec![0.6, 0.7, 0.8])]
        p: Vec<f64>,
    },
}

#[derive(Args)]
struct GridArgs {
    #[arg(long, default_value_t = 246)]
    n: usize,
    #[arg(long, default_value_t = 0.005)]
    step: f64,
}

#[derive(Subcommand)]
enum OptimumCmd {
    /// Best dominant fraction for two clusters.
    Two(GridArgs),
    /// Best size of the first of three clusters when the other two split the
    /// rest equally.
    Three(GridArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Read the data paths from this experiment config.
    #[arg(long, conflicts_with_all = ["placement", "latency"])]
    config: Option<PathBuf>,
    #[arg(long, requires = "latency")]
    placement: Option<PathBuf>,
    #[arg(long, requires = "placement")]
    latency: Option<PathBuf>,
    /// Floor in ms for miners sharing a city.
    #[arg(long, default_value_t = 0.5)]
    same_city_floor: f64,
    /// Out-degree of the random overlay used for the delivery statistics.
    #[arg(long, default_value_t = 6)]
    out_degree: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

type Table = (Vec<&'static str>, Vec<Vec<String>>);

fn emit(table: Table, out: Option<&Path>) -> Result<(), ExperimentError> {
    let mut buf = Vec::new();
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        let csv_err = |e: csv::Error| ExperimentError::Metrics(e.into());
        w.write_record(&table.0).map_err(csv_err)?;
        for row in &table.1 {
            w.write_record(row).map_err(csv_err)?;
        }
        w.flush().map_err(|e| ExperimentError::Metrics(e.into()))?;
    }
    std::io::stdout()
        .write_all(&buf)
        .map_err(|source| ExperimentError::Io {
            path: "stdout".into(),
            source,
        })?;
    if let Some(path) = out {
        std::fs::write(path, &buf).map_err(|source| ExperimentError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}

fn fmt(x: f64) -> String {
    format!("{x:.6}")
}

fn load_run_config(args: &RunArgs) -> Result<ExperimentConfig, ExperimentError> {
    let mut cfg = parse_config(&args.config)?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(r) = args.runs {
        cfg.runs = r;
    }
    if let Some(o) = &args.out {
        cfg.output_dir = o.clone();
    }
    if args.jobs == 0 {
        return Err(ExperimentError::Invalid {
            path: "--jobs".into(),
            msg: "must be at least 1".into(),
        });
    }
    cfg.validate()?;
    Ok(cfg)
}

fn simulate(args: &RunArgs) -> Result<(), ExperimentError> {
    let cfg = load_run_config(args)?;
    let cell = run_experiment(&cfg, args.jobs)?;
    println!(
        "{} runs, mean fork rate {:.4}, fair share {:.4}%",
        cell.runs.len(),
        cell.mean_fork_rate(),
        cell.aggregate.fair_pct
    );
    for c in &cell.continents {
        println!(
            "{:>3}  miners {:>3}  mean F {:.4}%  gain {:.3}  above/below fair {}/{}",
            c.continent.code(),
            c.miners,
            c.mean_f_pct,
            c.gain,
            c.above_fair,
            c.below_fair
        );
    }
    println!("wrote {}", cfg.output_dir.display());
    Ok(())
}

fn sweep(args: &RunArgs) -> Result<(), ExperimentError> {
    let cfg = load_run_config(args)?;
    let cells = run_sweep(&cfg, args.jobs)?;
    let failed = cells.iter().filter(|c| c.outcome.is_err()).count();
    for c in &cells {
        match (&c.outcome, c.group_gain()) {
            (Ok(_), Some(g)) => println!(
                "cell {:03}  degree {:?}  fraction {:?}  delta {:?}  group gain {g:.4}",
                c.index, c.out_degree, c.fraction, c.delta
            ),
            (Err(e), _) => println!("cell {:03}  failed: {e}", c.index),
            _ => {}
        }
    }
    println!("wrote {}", cfg.output_dir.display());
    if failed == cells.len() {
        return Err(ExperimentError::Invalid {
            path: "sweep".into(),
            msg: "every cell failed".into(),
        });
    }
    Ok(())
}

fn theory(cmd: &TheoryCmd) -> Result<(), ExperimentError> {
    match cmd {
        TheoryCmd::Single(c) => {
            let (f, w) = single_cluster(c.n, c.eps)?;
            emit(
                (
                    vec!["n", "eps", "f", "w"],
                    vec![vec![c.n.to_string(), c.eps.to_string(), fmt(f), fmt(w)]],
                ),
                c.out.as_deref(),
            )
        }
        TheoryCmd::Two {
            common: c,
            delta,
            p,
        } => {
            let mut rows = Vec::new();
            for &p in p {
                let params = TwoClusterParams::new(p, c.n, c.eps, *delta);
                let f = two_cluster_f(&params)?;
                let w = two_cluster_w(&params)?;
                rows.push(vec![p.to_string(), fmt(f), fmt(f * c.n as f64), fmt(w)]);
            }
            emit((vec!["p", "f", "gain", "w"], rows), c.out.as_deref())
        }
        TheoryCmd::Three {
            common: c,
            delta,
            p1,
            p2,
            p3,
        } => {
            let e = three_cluster_f(&ThreeClusterParams::new(*p1, *p2, *p3, c.n, c.eps, *delta))?;
            let p = [*p1, *p2, *p3];
            let rows = (0..3)
                .map(|i| {
                    vec![
                        (i + 1).to_string(),
                        p[i].to_string(),
                        fmt(e.f[i]),
                        fmt(e.gain[i]),
                        fmt(e.m[i]),
                    ]
                })
                .collect();
            emit(
                (vec!["cluster", "p", "f", "gain", "expected_blocks"], rows),
                c.out.as_deref(),
            )
        }
        TheoryCmd::TwoEqual { common: c, p } => {
            let mut rows = Vec::new();
            for &p in p {
                let g = two_equal_dominant_gain(p, c.n)?;
                rows.push(vec![p.to_string(), fmt(g / c.n as f64), fmt(g)]);
            }
            emit((vec!["p_each", "f", "gain"], rows), c.out.as_deref())
        }
    }
}

fn oracle(cmd: &OracleCmd) -> Result<(), ExperimentError> {
    match cmd {
        OracleCmd::Single(a) => {
            let c = &a.common;
            let (f_th, w_th) = single_cluster(c.n, c.eps)?;
            let delta = DeltaMatrix::uniform(c.n, c.eps);
            let trace = round_oracle(&delta, &vec![1.0; c.n], a.rounds, a.seed)?;
            let all: Vec<u32> = (0..c.n as u32).collect();
            let est = trace.group_estimate(&all);
            emit(
                (
                    vec![
                        "n", "eps", "f_theory", "f_oracle", "f_se", "w_theory", "w_oracle", "w_se",
                    ],
                    vec![vec![
                        c.n.to_string(),
                        c.eps.to_string(),
                        fmt(f_th),
                        fmt(est.f),
                        fmt(est.f_se),
                        fmt(w_th),
                        fmt(est.w),
                        fmt(est.w_se),
                    ]],
                ),
                c.out.as_deref(),
            )
        }
        OracleCmd::Two { args: a, delta, p } => {
            let c = &a.common;
            let mut rows = Vec::new();
            for &p in p {
                let params = TwoClusterParams::new(p, c.n, c.eps, *delta);
                let f_th = two_cluster_f(&params)?;
                let w_th = two_cluster_w(&params)?;
                let k = (p * c.n as f64).round() as usize;
                let labels: Vec<u8> = (0..c.n).map(|i| (i >= k) as u8).collect();
                let dm = DeltaMatrix::clustered(&labels, c.eps, *delta);
                let trace = round_oracle(&dm, &vec![1.0; c.n], a.rounds, a.seed)?;
                let members: Vec<u32> = (0..k as u32).collect();
                let est = trace.group_estimate(&members);
                rows.push(vec![
                    p.to_string(),
                    fmt(f_th),
                    fmt(est.f),
                    fmt(est.f_se),
                    fmt(w_th),
                    fmt(est.w),
                    fmt(est.w_se),
                ]);
            }
            emit(
                (
                    vec![
                        "p", "f_theory", "f_oracle", "f_se", "w_theory", "w_oracle", "w_se",
                    ],
                    rows,
                ),
                c.out.as_deref(),
            )
        }
    }
}

fn optimum(cmd: &OptimumCmd) -> Result<(), ExperimentError> {
    let (name, p, g) = match cmd {
        OptimumCmd::Two(a) => {
            let (p, g) = optimal_cluster_fraction(
                |p| Ok(two_cluster_gain_at(p)),
                0.5 + a.step,
                1.0 - a.step,
                a.step,
            )?;
            ("two", p, g)
        }
        OptimumCmd::Three(a) => {
            let n = a.n;
            let gain = |p: f64| {
                let q = (1.0 - p) / 2.0;
                Ok(
                    three_cluster_f(&ThreeClusterParams::new(p, q, 1.0 - p - q, n, 0.3, 1.5))?.gain
                        [0],
                )
            };
            let lo = (1.0 / 3.0 / a.step).ceil() * a.step;
            let (p, g) = optimal_cluster_fraction(gain, lo, 1.0 - a.step, a.step)?;
            ("three", p, g)
        }
    };
    println!("model,p_opt,gain");
    println!("{name},{p:.4},{g:.6}");
    Ok(())
}

fn validate_data(a: &DataArgs) -> Result<(), ExperimentError> {
    let (placement, latency, floor) = match (&a.config, &a.placement, &a.latency) {
        (Some(cfg), _, _) => {
            let cfg = parse_config(cfg)?;
            match (cfg.network.placement, cfg.network.latency) {
                (Some(p), Some(l)) => (p, l, cfg.sim.same_city_floor),
                _ => {
                    return Err(ExperimentError::Invalid {
                        path: "network".into(),
                        msg: "config does not name placement and latency files".into(),
                    })
                }
            }
        }
        (None, Some(p), Some(l)) => (p.clone(), l.clone(), a.same_city_floor),
        _ => {
            return Err(ExperimentError::Invalid {
                path: "validate-data".into(),
                msg: "give --config or both --placement and --latency".into(),
            })
        }
    };
    let miners = load_placement_csv(&placement)?;
    let cities = load_latency_csv(&latency)?;
    let lat = cities.miner_matrix(&miners, floor)?;
    let topo = build_topology(&TopologyPolicy::random(a.out_degree), &miners, a.seed)?;
    let delta = delta_matrix(&topo, &lat, 0.0)?;
    let n = miners.len();
    let mut pairs = Vec::with_capacity(n * (n - 1) / 2);
    for u in 0..n {
        for v in u + 1..n {
            pairs.push(delta.get(u, v));
        }
    }
    pairs.sort_by(f64::total_cmp);
    let median = if pairs.is_empty() {
        0.0
    } else {
        pairs[pairs.len() / 2]
    };
    let mut links: Vec<f64> = (0..n)
        .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
        .map(|(u, v)| lat.get(u, v))
        .collect();
    links.sort_by(f64::total_cmp);
    let median_link = if links.is_empty() {
        0.0
    } else {
        links[links.len() / 2]
    };
    println!("miners: {n}");
    println!("cities in latency data: {}", cities.cities().count());
    println!(
        "link latency: median {median_link:.1} ms, max {:.1} ms",
        lat.max()
    );
    println!(
        "random-{} overlay: {} edges, median delivery {median:.1} ms, max {:.1} ms",
        a.out_degree,
        topo.edge_count(),
        delta.max()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let result = match &cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Sweep(a) => sweep(a),
        Command::Theory(c) => theory(c),
        Command::Oracle(c) => oracle(c),
        Command::Optimum(c) => optimum(c),
        Command::ValidateData(a) => validate_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
