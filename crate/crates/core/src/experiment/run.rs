use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::{config_hash, ExperimentConfig, NetworkKind, NetworkSpec};
use super::ExperimentError;
use crate::engine::run_simulation;
use crate::metrics::{
    aggregate, compute_rewards, continent_summary, AggregateReport, ContinentSummary, RewardReport,
};
use crate::netmodel::{
    build_topology, load_latency_csv, load_placement_csv, LatencyMatrix, MinerSpec, Override,
    TopologyPolicy,
};

/// Miners and their pairwise link latencies.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub miners: Vec<MinerSpec>,
    pub latency: LatencyMatrix,
    /// Dominant cluster of a two-cluster network.
    pub dominant: Option<Vec<u32>>,
}

pub fn load_network(spec: &NetworkSpec, same_city_floor: f64) -> Result<Network, ExperimentError> {
    match spec.kind {
        NetworkKind::Dataset => {
            let (Some(placement), Some(latency)) = (&spec.placement, &spec.latency) else {
                return Err(ExperimentError::Invalid {
                    path: "network".into(),
                    msg: "dataset networks need `placement` and `latency`".into(),
                });
            };
            let miners = load_placement_csv(placement)?;
            let latency = load_latency_csv(latency)?.miner_matrix(&miners, same_city_floor)?;
            Ok(Network {
                miners,
                latency,
                dominant: None,
            })
        }
        NetworkKind::Uniform => {
            let n = required(spec.n, "n")?;
            let l = required(spec.link_latency, "link_latency")?;
            Ok(Network {
                miners: MinerSpec::synthetic(n),
                latency: LatencyMatrix::uniform(n, l),
                dominant: None,
            })
        }
        NetworkKind::TwoCluster => {
            let n = required(spec.n, "n")?;
            let f = required(spec.fraction, "fraction")?;
            let eps = required(spec.eps, "eps")?;
            let delta = required(spec.delta, "delta")?;
            let k = (f * n as f64).round() as usize;
            let labels: Vec<u8> = (0..n).map(|i| (i >= k) as u8).collect();
            Ok(Network {
                miners: MinerSpec::synthetic(n),
                latency: LatencyMatrix::clustered(&labels, eps, delta),
                dominant: Some((0..k as u32).collect()),
            })
        }
    }
}

fn required<T: Copy>(v: Option<T>, key: &str) -> Result<T, ExperimentError> {
    v.ok_or_else(|| ExperimentError::Invalid {
        path: format!("network.{key}"),
        msg: "missing".into(),
    })
}

/// `count` run seeds: consecutive outputs of a generator seeded with `root`.
pub fn derive_seeds(root: u64, count: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(root);
    (0..count).map(|_| rng.next_u64()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunStats {
    pub run: usize,
    pub seed: u64,
    pub edges: usize,
    pub blocks_mined: usize,
    pub fork_rate: f64,
    pub retained_len: u64,
    pub end_time: f64,
    pub events: u64,
    pub protocol_errors: u64,
    pub inconsistent_replicas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CellOutcome {
    pub runs: Vec<RunStats>,
    pub reports: Vec<RewardReport>,
    pub aggregate: AggregateReport,
    pub continents: Vec<ContinentSummary>,
}

impl CellOutcome {
    /// Mean per-miner `f_pct` of `members` across runs.
    pub fn group_f_pct(&self, members: &[u32]) -> f64 {
        let sum: f64 = members
            .iter()
            .map(|&m| self.aggregate.rows[m as usize].f_mean)
            .sum();
        sum / members.len() as f64
    }

    pub fn mean_fork_rate(&self) -> f64 {
        self.runs.iter().map(|r| r.fork_rate).sum::<f64>() / self.runs.len() as f64
    }
}

fn pool(jobs: usize) -> Result<rayon::ThreadPool, ExperimentError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| ExperimentError::Pool(e.to_string()))
}

fn one_run(
    cfg: &ExperimentConfig,
    net: &Network,
    policy: &TopologyPolicy,
    run: usize,
    seed: u64,
) -> Result<(RunStats, RewardReport), ExperimentError> {
    let topo = build_topology(policy, &net.miners, seed)?;
    topo.check_connected()?;
    let sim = cfg.sim_config(net.miners.len(), seed);
    let result = run_simulation(&sim, &topo, &net.latency)?;
    if !result.inconsistent_replicas.is_empty() {
        log::warn!(
            "run {run}: {} replicas disagree with the observer below the discarded tail",
            result.inconsistent_replicas.len()
        );
    }
    let report = compute_rewards(&result, &net.miners, cfg.sim.discard_tail as usize)?;
    log::info!(
        "run {run} (seed {seed}): fork rate {:.4}, {} events",
        result.fork_rate(),
        result.wall_events
    );
    let stats = RunStats {
        run,
        seed,
        edges: topo.edge_count(),
        blocks_mined: result.all_blocks.len() - 1,
        fork_rate: result.fork_rate(),
        retained_len: report.retained_len,
        end_time: result.end_time,
        events: result.wall_events,
        protocol_errors: result.protocol_errors,
        inconsistent_replicas: result.inconsistent_replicas.len(),
    };
    Ok((stats, report))
}

/// Runs one seed per entry of `seeds` on up to `jobs` threads. Results are
/// in seed order and independent of `jobs`.
pub fn run_cell(
    cfg: &ExperimentConfig,
    net: &Network,
    policy: &TopologyPolicy,
    seeds: &[u64],
    jobs: usize,
) -> Result<CellOutcome, ExperimentError> {
    let results: Vec<_> = pool(jobs)?.install(|| {
        seeds
            .par_iter()
            .enumerate()
            .map(|(i, &s)| one_run(cfg, net, policy, i, s))
            .collect()
    });
    let mut runs = Vec::with_capacity(seeds.len());
    let mut reports = Vec::with_capacity(seeds.len());
    for r in results {
        let (s, rep) = r?;
        runs.push(s);
        reports.push(rep);
    }
    let aggregate = aggregate(&reports)?;
    let continents = continent_summary(&aggregate);
    Ok(CellOutcome {
        runs,
        reports,
        aggregate,
        continents,
    })
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io {
        path: path.display().to_string(),
        source,
    }
}

/// Writes via a temporary sibling and a rename, so readers never see a
/// partial file.
fn write_atomic(
    path: &Path,
    fill: impl FnOnce(&mut Vec<u8>) -> Result<(), ExperimentError>,
) -> Result<(), ExperimentError> {
    let mut buf = Vec::new();
    fill(&mut buf)?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, &buf).map_err(io_err(&tmp))?;
    fs::rename(&tmp, path).map_err(io_err(path))
}

fn csv_into<F>(buf: &mut Vec<u8>, f: F) -> Result<(), ExperimentError>
where
    F: FnOnce(&mut csv::Writer<&mut Vec<u8>>) -> Result<(), csv::Error>,
{
    let mut w = csv::Writer::from_writer(buf);
    f(&mut w).map_err(crate::metrics::MetricsError::from)?;
    w.flush().map_err(crate::metrics::MetricsError::from)?;
    Ok(())
}

fn write_cell(dir: &Path, cell: &CellOutcome) -> Result<Vec<String>, ExperimentError> {
    fs::create_dir_all(dir).map_err(io_err(dir))?;
    let mut written = Vec::new();
    for (i, rep) in cell.reports.iter().enumerate() {
        let name = format!("run_{i:02}.csv");
        write_atomic(&dir.join(&name), |b| Ok(rep.write_csv(b)?))?;
        written.push(name);
    }
    write_atomic(&dir.join("aggregate.csv"), |b| {
        Ok(cell.aggregate.write_csv(b)?)
    })?;
    write_atomic(&dir.join("continents.csv"), |b| {
        csv_into(b, |w| {
            w.write_record([
                "continent",
                "miners",
                "mean_f_pct",
                "gain",
                "above_fair",
                "below_fair",
            ])?;
            for c in &cell.continents {
                w.write_record([
                    c.continent.to_string(),
                    c.miners.to_string(),
                    format!("{:.6}", c.mean_f_pct),
                    format!("{:.6}", c.gain),
                    c.above_fair.to_string(),
                    c.below_fair.to_string(),
                ])?;
            }
            Ok(())
        })
    })?;
    write_atomic(&dir.join("runs.csv"), |b| {
        csv_into(b, |w| {
            w.write_record([
                "run",
                "seed",
                "edges",
                "blocks_mined",
                "fork_rate",
                "retained_len",
                "end_time",
                "events",
                "protocol_errors",
                "inconsistent_replicas",
            ])?;
            for r in &cell.runs {
                w.write_record([
                    r.run.to_string(),
                    r.seed.to_string(),
                    r.edges.to_string(),
                    r.blocks_mined.to_string(),
                    format!("{:.6}", r.fork_rate),
                    r.retained_len.to_string(),
                    format!("{:.6}", r.end_time),
                    r.events.to_string(),
                    r.protocol_errors.to_string(),
                    r.inconsistent_replicas.to_string(),
                ])?;
            }
            Ok(())
        })
    })?;
    written.extend(["aggregate.csv", "continents.csv", "runs.csv"].map(String::from));
    Ok(written)
}

/// Provenance record written next to the outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub command: String,
    pub config_sha256: String,
    pub root_seed: u64,
    /// Decimal strings; TOML integers cannot hold every `u64`.
    pub run_seeds: Vec<String>,
    pub jobs: usize,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub outputs: Vec<String>,
}

fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

fn write_manifest(dir: &Path, manifest: &RunManifest) -> Result<(), ExperimentError> {
    let text = toml::to_string(manifest).map_err(|e| ExperimentError::Invalid {
        path: "manifest".into(),
        msg: e.to_string(),
    })?;
    write_atomic(&dir.join("manifest.toml"), |b| {
        b.extend_from_slice(text.as_bytes());
        Ok(())
    })
}

/// Runs the configured experiment (ignoring any sweep section) and writes
/// its outputs to `cfg.output_dir`.
pub fn run_experiment(cfg: &ExperimentConfig, jobs: usize) -> Result<CellOutcome, ExperimentError> {
    cfg.validate()?;
    let started = unix_now();
    let hash = config_hash(cfg)?;
    let net = load_network(&cfg.network, cfg.sim.same_city_floor)?;
    let seeds = derive_seeds(cfg.seed, cfg.runs);
    let cell = run_cell(cfg, &net, &cfg.topology, &seeds, jobs)?;
    let outputs = write_cell(&cfg.output_dir, &cell)?;
    write_manifest(
        &cfg.output_dir,
        &RunManifest {
            version: env!("CARGO_PKG_VERSION").into(),
            command: "simulate".into(),
            config_sha256: hash,
            root_seed: cfg.seed,
            run_seeds: seeds.iter().map(u64::to_string).collect(),
            jobs,
            started_unix: started,
            finished_unix: unix_now(),
            outputs,
        },
    )?;
    Ok(cell)
}

/// One grid point of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepCell {
    pub index: usize,
    pub out_degree: Option<usize>,
    pub fraction: Option<f64>,
    pub delta: Option<f64>,
    /// Miners the summary focuses on: the degree axis selection, else the
    /// dominant cluster, else everyone.
    pub group: Vec<u32>,
    pub outcome: Result<CellOutcome, String>,
}

impl SweepCell {
    pub fn group_gain(&self) -> Option<f64> {
        let c = self.outcome.as_ref().ok()?;
        Some(c.group_f_pct(&self.group) / c.aggregate.fair_pct)
    }
}

fn grid(cfg: &ExperimentConfig) -> Vec<(Option<usize>, Option<f64>, Option<f64>)> {
    let sw = cfg.sweep.clone().unwrap_or_default();
    let degrees: Vec<Option<usize>> = match &sw.out_degree {
        Some(a) => a.values.iter().map(|&d| Some(d)).collect(),
        None => vec![None],
    };
    let opt = |v: Option<Vec<f64>>| -> Vec<Option<f64>> {
        v.map_or(vec![None], |xs| xs.into_iter().map(Some).collect())
    };
    let fractions = opt(sw.fraction);
    let deltas = opt(sw.delta);
    let mut out = Vec::new();
    for &d in &degrees {
        for &f in &fractions {
            for &x in &deltas {
                out.push((d, f, x));
            }
        }
    }
    out
}

fn sweep_cell(
    cfg: &ExperimentConfig,
    base: Option<&Network>,
    seeds: &[u64],
    jobs: usize,
    (degree, fraction, delta): (Option<usize>, Option<f64>, Option<f64>),
) -> Result<(Vec<u32>, CellOutcome), ExperimentError> {
    let mut spec = cfg.network.clone();
    if fraction.is_some() {
        spec.fraction = fraction;
    }
    if delta.is_some() {
        spec.delta = delta;
    }
    let owned;
    let net = match base {
        Some(n) => n,
        None => {
            owned = load_network(&spec, cfg.sim.same_city_floor)?;
            &owned
        }
    };
    let mut policy = cfg.topology.clone();
    let mut group = None;
    if let (Some(d), Some(axis)) = (
        degree,
        cfg.sweep.as_ref().and_then(|s| s.out_degree.as_ref()),
    ) {
        policy.overrides.push(Override {
            select: axis.select.clone(),
            out_degree: d,
        });
        group = Some(axis.select.members(&net.miners)?);
    }
    let group = group
        .or_else(|| net.dominant.clone())
        .unwrap_or_else(|| (0..net.miners.len() as u32).collect());
    if group.is_empty() {
        return Err(ExperimentError::Invalid {
            path: "sweep".into(),
            msg: "the focus group of this cell is empty".into(),
        });
    }
    let cell = run_cell(cfg, net, &policy, seeds, jobs)?;
    Ok((group, cell))
}

/// Runs every grid point of `cfg.sweep`, writing each to `cell_NNN/` and a
/// `sweep_summary.csv` overview. A failing cell is recorded and skipped.
pub fn run_sweep(cfg: &ExperimentConfig, jobs: usize) -> Result<Vec<SweepCell>, ExperimentError> {
    cfg.validate()?;
    if cfg.sweep.is_none() {
        return Err(ExperimentError::Invalid {
            path: "sweep".into(),
            msg: "config has no sweep section".into(),
        });
    }
    let started = unix_now();
    let hash = config_hash(cfg)?;
    let seeds = derive_seeds(cfg.seed, cfg.runs);
    let sw = cfg.sweep.as_ref().unwrap();
    // The network only changes when a cluster axis is swept.
    let shared = if sw.fraction.is_none() && sw.delta.is_none() {
        Some(load_network(&cfg.network, cfg.sim.same_city_floor)?)
    } else {
        None
    };
    fs::create_dir_all(&cfg.output_dir).map_err(io_err(&cfg.output_dir))?;

    let mut cells = Vec::new();
    let mut outputs = Vec::new();
    for (index, point) in grid(cfg).into_iter().enumerate() {
        let (out_degree, fraction, delta) = point;
        log::info!(
            "sweep cell {index}: degree {out_degree:?}, fraction {fraction:?}, delta {delta:?}"
        );
        let (group, outcome) = match sweep_cell(cfg, shared.as_ref(), &seeds, jobs, point) {
            Ok((g, c)) => {
                let dir = format!("cell_{index:03}");
                for f in write_cell(&cfg.output_dir.join(&dir), &c)? {
                    outputs.push(format!("{dir}/{f}"));
                }
                (g, Ok(c))
            }
            Err(e) => {
                log::error!("sweep cell {index} failed: {e}");
                (Vec::new(), Err(e.to_string()))
            }
        };
        cells.push(SweepCell {
            index,
            out_degree,
            fraction,
            delta,
            group,
            outcome,
        });
    }

    write_atomic(&cfg.output_dir.join("sweep_summary.csv"), |b| {
        csv_into(b, |w| {
            w.write_record([
                "cell",
                "out_degree",
                "fraction",
                "delta",
                "status",
                "group_size",
                "group_f_pct",
                "group_gain",
                "fair_pct",
                "fork_rate",
                "error",
            ])?;
            let opt = |v: Option<String>| v.unwrap_or_default();
            for c in &cells {
                let mut rec = vec![
                    c.index.to_string(),
                    opt(c.out_degree.map(|d| d.to_string())),
                    opt(c.fraction.map(|f| format!("{f:.6}"))),
                    opt(c.delta.map(|d| format!("{d:.6}"))),
                ];
                match &c.outcome {
                    Ok(o) => rec.extend([
                        "ok".to_string(),
                        c.group.len().to_string(),
                        format!("{:.6}", o.group_f_pct(&c.group)),
                        format!("{:.6}", c.group_gain().unwrap()),
                        format!("{:.6}", o.aggregate.fair_pct),
                        format!("{:.6}", o.mean_fork_rate()),
                        String::new(),
                    ]),
                    Err(e) => rec.extend([
                        "failed".to_string(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        String::new(),
                        e.clone(),
                    ]),
                }
                w.write_record(rec)?;
            }
            Ok(())
        })
    })?;
    outputs.push("sweep_summary.csv".into());
    write_manifest(
        &cfg.output_dir,
        &RunManifest {
            version: env!("CARGO_PKG_VERSION").into(),
            command: "sweep".into(),
            config_sha256: hash,
            root_seed: cfg.seed,
            run_seeds: seeds.iter().map(u64::to_string).collect(),
            jobs,
            started_unix: started,
            finished_unix: unix_now(),
            outputs,
        },
    )?;
    Ok(cells)
}
