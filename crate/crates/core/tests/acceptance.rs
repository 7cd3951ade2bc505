//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//! Failures are reported but only make the process exit non-zero when
//! `TOPOMINE_ACCEPTANCE_STRICT=1`, so the remaining test binaries still run.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use topomine::engine::{run_simulation, SimConfig};
use topomine::experiment::{derive_seeds, load_network, run_cell, ExperimentConfig};
use topomine::metrics::compute_rewards;
use topomine::netmodel::{
    build_topology, load_latency_csv, load_placement_csv, Continent, DeltaMatrix, LatencyMatrix,
    MinerSpec, Override, Selector, Topology, TopologyPolicy,
};
use topomine::theory::{
    classify_phases, optimal_cluster_fraction, round_oracle, three_cluster_f, two_cluster_f,
    two_cluster_gain_at, two_cluster_w_at, two_equal_dominant_gain, RoundTrace, ThreeClusterParams,
    TwoClusterParams,
};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn manifest_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

fn cluster_labels(n: usize, p: f64) -> (Vec<u8>, Vec<u32>) {
    let k = (p * n as f64).round() as usize;
    (
        (0..n).map(|i| (i >= k) as u8).collect(),
        (0..k as u32).collect(),
    )
}

fn single_cluster_regimes() -> Outcome {
    let n = 20;
    let mut notes = Vec::new();
    let mut pass = true;

    let delta = DeltaMatrix::uniform(n, 1.5);
    let mut mined = vec![0u64; n];
    let mut kept = vec![0u64; n];
    let mut f_sum = vec![0.0; n];
    let mut f_var = vec![0.0; n];
    let mut slowest = 0.0f64;
    for seed in 0..5 {
        let t = Instant::now();
        let trace = round_oracle(&delta, &vec![1.0; n], 100_000, seed).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        for v in 0..n {
            mined[v] += trace.per_miner_mined[v];
            kept[v] += trace.per_miner_in_chain[v];
            let est = trace.group_estimate(&[v as u32]);
            f_sum[v] += est.f;
            f_var[v] += est.f_se * est.f_se;
        }
    }
    let w: Vec<f64> = (0..n)
        .map(|v| (mined[v] - kept[v]) as f64 / mined[v] as f64)
        .collect();
    let (w_lo, w_hi) = w
        .iter()
        .fold((f64::MAX, f64::MIN), |(a, b), &x| (a.min(x), b.max(x)));
    if !(w_lo >= 0.48 && w_hi <= 0.52) {
        pass = false;
    }
    notes.push(format!("eps 1.5: W in [{w_lo:.4}, {w_hi:.4}]"));
    let worst_z = (0..n)
        .map(|v| {
            let mean = f_sum[v] / 5.0;
            let se = f_var[v].sqrt() / 5.0;
            (mean - 1.0 / n as f64).abs() / se
        })
        .fold(0.0, f64::max);
    if worst_z > 3.0 {
        pass = false;
    }
    notes.push(format!("worst |F - 1/20| = {worst_z:.2} SE"));

    let low = DeltaMatrix::uniform(n, 0.5);
    let off: u64 = (0..5)
        .map(|seed| {
            round_oracle(&low, &vec![1.0; n], 100_000, seed)
                .unwrap()
                .off_chain()
        })
        .sum();
    if off != 0 {
        pass = false;
    }
    notes.push(format!("eps 0.5: {off} off-chain blocks"));
    if slowest >= 10.0 {
        pass = false;
    }
    notes.push(format!("slowest seed {slowest:.2} s"));
    outcome(pass, notes.join("; "))
}

const GRID: [f64; 8] = [0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9];

fn two_cluster_traces() -> (Vec<(f64, RoundTrace, Vec<u32>)>, f64) {
    let t = Instant::now();
    let traces = GRID
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            let (labels, members) = cluster_labels(20, p);
            let delta = DeltaMatrix::clustered(&labels, 0.3, 1.5);
            let trace = round_oracle(&delta, &[1.0; 20], 500_000, 100 + i as u64).unwrap();
            (p, trace, members)
        })
        .collect();
    (traces, t.elapsed().as_secs_f64())
}

fn two_cluster_formula(traces: &[(f64, RoundTrace, Vec<u32>)], secs: f64) -> Outcome {
    let mut pass = secs < 120.0;
    let mut worst = (0.0, 0.0);
    let mut misses = Vec::new();
    for (p, trace, members) in traces {
        let f = two_cluster_f(&TwoClusterParams::new(*p, 20, 0.3, 1.5)).unwrap();
        let est = trace.group_estimate(members);
        let z = (est.f - f).abs() / est.f_se;
        if z > worst.1 {
            worst = (*p, z);
        }
        if z > 3.0 {
            pass = false;
            misses.push(format!("p {p}: {z:.1} SE"));
        }
    }
    let (p_star, g_star) =
        optimal_cluster_fraction(|p| Ok(two_cluster_gain_at(p)), 0.505, 0.995, 0.005).unwrap();
    if !((g_star - 1.29).abs() <= 0.01 && (0.67..=0.71).contains(&p_star)) {
        pass = false;
    }
    outcome(
        pass,
        format!(
            "worst |F_hat - F| = {:.1} SE at p {}; beyond 3 SE: [{}]; optimum p {p_star:.3} gain {g_star:.4}; oracle {secs:.1} s",
            worst.1,
            worst.0,
            misses.join(", ")
        ),
    )
}

fn wastage(traces: &[(f64, RoundTrace, Vec<u32>)]) -> Outcome {
    let w07 = two_cluster_w_at(0.7);
    let mut pass = w07 < 0.05;
    let mut decreasing = true;
    let mut prev = f64::INFINITY;
    for k in 1..100 {
        let w = two_cluster_w_at(0.5 + 0.005 * k as f64);
        decreasing &= w < prev;
        prev = w;
    }
    pass &= decreasing;
    let mut worst = (0.0, 0.0);
    for (p, trace, members) in traces {
        let gap = (trace.group_estimate(members).w - two_cluster_w_at(*p)).abs();
        if gap > worst.1 {
            worst = (*p, gap);
        }
    }
    pass &= worst.1 <= 0.01;
    outcome(
        pass,
        format!(
            "W(0.7) = {w07:.4}; strictly decreasing: {decreasing}; worst |W_hat - W| = {:.4} at p {}",
            worst.1, worst.0
        ),
    )
}

fn three_clusters() -> Outcome {
    let t = Instant::now();
    let third = 1.0 / 3.0;
    let sym = three_cluster_f(&ThreeClusterParams::new(
        third,
        third,
        1.0 - 2.0 * third,
        30,
        0.3,
        1.5,
    ))
    .unwrap();
    let sym_ok = sym.f.iter().all(|&f| (f - 1.0 / 30.0).abs() < 1e-12) && sym.residual < 1e-9;

    let mut reduce_gap: f64 = 0.0;
    for &p in &GRID {
        let two = two_cluster_f(&TwoClusterParams::new(p, 20, 0.3, 1.5)).unwrap();
        for p3 in [0.0, 1e-9] {
            let e = three_cluster_f(&ThreeClusterParams::new(p, 1.0 - p - p3, p3, 20, 0.3, 1.5))
                .unwrap();
            reduce_gap = reduce_gap.max((e.f[0] - two).abs());
        }
    }

    let gain_p1 = |p: f64| {
        let q = (1.0 - p) / 2.0;
        Ok(three_cluster_f(&ThreeClusterParams::new(p, q, 1.0 - p - q, 20, 0.3, 1.5))?.gain[0])
    };
    let (p1_star, _) = optimal_cluster_fraction(gain_p1, 0.34, 0.995, 0.005).unwrap();

    // locate where the two-equal gain crosses 1 by bisection on [0.30, 0.40]
    let g = |p: f64| two_equal_dominant_gain(p, 20).unwrap() - 1.0;
    let (mut lo, mut hi) = (0.30, 0.40);
    let bracket = g(lo) < 0.0 && g(hi) > 0.0;
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if g(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let cross = 0.5 * (lo + hi);
    let cross_ok = bracket && (third - 1e-9..=0.40).contains(&cross);
    let secs = t.elapsed().as_secs_f64();

    let pass =
        sym_ok && reduce_gap < 1e-6 && (0.55..=0.65).contains(&p1_star) && cross_ok && secs < 5.0;
    outcome(
        pass,
        format!(
            "symmetric fair: {sym_ok}; p3 -> 0 gap {reduce_gap:.1e}; p1* = {p1_star:.3}; \
             two-equal crosses 1 at {cross:.4}; {secs:.2} s"
        ),
    )
}

fn phase_structure() -> Outcome {
    let mut pass = true;
    let mut notes = Vec::new();
    for (i, p) in [0.55, 0.7, 0.85].into_iter().enumerate() {
        let (zero_based, _) = cluster_labels(20, p);
        let labels: Vec<u8> = zero_based.iter().map(|c| c + 1).collect();
        let delta = DeltaMatrix::clustered(&zero_based, 0.3, 1.5);
        let trace = round_oracle(&delta, &[1.0; 20], 100_000, 7 + i as u64).unwrap();
        match classify_phases(&trace, &labels) {
            Ok(phases) => {
                let covered: u64 = phases.iter().map(|ph| ph.end - ph.start + 1).sum();
                pass &= covered == 100_000;
                notes.push(format!(
                    "p {p}: {} phases cover {covered} rounds",
                    phases.len()
                ));
            }
            Err(e) => {
                pass = false;
                notes.push(format!("p {p}: {e}"));
            }
        }
    }
    outcome(pass, notes.join("; "))
}

fn low_latency_fairness() -> Outcome {
    let n = 20;
    let miners = MinerSpec::synthetic(n);
    let topo = Topology::complete(n);
    let lat = LatencyMatrix::uniform(n, 10.0);
    let fair = 100.0 / n as f64;
    let mut pass = true;
    let (mut w_max, mut f_lo, mut f_hi, mut slowest) = (0.0f64, f64::MAX, f64::MIN, 0.0f64);
    for seed in 0..5 {
        let t = Instant::now();
        let mut cfg = SimConfig::new(n, 60_000.0, 20_000, seed);
        cfg.validation_delay = 1.0;
        let res = run_simulation(&cfg, &topo, &lat).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let rep = compute_rewards(&res, &miners, 100).unwrap();
        for r in &rep.rows {
            w_max = w_max.max(r.w_pct);
            f_lo = f_lo.min(r.f_pct / fair);
            f_hi = f_hi.max(r.f_pct / fair);
        }
    }
    pass &= w_max < 1.0 && f_lo >= 0.7 && f_hi <= 1.3 && slowest < 120.0;
    outcome(
        pass,
        format!(
            "max w_pct {w_max:.3}%; f_pct / fair in [{f_lo:.3}, {f_hi:.3}]; slowest seed {slowest:.1} s"
        ),
    )
}

fn focal_degree() -> Outcome {
    let text = fs::read_to_string(manifest_dir().join("configs/toy_focal_degree.toml")).unwrap();
    let cfg = ExperimentConfig::from_toml(&text, &manifest_dir().join("configs")).unwrap();
    assert_eq!(cfg.sim.target_chain_length, 10_000);
    let net = load_network(&cfg.network, 0.0).unwrap();
    let seeds = derive_seeds(cfg.seed, 5);
    let mut means = Vec::new();
    for d in [1usize, 4, 10, 25, 50, 80] {
        let mut policy = cfg.topology.clone();
        policy.overrides.push(Override {
            select: Selector::Ids(vec![99]),
            out_degree: d,
        });
        let cell = run_cell(&cfg, &net, &policy, &seeds, 1).unwrap();
        means.push((d, cell.aggregate.rows[99].f_mean));
    }
    let first = means[0].1;
    let last = means[5].1;
    let (best_d, best) =
        means[1..5]
            .iter()
            .copied()
            .fold((0, f64::MIN), |a, b| if b.1 > a.1 { b } else { a });
    let table: Vec<String> = means.iter().map(|(d, f)| format!("{d}:{f:.3}")).collect();
    outcome(
        best > first && best > last,
        format!(
            "focal f_pct by degree [{}]; best mid-range degree {best_d}",
            table.join(" ")
        ),
    )
}

fn world_bias() -> Outcome {
    let data = manifest_dir().join("data");
    let miners = load_placement_csv(data.join("placement.csv")).unwrap();
    let lat = load_latency_csv(data.join("latency.csv"))
        .unwrap()
        .miner_matrix(&miners, 0.5)
        .unwrap();
    let dominant = |c: Continent| matches!(c, Continent::EU | Continent::NA);
    let mut wins = 0;
    let mut notes = Vec::new();
    let mut slowest = 0.0f64;
    for seed in derive_seeds(2024, 10) {
        let t = Instant::now();
        let topo = build_topology(&TopologyPolicy::random(6), &miners, seed).unwrap();
        let cfg = SimConfig::new(miners.len(), 15_000.0, 20_000, seed);
        let res = run_simulation(&cfg, &topo, &lat).unwrap();
        slowest = slowest.max(t.elapsed().as_secs_f64());
        let rep = compute_rewards(&res, &miners, 100).unwrap();
        let mean = |want: bool| {
            let xs: Vec<f64> = rep
                .rows
                .iter()
                .filter(|r| dominant(r.continent) == want)
                .map(|r| r.f_pct)
                .collect();
            xs.iter().sum::<f64>() / xs.len() as f64
        };
        let (a, b) = (mean(true), mean(false));
        if a > 0.4067 && b < 0.4067 {
            wins += 1;
        }
        notes.push(format!("{a:.4}/{b:.4}"));
    }
    outcome(
        wins >= 9 && slowest < 900.0,
        format!(
            "{wins}/10 runs with EU+NA above and the rest below 0.4067 (EU+NA/rest: {}); slowest seed {slowest:.1} s",
            notes.join(" ")
        ),
    )
}

/// Maximizer over the sampled range of the least-squares parabola through
/// `(x, y)`.
fn parabola_peak(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let s = |k: i32| xs.iter().map(|x| x.powi(k)).sum::<f64>();
    let t = |k: i32| xs.iter().zip(ys).map(|(x, y)| x.powi(k) * y).sum::<f64>();
    // normal equations for y = a + b x + c x^2
    let m = [[n, s(1), s(2)], [s(1), s(2), s(3)], [s(2), s(3), s(4)]];
    let r = [t(0), t(1), t(2)];
    let det = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(m);
    let col = |j: usize| {
        let mut mm = m;
        for i in 0..3 {
            mm[i][j] = r[i];
        }
        det(mm) / d
    };
    let (a, b, c) = (col(0), col(1), col(2));
    let (lo, hi) = (xs[0], xs[xs.len() - 1]);
    (0..=1000)
        .map(|k| lo + (hi - lo) * k as f64 / 1000.0)
        .max_by(|x, y| (a + b * x + c * x * x).total_cmp(&(a + b * y + c * y * y)))
        .unwrap()
}

fn cluster_size_vs_delay() -> Outcome {
    let sizes = [0.5, 0.55, 0.6, 0.65, 0.7, 0.75, 0.8, 0.85, 0.9];
    let text = "[sim]\nmean_interblock = 2400.0\nvalidation_delay = 0.0\ntarget_chain_length = 2000\ndiscard_tail = 100\n\
                [network]\nkind = \"two_cluster\"\nn = 60\nfraction = 0.7\neps = 1.0\ndelta = 10.0\n\
                [topology]\ngroups = [{ name = \"all\", select = \"all\", intra = \"complete\" }]\n";
    let cfg = ExperimentConfig::from_toml(text, Path::new(".")).unwrap();
    let seeds = derive_seeds(9, 3);
    let mut optima = Vec::new();
    let mut notes = Vec::new();
    for delta in [10.0, 100.0, 1000.0] {
        let mut gains = Vec::new();
        for &f in &sizes {
            let mut spec = cfg.network.clone();
            spec.fraction = Some(f);
            spec.delta = Some(delta);
            let net = load_network(&spec, 0.0).unwrap();
            let cell = run_cell(&cfg, &net, &cfg.topology, &seeds, 1).unwrap();
            gains
                .push(cell.group_f_pct(net.dominant.as_deref().unwrap()) / cell.aggregate.fair_pct);
        }
        let peak = parabola_peak(&sizes, &gains);
        let raw = sizes[gains
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap()
            .0];
        optima.push(peak);
        let g: Vec<String> = gains.iter().map(|x| format!("{x:.3}")).collect();
        notes.push(format!(
            "delta {delta}: gains [{}], fitted optimum {peak:.3}, raw argmax {raw}",
            g.join(" ")
        ));
    }
    let pass = optima[0] >= optima[1] && optima[1] >= optima[2];
    outcome(pass, notes.join("; "))
}

fn determinism() -> Outcome {
    let tmp = std::env::temp_dir().join(format!("topomine_acceptance_{}", std::process::id()));
    let _ = fs::remove_dir_all(&tmp);
    fs::create_dir_all(&tmp).unwrap();
    let data = manifest_dir().join("data");
    let cfg = tmp.join("world.toml");
    fs::write(
        &cfg,
        format!(
            "runs = 2\nseed = 77\n[sim]\ntarget_chain_length = 1500\n[network]\nplacement = {:?}\nlatency = {:?}\n",
            data.join("placement.csv"),
            data.join("latency.csv")
        ),
    )
    .unwrap();
    let run = |out: &Path, jobs: &str| {
        Command::new(env!("CARGO_BIN_EXE_topomine"))
            .args([
                "simulate",
                "--config",
                cfg.to_str().unwrap(),
                "--out",
                out.to_str().unwrap(),
                "--jobs",
                jobs,
            ])
            .output()
            .unwrap()
            .status
            .success()
    };
    let (a, b) = (tmp.join("a"), tmp.join("b"));
    let ran = run(&a, "1") && run(&b, "2");
    let files = [
        "run_00.csv",
        "run_01.csv",
        "aggregate.csv",
        "continents.csv",
    ];
    let same = ran
        && files.iter().all(|f| {
            fs::read(a.join(f))
                .ok()
                .is_some_and(|x| Some(x) == fs::read(b.join(f)).ok())
        });
    let _ = fs::remove_dir_all(&tmp);
    outcome(
        same,
        format!("two invocations ran: {ran}; reward CSVs byte-identical: {same}"),
    )
}

fn main() {
    let mut failed = 0;
    let mut report = |id: u32, f: &dyn Fn() -> Outcome| {
        let t = Instant::now();
        let o = f();
        println!(
            "criterion {id:>2}: {}  ({:.1} s) {}",
            if o.pass { "PASS" } else { "FAIL" },
            t.elapsed().as_secs_f64(),
            o.detail
        );
        if !o.pass {
            failed += 1;
        }
    };
    report(1, &single_cluster_regimes);
    let (traces, secs) = two_cluster_traces();
    report(2, &|| two_cluster_formula(&traces, secs));
    report(3, &|| wastage(&traces));
    report(4, &three_clusters);
    report(5, &phase_structure);
    report(6, &low_latency_fairness);
    report(7, &focal_degree);
    report(8, &world_bias);
    report(9, &cluster_size_vs_delay);
    report(10, &determinism);
    println!(
        "acceptance: {} of 10 criteria passed, {failed} failed",
        10 - failed
    );
    let strict = std::env::var("TOPOMINE_ACCEPTANCE_STRICT").is_ok_and(|v| v == "1");
    if failed > 0 && strict {
        std::process::exit(1);
    }
}
