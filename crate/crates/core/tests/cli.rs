use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn topomine(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_topomine"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn small_config(dir: &Path) -> PathBuf {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "runs = 2\nseed = 3\n[sim]\nmean_interblock = 2000.0\ntarget_chain_length = 300\n\
         [network]\nkind = \"uniform\"\nn = 12\nlink_latency = 20.0\n",
    )
    .unwrap();
    path
}

#[test]
fn simulate_twice_gives_identical_csvs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for (out, jobs) in [(&a, "1"), (&b, "2")] {
        let o = topomine(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
            "--jobs",
            jobs,
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for f in [
        "run_00.csv",
        "run_01.csv",
        "aggregate.csv",
        "continents.csv",
        "runs.csv",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f}"
        );
    }
    let header = fs::read_to_string(a.join("run_00.csv")).unwrap();
    assert!(
        header.starts_with("miner_id,city,continent,blocks_mined,blocks_in_chain,f_pct,w_pct\n")
    );
    let agg = fs::read_to_string(a.join("aggregate.csv")).unwrap();
    assert!(agg.starts_with(
        "miner_id,city,continent,blocks_mined,blocks_in_chain,f_pct,w_pct,f_mean,f_ci95,w_mean,w_ci95\n"
    ));
    let ma = fs::read_to_string(a.join("manifest.toml")).unwrap();
    let mb = fs::read_to_string(b.join("manifest.toml")).unwrap();
    let hash = |m: &str| {
        m.lines()
            .find(|l| l.starts_with("config_sha256"))
            .unwrap()
            .to_string()
    };
    assert_eq!(hash(&ma), hash(&mb));
}

#[test]
fn seed_and_runs_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    let out = tmp.path().join("o");
    let o = topomine(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--runs",
        "3",
        "--seed",
        "99",
    ]);
    assert!(o.status.success());
    assert!(out.join("run_02.csv").is_file());
    let m = fs::read_to_string(out.join("manifest.toml")).unwrap();
    assert!(m.contains("root_seed = 99"));
}

#[test]
fn validation_errors_exit_1() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = tmp.path().join("bad.toml");
    fs::write(&bad, "[sim]\nmean_interblok = 1.0\n").unwrap();
    let o = topomine(&["simulate", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("sim.mean_interblok"));

    let o = topomine(&[
        "simulate",
        "--config",
        tmp.path().join("absent.toml").to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));

    fs::write(&bad, "[sim]\ntarget_chain_length = 50\ndiscard_tail = 60\n[network]\nkind = \"uniform\"\nn = 3\nlink_latency = 1.0\n").unwrap();
    assert_eq!(
        topomine(&["simulate", "--config", bad.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );

    assert_eq!(
        topomine(&["theory", "two", "--p", "0.3"]).status.code(),
        Some(1)
    );
    let o = topomine(&[
        "validate-data",
        "--placement",
        "/nonexistent/p.csv",
        "--latency",
        "/nonexistent/l.csv",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn runtime_failures_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path());
    // output directory path is an existing file
    let blocker = tmp.path().join("blocker");
    fs::write(&blocker, "x").unwrap();
    let o = topomine(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        blocker.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
}

#[test]
fn theory_anchors() {
    let o = topomine(&["theory", "two", "--p", "0.69", "--n", "246"]);
    assert!(o.status.success());
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let gain: f64 = row.split(',').nth(2).unwrap().parse().unwrap();
    assert!((gain - 1.29).abs() < 0.005, "{row}");

    let o = topomine(&["optimum", "two", "--step", "0.005"]);
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    let p: f64 = row.split(',').nth(1).unwrap().parse().unwrap();
    assert!((p - 0.69).abs() < 0.011, "{row}");

    let tmp = tempfile::tempdir().unwrap();
    let csv = tmp.path().join("three.csv");
    let o = topomine(&[
        "theory",
        "three",
        "--p1",
        "0.5",
        "--p2",
        "0.3",
        "--p3",
        "0.2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert_eq!(fs::read_to_string(&csv).unwrap(), stdout(&o));
}

#[test]
fn oracle_matches_formula_at_low_wastage_point() {
    let o = topomine(&[
        "oracle", "two", "--p", "0.9", "--n", "20", "--rounds", "200000", "--seed", "1",
    ]);
    assert!(o.status.success());
    let row: Vec<f64> = stdout(&o)
        .lines()
        .nth(1)
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    let (f, f_hat, se) = (row[1], row[2], row[3]);
    assert!((f - f_hat).abs() < 4.0 * se + 1e-4, "{row:?}");
}

#[test]
fn sweep_writes_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let path = tmp.path().join("sweep.toml");
    fs::write(
        &path,
        "runs = 1\n[sim]\nmean_interblock = 600.0\nvalidation_delay = 0.0\ntarget_chain_length = 200\ndiscard_tail = 20\n\
         [network]\nkind = \"two_cluster\"\nn = 10\nfraction = 0.6\neps = 1.0\ndelta = 50.0\n\
         [topology]\ngroups = [{ name = \"all\", select = \"all\", intra = \"complete\" }]\n\
         [sweep]\nfraction = [0.6, 0.8]\ndelta = [5.0, 50.0]\n",
    )
    .unwrap();
    let out = tmp.path().join("s");
    let o = topomine(&[
        "sweep",
        "--config",
        path.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let summary = fs::read_to_string(out.join("sweep_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 5);
    assert!(out.join("cell_003/aggregate.csv").is_file());

    // a config without a sweep section cannot be swept
    let plain = small_config(tmp.path());
    let o = topomine(&["sweep", "--config", plain.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn validate_data_reports_dataset() {
    let data = Path::new(env!("CARGO_MANIFEST_DIR")).join("data");
    let o = topomine(&[
        "validate-data",
        "--placement",
        data.join("placement.csv").to_str().unwrap(),
        "--latency",
        data.join("latency.csv").to_str().unwrap(),
    ]);
    assert!(o.status.success());
    assert!(stdout(&o).contains("miners: 246"));
}
