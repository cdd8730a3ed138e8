use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pml::baseline::ThresholdResult;
use pml::calibration::CalibrationResult;
use pml::population::{CriticalMassPoint, SimulationRun};
use pml::replicator::{EquilibriumSet, Trajectory};
use pml::scenario::{BifurcationDiagram, ScenarioResult};
use serde::de::DeserializeOwned;

const REPLICATOR: &[&str] = &[
    "--alpha-net",
    "0.2",
    "--gamma",
    "2",
    "--p0",
    "0.2",
    "--alpha-mit",
    "0.5",
    "--k",
    "2",
    "--epsilon",
    "0.05",
    "--loss",
    "0.5",
];

const BASELINE: &[&str] = &[
    "--p0",
    "0.2",
    "--alpha-mit",
    "0.5",
    "--k",
    "2",
    "--epsilon",
    "0.05",
    "--loss",
    "0.5",
    "--theta",
    "0.1",
    "--ns",
    "0.9",
    "--na",
    "0.1",
];

fn pml(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pml"))
        .args(args)
        .env_remove("PML_THREADS")
        .output()
        .expect("binary runs")
}

fn with(base: &[&str], extra: &[&str]) -> Vec<String> {
    base.iter().chain(extra).map(|s| s.to_string()).collect()
}

fn run(cmd: &str, base: &[&str], extra: &[&str]) -> Output {
    let mut args = vec![cmd.to_string()];
    args.extend(with(base, extra));
    let refs: Vec<&str> = args.iter().map(String::as_str).collect();
    pml(&refs)
}

fn golden(name: &str) -> Vec<u8> {
    let path = Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/golden")
        .join(name);
    fs::read(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("fixtures")
        .join(name)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn json<T: DeserializeOwned>(out: &Output) -> T {
    assert_eq!(out.status.code(), Some(0), "{}", stderr(out));
    assert!(out.stdout.ends_with(b"}\n") || out.stdout.ends_with(b"]\n"));
    serde_json::from_slice(&out.stdout).expect("output re-parses")
}

#[test]
fn threshold_golden() {
    let out = run("threshold", BASELINE, &["--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(out.stdout, golden("threshold.json"));
    let r: ThresholdResult = json(&out);
    assert!((r.p_star - 0.2707386).abs() < 1e-6);
    assert_eq!(format!("{:?}", r.decision_at_p0), "Stay");
}

#[test]
fn equilibria_golden() {
    let out = run("equilibria", REPLICATOR, &[]);
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(out.stdout, golden("equilibria.csv"));
    assert_eq!(
        String::from_utf8(out.stdout).unwrap(),
        "share,stability\n0,Stable\n0.4140625,Unstable\n1,Stable\n"
    );
}

#[test]
fn simulate_zero_golden() {
    let out = run(
        "simulate",
        REPLICATOR,
        &["--s0", "0", "--t-end", "2", "--dt", "0.25"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    assert_eq!(out.stdout, golden("simulate_s0_zero.csv"));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().skip(1).all(|l| l.ends_with(",0")));
}

#[test]
fn outputs_are_reproducible() {
    let args = [
        "--n-agents",
        "300",
        "--rounds",
        "40",
        "--initial-share-alt",
        "0.5",
        "--seed",
        "11",
    ];
    let model = [
        "--p0",
        "0.2",
        "--alpha-mit",
        "0.5",
        "--k",
        "2",
        "--epsilon",
        "0.05",
        "--loss",
        "0.45",
        "--theta",
        "0.2",
    ];
    let a = run("abm", &model, &args);
    let b = run("abm", &model, &args);
    assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(String::from_utf8(a.stdout).unwrap().lines().count(), 42);
}

#[test]
fn misspelled_flag_exits_2() {
    let out = run("simulate", REPLICATOR, &["--s0", "0.5", "--gama", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("--gama"));
}

#[test]
fn misspelled_config_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"params": {"s0": 0.5, "alpha_nett": 0.2}}"#).unwrap();
    let out = run("simulate", REPLICATOR, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("alpha_nett"), "{}", stderr(&out));

    fs::write(&cfg, r#"{"parms": {}}"#).unwrap();
    let out = run("simulate", REPLICATOR, &["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("parms"), "{}", stderr(&out));
}

#[test]
fn invalid_value_names_the_field() {
    let out = run("threshold", &BASELINE[..14], &["--na", "1.5"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("n_a"), "{}", stderr(&out));

    let out = run("simulate", REPLICATOR, &[]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("s0"), "{}", stderr(&out));
}

#[test]
fn config_supplies_params_and_flags_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"command": "threshold", "format": "json", "params": {
            "p0": 0.9, "alpha_mit": 0.5, "k": 2, "epsilon": 0.05, "loss": 0.5,
            "theta": 0.1, "n_s": 0.9, "n_a": 0.1}}"#,
    )
    .unwrap();
    let out = pml(&[
        "threshold",
        "--config",
        cfg.to_str().unwrap(),
        "--p0",
        "0.2",
    ]);
    assert_eq!(out.stdout, golden("threshold.json"));

    let out = pml(&["effort", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("command"));
}

#[test]
fn output_flag_and_runtime_failure() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("eq.csv");
    let out = run(
        "equilibria",
        REPLICATOR,
        &["--output", path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    assert_eq!(fs::read(&path).unwrap(), golden("equilibria.csv"));

    let out = run(
        "equilibria",
        REPLICATOR,
        &["--output", "/nonexistent-dir/eq.csv"],
    );
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn thread_cap_is_validated() {
    let out = Command::new(env!("CARGO_BIN_EXE_pml"))
        .args(["equilibria"])
        .args(REPLICATOR)
        .env("PML_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("PML_THREADS"));

    let out = Command::new(env!("CARGO_BIN_EXE_pml"))
        .args(["equilibria"])
        .args(REPLICATOR)
        .env("PML_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(out.stdout, golden("equilibria.csv"));
}

#[test]
fn json_round_trips() {
    let _: ThresholdResult = json(&run("threshold", BASELINE, &["--format", "json"]));
    let _: pml::baseline::EffortSolution = json(&run("effort", BASELINE, &["--format", "json"]));
    let _: EquilibriumSet = json(&run("equilibria", REPLICATOR, &["--format", "json"]));
    let t: Trajectory = json(&run(
        "simulate",
        REPLICATOR,
        &["--s0", "0.5", "--t-end", "1", "--format", "json"],
    ));
    assert_eq!(t.len(), 101);
    let s: ScenarioResult = json(&run(
        "scenario",
        REPLICATOR,
        &[
            "--s0",
            "0.3",
            "--t-end",
            "20",
            "--shock",
            "5:p0:0.35",
            "--format",
            "json",
        ],
    ));
    assert_eq!(s.tipping_events.len(), 1);
    let d: BifurcationDiagram = json(&run(
        "sweep",
        REPLICATOR,
        &[
            "--parameter",
            "p0",
            "--lo",
            "0.1",
            "--hi",
            "0.5",
            "--n",
            "5",
            "--format",
            "json",
        ],
    ));
    assert_eq!(d.samples.len(), 5);
    let h: pml::cli::HysteresisReport = json(&run(
        "hysteresis",
        REPLICATOR,
        &[
            "--parameter",
            "p0",
            "--lo",
            "0.05",
            "--hi",
            "1",
            "--n",
            "20",
            "--format",
            "json",
        ],
    ));
    assert!(h.hysteresis);

    let model = [
        "--p0",
        "0.2",
        "--alpha-mit",
        "0.5",
        "--k",
        "2",
        "--epsilon",
        "0.05",
        "--loss",
        "0.45",
        "--theta",
        "0.2",
    ];
    let r: SimulationRun = json(&run(
        "abm",
        &model,
        &[
            "--n-agents",
            "100",
            "--rounds",
            "10",
            "--initial-share-alt",
            "0.5",
            "--format",
            "json",
        ],
    ));
    assert_eq!(r.share_path.len(), 11);
    let c: Vec<CriticalMassPoint> = json(&run(
        "abm",
        &model,
        &[
            "--n-agents",
            "100",
            "--rounds",
            "10",
            "--share-grid",
            "0,1",
            "--format",
            "json",
        ],
    ));
    assert_eq!(c.len(), 2);

    let series = fixture("rmb_payments_share.csv");
    let cal: CalibrationResult = json(&run(
        "calibrate",
        REPLICATOR,
        &[
            "--series",
            series.to_str().unwrap(),
            "--free",
            "p0",
            "--bound",
            "p0=0.1:0.6",
            "--format",
            "json",
        ],
    ));
    assert_eq!(cal.fitted_path.len(), 6);
}

#[test]
fn plot_files() {
    let dir = tempfile::tempdir().unwrap();
    let plot = dir.path().join("plot.csv");
    let out = run(
        "simulate",
        REPLICATOR,
        &[
            "--s0",
            "0.5",
            "--t-end",
            "1",
            "--dt",
            "0.5",
            "--plot",
            plot.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&plot).unwrap().lines().count(), 4);

    let series = fixture("usd_reserve_share.csv");
    let out = run(
        "calibrate",
        REPLICATOR,
        &[
            "--series",
            series.to_str().unwrap(),
            "--plot",
            plot.to_str().unwrap(),
        ],
    );
    assert_eq!(out.status.code(), Some(0), "{}", stderr(&out));
    let text = fs::read_to_string(&plot).unwrap();
    assert!(text.starts_with("x,y,label\n"));
    assert_eq!(text.lines().count(), 1 + 2 * 24);
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("period,share\n2000,0.711\n"));
}

#[test]
fn bad_series_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("s.csv");
    fs::write(&path, "period,share\n2018,0.1\n2019,x\n").unwrap();
    let out = run(
        "calibrate",
        REPLICATOR,
        &["--series", path.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("line 3"), "{}", stderr(&out));
}
