//! `pml` command-line front end.
//!
//! Every subcommand reads a flat parameter object. It is assembled from the
//! `params` member of an optional `--config` JSON file, then overridden by any
//! flags given, then deserialized strictly, so a misspelled key is reported by
//! name. Config files look like
//!
//! ```json
//! { "command": "threshold", "format": "json", "params": { "p0": 0.2, ... } }
//! ```
//!
//! Exit status: 0 on success, 2 for invalid input, 3 when a valid run fails.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::baseline::{critical_threshold, optimal_effort, BaselineParams};
use crate::calibration::{fit_replicator, load_series};
use crate::error::Error;
use crate::plot::{write_plot_rows, PlotRow, PlotSeries};
use crate::population::{
    critical_mass_experiment, run_population, Heterogeneity, PopulationConfig,
    DEFAULT_REVISION_RATE,
};
use crate::replicator::{
    find_equilibria, integrate, ReplicatorField, ReplicatorParams, DEFAULT_DT, DEFAULT_GAP_TOL,
    DEFAULT_GRID_N, DEFAULT_T_END,
};
use crate::scenario::{
    hysteresis_scan, run_scenario, shows_hysteresis, sweep, HysteresisPoint, ScanRange, Shock,
    ShockSchedule,
};

/// Environment variable capping worker threads.
pub const THREADS_ENV: &str = "PML_THREADS";

#[derive(Debug, Parser)]
#[command(
    name = "pml",
    version,
    about = "Sanctions-risk switching models: thresholds, dynamics, simulation, calibration"
)]
pub struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Optimal mitigation effort of an incumbent-system user.
    Effort(BaselineCmd),
    /// Critical sanction probability and the stay/switch decision.
    Threshold(BaselineCmd),
    /// Equilibria of the replicator dynamics and their stability.
    Equilibria(EquilibriaCmd),
    /// Integrate the replicator ODE.
    Simulate(SimulateCmd),
    /// Integrate under a schedule of parameter shocks.
    Scenario(ScenarioCmd),
    /// Equilibria across a range of one parameter.
    Sweep(SweepCmd),
    /// Up and down quasi-static scans of one parameter.
    Hysteresis(HysteresisCmd),
    /// Agent-based population simulation.
    Abm(AbmCmd),
    /// Fit replicator parameters to a share series.
    Calibrate(CalibrateCmd),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Effort(_) => "effort",
            Command::Threshold(_) => "threshold",
            Command::Equilibria(_) => "equilibria",
            Command::Simulate(_) => "simulate",
            Command::Scenario(_) => "scenario",
            Command::Sweep(_) => "sweep",
            Command::Hysteresis(_) => "hysteresis",
            Command::Abm(_) => "abm",
            Command::Calibrate(_) => "calibrate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum Format {
    Csv,
    Json,
}

#[derive(Debug, Args)]
struct IoArgs {
    /// JSON run configuration; flags override its entries.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Output format [default: csv].
    #[arg(long, value_enum)]
    format: Option<Format>,
    /// Write the result here instead of standard output.
    #[arg(long, value_name = "PATH")]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct PlotArg {
    /// Also write plot-ready `x,y[,label]` CSV here.
    #[arg(long, value_name = "PATH")]
    plot: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct BaselineFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_mit: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    /// Incumbent network share.
    #[arg(long = "ns")]
    #[serde(rename = "n_s", skip_serializing_if = "Option::is_none")]
    n_s: Option<f64>,
    /// Alternative network share.
    #[arg(long = "na")]
    #[serde(rename = "n_a", skip_serializing_if = "Option::is_none")]
    n_a: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct ReplicatorFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_net: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_mit: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct HorizonFlags {
    /// Initial share on the alternative system.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    s0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    t_end: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct RangeFlags {
    /// Parameter to scan.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    parameter: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lo: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    hi: Option<f64>,
    /// Number of samples, endpoints included.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
}

#[derive(Debug, Args)]
struct BaselineCmd {
    #[command(flatten)]
    model: BaselineFlags,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Debug, Args, Serialize)]
struct EquilibriaFlags {
    /// Grid resolution for the root scan.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    grid_n: Option<usize>,
    /// Gap tolerance for roots.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    tol: Option<f64>,
}

#[derive(Debug, Args)]
struct EquilibriaCmd {
    #[command(flatten)]
    model: ReplicatorFlags,
    #[command(flatten)]
    extra: EquilibriaFlags,
    #[command(flatten)]
    io: IoArgs,
}

#[derive(Debug, Args)]
struct SimulateCmd {
    #[command(flatten)]
    model: ReplicatorFlags,
    #[command(flatten)]
    horizon: HorizonFlags,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    plot: PlotArg,
}

#[derive(Debug, Args)]
struct ScenarioCmd {
    #[command(flatten)]
    model: ReplicatorFlags,
    #[command(flatten)]
    horizon: HorizonFlags,
    /// Parameter shock `TIME:FIELD:VALUE`; repeat for several. Replaces
    /// any shocks from the config file.
    #[arg(long = "shock", value_name = "TIME:FIELD:VALUE", value_parser = parse_shock)]
    shocks: Vec<Shock>,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    plot: PlotArg,
}

#[derive(Debug, Args)]
struct SweepCmd {
    #[command(flatten)]
    model: ReplicatorFlags,
    #[command(flatten)]
    range: RangeFlags,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    plot: PlotArg,
}

#[derive(Debug, Args, Serialize)]
struct HysteresisFlags {
    /// Share the upward scan starts from.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    start_share: Option<f64>,
    /// Relaxation time at each parameter value.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    relax_t: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    dt: Option<f64>,
}

#[derive(Debug, Args)]
struct HysteresisCmd {
    #[command(flatten)]
    model: ReplicatorFlags,
    #[command(flatten)]
    range: RangeFlags,
    #[command(flatten)]
    extra: HysteresisFlags,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    plot: PlotArg,
}

#[derive(Debug, Args, Serialize)]
struct AbmFlags {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    p0: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha_mit: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    k: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    epsilon: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    loss: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    theta: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n_agents: Option<usize>,
    /// Per-round revision probability.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    revision_rate: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rounds: Option<usize>,
    /// Initial share on the alternative system.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    initial_share_alt: Option<f64>,
    /// Run a critical-mass experiment over these initial shares.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    #[serde(skip_serializing_if = "Option::is_none")]
    share_grid: Option<Vec<f64>>,
    /// Runs per grid point in a critical-mass experiment.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    replicates: Option<usize>,
}

#[derive(Debug, Args)]
struct AbmCmd {
    #[command(flatten)]
    model: AbmFlags,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    plot: PlotArg,
}

#[derive(Debug, Args)]
struct CalibrateCmd {
    #[command(flatten)]
    model: ReplicatorFlags,
    /// Share series CSV.
    #[arg(long, value_name = "PATH")]
    series: Option<PathBuf>,
    /// Parameters to fit, comma separated.
    #[arg(long, value_delimiter = ',', num_args = 1..)]
    free: Option<Vec<String>>,
    /// Search interval `NAME=LO:HI`; repeat per free parameter.
    #[arg(long = "bound", value_name = "NAME=LO:HI", value_parser = parse_bound)]
    bounds: Vec<(String, (f64, f64))>,
    #[arg(long)]
    dt: Option<f64>,
    #[command(flatten)]
    io: IoArgs,
    #[command(flatten)]
    plot: PlotArg,
}

fn parse_shock(s: &str) -> Result<Shock, String> {
    let parts: Vec<&str> = s.split(':').collect();
    let [time, field, value] = parts[..] else {
        return Err(format!("`{s}` is not TIME:FIELD:VALUE"));
    };
    Ok(Shock {
        time: time
            .parse()
            .map_err(|_| format!("shock time `{time}` is not a number"))?,
        field: field.parse().map_err(|e: Error| e.to_string())?,
        value: value
            .parse()
            .map_err(|_| format!("shock value `{value}` is not a number"))?,
    })
}

fn parse_bound(s: &str) -> Result<(String, (f64, f64)), String> {
    let bad = || format!("`{s}` is not NAME=LO:HI");
    let (name, range) = s.split_once('=').ok_or_else(bad)?;
    let (lo, hi) = range.split_once(':').ok_or_else(bad)?;
    let lo = lo.parse().map_err(|_| bad())?;
    let hi = hi.parse().map_err(|_| bad())?;
    Ok((name.to_string(), (lo, hi)))
}

/// A failure with its exit status.
#[derive(Debug)]
struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn input(message: impl Into<String>) -> Self {
        Failure {
            code: 2,
            message: message.into(),
        }
    }

    fn runtime(message: impl Into<String>) -> Self {
        Failure {
            code: 3,
            message: message.into(),
        }
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = if e.is_validation() { 2 } else { 3 };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

/// Top level of a `--config` file.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    command: Option<String>,
    #[serde(default)]
    params: Map<String, Value>,
    output: Option<PathBuf>,
    format: Option<Format>,
    seed: Option<u64>,
}

/// Resolved invocation: merged parameters plus output settings.
struct Run {
    params: Map<String, Value>,
    format: Format,
    output: Option<PathBuf>,
    seed: Option<u64>,
}

impl Run {
    fn new<F: Serialize>(command: &str, io: &IoArgs, flags: &[&F]) -> CliResult<Self> {
        let file = match &io.config {
            Some(path) => {
                let text = fs::read_to_string(path).map_err(|e| {
                    Failure::input(format!("cannot read config {}: {e}", path.display()))
                })?;
                let cfg: FileConfig = serde_json::from_str(&text)
                    .map_err(|e| Failure::input(format!("config {}: {e}", path.display())))?;
                if let Some(c) = &cfg.command {
                    if c != command {
                        return Err(Failure::input(format!(
                            "config field `command` is `{c}` but the subcommand is `{command}`"
                        )));
                    }
                }
                cfg
            }
            None => FileConfig {
                command: None,
                params: Map::new(),
                output: None,
                format: None,
                seed: None,
            },
        };
        let mut params = file.params;
        for f in flags {
            match serde_json::to_value(f) {
                Ok(Value::Object(m)) => params.extend(m),
                Ok(_) => unreachable!("flag groups serialize to objects"),
                Err(e) => return Err(Failure::input(format!("flag value: {e}"))),
            }
        }
        Ok(Run {
            params,
            format: io.format.or(file.format).unwrap_or(Format::Csv),
            output: io.output.clone().or(file.output),
            seed: file.seed,
        })
    }

    fn insert(&mut self, key: &str, value: Value) {
        self.params.insert(key.to_string(), value);
    }

    /// Removes and parses an optional entry.
    fn take<T: DeserializeOwned>(&mut self, key: &str) -> CliResult<Option<T>> {
        match self.params.remove(key) {
            None | Some(Value::Null) => Ok(None),
            Some(v) => serde_json::from_value(v)
                .map(Some)
                .map_err(|e| Failure::input(format!("field `{key}`: {e}"))),
        }
    }

    fn require<T: DeserializeOwned>(&mut self, key: &str) -> CliResult<T> {
        self.take(key)?
            .ok_or_else(|| Failure::input(format!("missing field `{key}`")))
    }

    /// Deserializes everything not yet taken; unknown keys are errors.
    fn rest<T: DeserializeOwned>(&mut self) -> CliResult<T> {
        let rest = std::mem::take(&mut self.params);
        serde_json::from_value(Value::Object(rest))
            .map_err(|e| Failure::input(format!("params: {e}")))
    }

    fn emit<T: Serialize>(&self, value: &T, csv: impl FnOnce() -> Table) -> CliResult<()> {
        let bytes = match self.format {
            Format::Json => {
                let mut s = serde_json::to_string_pretty(value)
                    .map_err(|e| Failure::runtime(format!("serializing output: {e}")))?;
                s.push('\n');
                s.into_bytes()
            }
            Format::Csv => csv().to_bytes(),
        };
        write_bytes(self.output.as_deref(), &bytes)
    }
}

fn write_bytes(path: Option<&Path>, bytes: &[u8]) -> CliResult<()> {
    let result = match path {
        Some(p) => fs::write(p, bytes),
        None => io::stdout().lock().write_all(bytes),
    };
    result.map_err(|e| {
        let target = path.map_or("standard output".to_string(), |p| p.display().to_string());
        Failure::runtime(format!("cannot write {target}: {e}"))
    })
}

fn emit_plot(path: Option<&Path>, rows: Vec<PlotRow>) -> CliResult<()> {
    let Some(path) = path else { return Ok(()) };
    let mut buf = Vec::new();
    write_plot_rows(&rows, &mut buf)?;
    write_bytes(Some(path), &buf)
}

/// Header plus rows of already formatted cells.
struct Table {
    header: Vec<&'static str>,
    rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&'static str]) -> Self {
        Table {
            header: header.to_vec(),
            rows: Vec::new(),
        }
    }

    fn row(&mut self, cells: Vec<String>) {
        self.rows.push(cells);
    }

    fn to_bytes(&self) -> Vec<u8> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header).expect("writing to memory");
        for r in &self.rows {
            w.write_record(r).expect("writing to memory");
        }
        w.into_inner().expect("writing to memory")
    }
}

/// Serialized name of a unit enum variant.
fn variant<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(Value::String(s)) => s,
        other => format!("{other:?}"),
    }
}

fn f(x: f64) -> String {
    x.to_string()
}

fn run_effort(cmd: &BaselineCmd) -> CliResult<()> {
    let mut run = Run::new("effort", &cmd.io, &[&cmd.model])?;
    let params: BaselineParams = run.rest()?;
    let sol = optimal_effort(&params);
    run.emit(&sol, || {
        let mut t = Table::new(&["e_star", "p_at_e_star", "eu_s_star", "boundary_hit"]);
        t.row(vec![
            f(sol.e_star),
            f(sol.p_at_e_star),
            f(sol.eu_s_star),
            variant(&sol.boundary_hit),
        ]);
        t
    })
}

fn run_threshold(cmd: &BaselineCmd) -> CliResult<()> {
    let mut run = Run::new("threshold", &cmd.io, &[&cmd.model])?;
    let params: BaselineParams = run.rest()?;
    let res = critical_threshold(&params);
    run.emit(&res, || {
        let mut t = Table::new(&["p_star", "p_star_range", "decision_at_p0", "eu_gap"]);
        t.row(vec![
            f(res.p_star),
            variant(&res.p_star_range),
            variant(&res.decision_at_p0),
            f(res.eu_gap),
        ]);
        t
    })
}

fn run_equilibria(cmd: &EquilibriaCmd) -> CliResult<()> {
    let mut run = Run::new("equilibria", &cmd.io, &[&cmd.model])?;
    run.params.extend(to_map(&cmd.extra)?);
    let grid_n = run.take("grid_n")?.unwrap_or(DEFAULT_GRID_N);
    let tol = run.take("tol")?.unwrap_or(DEFAULT_GAP_TOL);
    let params: ReplicatorParams = run.rest()?;
    if grid_n < 2 {
        return Err(Failure::input(format!(
            "field `grid_n`: {grid_n} is below 2"
        )));
    }
    if !(tol >= 0.0) {
        return Err(Failure::input(format!("field `tol`: {tol} is negative")));
    }
    let set = find_equilibria(&params, grid_n, tol);
    run.emit(&set, || {
        let mut t = Table::new(&["share", "stability"]);
        for eq in &set.points {
            t.row(vec![f(eq.share), eq.stability.to_string()]);
        }
        t
    })
}

fn to_map<T: Serialize>(v: &T) -> CliResult<Map<String, Value>> {
    match serde_json::to_value(v) {
        Ok(Value::Object(m)) => Ok(m),
        Ok(_) => unreachable!("flag groups serialize to objects"),
        Err(e) => Err(Failure::input(format!("flag value: {e}"))),
    }
}

fn trajectory_table(times: &[f64], shares: &[f64]) -> Table {
    let mut t = Table::new(&["time", "share"]);
    for (&x, &s) in times.iter().zip(shares) {
        t.row(vec![f(x), f(s)]);
    }
    t
}

fn run_simulate(cmd: &SimulateCmd) -> CliResult<()> {
    let mut run = Run::new("simulate", &cmd.io, &[&cmd.model])?;
    run.params.extend(to_map(&cmd.horizon)?);
    let s0: f64 = run.require("s0")?;
    let t_end = run.take("t_end")?.unwrap_or(DEFAULT_T_END);
    let dt = run.take("dt")?.unwrap_or(DEFAULT_DT);
    let params: ReplicatorParams = run.rest()?;
    let traj = integrate(s0, &params, t_end, dt)?;
    run.emit(&traj, || trajectory_table(&traj.times, &traj.shares))?;
    emit_plot(cmd.plot.plot.as_deref(), traj.plot_rows())
}

fn run_scenario_cmd(cmd: &ScenarioCmd) -> CliResult<()> {
    let mut run = Run::new("scenario", &cmd.io, &[&cmd.model])?;
    run.params.extend(to_map(&cmd.horizon)?);
    if !cmd.shocks.is_empty() {
        let shocks = serde_json::to_value(&cmd.shocks)
            .map_err(|e| Failure::input(format!("flag `--shock`: {e}")))?;
        run.insert("shocks", shocks);
    }
    let s0: f64 = run.require("s0")?;
    let t_end = run.take("t_end")?.unwrap_or(DEFAULT_T_END);
    let dt = run.take("dt")?.unwrap_or(DEFAULT_DT);
    let schedule: ShockSchedule = run.take("shocks")?.unwrap_or_default();
    let params: ReplicatorParams = run.rest()?;
    let res = run_scenario(s0, &params, &schedule, t_end, dt)?;
    run.emit(&res, || {
        trajectory_table(&res.trajectory.times, &res.trajectory.shares)
    })?;
    emit_plot(cmd.plot.plot.as_deref(), res.trajectory.plot_rows())
}

fn scan_range(run: &mut Run) -> CliResult<ScanRange> {
    let name: String = run.require("parameter")?;
    let parameter: ReplicatorField = name
        .parse()
        .map_err(|e: Error| Failure::input(format!("field `parameter`: {e}")))?;
    Ok(ScanRange {
        parameter,
        lo: run.require("lo")?,
        hi: run.require("hi")?,
        n: run.require("n")?,
    })
}

fn run_sweep(cmd: &SweepCmd) -> CliResult<()> {
    let mut run = Run::new("sweep", &cmd.io, &[&cmd.model])?;
    run.params.extend(to_map(&cmd.range)?);
    let range = scan_range(&mut run)?;
    let params: ReplicatorParams = run.rest()?;
    let diagram = sweep(&params, &range)?;
    run.emit(&diagram, || {
        let mut t = Table::new(&["value", "share", "stability"]);
        for s in &diagram.samples {
            for eq in &s.equilibria.points {
                t.row(vec![f(s.value), f(eq.share), eq.stability.to_string()]);
            }
        }
        t
    })?;
    emit_plot(cmd.plot.plot.as_deref(), diagram.plot_rows())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct HysteresisReport {
    pub parameter: ReplicatorField,
    pub points: Vec<HysteresisPoint>,
    pub hysteresis: bool,
}

fn run_hysteresis(cmd: &HysteresisCmd) -> CliResult<()> {
    let mut run = Run::new("hysteresis", &cmd.io, &[&cmd.model])?;
    run.params.extend(to_map(&cmd.range)?);
    run.params.extend(to_map(&cmd.extra)?);
    let range = scan_range(&mut run)?;
    let start_share = run.take("start_share")?.unwrap_or(0.01);
    let relax_t = run.take("relax_t")?.unwrap_or(50.0);
    let dt = run.take("dt")?.unwrap_or(DEFAULT_DT);
    let params: ReplicatorParams = run.rest()?;
    let points = hysteresis_scan(&params, &range, start_share, relax_t, dt)?;
    let report = HysteresisReport {
        parameter: range.parameter,
        hysteresis: shows_hysteresis(&points),
        points,
    };
    run.emit(&report, || {
        let mut t = Table::new(&["value", "up_share", "down_share"]);
        for p in &report.points {
            t.row(vec![f(p.value), f(p.up_share), f(p.down_share)]);
        }
        t
    })?;
    emit_plot(cmd.plot.plot.as_deref(), report.points.plot_rows())
}

fn run_abm(cmd: &AbmCmd) -> CliResult<()> {
    let mut run = Run::new("abm", &cmd.io, &[&cmd.model])?;
    for key in ["n_s", "n_a"] {
        if run.params.contains_key(key) {
            return Err(Failure::input(format!(
                "field `{key}`: shares are set by the population and cannot be configured"
            )));
        }
    }
    let seed = cmd.seed.or(run.seed).unwrap_or(0);
    let n_agents = run.require("n_agents")?;
    let revision_rate = run.take("revision_rate")?.unwrap_or(DEFAULT_REVISION_RATE);
    let rounds = run.require("rounds")?;
    let share_grid: Option<Vec<f64>> = run.take("share_grid")?;
    // A critical-mass experiment sets the initial share from its grid.
    let initial_share_alt = match share_grid {
        Some(_) => run.take("initial_share_alt")?.unwrap_or(0.0),
        None => run.require("initial_share_alt")?,
    };
    let heterogeneity: Heterogeneity = run.take("heterogeneity")?.unwrap_or_default();
    let replicates: Option<usize> = run.take("replicates")?;
    run.insert("n_s", Value::from(1.0));
    run.insert("n_a", Value::from(0.0));
    let base: BaselineParams = run.rest()?;
    let config = PopulationConfig {
        n_agents,
        revision_rate,
        rounds,
        seed,
        base,
        heterogeneity,
        initial_share_alt,
    };

    match share_grid {
        Some(grid) => {
            let curve = critical_mass_experiment(&config, &grid, replicates.unwrap_or(1))?;
            run.emit(&curve, || {
                let mut t = Table::new(&["initial_share", "mean_final_share"]);
                for p in &curve {
                    t.row(vec![f(p.initial_share), f(p.mean_final_share)]);
                }
                t
            })?;
            emit_plot(cmd.plot.plot.as_deref(), curve.plot_rows())
        }
        None => {
            if replicates.is_some() {
                return Err(Failure::input(
                    "field `replicates` applies only with `share_grid`",
                ));
            }
            let sim = run_population(&config)?;
            run.emit(&sim, || {
                let mut t = Table::new(&["round", "share", "sanctions"]);
                for (r, (s, n)) in sim.share_path.iter().zip(&sim.sanction_events).enumerate() {
                    t.row(vec![r.to_string(), f(*s), n.to_string()]);
                }
                t
            })?;
            emit_plot(cmd.plot.plot.as_deref(), sim.plot_rows())
        }
    }
}

fn run_calibrate(cmd: &CalibrateCmd) -> CliResult<()> {
    let mut run = Run::new("calibrate", &cmd.io, &[&cmd.model])?;
    if let Some(path) = &cmd.series {
        run.insert("series", Value::from(path.to_string_lossy().into_owned()));
    }
    if let Some(free) = &cmd.free {
        run.insert("free", Value::from(free.clone()));
    }
    if !cmd.bounds.is_empty() {
        let mut b = run
            .params
            .remove("bounds")
            .and_then(|v| v.as_object().cloned())
            .unwrap_or_default();
        for (name, (lo, hi)) in &cmd.bounds {
            b.insert(name.clone(), Value::from(vec![*lo, *hi]));
        }
        run.insert("bounds", Value::Object(b));
    }
    if let Some(dt) = cmd.dt {
        run.insert("dt", Value::from(dt));
    }

    let series_path: PathBuf = run.require("series")?;
    let free: Vec<ReplicatorField> = run.take("free")?.unwrap_or_default();
    let bounds: BTreeMap<ReplicatorField, (f64, f64)> = run.take("bounds")?.unwrap_or_default();
    let dt = run.take("dt")?.unwrap_or(DEFAULT_DT);
    let fixed: ReplicatorParams = run.rest()?;
    let series = load_series(&series_path).map_err(|e| match e {
        Error::Io(io) => Failure::input(format!(
            "cannot read series {}: {io}",
            series_path.display()
        )),
        other => Failure::input(format!("series {}: {other}", series_path.display())),
    })?;
    let res = fit_replicator(&series, &free, &bounds, &fixed, dt)?;
    match run.format {
        Format::Json => run.emit(&res, || unreachable!("json output"))?,
        Format::Csv => {
            let mut buf = Vec::new();
            res.fitted_path.write_csv(&mut buf)?;
            write_bytes(run.output.as_deref(), &buf)?;
        }
    }
    let mut rows = series.plot_rows();
    rows.extend(res.fitted_path.plot_rows());
    emit_plot(cmd.plot.plot.as_deref(), rows)
}

fn configure_threads() -> CliResult<()> {
    let Some(raw) = std::env::var_os(THREADS_ENV) else {
        return Ok(());
    };
    let n = raw
        .to_str()
        .and_then(|s| s.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Failure::input(format!("{THREADS_ENV} = {raw:?} is not a positive integer"))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::runtime(format!("cannot start {n} threads: {e}")))
}

fn execute(cli: &Cli) -> CliResult<()> {
    configure_threads()?;
    match &cli.command {
        Command::Effort(c) => run_effort(c),
        Command::Threshold(c) => run_threshold(c),
        Command::Equilibria(c) => run_equilibria(c),
        Command::Simulate(c) => run_simulate(c),
        Command::Scenario(c) => run_scenario_cmd(c),
        Command::Sweep(c) => run_sweep(c),
        Command::Hysteresis(c) => run_hysteresis(c),
        Command::Abm(c) => run_abm(c),
        Command::Calibrate(c) => run_calibrate(c),
    }
}

/// Parses `args` (program name first), runs the command and returns the
/// exit status. Diagnostics go to standard error.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(e.exit_code() as u8);
        }
    };
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("pml {}: {}", cli.command.name(), failure.message);
            ExitCode::from(failure.code)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shock_flag_syntax() {
        let s = parse_shock("5:p0:0.35").unwrap();
        assert_eq!((s.time, s.field, s.value), (5.0, ReplicatorField::P0, 0.35));
        assert!(parse_shock("5:p1:0.35").unwrap_err().contains("p1"));
        assert!(parse_shock("5:p0").is_err());
    }

    #[test]
    fn bound_flag_syntax() {
        assert_eq!(
            parse_bound("gamma=1.5:3").unwrap(),
            ("gamma".to_string(), (1.5, 3.0))
        );
        assert!(parse_bound("gamma=1.5").is_err());
    }

    #[test]
    fn cli_definition_is_consistent() {
        use clap::CommandFactory;
        Cli::command().debug_assert();
    }
}
