//! Command-line front end: scenario runs, parameter sweeps and mode
//! comparisons writing CSV traces and JSON summaries.
//!
//! Exit codes: 0 when every run completed (infeasible steps included), 2 when
//! a run stopped under the `halt` policy, 1 on usage or configuration errors.

use std::ffi::OsString;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::acc::{CdSchedule, Mode, ScenarioConfig, SCENARIOS};
use crate::sim::{summarize, InfeasiblePolicy, SimError, Summary, Trajectory};

/// Environment variable naming the default output directory.
pub const OUT_DIR_ENV: &str = "ADACBF_OUT_DIR";

/// Trace CSV header, in column order.
pub const CSV_COLUMNS: [&str; 16] = [
    "t",
    "x",
    "v",
    "x_p",
    "b",
    "psi1",
    "u",
    "nu1",
    "p1",
    "p2",
    "delta_acc",
    "delta1",
    "cd",
    "feasible",
    "solver_status",
    "solve_ms",
];

/// JSON schema of the per-run summary files.
pub const SUMMARY_SCHEMA: &str = include_str!("../schema/summary.schema.json");

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("config {path}: {message}")]
    Config { path: PathBuf, message: String },
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "adacbf", version, about = "AdaCBF / HOCBF safety filters on the ACC benchmark")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a scenario for one or more seeds.
    Run(ScenarioArgs),
    /// Run one summary per value of a parameter.
    Sweep(SweepArgs),
    /// Run the same scenario under several modes and align the traces.
    Compare(CompareArgs),
    /// Print the scenario library.
    ListScenarios,
}

#[derive(Debug, Clone, Default, Args)]
pub struct ScenarioArgs {
    /// Library scenario to start from (see list-scenarios).
    #[arg(long)]
    pub scenario: Option<String>,
    /// JSON scenario config; flags given alongside override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, value_parser = parse_mode)]
    pub mode: Option<Mode>,
    /// Constant braking coefficient c_d.
    #[arg(long, conflicts_with = "cd_ramp")]
    pub cd: Option<f64>,
    /// c_d ramp START:END[:DURATION] started when the safety row activates.
    #[arg(long, value_name = "START:END")]
    pub cd_ramp: Option<String>,
    /// Multiplier on the base noise amplitudes (2 m/s, 0.45 m/s^2).
    #[arg(long)]
    pub noise_scale: Option<f64>,
    #[arg(long, conflicts_with = "seeds")]
    pub seed: Option<u64>,
    /// Seed list: `A..B` (inclusive) or `a,b,c`.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long = "p1-0")]
    pub p1_0: Option<f64>,
    #[arg(long)]
    pub p1_star: Option<f64>,
    #[arg(long)]
    pub p2_star: Option<f64>,
    /// Horizon in seconds.
    #[arg(long = "T", value_name = "SECONDS")]
    pub horizon: Option<f64>,
    #[arg(long)]
    pub dt: Option<f64>,
    #[arg(long, value_parser = parse_policy)]
    pub infeasible_policy: Option<InfeasiblePolicy>,
    /// Output directory (default: $ADACBF_OUT_DIR, else `out`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
#[value(rename_all = "snake_case")]
pub enum SweepParam {
    Cd,
    P1Star,
    P2Star,
    NoiseScale,
    Seed,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::Cd => "cd",
            SweepParam::P1Star => "p1_star",
            SweepParam::P2Star => "p2_star",
            SweepParam::NoiseScale => "noise_scale",
            SweepParam::Seed => "seed",
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct SweepArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum)]
    pub param: SweepParam,
    /// Comma separated values (`A..B` also accepted for seeds).
    #[arg(long)]
    pub values: String,
}

#[derive(Debug, Clone, Args)]
pub struct CompareArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    /// Comma separated modes.
    #[arg(long, default_value = "adacbf,hocbf-baseline")]
    pub modes: String,
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    s.parse()
}

fn parse_policy(s: &str) -> Result<InfeasiblePolicy, String> {
    s.parse()
}

/// `A..B` (inclusive), `a,b,c` or a single seed.
pub fn parse_seeds(s: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("invalid seed list '{s}' (use A..B or a,b,c)"));
    let s = s.trim();
    if let Some((a, b)) = s.split_once("..") {
        let a: u64 = a.trim().parse().map_err(|_| bad())?;
        let b: u64 = b.trim().parse().map_err(|_| bad())?;
        if a > b {
            return Err(bad());
        }
        return Ok((a..=b).collect());
    }
    let seeds = s
        .split(',')
        .map(|v| v.trim().parse::<u64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| bad())?;
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn parse_ramp(s: &str) -> Result<CdSchedule, CliError> {
    let parts: Vec<&str> = s.split(':').collect();
    let num = |v: &str| {
        v.trim()
            .parse::<f64>()
            .map_err(|_| CliError::Usage(format!("invalid --cd-ramp '{s}' (use START:END[:DURATION])")))
    };
    match parts.as_slice() {
        [a, b] => Ok(CdSchedule::Ramp {
            start: num(a)?,
            end: num(b)?,
            duration: crate::acc::DEFAULT_RAMP_DURATION,
        }),
        [a, b, d] => Ok(CdSchedule::Ramp {
            start: num(a)?,
            end: num(b)?,
            duration: num(d)?,
        }),
        _ => Err(CliError::Usage(format!(
            "invalid --cd-ramp '{s}' (use START:END[:DURATION])"
        ))),
    }
}

fn parse_values(s: &str) -> Result<Vec<f64>, CliError> {
    let values = s
        .split(',')
        .filter(|v| !v.trim().is_empty())
        .map(|v| {
            v.trim()
                .parse::<f64>()
                .map_err(|_| CliError::Usage(format!("invalid value '{v}' in --values")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err(CliError::Usage("--values must list at least one value".into()));
    }
    Ok(values)
}

pub fn load_config(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let cfg: ScenarioConfig = serde_json::from_str(&text).map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    cfg.validate().map_err(|e| CliError::Config {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(cfg)
}

impl ScenarioArgs {
    /// Base config from `--config` or `--scenario` (default `cd-040`), with
    /// the remaining flags applied on top.
    pub fn resolve(&self) -> Result<ScenarioConfig, CliError> {
        let mut cfg = match (&self.config, &self.scenario) {
            (Some(path), None) => load_config(path)?,
            (None, name) => ScenarioConfig::library(name.as_deref().unwrap_or("cd-040"))
                .map_err(|e| CliError::Usage(e.to_string()))?,
            (Some(_), Some(_)) => {
                return Err(CliError::Usage(
                    "--config and --scenario are mutually exclusive".into(),
                ))
            }
        };
        if let Some(m) = self.mode {
            cfg.mode = m;
        }
        if let Some(cd) = self.cd {
            cfg.cd = CdSchedule::Constant { value: cd };
        }
        if let Some(r) = &self.cd_ramp {
            cfg.cd = parse_ramp(r)?;
        }
        if let Some(k) = self.noise_scale {
            cfg.set_noise_scale(k);
        }
        if let Some(s) = self.seed {
            cfg.seeds = vec![s];
        }
        if let Some(s) = &self.seeds {
            cfg.seeds = parse_seeds(s)?;
        }
        if let Some(v) = self.p1_0 {
            cfg.params.p1_init = v;
        }
        if let Some(v) = self.p1_star {
            cfg.params.p1_star = v;
        }
        if let Some(v) = self.p2_star {
            cfg.params.p2_star = v;
        }
        if let Some(v) = self.horizon {
            cfg.horizon = v;
        }
        if let Some(v) = self.dt {
            cfg.dt = v;
        }
        if let Some(p) = self.infeasible_policy {
            cfg.infeasible_policy = p;
        }
        cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(cfg)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out
            .clone()
            .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| CliError::io(path, e))?;
    tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
    Ok(())
}

fn num(v: f64) -> String {
    format!("{v:?}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// Prints to stdout, ignoring a closed pipe.
fn emit(text: &str) {
    let mut out = std::io::stdout().lock();
    let _ = out.write_all(text.as_bytes()).and_then(|_| out.flush());
}

/// Per-step trace in the [`CSV_COLUMNS`] layout. Decisions absent in the
/// mode (for instance `nu1` in the baseline) are left empty.
pub fn trace_csv(cfg: &ScenarioConfig, traj: &Trajectory) -> Result<Vec<u8>, CliError> {
    let idx = |name: &str| traj.decision_names.iter().position(|n| n == name);
    let (u, nu, d_acc, d1, top) = (
        idx("u1"),
        idx("nu1"),
        idx("delta_clf1"),
        idx("delta1"),
        idx("p_top"),
    );
    let mg = cfg.params.mass * cfg.params.gravity;
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CSV_COLUMNS)?;
    for r in &traj.records {
        let get = |i: Option<usize>| i.map(|i| r.w[i]);
        let p2 = get(top).or_else(|| r.penalties.get(1).copied());
        w.write_record([
            num(r.t),
            num(r.z[0]),
            num(r.z[1]),
            num(r.z[2]),
            fmt_opt(r.psi.first().copied()),
            fmt_opt(r.psi.get(1).copied()),
            fmt_opt(get(u)),
            fmt_opt(get(nu)),
            fmt_opt(r.penalties.first().copied()),
            fmt_opt(p2),
            fmt_opt(get(d_acc)),
            fmt_opt(get(d1)),
            num(-r.lower[0] / mg),
            r.feasible.to_string(),
            r.status.as_str().to_string(),
            num(r.solve_ms),
        ])?;
    }
    w.into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))
}

/// Summary file contents: run identity plus [`Summary`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub scenario: String,
    pub mode: Mode,
    pub seed: u64,
    #[serde(flatten)]
    pub summary: Summary,
}

pub struct RunOutput {
    pub seed: u64,
    pub trajectory: Trajectory,
    pub summary: RunSummary,
}

fn stem(cfg: &ScenarioConfig, seed: u64) -> String {
    format!("{}_{}_seed{}", cfg.name, cfg.mode, seed)
}

/// Runs every seed of `cfg` in parallel, results in seed order.
pub fn run_seeds(cfg: &ScenarioConfig) -> Result<Vec<RunOutput>, CliError> {
    cfg.seeds
        .par_iter()
        .map(|&seed| {
            let trajectory = cfg.run(seed)?;
            let summary = RunSummary {
                scenario: cfg.name.clone(),
                mode: cfg.mode,
                seed,
                summary: summarize(&trajectory),
            };
            Ok(RunOutput {
                seed,
                trajectory,
                summary,
            })
        })
        .collect()
}

/// Writes trace, summary, the resolved config and the summary schema.
pub fn write_runs(cfg: &ScenarioConfig, runs: &[RunOutput], out: &Path) -> Result<(), CliError> {
    write_atomic(&out.join("config.json"), serde_json::to_string_pretty(cfg)?.as_bytes())?;
    write_atomic(&out.join("summary.schema.json"), SUMMARY_SCHEMA.as_bytes())?;
    runs.par_iter().try_for_each(|r| {
        let stem = stem(cfg, r.seed);
        write_atomic(&out.join(format!("{stem}.csv")), &trace_csv(cfg, &r.trajectory)?)?;
        write_atomic(
            &out.join(format!("{stem}.summary.json")),
            serde_json::to_string_pretty(&r.summary)?.as_bytes(),
        )
    })
}

fn exit_status(runs: &[RunOutput]) -> i32 {
    if runs.iter().any(|r| r.trajectory.halted) {
        2
    } else {
        0
    }
}

fn run_command(args: &ScenarioArgs) -> Result<i32, CliError> {
    let cfg = args.resolve()?;
    let out = args.out_dir();
    let runs = run_seeds(&cfg)?;
    write_runs(&cfg, &runs, &out)?;
    for r in &runs {
        emit(&format!("{}\n", serde_json::to_string(&r.summary)?));
    }
    Ok(exit_status(&runs))
}

/// One sweep table row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub param: String,
    pub value: f64,
    pub min_b: Option<f64>,
    pub min_psi1: Option<f64>,
    pub infeasible_steps: usize,
    pub first_infeasible_t: Option<f64>,
    pub halted: bool,
}

/// Applies one sweep value to a copy of `base`.
pub fn sweep_config(base: &ScenarioConfig, param: SweepParam, value: f64) -> Result<ScenarioConfig, CliError> {
    let mut cfg = base.clone();
    cfg.seeds.truncate(1);
    match param {
        SweepParam::Cd => cfg.cd = CdSchedule::Constant { value },
        SweepParam::P1Star => cfg.params.p1_star = value,
        SweepParam::P2Star => cfg.params.p2_star = value,
        SweepParam::NoiseScale => cfg.set_noise_scale(value),
        SweepParam::Seed => {
            if !(value >= 0.0 && value.fract() == 0.0 && value <= u64::MAX as f64) {
                return Err(CliError::Usage(format!("seed {value} is not a non-negative integer")));
            }
            cfg.seeds = vec![value as u64];
        }
    }
    cfg.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(cfg)
}

pub fn sweep(base: &ScenarioConfig, param: SweepParam, values: &[f64]) -> Result<Vec<SweepRow>, CliError> {
    if values.is_empty() {
        return Err(CliError::Usage("sweep needs at least one value".into()));
    }
    values
        .par_iter()
        .map(|&value| {
            let cfg = sweep_config(base, param, value)?;
            let traj = cfg.run(cfg.seeds[0])?;
            let s = summarize(&traj);
            Ok(SweepRow {
                param: param.as_str().to_string(),
                value,
                min_b: s.min_b,
                min_psi1: s.min_psi1,
                infeasible_steps: s.infeasible_steps,
                first_infeasible_t: s.first_infeasible_t,
                halted: s.halted,
            })
        })
        .collect()
}

fn sweep_command(args: &SweepArgs) -> Result<i32, CliError> {
    let base = args.scenario.resolve()?;
    let values = match args.param {
        SweepParam::Seed if args.values.contains("..") => {
            parse_seeds(&args.values)?.into_iter().map(|s| s as f64).collect()
        }
        _ => parse_values(&args.values)?,
    };
    let rows = sweep(&base, args.param, &values)?;
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in &rows {
        w.serialize(r)?;
    }
    let bytes = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))?;
    let out = args.scenario.out_dir();
    write_atomic(
        &out.join(format!("sweep_{}_{}.csv", base.name, args.param.as_str())),
        &bytes,
    )?;
    emit(&String::from_utf8_lossy(&bytes));
    Ok(if rows.iter().any(|r| r.halted) { 2 } else { 0 })
}

/// Differences of each mode against the first one.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModeDelta {
    pub mode: Mode,
    pub max_abs_du: f64,
    pub max_abs_db: f64,
    pub max_abs_dpsi1: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub scenario: String,
    pub seed: u64,
    pub summaries: Vec<RunSummary>,
    pub deltas: Vec<ModeDelta>,
}

fn parse_modes(s: &str) -> Result<Vec<Mode>, CliError> {
    let modes = s
        .split(',')
        .map(|m| m.trim().parse::<Mode>().map_err(CliError::Usage))
        .collect::<Result<Vec<_>, _>>()?;
    if modes.len() < 2 {
        return Err(CliError::Usage("compare needs at least two modes".into()));
    }
    Ok(modes)
}

/// Runs `base` (first seed) under each mode. Returns the comparison and the
/// aligned CSV of `u`, `b` and `psi1` per mode.
pub fn compare(base: &ScenarioConfig, modes: &[Mode]) -> Result<(Comparison, Vec<u8>), CliError> {
    if modes.len() < 2 {
        return Err(CliError::Usage("compare needs at least two modes".into()));
    }
    let seed = base.seeds[0];
    let runs: Vec<(Mode, Trajectory)> = modes
        .par_iter()
        .map(|&mode| {
            let mut cfg = base.clone();
            cfg.mode = mode;
            Ok((mode, cfg.run(seed)?))
        })
        .collect::<Result<_, CliError>>()?;
    let dt = runs[0].1.dt;
    if runs.iter().any(|(_, t)| t.dt != dt) {
        return Err(CliError::Usage("mismatched horizons".into()));
    }
    let rows = runs.iter().map(|(_, t)| t.records.len()).max().unwrap_or(0);
    let series = |t: &Trajectory, k: usize| -> [Option<f64>; 3] {
        t.records.get(k).map_or([None; 3], |r| {
            [Some(r.w[0]), r.psi.first().copied(), r.psi.get(1).copied()]
        })
    };

    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["t".to_string()];
    for (m, _) in &runs {
        for col in ["u", "b", "psi1"] {
            header.push(format!("{col}_{m}"));
        }
    }
    w.write_record(&header)?;
    for k in 0..rows {
        let mut rec = vec![num(k as f64 * dt)];
        for (_, t) in &runs {
            rec.extend(series(t, k).iter().map(|v| fmt_opt(*v)));
        }
        w.write_record(&rec)?;
    }
    let csv = w
        .into_inner()
        .map_err(|e| CliError::Usage(format!("csv buffer: {e}")))?;

    let reference = &runs[0].1;
    let common = runs.iter().map(|(_, t)| t.records.len()).min().unwrap_or(0);
    let deltas = runs
        .iter()
        .skip(1)
        .map(|(mode, t)| {
            let mut d = [0.0f64; 3];
            for k in 0..common {
                let (a, b) = (series(reference, k), series(t, k));
                for c in 0..3 {
                    if let (Some(x), Some(y)) = (a[c], b[c]) {
                        d[c] = d[c].max((x - y).abs());
                    }
                }
            }
            ModeDelta {
                mode: *mode,
                max_abs_du: d[0],
                max_abs_db: d[1],
                max_abs_dpsi1: d[2],
            }
        })
        .collect();
    let summaries = runs
        .iter()
        .map(|(mode, t)| RunSummary {
            scenario: base.name.clone(),
            mode: *mode,
            seed,
            summary: summarize(t),
        })
        .collect();
    Ok((
        Comparison {
            scenario: base.name.clone(),
            seed,
            summaries,
            deltas,
        },
        csv,
    ))
}

fn compare_command(args: &CompareArgs) -> Result<i32, CliError> {
    let base = args.scenario.resolve()?;
    let modes = parse_modes(&args.modes)?;
    let (cmp, csv) = compare(&base, &modes)?;
    let out = args.scenario.out_dir();
    write_atomic(&out.join(format!("compare_{}.csv", base.name)), &csv)?;
    let json = serde_json::to_string_pretty(&cmp)?;
    write_atomic(&out.join(format!("compare_{}.json", base.name)), json.as_bytes())?;
    emit(&format!("{json}\n"));
    Ok(0)
}

fn list_scenarios() -> Result<i32, CliError> {
    for name in SCENARIOS {
        let c = ScenarioConfig::library(name)?;
        let cd = match c.cd {
            CdSchedule::Constant { value } => format!("c_d={value}"),
            CdSchedule::Ramp { start, end, duration } => {
                format!("c_d {start}->{end} over {duration}s after activation")
            }
        };
        emit(&format!(
            "{name:<20} {cd}, p1*={}, noise=({}, {}){}\n",
            c.params.p1_star,
            c.noise[0],
            c.noise[1],
            c.params
                .p2_fixed
                .map(|p| format!(", p2 fixed at {p}"))
                .unwrap_or_default()
        ));
    }
    Ok(0)
}

pub fn execute(cli: &Cli) -> Result<i32, CliError> {
    match &cli.command {
        Command::Run(a) => run_command(a),
        Command::Sweep(a) => sweep_command(a),
        Command::Compare(a) => compare_command(a),
        Command::ListScenarios => list_scenarios(),
    }
}

/// Parses `args` (program name first), runs, and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
