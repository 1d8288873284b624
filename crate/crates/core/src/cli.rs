//! Command-line front end: flat `key = value` run configs, CSV emission and
//! the `simulate`, `example`, `portrait`, `avgcheck` and `pullin` commands.
//!
//! Exit codes: 0 success, 1 usage or configuration error, 2 integration
//! failure, 3 scenario outcome mismatch.

use std::ffi::OsString;
use std::fmt::Write as _;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use clap::{Parser, Subcommand};

use crate::analysis::{
    averaging_discrepancy, detect_lock, loglog_slope, pullin_probe, AveragingPair, AveragingStart, ClassicStart,
    LockCriterion,
};
use crate::error::{Error, Result};
use crate::experiments::{run_example_with, write_summary, ExampleOptions};
use crate::filters::FilterSs;
use crate::integrators::{integrate, IntegratorConfig, Trajectory};
use crate::models::{DataSignal, LoopParams, ModelKind, StateVector};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_INTEGRATION: i32 = 2;
pub const EXIT_MISMATCH: i32 = 3;

/// Environment variable capping the worker threads of fan-out commands.
pub const THREADS_ENV: &str = "COSTAS_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeName {
    Rk4,
    Dp45,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LoopFilterKind {
    Pi,
    LeadLag,
}

/// One simulation described by a flat key-value document.
///
/// Every field has a default taken from the reference loop except `model`
/// and `t_end`. Units are rad/s for frequencies and s for times.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelKind,
    pub scheme: SchemeName,
    pub dt: f64,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_step: f64,
    pub t_end: f64,
    pub sample_dt: Option<f64>,
    pub omega3: f64,
    pub lpf_gain: f64,
    pub loop_filter: LoopFilterKind,
    pub tau1: f64,
    pub tau2: f64,
    pub vco_gain: f64,
    pub omega1: f64,
    pub omega2_free: f64,
    pub theta1_0: f64,
    pub data: Option<f64>,
    pub x: f64,
    pub x1: f64,
    pub x2: f64,
    pub theta_delta: Option<f64>,
    pub theta2: Option<f64>,
    pub freq_tol: f64,
    pub phase_drift_tol: f64,
    pub tail_fraction: f64,
    pub output: Option<String>,
}

const KEYS: &[&str] = &[
    "model",
    "scheme",
    "dt",
    "rel_tol",
    "abs_tol",
    "max_step",
    "t_end",
    "sample_dt",
    "omega3",
    "lpf_gain",
    "loop_filter",
    "tau1",
    "tau2",
    "vco_gain",
    "omega1",
    "omega2_free",
    "omega_delta_free",
    "theta1_0",
    "data_omega",
    "x",
    "x1",
    "x2",
    "theta_delta",
    "theta2",
    "freq_tol",
    "phase_drift_tol",
    "tail_fraction",
    "output",
];

fn number(key: &str, v: &str) -> Result<f64> {
    let x: f64 = v
        .parse()
        .map_err(|_| Error::config(key, format!("`{v}` is not a number")))?;
    if !x.is_finite() {
        return Err(Error::config(key, "must be finite"));
    }
    Ok(x)
}

impl FromStr for RunConfig {
    type Err = Error;

    fn from_str(text: &str) -> Result<Self> {
        let mut entries: Vec<(String, String)> = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((k, v)) = line.split_once('=') else {
                return Err(Error::config(
                    format!("line {}", n + 1),
                    format!("expected `key = value`, got `{line}`"),
                ));
            };
            let (k, v) = (k.trim(), v.trim());
            if !KEYS.contains(&k) {
                return Err(Error::config(k, "unknown key"));
            }
            if entries.iter().any(|(e, _)| e == k) {
                return Err(Error::config(k, "given more than once"));
            }
            entries.push((k.to_string(), v.to_string()));
        }
        let get = |k: &str| entries.iter().find(|(e, _)| e == k).map(|(_, v)| v.as_str());
        let num = |k: &str, default: f64| get(k).map_or(Ok(default), |v| number(k, v));
        let opt = |k: &str| get(k).map(|v| number(k, v)).transpose();

        let model: ModelKind = get("model")
            .ok_or_else(|| Error::config("model", "required"))?
            .parse()?;
        let t_end = opt("t_end")?.ok_or_else(|| Error::config("t_end", "required"))?;
        let scheme = match get("scheme").unwrap_or("rk4") {
            "rk4" => SchemeName::Rk4,
            "dp45" => SchemeName::Dp45,
            other => return Err(Error::config("scheme", format!("expected rk4 or dp45, got `{other}`"))),
        };
        let loop_filter = match get("loop_filter").unwrap_or("pi") {
            "pi" => LoopFilterKind::Pi,
            "lead_lag" => LoopFilterKind::LeadLag,
            other => {
                return Err(Error::config(
                    "loop_filter",
                    format!("expected pi or lead_lag, got `{other}`"),
                ))
            }
        };
        let omega1 = num("omega1", LoopParams::REF_OMEGA1)?;
        let omega2_free = match (opt("omega2_free")?, opt("omega_delta_free")?) {
            (Some(_), Some(_)) => {
                return Err(Error::config(
                    "omega_delta_free",
                    "give either omega2_free or omega_delta_free, not both",
                ))
            }
            (Some(w), None) => w,
            (None, Some(d)) => omega1 - d,
            (None, None) => omega1,
        };
        let cfg = RunConfig {
            model,
            scheme,
            dt: num("dt", 2e-9)?,
            rel_tol: num("rel_tol", 1e-9)?,
            abs_tol: num("abs_tol", 1e-12)?,
            max_step: num("max_step", 1e-6)?,
            t_end,
            sample_dt: opt("sample_dt")?,
            omega3: num("omega3", LoopParams::REF_OMEGA3)?,
            lpf_gain: num("lpf_gain", 1.0)?,
            loop_filter,
            tau1: num("tau1", LoopParams::REF_TAU1)?,
            tau2: num("tau2", LoopParams::REF_TAU2)?,
            vco_gain: num("vco_gain", LoopParams::REF_VCO_GAIN)?,
            omega1,
            omega2_free,
            theta1_0: num("theta1_0", 0.0)?,
            data: opt("data_omega")?,
            x: num("x", 0.0)?,
            x1: num("x1", 0.0)?,
            x2: num("x2", 0.0)?,
            theta_delta: opt("theta_delta")?,
            theta2: opt("theta2")?,
            freq_tol: num("freq_tol", 1.0)?,
            phase_drift_tol: num("phase_drift_tol", 0.01)?,
            tail_fraction: num("tail_fraction", 0.2)?,
            output: get("output").map(str::to_string),
        };
        cfg.check()?;
        Ok(cfg)
    }
}

/// Turns a parameter error into a config error naming the same key.
fn as_config(e: Error) -> Error {
    match e {
        Error::Parameter { name, reason } => Error::config(name, reason),
        other => other,
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::config("config", format!("{}: {e}", path.display())))?;
        text.parse()
    }

    fn check(&self) -> Result<()> {
        if self.theta_delta.is_some() && self.theta2.is_some() {
            return Err(Error::config("theta2", "give either theta_delta or theta2, not both"));
        }
        if self.theta2.is_some() && !self.model.angle_is_vco_phase() {
            return Err(Error::config(
                "theta2",
                format!("{} has no VCO phase state", self.model),
            ));
        }
        if (self.x1 != 0.0 || self.x2 != 0.0) && !self.model.has_arm_filters() {
            return Err(Error::config(
                if self.x1 != 0.0 { "x1" } else { "x2" },
                format!("{} has no arm filters", self.model),
            ));
        }
        if self.data.is_some() && !self.model.uses_data() {
            return Err(Error::config(
                "data_omega",
                format!("{} assumes a constant data signal", self.model),
            ));
        }
        self.criterion().validate().map_err(as_config)?;
        self.integrator().validate().map_err(as_config)?;
        self.initial_state()?;
        Ok(())
    }

    pub fn params(&self) -> Result<LoopParams> {
        let lpf = FilterSs::first_order_lowpass(self.omega3, self.lpf_gain).map_err(as_config)?;
        let lf = match self.loop_filter {
            LoopFilterKind::Pi => FilterSs::pi_loop_filter(self.tau1, self.tau2),
            LoopFilterKind::LeadLag => FilterSs::lead_lag(self.tau1, self.tau2),
        }
        .map_err(as_config)?;
        let mut p = LoopParams::reference()
            .with_loop_filter(lf)
            .with_vco_gain(self.vco_gain)
            .with_omega1(self.omega1);
        p.lpf1 = lpf.clone();
        p.lpf2 = lpf;
        p.omega2_free = self.omega2_free;
        p.theta1_0 = self.theta1_0;
        if let Some(w) = self.data {
            p = p.with_data(DataSignal::PeriodicSquare { omega_m: w });
        }
        p.validate().map_err(as_config)?;
        Ok(p)
    }

    pub fn integrator(&self) -> IntegratorConfig {
        let cfg = match self.scheme {
            SchemeName::Rk4 => IntegratorConfig::fixed(self.dt, self.t_end),
            SchemeName::Dp45 => IntegratorConfig::adaptive(self.rel_tol, self.abs_tol, self.max_step, self.t_end),
        };
        match self.sample_dt {
            Some(s) => cfg.with_sample_dt(s),
            None => cfg,
        }
    }

    pub fn criterion(&self) -> LockCriterion {
        LockCriterion {
            freq_tol: self.freq_tol,
            phase_drift_tol: self.phase_drift_tol,
            tail_fraction: self.tail_fraction,
        }
    }

    pub fn initial_state(&self) -> Result<StateVector> {
        let p = self.params()?;
        self.initial_state_for(self.model, &p)
    }

    fn initial_state_for(&self, kind: ModelKind, p: &LoopParams) -> Result<StateVector> {
        let mut s = StateVector::initial(kind, p)
            .with_x(&[self.x])
            .map_err(|_| Error::config("x", "the loop filter must be first order for a scalar initial state"))?;
        if kind.has_arm_filters() {
            s = s.with_x1(&[self.x1])?.with_x2(&[self.x2])?;
        }
        if let Some(th) = self.theta_delta {
            s = s.with_initial_theta_delta(th, p);
        }
        if let Some(th) = self.theta2 {
            s = s.with_angle(th);
        }
        Ok(s)
    }

    /// Serializes every field so that parsing the text gives back `self`.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("model", self.model.name().to_string());
        put(
            "scheme",
            match self.scheme {
                SchemeName::Rk4 => "rk4",
                SchemeName::Dp45 => "dp45",
            }
            .to_string(),
        );
        for (k, v) in [
            ("dt", self.dt),
            ("rel_tol", self.rel_tol),
            ("abs_tol", self.abs_tol),
            ("max_step", self.max_step),
            ("t_end", self.t_end),
        ] {
            put(k, format!("{v:?}"));
        }
        if let Some(v) = self.sample_dt {
            put("sample_dt", format!("{v:?}"));
        }
        put("omega3", format!("{:?}", self.omega3));
        put("lpf_gain", format!("{:?}", self.lpf_gain));
        put(
            "loop_filter",
            match self.loop_filter {
                LoopFilterKind::Pi => "pi",
                LoopFilterKind::LeadLag => "lead_lag",
            }
            .to_string(),
        );
        for (k, v) in [
            ("tau1", self.tau1),
            ("tau2", self.tau2),
            ("vco_gain", self.vco_gain),
            ("omega1", self.omega1),
            ("omega2_free", self.omega2_free),
            ("theta1_0", self.theta1_0),
        ] {
            put(k, format!("{v:?}"));
        }
        if let Some(v) = self.data {
            put("data_omega", format!("{v:?}"));
        }
        for (k, v) in [("x", self.x), ("x1", self.x1), ("x2", self.x2)] {
            put(k, format!("{v:?}"));
        }
        if let Some(v) = self.theta_delta {
            put("theta_delta", format!("{v:?}"));
        }
        if let Some(v) = self.theta2 {
            put("theta2", format!("{v:?}"));
        }
        for (k, v) in [
            ("freq_tol", self.freq_tol),
            ("phase_drift_tol", self.phase_drift_tol),
            ("tail_fraction", self.tail_fraction),
        ] {
            put(k, format!("{v:?}"));
        }
        if let Some(o) = &self.output {
            put("output", o.clone());
        }
        s
    }
}

/// 17 significant digits, decimal point, no grouping.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub const TRAJECTORY_HEADER: &str = "t,theta_delta,g,g1,g2,omega2";

/// Writes `t,theta_delta,g,g1,g2,omega2`; arm outputs are empty for models
/// without arm filters.
pub fn write_trajectory_csv(path: &Path, traj: &Trajectory) -> Result<()> {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?;
    w.write_record(TRAJECTORY_HEADER.split(','))?;
    let theta = traj.theta_delta();
    for (i, d) in traj.derived_all().into_iter().enumerate() {
        let opt = |v: Option<f64>| v.map(fmt_f64).unwrap_or_default();
        w.write_record([
            fmt_f64(traj.times()[i]),
            fmt_f64(theta[i]),
            fmt_f64(d.g),
            opt(d.g1),
            opt(d.g2),
            fmt_f64(d.omega2),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Exit code for a library error.
pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Divergence { .. } | Error::StepUnderflow { .. } => EXIT_INTEGRATION,
        _ => EXIT_USAGE,
    }
}

#[derive(Debug, Parser)]
#[command(name = "costas-lab", version, about = "Simulate and analyse BPSK Costas loop models")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one simulation and write its trajectory CSV.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Reproduce one of the six reference scenarios.
    Example {
        id: String,
        #[arg(long, default_value = "costas_example_output")]
        outdir: PathBuf,
    },
    /// Integrate a grid of initial conditions of the classic model.
    Portrait {
        #[arg(long)]
        config: PathBuf,
        /// `x=lo:hi:n,theta=lo:hi:n`
        #[arg(long)]
        grid: String,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Averaging discrepancy against the carrier frequency.
    Avgcheck {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated carrier frequencies, rad/s.
        #[arg(long)]
        omega1: String,
    },
    /// Pull-in probe of the classic model over a detuning range.
    Pullin {
        #[arg(long)]
        config: PathBuf,
        /// `lo:hi:step` in rad/s.
        #[arg(long)]
        range: String,
        /// Initial-condition grid, `x=lo:hi:n,theta=lo:hi:n`; defaults to the config's initial state.
        #[arg(long)]
        grid: Option<String>,
    },
}

/// Parses arguments, runs the command, and returns the process exit code.
pub fn main_with_args<I, T>(args: I, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = if e.use_stderr() {
                write!(stderr, "{e}")
            } else {
                write!(stdout, "{e}")
            };
            return code;
        }
    };
    configure_threads();
    match dispatch(cli.command, stdout) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            exit_code(&e)
        }
    }
}

/// Caps the global worker pool from the environment, once per process.
pub fn configure_threads() {
    let n = std::env::var(THREADS_ENV)
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok());
    if let Some(n) = n.filter(|&n| n > 0) {
        // a second call finds the pool already built; that is fine
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Simulate { config, out: path } => cmd_simulate(&config, path.as_deref(), out).map(|_| EXIT_OK),
        Command::Example { id, outdir } => {
            let id: u8 = match id.parse() {
                Ok(i @ 1..=6) => i,
                _ => return Err(Error::config("id", format!("example id must be 1..6, got `{id}`"))),
            };
            cmd_example(id, &outdir, out)
        }
        Command::Portrait { config, grid, outdir } => cmd_portrait(&config, &grid, &outdir, out).map(|_| EXIT_OK),
        Command::Avgcheck { config, omega1 } => cmd_avgcheck(&config, &omega1, out).map(|_| EXIT_OK),
        Command::Pullin { config, range, grid } => cmd_pullin(&config, &range, grid.as_deref(), out).map(|_| EXIT_OK),
    }
}

fn io(e: std::io::Error) -> Error {
    Error::from(e)
}

pub fn cmd_simulate(config: &Path, out_path: Option<&Path>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let p = cfg.params()?;
    let s0 = cfg.initial_state()?;
    let traj = integrate(cfg.model, &p, &s0, &cfg.integrator())?;
    let path = out_path
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("trajectory.csv"));
    write_trajectory_csv(&path, &traj)?;
    let r = detect_lock(&traj, &cfg.criterion())?;
    writeln!(
        out,
        "locked={} tail_freq_err={} steady_theta={}",
        r.locked,
        r.tail_mean_freq_error,
        r.steady_theta_delta.map_or("nan".to_string(), |v| v.to_string())
    )
    .map_err(io)?;
    Ok(())
}

pub fn cmd_example(id: u8, outdir: &Path, out: &mut dyn Write) -> Result<i32> {
    let opts = ExampleOptions {
        outdir: Some(outdir.to_path_buf()),
        ..ExampleOptions::default()
    };
    let report = run_example_with(id, &opts)?;
    let summary = write_summary(outdir, &report)?;
    write!(out, "{report}").map_err(io)?;
    writeln!(out, "summary = {}", summary.display()).map_err(io)?;
    if report.runs.iter().any(|r| r.error.is_some()) {
        return Ok(EXIT_INTEGRATION);
    }
    Ok(if report.passed() { EXIT_OK } else { EXIT_MISMATCH })
}

/// Parses `lo:hi:n` into `n` evenly spaced points (one point when `n` is 1).
fn linspace_spec(key: &str, spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::config(key, format!("expected lo:hi:n, got `{spec}`")));
    }
    let lo = number(key, parts[0])?;
    let hi = number(key, parts[1])?;
    let n: usize = parts[2]
        .trim()
        .parse()
        .map_err(|_| Error::config(key, format!("`{}` is not a count", parts[2])))?;
    if n == 0 {
        return Err(Error::config(key, "count must be at least 1"));
    }
    Ok(if n == 1 {
        vec![lo]
    } else {
        (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
    })
}

/// Parses `x=lo:hi:n,theta=lo:hi:n` into a grid of classic-model starts.
pub fn parse_grid(spec: &str) -> Result<Vec<ClassicStart>> {
    let mut xs = None;
    let mut thetas = None;
    for part in spec.split(',') {
        let (k, v) = part
            .split_once('=')
            .ok_or_else(|| Error::config("grid", format!("expected name=lo:hi:n, got `{part}`")))?;
        match k.trim() {
            "x" => xs = Some(linspace_spec("grid.x", v.trim())?),
            "theta" => thetas = Some(linspace_spec("grid.theta", v.trim())?),
            other => return Err(Error::config("grid", format!("unknown axis `{other}`"))),
        }
    }
    let xs = xs.ok_or_else(|| Error::config("grid", "missing x axis"))?;
    let thetas = thetas.ok_or_else(|| Error::config("grid", "missing theta axis"))?;
    Ok(xs
        .iter()
        .flat_map(|&x| thetas.iter().map(move |&theta_delta| ClassicStart { x, theta_delta }))
        .collect())
}

fn classic_config(cfg: &RunConfig) -> Result<LoopParams> {
    if cfg.model != ModelKind::ClassicPhaseSpace {
        return Err(Error::config(
            "model",
            format!("this command needs classic_phase_space, got {}", cfg.model),
        ));
    }
    cfg.params()
}

pub fn cmd_portrait(config: &Path, grid: &str, outdir: &Path, out: &mut dyn Write) -> Result<()> {
    use rayon::prelude::*;
    let cfg = RunConfig::load(config)?;
    let p = classic_config(&cfg)?;
    let starts = parse_grid(grid)?;
    std::fs::create_dir_all(outdir)?;
    let kind = ModelKind::ClassicPhaseSpace;
    let crit = cfg.criterion();
    let icfg = cfg.integrator();
    let results: Vec<(usize, bool)> = starts
        .par_iter()
        .enumerate()
        .map(|(i, st)| {
            let s0 = StateVector::zeros(kind, &p).with_x(&[st.x])?.with_angle(st.theta_delta);
            let traj = integrate(kind, &p, &s0, &icfg)?;
            let captured = detect_lock(&traj, &crit)?.locked;
            let mut w = csv::WriterBuilder::new()
                .terminator(csv::Terminator::Any(b'\n'))
                .from_path(outdir.join(format!("trajectory_{i:04}.csv")))?;
            w.write_record(["t", "x", "theta_delta"])?;
            for j in 0..traj.len() {
                w.write_record([
                    fmt_f64(traj.times()[j]),
                    fmt_f64(traj.state(j)[0]),
                    fmt_f64(traj.state(j)[1]),
                ])?;
            }
            w.flush()?;
            Ok((i, captured))
        })
        .collect::<Result<_>>()?;
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(outdir.join("index.csv"))?;
    w.write_record(["id", "x0", "theta0", "outcome", "file"])?;
    for (i, captured) in &results {
        let st = starts[*i];
        w.write_record([
            i.to_string(),
            fmt_f64(st.x),
            fmt_f64(st.theta_delta),
            if *captured { "captured" } else { "rotational" }.to_string(),
            format!("trajectory_{i:04}.csv"),
        ])?;
    }
    w.flush()?;
    let captured = results.iter().filter(|r| r.1).count();
    writeln!(
        out,
        "trajectories={} captured={} rotational={}",
        results.len(),
        captured,
        results.len() - captured
    )
    .map_err(io)?;
    Ok(())
}

/// Flag written next to rows whose detuning ratio leaves the averaging regime.
pub const DETUNING_FLAG: &str = "condition-15-violated";

pub fn cmd_avgcheck(config: &Path, omega1_list: &str, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let pair = match cfg.model {
        ModelKind::ModifiedSignalSpace | ModelKind::ClassicPhaseSpace => AveragingPair::ModifiedVsClassic,
        ModelKind::SimplifiedSignalSpace | ModelKind::PhaseSpace => AveragingPair::SimplifiedVsPhaseSpace,
        ModelKind::SignalSpace => {
            return Err(Error::config(
                "model",
                "avgcheck compares modified_signal_space or simplified_signal_space with its averaged model",
            ))
        }
    };
    let omegas: Vec<f64> = omega1_list
        .split(',')
        .map(|s| number("omega1", s.trim()))
        .collect::<Result<_>>()?;
    if omegas.iter().any(|&w| w <= 0.0) {
        return Err(Error::config("omega1", "carrier frequencies must be positive"));
    }
    let p = cfg.params()?;
    let start = AveragingStart {
        x1: vec![cfg.x1],
        x2: vec![cfg.x2],
        x: vec![cfg.x],
        theta_delta: cfg.theta_delta.unwrap_or(cfg.theta1_0),
    };
    // steps and samples scale with the carrier period so every row resolves it alike
    let base = cfg.integrator();
    let w_ref = cfg.omega1;
    let rows = averaging_discrepancy(&p, pair, &start, &omegas, |w| {
        let k = w_ref / w;
        let mut c = base;
        if let crate::integrators::Scheme::FixedRk4 { dt } = &mut c.scheme {
            *dt *= k;
        }
        if let Some(s) = cfg.sample_dt {
            c = c.with_sample_dt(s * k);
        }
        c
    })?;
    writeln!(out, "omega1,sup_error,sup_theta_error,flag").map_err(io)?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{}",
            fmt_f64(r.omega1),
            fmt_f64(r.sup_error),
            fmt_f64(r.sup_theta_error),
            if r.condition_violated() { DETUNING_FLAG } else { "" }
        )
        .map_err(io)?;
    }
    if rows.len() >= 2 {
        if let Some(s) = loglog_slope(&rows) {
            writeln!(out, "slope={s}").map_err(io)?;
        }
    }
    Ok(())
}

/// Parses `lo:hi:step` into the inclusive grid `lo, lo + step, ...`.
pub fn parse_range(spec: &str) -> Result<Vec<f64>> {
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() != 3 {
        return Err(Error::config("range", format!("expected lo:hi:step, got `{spec}`")));
    }
    let lo = number("range", parts[0])?;
    let hi = number("range", parts[1])?;
    let step = number("range", parts[2])?;
    if !(step > 0.0) || hi < lo {
        return Err(Error::config("range", "need lo <= hi and a positive step"));
    }
    let n = ((hi - lo) / step + 1e-9).floor() as usize;
    Ok((0..=n).map(|i| lo + step * i as f64).collect())
}

pub fn cmd_pullin(config: &Path, range: &str, grid: Option<&str>, out: &mut dyn Write) -> Result<()> {
    let cfg = RunConfig::load(config)?;
    let p = classic_config(&cfg)?;
    let detunings = parse_range(range)?;
    let ics = match grid {
        Some(g) => parse_grid(g)?,
        None => vec![ClassicStart {
            x: cfg.x,
            theta_delta: cfg.theta_delta.unwrap_or(cfg.theta1_0),
        }],
    };
    let report = pullin_probe(&p, &detunings, &ics, &cfg.integrator(), &cfg.criterion())?;
    writeln!(out, "omega_delta,verdict,escapes,runs,hold_in").map_err(io)?;
    for r in &report.rows {
        writeln!(
            out,
            "{},{},{},{},{}",
            fmt_f64(r.omega_delta),
            match r.verdict {
                crate::analysis::PullInVerdict::AllLock => "all-lock",
                crate::analysis::PullInVerdict::SomeEscape => "some-escape",
            },
            r.escapes,
            r.runs,
            r.hold_in.map_or("unknown".to_string(), |h| h.to_string())
        )
        .map_err(io)?;
    }
    let show = |v: Option<f64>| v.map_or("none".to_string(), |v| v.to_string());
    writeln!(
        out,
        "largest_all_lock={} smallest_some_escape={} monotone={}",
        show(report.largest_all_lock()),
        show(report.smallest_some_escape()),
        report.is_monotone()
    )
    .map_err(io)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = "model = classic_phase_space\nt_end = 1e-3\n";

    #[test]
    fn defaults_follow_reference_loop() {
        let c: RunConfig = MINIMAL.parse().unwrap();
        assert_eq!(c.omega1, LoopParams::REF_OMEGA1);
        assert_eq!(c.omega2_free, c.omega1);
        assert_eq!(c.params().unwrap(), LoopParams::reference());
    }

    #[test]
    fn comments_and_blank_lines() {
        let c: RunConfig = "# header\n\nmodel = phase_space   # trailing\n t_end=2e-3\n"
            .parse()
            .unwrap();
        assert_eq!(c.model, ModelKind::PhaseSpace);
        assert_eq!(c.t_end, 2e-3);
    }

    #[test]
    fn unknown_key_is_rejected() {
        let e = format!("{MINIMAL}frobnicate = 1\n").parse::<RunConfig>().unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "frobnicate"), "{e}");
    }

    #[test]
    fn bad_dt_names_key() {
        let e = format!("{MINIMAL}dt = -1\n").parse::<RunConfig>().unwrap_err();
        assert!(e.to_string().contains("dt"), "{e}");
        assert_eq!(exit_code(&e), EXIT_USAGE);
    }

    #[test]
    fn missing_required_keys() {
        assert!(matches!("t_end = 1".parse::<RunConfig>(), Err(Error::Config { key, .. }) if key == "model"));
        assert!(matches!("model = phase_space".parse::<RunConfig>(), Err(Error::Config { key, .. }) if key == "t_end"));
    }

    #[test]
    fn detuning_and_free_frequency_are_exclusive() {
        let c: RunConfig = format!("{MINIMAL}omega_delta_free = 89.45\n").parse().unwrap();
        assert!((c.params().unwrap().omega_delta_free() - 89.45).abs() < 1e-9);
        let e = format!("{MINIMAL}omega_delta_free = 1\nomega2_free = 2\n").parse::<RunConfig>();
        assert!(e.is_err());
    }

    #[test]
    fn model_specific_keys() {
        assert!(format!("{MINIMAL}x1 = 0.1\n").parse::<RunConfig>().is_err());
        assert!(format!("{MINIMAL}theta2 = 0.1\n").parse::<RunConfig>().is_err());
        assert!(format!("{MINIMAL}data_omega = 1e5\n").parse::<RunConfig>().is_err());
        assert!("model = signal_space\nt_end = 1\ndata_omega = 6.28e5\nx1 = 0.02\n"
            .parse::<RunConfig>()
            .is_ok());
    }

    #[test]
    fn round_trip() {
        let text = "model = signal_space\nscheme = dp45\nt_end = 5e-3\nsample_dt = 1e-7\n\
                    omega_delta_free = 2\nx1 = 0.02\ntheta_delta = 0.3\ndata_omega = 628318.5307179586\n\
                    loop_filter = lead_lag\ntau1 = 0.1\ntau2 = 0.029\noutput = a b.csv\n";
        let c: RunConfig = text.parse().unwrap();
        let again: RunConfig = c.to_text().parse().unwrap();
        assert_eq!(c, again);
        assert_eq!(again.output.as_deref(), Some("a b.csv"));
    }

    #[test]
    fn grids_and_ranges() {
        let g = parse_grid("x=0:1:3,theta=-1:1:2").unwrap();
        assert_eq!(g.len(), 6);
        assert_eq!(
            g[5],
            ClassicStart {
                x: 1.0,
                theta_delta: 1.0
            }
        );
        assert_eq!(parse_range("0:100:25").unwrap(), vec![0.0, 25.0, 50.0, 75.0, 100.0]);
        assert!(parse_range("0:1:0").is_err());
        assert!(parse_grid("x=0:1:3").is_err());
    }

    #[test]
    fn csv_number_format() {
        assert_eq!(fmt_f64(1234.5), "1.2345000000000000e3");
        assert_eq!(fmt_f64(-0.1).parse::<f64>().unwrap(), -0.1);
        let v = 0.1 + 0.2;
        assert_eq!(fmt_f64(v).parse::<f64>().unwrap(), v);
    }

    #[test]
    fn usage_errors_exit_one() {
        let mut o = Vec::new();
        let mut e = Vec::new();
        assert_eq!(
            main_with_args(["costas-lab", "example", "7"], &mut o, &mut e),
            EXIT_USAGE
        );
        assert_eq!(main_with_args(["costas-lab", "bogus"], &mut o, &mut e), EXIT_USAGE);
        assert_eq!(main_with_args(["costas-lab", "--help"], &mut o, &mut e), EXIT_OK);
    }
}
