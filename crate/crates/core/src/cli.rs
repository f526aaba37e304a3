//! Command-line experiment runner.
//!
//! Every subcommand resolves a [`RunConfig`] from a preset, a TOML file, or
//! both (file values win), applies flag overrides, validates it, and writes
//! either a CSV or a text report. CSVs open with `#` comment lines that echo
//! the program version, RNG, seed, and the resolved config, so each file
//! describes how to reproduce itself.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::birkhoff::{ensemble_averages, run_orbit_partial, Checkpoint, CheckpointSchedule};
use crate::error::Error;
use crate::luroth;
use crate::maps::{self, Boole, Dynamics, FareyLine, FareyUnit, MapDescriptor, MapKind, OrbitPoint};
use crate::observables::{AdaptedWave, CosWave, HalfLineIndicator, LevelPartition, LevelStep, Observable, Wave};
use crate::rng::{StreamRng, RNG_NAME};
use crate::sequences::PartitionSequence;
use crate::stats;
use crate::tower::{self, LevyTower};
use crate::verify;

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Default number of evenly spaced checkpoints in a figure window.
pub const WINDOW_CHECKPOINTS: usize = 2000;

/// Ratio between full-scale and desk-scale orbit lengths.
pub const FULL_SCALE_FACTOR: u64 = 5;

#[derive(Debug, Parser)]
#[command(name = "birkhoff-global", version, about = "Birkhoff averages of global observables")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// A_n along one orbit, at checkpoints.
    Simulate(CommonArgs),
    /// A_n over an ensemble of starting points.
    Ensemble(CommonArgs),
    /// Occupation times of Boole's map against the arcsine law.
    Arcsine(CommonArgs),
    /// Scaled Lévy-walk trajectories from the tower.
    Levywalk(CommonArgs),
    /// Digit statistics and sum-level masses.
    Luroth(CommonArgs),
    /// Runs the invariant suite; exit code 0 iff every check passes.
    Verify(CommonArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct CommonArgs {
    /// Named parameter set (see `--preset list`).
    #[arg(long)]
    pub preset: Option<String>,
    /// TOML config file.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long = "n-max")]
    pub n_max: Option<u64>,
    /// Output path; standard output when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Worker threads for ensembles.
    #[arg(long)]
    pub threads: Option<usize>,
    /// Paper-scale orbit lengths instead of desk scale.
    #[arg(long = "full-scale")]
    pub full_scale: bool,
}

/// Failure classes, mapped to exit codes 1 and 2.
#[derive(Debug)]
pub enum CliError {
    Validation(String),
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Runtime(_) => 2,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid configuration: {m}"),
            CliError::Runtime(m) => write!(f, "run aborted: {m}"),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Singular { .. } => CliError::Runtime(e.to_string()),
            other => CliError::Validation(other.to_string()),
        }
    }
}

impl From<io::Error> for CliError {
    fn from(e: io::Error) -> Self {
        CliError::Runtime(format!("i/o: {e}"))
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Runtime(format!("csv: {e}"))
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn invalid<T>(msg: impl Into<String>) -> CliResult<T> {
    Err(CliError::Validation(msg.into()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapConfig {
    pub kind: MapKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ObservableConfig {
    Wave { omega: f64 },
    CosWave { omega: f64 },
    /// Coefficients as `[re, im]` pairs.
    LevelStepPeriodic { coefficients: Vec<[f64; 2]> },
    HalfLineIndicator { a: f64 },
    AdaptedWave { omega: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StartConfig {
    Point { x0: f64 },
    Uniform { lo: f64, hi: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckpointConfig {
    /// Start of the evenly spaced window; a geometric grid precedes it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window_start: Option<u64>,
    #[serde(default = "default_window_count")]
    pub count: usize,
    /// Geometric ratio when there is no window.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ratio: Option<f64>,
}

fn default_window_count() -> usize {
    WINDOW_CHECKPOINTS
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum YScale {
    Milli,
    Absolute,
}

impl YScale {
    fn label(self) -> &'static str {
        match self {
            YScale::Milli => "1e-3",
            YScale::Absolute => "absolute",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArcsineConfig {
    pub samples: usize,
    pub n: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayKind {
    Symmetric,
    Three,
    Radial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LevyConfig {
    pub beta: f64,
    pub rays: RayKind,
    pub samples: usize,
    pub n: u64,
    pub grid: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LurothConfig {
    pub beta: f64,
    /// Largest index of the sum-level masses.
    pub k: usize,
    pub digits: u64,
    pub n_min: u64,
    pub streams: u64,
}

/// Everything a run needs. Sections irrelevant to a subcommand are ignored
/// by it but still validated when present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_max: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_scale: Option<YScale>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<MapConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub observable: Option<ObservableConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<StartConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoints: Option<CheckpointConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub arcsine: Option<ArcsineConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub levywalk: Option<LevyConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub luroth: Option<LurothConfig>,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> CliResult<Self> {
        toml::from_str(text).map_err(|e| CliError::Validation(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn empty() -> Self {
        Self {
            seed: 0,
            n_max: None,
            samples: None,
            y_scale: None,
            map: None,
            observable: None,
            start: None,
            checkpoints: None,
            arcsine: None,
            levywalk: None,
            luroth: None,
        }
    }

    /// Fields set in `other` replace those of `self`.
    fn overlay(mut self, other: RunConfig) -> Self {
        self.seed = other.seed;
        macro_rules! take {
            ($($f:ident),*) => { $( if other.$f.is_some() { self.$f = other.$f; } )* };
        }
        take!(n_max, samples, y_scale, map, observable, start, checkpoints, arcsine, levywalk, luroth);
        self
    }
}

pub const PRESETS: &[&str] = &[
    "beta_35", "beta_48", "beta_50", "beta_52", "beta_65", "beta_98", "farey", "arcsine", "levywalk", "luroth",
];

/// Desk-scale preset; `full_scale` multiplies orbit lengths by [`FULL_SCALE_FACTOR`].
pub fn preset(name: &str, full_scale: bool) -> CliResult<RunConfig> {
    let k = if full_scale { FULL_SCALE_FACTOR } else { 1 };
    let figure = |map: MapConfig, n_max: u64, window_start: u64, scale: YScale| RunConfig {
        n_max: Some(n_max * k),
        y_scale: Some(scale),
        map: Some(map),
        observable: Some(ObservableConfig::CosWave { omega: 0.2 }),
        start: Some(StartConfig::Point { x0: 0.65 }),
        checkpoints: Some(CheckpointConfig {
            window_start: Some(window_start * k),
            count: WINDOW_CHECKPOINTS,
            ratio: None,
        }),
        ..RunConfig::empty()
    };
    let alpha = |beta: f64| MapConfig {
        kind: MapKind::AlphaFareyLine,
        beta: Some(beta),
    };
    Ok(match name {
        "beta_35" => figure(alpha(0.35), 10_000_000, 9_000_000, YScale::Milli),
        "beta_48" => figure(alpha(0.48), 10_000_000, 9_000_000, YScale::Milli),
        "beta_50" => figure(alpha(0.50), 10_000_000, 9_000_000, YScale::Milli),
        "beta_52" => figure(alpha(0.52), 10_000_000, 9_000_000, YScale::Milli),
        "beta_65" => figure(alpha(0.65), 10_000_000, 9_000_000, YScale::Milli),
        "beta_98" => figure(alpha(0.98), 20_000_000, 4_000_000, YScale::Absolute),
        "farey" => figure(
            MapConfig {
                kind: MapKind::FareyLine,
                beta: None,
            },
            20_000_000,
            4_000_000,
            YScale::Absolute,
        ),
        "arcsine" => RunConfig {
            arcsine: Some(ArcsineConfig { samples: 5000, n: 100_000 * k }),
            ..RunConfig::empty()
        },
        "levywalk" => RunConfig {
            levywalk: Some(LevyConfig {
                beta: 0.5,
                rays: RayKind::Symmetric,
                samples: 2000,
                n: 100_000 * k,
                grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            }),
            ..RunConfig::empty()
        },
        "luroth" => RunConfig {
            luroth: Some(LurothConfig {
                beta: 0.5,
                k: 20_000,
                digits: 1_000_000,
                n_min: 100_000,
                streams: 10,
            }),
            ..RunConfig::empty()
        },
        other => return invalid(format!("unknown preset {other:?}; known: {}", PRESETS.join(", "))),
    })
}

/// Preset, then file, then flags.
pub fn resolve(args: &CommonArgs) -> CliResult<RunConfig> {
    let mut cfg = match &args.preset {
        Some(name) => preset(name, args.full_scale)?,
        None => RunConfig::empty(),
    };
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Validation(format!("cannot read {}: {e}", path.display())))?;
        let file = RunConfig::from_toml(&text)?;
        cfg = if args.preset.is_some() { cfg.overlay(file) } else { file };
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(n) = args.n_max {
        if n == 0 {
            return invalid("--n-max must be at least 1");
        }
        if let (Some(old), Some(cp)) = (cfg.n_max, cfg.checkpoints.as_mut()) {
            if let Some(ws) = cp.window_start {
                // keep the window's share of the run
                cp.window_start = Some(((ws as f64 / old as f64) * n as f64).round().max(1.0) as u64);
            }
        }
        cfg.n_max = Some(n);
        for section_n in [
            cfg.arcsine.as_mut().map(|a| &mut a.n),
            cfg.levywalk.as_mut().map(|l| &mut l.n),
        ]
        .into_iter()
        .flatten()
        {
            *section_n = n;
        }
    }
    Ok(cfg)
}

fn schedule(cfg: &RunConfig) -> CliResult<CheckpointSchedule> {
    let n_max = cfg.n_max.ok_or_else(|| CliError::Validation("n_max is required".into()))?;
    let sched = match &cfg.checkpoints {
        Some(CheckpointConfig {
            window_start: Some(ws),
            count,
            ..
        }) => {
            if *ws > n_max {
                return invalid(format!("window_start {ws} exceeds n_max {n_max}"));
            }
            CheckpointSchedule::with_window(n_max, *ws, *count)?
        }
        Some(CheckpointConfig { ratio, .. }) => CheckpointSchedule::geometric(n_max, ratio.unwrap_or(1.05))?,
        None => CheckpointSchedule::geometric(n_max, 1.05)?,
    };
    Ok(sched)
}

fn build_observable(cfg: &ObservableConfig, desc: &MapDescriptor, max_x: f64) -> CliResult<Box<dyn Observable>> {
    Ok(match cfg {
        ObservableConfig::Wave { omega } => Box::new(Wave::new(*omega)?),
        ObservableConfig::CosWave { omega } => Box::new(CosWave::new(*omega)?),
        ObservableConfig::HalfLineIndicator { a } => Box::new(HalfLineIndicator::new(*a)),
        ObservableConfig::LevelStepPeriodic { coefficients } => {
            let c = coefficients.iter().map(|&[re, im]| Complex64::new(re, im)).collect();
            let step = LevelStep::periodic(c)?;
            let has_levels = !matches!(desc.kind, MapKind::Boole);
            if !has_levels && coefficients.len() > 1 {
                return invalid("level_step_periodic needs a map with a level partition");
            }
            Box::new(match &desc.seq {
                Some(seq) => step.with_partition(LevelPartition::Alpha(seq.clone())),
                None => step.with_partition(LevelPartition::Farey),
            })
        }
        ObservableConfig::AdaptedWave { omega } => match (&desc.kind, &desc.seq) {
            (MapKind::AlphaFareyLine, Some(seq)) => Box::new(AdaptedWave::new(*omega, seq.clone(), max_x)?),
            _ => return invalid("adapted_wave is defined for alpha_farey_line only"),
        },
    })
}

fn descriptor(cfg: &RunConfig) -> CliResult<MapDescriptor> {
    let m = cfg.map.as_ref().ok_or_else(|| CliError::Validation("[map] section is required".into()))?;
    Ok(MapDescriptor::new(m.kind, m.beta)?)
}

fn observable_for(cfg: &RunConfig, desc: &MapDescriptor) -> CliResult<Box<dyn Observable>> {
    let o = cfg
        .observable
        .as_ref()
        .ok_or_else(|| CliError::Validation("[observable] section is required".into()))?;
    build_observable(o, desc, 1e4)
}

/// Output sink: a file or standard output.
fn sink(out: &Option<PathBuf>) -> CliResult<Box<dyn Write>> {
    Ok(match out {
        Some(p) => Box::new(io::BufWriter::new(fs::File::create(p)?)),
        None => Box::new(io::BufWriter::new(io::stdout().lock())),
    })
}

/// `# key: value` lines, then the config as commented TOML.
pub fn write_header(w: &mut dyn Write, command: &str, args: &CommonArgs, cfg: &RunConfig) -> io::Result<()> {
    writeln!(w, "# birkhoff-global {VERSION}")?;
    writeln!(w, "# command: {command}")?;
    if let Some(p) = &args.preset {
        writeln!(w, "# preset: {p}")?;
    }
    writeln!(w, "# scale: {}", if args.full_scale { "full" } else { "desk" })?;
    writeln!(w, "# rng: {RNG_NAME}")?;
    writeln!(w, "# seed: {}", cfg.seed)?;
    writeln!(w, "# y_scale: {}", cfg.y_scale.unwrap_or(YScale::Absolute).label())?;
    writeln!(w, "# config:")?;
    for line in cfg.to_toml().lines() {
        if line.is_empty() {
            writeln!(w, "#")?;
        } else {
            writeln!(w, "#   {line}")?;
        }
    }
    Ok(())
}

fn write_checkpoints(w: &mut dyn Write, real: bool, rows: &[Checkpoint]) -> CliResult<()> {
    let mut csv = csv::Writer::from_writer(w);
    if real {
        csv.write_record(["n", "value"])?;
        for c in rows {
            csv.write_record([c.n.to_string(), c.average.re.to_string()])?;
        }
    } else {
        csv.write_record(["n", "re", "im"])?;
        for c in rows {
            csv.write_record([c.n.to_string(), c.average.re.to_string(), c.average.im.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

fn write_samples(w: &mut dyn Write, real: bool, values: &[Complex64]) -> CliResult<()> {
    let mut csv = csv::Writer::from_writer(w);
    if real {
        csv.write_record(["sample", "value"])?;
        for (i, v) in values.iter().enumerate() {
            csv.write_record([i.to_string(), v.re.to_string()])?;
        }
    } else {
        csv.write_record(["sample", "re", "im"])?;
        for (i, v) in values.iter().enumerate() {
            csv.write_record([i.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
    }
    csv.flush()?;
    Ok(())
}

/// A start state for each concrete map.
trait StartFrom: Dynamics {
    fn start_at(&self, x: f64) -> CliResult<Self::State>;
}

impl StartFrom for Boole {
    fn start_at(&self, x: f64) -> CliResult<f64> {
        if !x.is_finite() {
            return invalid(format!("x0 = {x} is not finite"));
        }
        Ok(x)
    }
}

impl StartFrom for FareyUnit {
    fn start_at(&self, x: f64) -> CliResult<f64> {
        if !(0.0..=1.0).contains(&x) {
            return invalid(format!("x0 = {x} outside [0, 1]"));
        }
        Ok(x)
    }
}

impl StartFrom for FareyLine {
    fn start_at(&self, x: f64) -> CliResult<OrbitPoint> {
        Ok(FareyLine::from_real(x)?)
    }
}

impl StartFrom for maps::AlphaFareyUnit {
    fn start_at(&self, x: f64) -> CliResult<f64> {
        if !(x > 0.0 && x <= 1.0) {
            return invalid(format!("x0 = {x} outside (0, 1]"));
        }
        Ok(x)
    }
}

impl StartFrom for maps::AlphaFareyLine {
    fn start_at(&self, x: f64) -> CliResult<OrbitPoint> {
        Ok(self.point(x)?)
    }
}

/// Calls `$body` with `$map` bound to the concrete map of `$desc`.
macro_rules! with_map {
    ($desc:expr, $map:ident => $body:expr) => {{
        let desc: &MapDescriptor = $desc;
        match desc.kind {
            MapKind::Boole => {
                let $map = Boole;
                $body
            }
            MapKind::FareyUnit => {
                let $map = FareyUnit;
                $body
            }
            MapKind::FareyLine => {
                let $map = FareyLine;
                $body
            }
            MapKind::AlphaFareyUnit => {
                let $map = maps::AlphaFareyUnit::new(desc.seq.clone().expect("validated"));
                $body
            }
            MapKind::AlphaFareyLine => {
                let $map = maps::AlphaFareyLine::new(desc.seq.clone().expect("validated"));
                $body
            }
        }
    }};
}

fn simulate_rows<D: StartFrom>(map: &D, obs: &dyn Observable, x0: f64, sched: &CheckpointSchedule) -> CliResult<(Vec<Checkpoint>, Option<Error>)> {
    let start = map.start_at(x0)?;
    let run = run_orbit_partial(map, obs, start, sched);
    Ok((run.checkpoints, run.abort))
}

pub fn simulate(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(args)?;
    let desc = descriptor(&cfg)?;
    let obs = observable_for(&cfg, &desc)?;
    let x0 = match cfg.start {
        Some(StartConfig::Point { x0 }) => x0,
        Some(StartConfig::Uniform { .. }) => return invalid("simulate needs a point start (kind = \"point\")"),
        None => return invalid("[start] section is required"),
    };
    let sched = schedule(&cfg)?;
    let (rows, abort) = with_map!(&desc, map => simulate_rows(&map, &*obs, x0, &sched))?;
    write_header(out, "simulate", args, &cfg)?;
    write_checkpoints(out, obs.is_real(), &rows)?;
    if let Some(e) = abort {
        writeln!(out, "# abort: {e}")?;
        out.flush()?;
        return Err(CliError::Runtime(e.to_string()));
    }
    out.flush()?;
    Ok(())
}

fn ensemble_values<D: StartFrom>(map: &D, obs: &dyn Observable, start: &StartConfig, n: u64, count: usize, seed: u64) -> CliResult<Vec<Complex64>> {
    let draw = |r: &mut StreamRng| -> f64 {
        match *start {
            StartConfig::Point { x0 } => x0,
            StartConfig::Uniform { lo, hi } => r.gen_range(lo..hi),
        }
    };
    // validate the start region once
    if let StartConfig::Uniform { lo, hi } = *start {
        if !(lo < hi) {
            return invalid(format!("uniform start needs lo < hi (got {lo}, {hi})"));
        }
    }
    map.start_at(draw(&mut crate::rng::stream(seed, 0)))?;
    let results = ensemble_averages(
        map,
        obs,
        |r: &mut StreamRng| map.start_at(draw(r)).map_err(|e| Error::Invalid(e.to_string())),
        n,
        count,
        seed,
    );
    results
        .into_iter()
        .enumerate()
        .map(|(i, r)| r.map_err(|e| CliError::Runtime(format!("orbit {i}: {e}"))))
        .collect()
}

pub fn ensemble(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(args)?;
    let desc = descriptor(&cfg)?;
    let obs = observable_for(&cfg, &desc)?;
    let start = cfg.start.clone().ok_or_else(|| CliError::Validation("[start] section is required".into()))?;
    let n = cfg.n_max.ok_or_else(|| CliError::Validation("n_max is required".into()))?;
    let count = cfg.samples.unwrap_or(1);
    if count == 0 {
        return invalid("samples must be at least 1");
    }
    let values = with_map!(&desc, map => ensemble_values(&map, &*obs, &start, n, count, cfg.seed))?;
    write_header(out, "ensemble", args, &cfg)?;
    write_samples(out, obs.is_real(), &values)?;
    out.flush()?;
    Ok(())
}

/// Passing threshold of the arcsine report.
pub const ARCSINE_KS_LIMIT: f64 = 0.05;

pub fn arcsine(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let mut cfg = resolve(args)?;
    let a = cfg.arcsine.get_or_insert(ArcsineConfig {
        samples: 5000,
        n: args.n_max.unwrap_or(100_000),
    });
    if a.samples == 0 || a.n == 0 {
        return invalid("arcsine needs samples ≥ 1 and n ≥ 1");
    }
    let a = a.clone();
    let report = stats::occupation_experiment(a.samples, a.n, cfg.seed)?;
    let verdict = if report.ks < ARCSINE_KS_LIMIT { "PASS" } else { "FAIL" };
    if args.out.is_some() {
        let mut w = sink(&args.out)?;
        write_header(&mut *w, "arcsine", args, &cfg)?;
        let values: Vec<Complex64> = report.fractions.values().iter().map(|&v| Complex64::new(v, 0.0)).collect();
        write_samples(&mut *w, true, &values)?;
        w.flush()?;
    }
    writeln!(
        out,
        "arcsine: M={} n={} seed={} resampled={} ks={:.5}; ks < {ARCSINE_KS_LIMIT}: {verdict}",
        a.samples, a.n, cfg.seed, report.resampled, report.ks
    )?;
    Ok(())
}

fn levy_tower(l: &LevyConfig) -> CliResult<LevyTower> {
    Ok(match l.rays {
        RayKind::Symmetric => LevyTower::symmetric(l.beta)?,
        RayKind::Three => LevyTower::rays_of_unity(l.beta, 3)?,
        RayKind::Radial => LevyTower::radial(l.beta)?,
    })
}

pub fn levywalk(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(args)?;
    let l = cfg
        .levywalk
        .clone()
        .ok_or_else(|| CliError::Validation("[levywalk] section is required (or --preset levywalk)".into()))?;
    if l.samples == 0 || l.n == 0 || l.grid.is_empty() {
        return invalid("levywalk needs samples ≥ 1, n ≥ 1 and a non-empty grid");
    }
    let lt = levy_tower(&l)?;
    let paths = tower::scaled_process(&lt, l.samples, l.n, &l.grid, cfg.seed)?;
    write_header(out, "levywalk", args, &cfg)?;
    writeln!(out, "# zeta(beta+1): {:.15e} (direct sum to 64 plus Euler-Maclaurin tail)", lt.zeta())?;
    let mut csv = csv::Writer::from_writer(&mut *out);
    csv.write_record(["sample", "t", "re", "im"])?;
    for (i, path) in paths.iter().enumerate() {
        for (t, v) in l.grid.iter().zip(path) {
            csv.write_record([i.to_string(), t.to_string(), v.re.to_string(), v.im.to_string()])?;
        }
    }
    csv.flush()?;
    drop(csv);
    out.flush()?;
    Ok(())
}

pub fn luroth_report(args: &CommonArgs, out: &mut dyn Write) -> CliResult<()> {
    let cfg = resolve(args)?;
    let l = cfg
        .luroth
        .clone()
        .ok_or_else(|| CliError::Validation("[luroth] section is required (or --preset luroth)".into()))?;
    if l.k == 0 || l.streams == 0 || l.n_min < 2 || l.n_min > l.digits {
        return invalid("luroth needs k ≥ 1, streams ≥ 1 and 2 ≤ n_min ≤ digits");
    }
    let seq = PartitionSequence::new(l.beta)?;
    let u = luroth::sum_level_masses(l.k, &seq);
    let ratio = luroth::renewal_asymptotic_ratio(u[l.k], l.k as u64, &seq);
    writeln!(out, "luroth: beta={} seed={}", l.beta, cfg.seed)?;
    writeln!(out, "sum-level mass u_{} = {:.6e}; u_k*Gamma(2-b)*Gamma(b)*tau_k = {:.6}", l.k, u[l.k], ratio)?;
    let sampler = luroth::DigitSampler::new(&seq);
    for s in 0..l.streams {
        let mut r = crate::rng::stream(cfg.seed, s);
        let digits = std::iter::repeat_with(|| sampler.sample_real(&mut r));
        let stat = luroth::lemma_error_statistic(digits, l.beta, l.n_min, l.digits)?;
        writeln!(out, "stream {s}: max_{{{}<=n<={}}} l_n^b/S_(n-1) = {:.6e}", l.n_min, l.digits, stat)?;
    }
    if args.out.is_some() {
        let mut w = sink(&args.out)?;
        write_header(&mut *w, "luroth", args, &cfg)?;
        let mut csv = csv::Writer::from_writer(&mut *w);
        csv.write_record(["k", "value"])?;
        for (k, v) in u.iter().enumerate() {
            csv.write_record([k.to_string(), v.to_string()])?;
        }
        csv.flush()?;
        drop(csv);
        w.flush()?;
    }
    Ok(())
}

pub fn verify_suite(out: &mut dyn Write) -> CliResult<()> {
    let checks = verify::run_suite();
    let mut failed = 0;
    for c in &checks {
        writeln!(out, "{} {}: {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail)?;
        failed += usize::from(!c.passed);
    }
    writeln!(out, "{} checks, {} failed", checks.len(), failed)?;
    out.flush()?;
    if failed > 0 {
        return Err(CliError::Runtime(format!("{failed} invariant checks failed")));
    }
    Ok(())
}

fn configure_threads(threads: Option<usize>) -> CliResult<()> {
    if let Some(n) = threads {
        if n == 0 {
            return invalid("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Runtime(e.to_string()))?;
    }
    Ok(())
}

/// Runs a parsed command line and returns the process exit code.
pub fn run(cli: Cli) -> i32 {
    let result = (|| -> CliResult<()> {
        let (args, cmd): (&CommonArgs, &Command) = match &cli.command {
            c @ (Command::Simulate(a)
            | Command::Ensemble(a)
            | Command::Arcsine(a)
            | Command::Levywalk(a)
            | Command::Luroth(a)
            | Command::Verify(a)) => (a, c),
        };
        if args.preset.as_deref() == Some("list") {
            println!("{}", PRESETS.join("\n"));
            return Ok(());
        }
        configure_threads(args.threads)?;
        let report_to_file = matches!(cmd, Command::Simulate(_) | Command::Ensemble(_) | Command::Levywalk(_));
        let mut out: Box<dyn Write> = if report_to_file {
            sink(&args.out)?
        } else {
            Box::new(io::stdout().lock())
        };
        match cmd {
            Command::Simulate(a) => simulate(a, &mut *out),
            Command::Ensemble(a) => ensemble(a, &mut *out),
            Command::Arcsine(a) => arcsine(a, &mut *out),
            Command::Levywalk(a) => levywalk(a, &mut *out),
            Command::Luroth(a) => luroth_report(a, &mut *out),
            Command::Verify(_) => verify_suite(&mut *out),
        }
    })();
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `argv`, mapping usage errors to exit code 1.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(argv) {
        Ok(cli) => run(cli),
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            code
        }
    }
}

/// Comment lines, header fields and data rows of a CSV.
pub type CsvParts = (Vec<String>, Vec<String>, Vec<Vec<String>>);

/// Reads a CSV written by this tool.
pub fn read_csv(path: &Path) -> CliResult<CsvParts> {
    let text = fs::read_to_string(path)?;
    let comments = text
        .lines()
        .filter(|l| l.starts_with('#'))
        .map(str::to_string)
        .collect();
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(text.as_bytes());
    let header = rdr.headers()?.iter().map(str::to_string).collect();
    let rows = rdr
        .records()
        .map(|r| r.map(|rec| rec.iter().map(str::to_string).collect()))
        .collect::<Result<_, _>>()?;
    Ok((comments, header, rows))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn args(preset: Option<&str>) -> CommonArgs {
        CommonArgs {
            preset: preset.map(str::to_string),
            ..CommonArgs::default()
        }
    }

    #[test]
    fn presets_resolve() {
        for p in PRESETS {
            let cfg = preset(p, false).unwrap();
            let text = cfg.to_toml();
            assert_eq!(RunConfig::from_toml(&text).unwrap(), cfg, "{p}");
        }
        let b35 = preset("beta_35", false).unwrap();
        assert_eq!(b35.n_max, Some(10_000_000));
        assert_eq!(b35.checkpoints.unwrap().window_start, Some(9_000_000));
        let full = preset("beta_35", true).unwrap();
        assert_eq!(full.n_max, Some(50_000_000));
        assert_eq!(full.checkpoints.unwrap().window_start, Some(45_000_000));
        let b98 = preset("beta_98", true).unwrap();
        assert_eq!(b98.n_max, Some(100_000_000));
        assert_eq!(b98.checkpoints.unwrap().window_start, Some(20_000_000));
        assert!(preset("nope", false).is_err());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_toml("seed = 1\nbogus = 2\n").is_err());
        assert!(RunConfig::from_toml("[map]\nkind = \"boole\"\nextra = 1\n").is_err());
        assert!(RunConfig::from_toml("[observable]\nkind = \"wave\"\nomega = 0.2\nphase = 1\n").is_err());
        assert!(RunConfig::from_toml("[observable]\nkind = \"nope\"\n").is_err());
    }

    #[test]
    fn n_max_override_keeps_window_share() {
        let mut a = args(Some("beta_35"));
        a.n_max = Some(1000);
        let cfg = resolve(&a).unwrap();
        assert_eq!(cfg.n_max, Some(1000));
        assert_eq!(cfg.checkpoints.unwrap().window_start, Some(900));
    }

    #[test]
    fn validation_errors_map_to_exit_one() {
        let mut out = Vec::new();
        let e = simulate(&args(None), &mut out).unwrap_err();
        assert_eq!(e.exit_code(), 1);
        let cfg = "n_max = 10\n[map]\nkind = \"boole\"\nbeta = 0.5\n[observable]\nkind = \"wave\"\nomega = 0.2\n[start]\nkind = \"point\"\nx0 = 0.3\n";
        assert!(descriptor(&RunConfig::from_toml(cfg).unwrap()).is_err());
    }
}
