//! Command-line front end: argument and TOML config parsing, defaults,
//! dispatch to the experiment drivers and result output.
//!
//! Settings are resolved as command defaults, then the `--config` file,
//! then explicit flags. The resolved [`RunConfig`] is echoed into every
//! output file and can be fed back through `--config` to rerun exactly.

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::{
    run_single, run_spatial_convergence, run_temporal_convergence, run_trace, ConvergenceConfig,
    TraceConfig,
};
use crate::integrators::Scheme;
use crate::noise::NoiseKind;
use crate::observables::ObservableSet;
use crate::output::{emit, render_result, render_single};
use crate::problems::{CustomProblem, ProblemSpec, BUILTIN_NAMES};

/// Environment variable holding the number of Monte-Carlo worker threads.
pub const WORKERS_ENV: &str = "STOCHWAVE_WORKERS";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    ConvergenceSpace,
    ConvergenceTime,
    Trace,
    SingleRun,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::ConvergenceSpace => "convergence-space",
            Command::ConvergenceTime => "convergence-time",
            Command::Trace => "trace",
            Command::SingleRun => "single-run",
        })
    }
}

/// Fully resolved settings of one run.
///
/// Spatial studies use `k` as the common time step and `ladder`/`reference`
/// as mesh widths; temporal studies use `h` as the common mesh width and
/// `ladder`/`reference` as time steps; trace and single runs use `h` and `k`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub command: Command,
    pub problem: String,
    pub noise: NoiseKind,
    pub schemes: Vec<Scheme>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub h: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub k: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ladder: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference: Option<f64>,
    pub t_end: f64,
    pub samples: usize,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(default)]
    pub paper_scale: bool,
    #[serde(default)]
    pub record_velocity: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub custom: Option<CustomProblem>,
}

/// A `--config` file: any subset of [`RunConfig`].
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    command: Option<Command>,
    problem: Option<String>,
    noise: Option<NoiseKind>,
    schemes: Option<Vec<Scheme>>,
    h: Option<f64>,
    k: Option<f64>,
    ladder: Option<Vec<f64>>,
    reference: Option<f64>,
    t_end: Option<f64>,
    samples: Option<usize>,
    seed: Option<u64>,
    truncation: Option<usize>,
    paper_scale: Option<bool>,
    record_velocity: Option<bool>,
    output: Option<PathBuf>,
    custom: Option<CustomProblem>,
}

#[derive(Debug, Parser)]
#[command(
    name = "stochwave",
    version,
    about = "Semilinear stochastic wave equations: finite elements in space, trigonometric and Euler-type schemes in time"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: CommandArgs,
}

#[derive(Debug, Subcommand)]
pub enum CommandArgs {
    /// Mean-square error against a fine reference mesh, over a ladder of mesh widths.
    ConvergenceSpace(RunArgs),
    /// Mean-square error against a fine reference time step, over a ladder of time steps.
    ConvergenceTime(RunArgs),
    /// Expected Hamiltonian over time and its drift against ½Tr(PₕQPₕ).
    Trace(RunArgs),
    /// One trajectory with its Hamiltonian and norms at every step.
    SingleRun(RunArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct RunArgs {
    /// anderson, sine-gordon-additive, sine-gordon-multiplicative, linear-additive or custom.
    #[arg(long)]
    pub problem: Option<String>,
    /// Drift f(u) of a custom problem, e.g. "-sin(u)".
    #[arg(long, allow_hyphen_values = true)]
    pub f: Option<String>,
    /// Diffusion g(u) of a custom problem; "1" means additive noise.
    #[arg(long, allow_hyphen_values = true)]
    pub g: Option<String>,
    /// Potential V(u) with f = -V'.
    #[arg(long = "V", allow_hyphen_values = true)]
    pub potential: Option<String>,
    /// Initial position u0(x) of a custom problem.
    #[arg(long, allow_hyphen_values = true)]
    pub u0: Option<String>,
    /// Initial velocity v0(x) of a custom problem.
    #[arg(long, allow_hyphen_values = true)]
    pub v0: Option<String>,
    /// white, off or power:S for Q = Λ^-S.
    #[arg(long)]
    pub noise: Option<String>,
    /// Number of noise modes.
    #[arg(long = "J")]
    pub truncation: Option<usize>,
    /// Comma-separated list of STM, EM, SEM, BEM, CNM.
    #[arg(long, value_delimiter = ',')]
    pub schemes: Option<Vec<String>>,
    /// Mesh width; accepts 2^-6.
    #[arg(long, allow_hyphen_values = true)]
    pub h: Option<String>,
    /// Time step; accepts 2^-9.
    #[arg(long, allow_hyphen_values = true)]
    pub k: Option<String>,
    /// Final time.
    #[arg(long = "T")]
    pub t_end: Option<f64>,
    /// Number of Monte-Carlo samples.
    #[arg(long = "M")]
    pub samples: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Resolutions, as a list ("0.25,0.125") or a dyadic range ("2^-2..2^-6").
    #[arg(long)]
    pub ladder: Option<String>,
    /// Resolution of the reference solution.
    #[arg(long)]
    pub reference: Option<String>,
    /// TOML file with any of the run settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output CSV path; standard output if absent.
    #[arg(long = "out", short = 'o')]
    pub output: Option<PathBuf>,
    /// Use the full-size parameters of the published experiments.
    #[arg(long)]
    pub paper_scale: bool,
    /// Also report velocity errors in convergence studies.
    #[arg(long)]
    pub record_velocity: bool,
}

/// `2^-6`, `2^{-6}` or a plain number.
pub fn parse_resolution(src: &str, field: &str) -> Result<f64> {
    let s = src.trim();
    let value = if let Some(exp) = s.strip_prefix("2^") {
        let exp = exp.trim_start_matches('{').trim_end_matches('}');
        exp.parse::<i32>().map(|e| 2f64.powi(e)).map_err(|_| ())
    } else {
        s.parse::<f64>().map_err(|_| ())
    };
    match value {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(Error::usage(
            field,
            format!("`{src}` is not a positive number or power of two like 2^-6"),
        )),
    }
}

fn exponent(src: &str, field: &str) -> Result<i32> {
    let s = src.trim();
    s.strip_prefix("2^")
        .map(|e| e.trim_start_matches('{').trim_end_matches('}'))
        .and_then(|e| e.parse::<i32>().ok())
        .ok_or_else(|| Error::usage(field, format!("range bound `{src}` must look like 2^-4")))
}

/// `2^-2..2^-6` (every power of two between the bounds) or a comma list.
pub fn parse_ladder(src: &str) -> Result<Vec<f64>> {
    if let Some((a, b)) = src.split_once("..") {
        let (a, b) = (exponent(a, "ladder")?, exponent(b, "ladder")?);
        let step = if b >= a { 1 } else { -1 };
        let mut out = vec![2f64.powi(a)];
        let mut e = a;
        while e != b {
            e += step;
            out.push(2f64.powi(e));
        }
        return Ok(out);
    }
    src.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| parse_resolution(s, "ladder"))
        .collect()
}

/// `white`, `off`, `power:S`, `power(S)` or `power=S`.
pub fn parse_noise(src: &str) -> Result<NoiseKind> {
    let s = src.trim().to_ascii_lowercase();
    match s.as_str() {
        "white" => return Ok(NoiseKind::White),
        "off" | "none" => return Ok(NoiseKind::Off),
        _ => {}
    }
    let arg = s
        .strip_prefix("power")
        .map(|r| r.trim_start_matches([':', '=', '(']).trim_end_matches(')'));
    match arg.map(str::parse::<f64>) {
        Some(Ok(v)) if v >= 0.0 && v.is_finite() => Ok(NoiseKind::Power { s: v }),
        _ => Err(Error::usage(
            "noise",
            format!("`{src}` is not one of white, off or power:S with S ≥ 0"),
        )),
    }
}

fn pow2_range(a: i32, b: i32) -> Vec<f64> {
    (a.min(b)..=a.max(b)).rev().map(|e| 2f64.powi(e)).collect()
}

fn defaults(command: Command, paper: bool) -> RunConfig {
    let base = RunConfig {
        command,
        problem: String::new(),
        noise: NoiseKind::White,
        schemes: vec![Scheme::Stm],
        h: None,
        k: None,
        ladder: Vec::new(),
        reference: None,
        t_end: 1.0,
        samples: 1,
        seed: 0,
        truncation: None,
        paper_scale: paper,
        record_velocity: false,
        output: None,
        custom: None,
    };
    let m = if paper { 2500 } else { 200 };
    match command {
        Command::ConvergenceSpace => RunConfig {
            problem: "anderson".into(),
            k: Some(2f64.powi(-9)),
            ladder: if paper { pow2_range(-2, -8) } else { pow2_range(-2, -6) },
            reference: Some(2f64.powi(if paper { -9 } else { -8 })),
            t_end: 1.0,
            samples: m,
            ..base
        },
        Command::ConvergenceTime => RunConfig {
            problem: "sine-gordon-additive".into(),
            schemes: vec![Scheme::Stm, Scheme::Sem, Scheme::Cnm],
            h: Some(2f64.powi(if paper { -9 } else { -6 })),
            ladder: if paper { pow2_range(-4, -9) } else { pow2_range(-4, -8) },
            reference: Some(2f64.powi(-11)),
            t_end: 0.5,
            samples: m,
            ..base
        },
        Command::Trace => RunConfig {
            problem: "sine-gordon-additive".into(),
            noise: NoiseKind::Power { s: 2.0 },
            schemes: Scheme::ALL.to_vec(),
            h: Some(0.1),
            k: Some(0.01),
            t_end: 5.0,
            samples: if paper { 2500 } else { 2000 },
            ..base
        },
        Command::SingleRun => RunConfig {
            problem: "sine-gordon-additive".into(),
            h: Some(2f64.powi(-5)),
            k: Some(2f64.powi(-7)),
            t_end: 0.5,
            samples: 1,
            ..base
        },
    }
}

fn entropy_seed() -> u64 {
    // TOML integers are signed 64-bit.
    rand::rng().random::<u64>() >> 1
}

fn positive(v: f64, field: &str) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::usage(field, format!("must be positive, got {v}")))
    }
}

impl RunConfig {
    /// Resolves flags (and the `--config` file they name) for `command`.
    pub fn resolve(command: Command, args: &RunArgs) -> Result<Self> {
        let file = match &args.config {
            Some(path) => read_config_file(path)?,
            None => ConfigFile::default(),
        };
        if let Some(c) = file.command {
            if c != command {
                return Err(Error::usage(
                    "command",
                    format!("config file is for `{c}`, but `{command}` was requested"),
                ));
            }
        }
        let paper = args.paper_scale || file.paper_scale.unwrap_or(false);
        let mut cfg = defaults(command, paper);
        let problem_given = file.problem.is_some() || args.problem.is_some();

        // Config file layer.
        if let Some(p) = file.problem {
            cfg.problem = p;
        }
        let mut noise = file.noise;
        macro_rules! take {
            ($($field:ident),*) => { $( if let Some(v) = file.$field { cfg.$field = v; } )* };
        }
        take!(schemes, t_end, samples, seed, record_velocity);
        if file.h.is_some() {
            cfg.h = file.h;
        }
        if file.k.is_some() {
            cfg.k = file.k;
        }
        if let Some(l) = file.ladder {
            cfg.ladder = l;
        }
        if file.reference.is_some() {
            cfg.reference = file.reference;
        }
        cfg.truncation = file.truncation.or(cfg.truncation);
        cfg.output = file.output;
        cfg.custom = file.custom;
        let mut seed = file.seed;

        // Flag layer.
        if let Some(p) = &args.problem {
            cfg.problem = p.clone();
        }
        if let Some(n) = &args.noise {
            noise = Some(parse_noise(n)?);
        }
        if let Some(j) = args.truncation {
            cfg.truncation = Some(j);
        }
        if let Some(list) = &args.schemes {
            cfg.schemes = list
                .iter()
                .map(|s| s.parse())
                .collect::<Result<Vec<Scheme>>>()?;
        }
        if let Some(h) = &args.h {
            cfg.h = Some(parse_resolution(h, "h")?);
        }
        if let Some(k) = &args.k {
            cfg.k = Some(parse_resolution(k, "k")?);
        }
        if let Some(t) = args.t_end {
            cfg.t_end = t;
        }
        if let Some(m) = args.samples {
            cfg.samples = m;
        }
        if args.seed.is_some() {
            seed = args.seed;
        }
        if let Some(l) = &args.ladder {
            cfg.ladder = parse_ladder(l)?;
        }
        if let Some(r) = &args.reference {
            cfg.reference = Some(parse_resolution(r, "reference")?);
        }
        if args.output.is_some() {
            cfg.output = args.output.clone();
        }
        cfg.record_velocity |= args.record_velocity;

        let inline = [&args.f, &args.g, &args.potential, &args.u0, &args.v0];
        if inline.iter().any(|a| a.is_some()) {
            let mut custom = cfg.custom.take().unwrap_or(CustomProblem {
                f: "0".into(),
                g: "1".into(),
                potential: None,
                u0: "0".into(),
                v0: "0".into(),
                t_end: cfg.t_end,
            });
            if let Some(f) = &args.f {
                custom.f = f.clone();
            }
            if let Some(g) = &args.g {
                custom.g = g.clone();
            }
            if let Some(v) = &args.potential {
                custom.potential = Some(v.clone());
            }
            if let Some(u0) = &args.u0 {
                custom.u0 = u0.clone();
            }
            if let Some(v0) = &args.v0 {
                custom.v0 = v0.clone();
            }
            cfg.custom = Some(custom);
            if !problem_given {
                cfg.problem = "custom".into();
            }
        }
        if let Some(c) = cfg.custom.as_mut() {
            c.t_end = cfg.t_end;
        }

        // Problems carry their own noise unless the command or user overrides it.
        cfg.noise = match noise {
            Some(n) => n,
            None if command == Command::Trace => cfg.noise,
            None if cfg.problem == "custom" => NoiseKind::White,
            None => ProblemSpec::builtin(&cfg.problem)
                .map(|p| p.noise)
                .unwrap_or(NoiseKind::White),
        };
        cfg.seed = seed.unwrap_or_else(entropy_seed);
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses a complete configuration, such as the echo in a result file.
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: RunConfig =
            toml::from_str(text).map_err(|e| Error::Format(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Format(format!("config: {e}")))
    }

    pub fn validate(&self) -> Result<()> {
        if self.samples == 0 {
            return Err(Error::usage("M", "sample count must be positive"));
        }
        if self.truncation == Some(0) {
            return Err(Error::usage("J", "noise truncation must be positive"));
        }
        if self.seed > i64::MAX as u64 {
            return Err(Error::usage("seed", format!("must be at most {}", i64::MAX)));
        }
        if self.schemes.is_empty() {
            return Err(Error::usage("schemes", "no scheme selected"));
        }
        if self.command == Command::SingleRun && self.schemes.len() > 1 {
            return Err(Error::usage("schemes", "single-run takes exactly one scheme"));
        }
        positive(self.t_end, "T")?;
        if let Some(h) = self.h {
            positive(h, "h")?;
        }
        if let Some(k) = self.k {
            positive(k, "k")?;
        }
        if let Some(r) = self.reference {
            positive(r, "reference")?;
        }
        for r in &self.ladder {
            positive(*r, "ladder")?;
        }
        let need = |v: Option<f64>, field: &str| {
            v.map(|_| ()).ok_or_else(|| Error::usage(field, format!("required by `{}`", self.command)))
        };
        match self.command {
            Command::ConvergenceSpace => {
                need(self.k, "k")?;
                need(self.reference, "reference")?;
            }
            Command::ConvergenceTime => {
                need(self.h, "h")?;
                need(self.reference, "reference")?;
            }
            Command::Trace | Command::SingleRun => {
                need(self.h, "h")?;
                need(self.k, "k")?;
            }
        }
        if matches!(self.command, Command::ConvergenceSpace | Command::ConvergenceTime)
            && self.ladder.is_empty()
        {
            return Err(Error::usage("ladder", "resolution ladder is empty"));
        }
        if self.problem != "custom" && !BUILTIN_NAMES.contains(&self.problem.as_str()) {
            return Err(Error::usage(
                "problem",
                format!("unknown problem `{}`; expected one of {BUILTIN_NAMES:?} or `custom`", self.problem),
            ));
        }
        if self.problem == "custom" {
            self.problem_spec()?;
        }
        Ok(())
    }

    pub fn problem_spec(&self) -> Result<ProblemSpec> {
        if self.problem == "custom" {
            let custom = self
                .custom
                .as_ref()
                .ok_or_else(|| Error::usage("problem", "`custom` needs --f/--g or a [custom] table"))?;
            custom.build(self.noise)
        } else {
            Ok(ProblemSpec::builtin(&self.problem)?.with_noise(self.noise))
        }
    }

    pub fn convergence_config(&self, workers: Option<usize>) -> Result<ConvergenceConfig> {
        let fixed = match self.command {
            Command::ConvergenceSpace => self.k,
            Command::ConvergenceTime => self.h,
            other => {
                return Err(Error::usage("command", format!("`{other}` is not a convergence study")))
            }
        };
        Ok(ConvergenceConfig {
            problem: self.problem_spec()?,
            ladder: self.ladder.clone(),
            reference: self.reference.expect("validated"),
            fixed: fixed.expect("validated"),
            t_end: self.t_end,
            samples: self.samples,
            seed: self.seed,
            schemes: self.schemes.clone(),
            truncation: self.truncation,
            record_velocity: self.record_velocity,
            first_sample: 0,
            workers,
        })
    }

    pub fn trace_config(&self, workers: Option<usize>) -> Result<TraceConfig> {
        Ok(TraceConfig {
            problem: self.problem_spec()?,
            h: self.h.expect("validated"),
            k: self.k.expect("validated"),
            t_end: self.t_end,
            samples: self.samples,
            seed: self.seed,
            schemes: self.schemes.clone(),
            truncation: self.truncation,
            first_sample: 0,
            workers,
        })
    }
}

fn read_config_file(path: &Path) -> Result<ConfigFile> {
    let text = std::fs::read_to_string(path)?;
    toml::from_str(&text).map_err(|e| Error::usage("config", format!("{}: {e}", path.display())))
}

/// Worker count from [`WORKERS_ENV`], if set.
pub fn workers_from_env() -> Result<Option<usize>> {
    match std::env::var(WORKERS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::usage(WORKERS_ENV, format!("`{v}` is not a positive integer"))),
        },
        Err(_) => Ok(None),
    }
}

/// Runs a resolved configuration and returns the CSV text.
pub fn execute(cfg: &RunConfig, workers: Option<usize>) -> Result<String> {
    match cfg.command {
        Command::ConvergenceSpace => {
            render_result(&run_spatial_convergence(&cfg.convergence_config(workers)?)?, cfg)
        }
        Command::ConvergenceTime => {
            render_result(&run_temporal_convergence(&cfg.convergence_config(workers)?)?, cfg)
        }
        Command::Trace => render_result(&run_trace(&cfg.trace_config(workers)?)?, cfg),
        Command::SingleRun => {
            let problem = cfg.problem_spec()?;
            let observe = ObservableSet {
                hamiltonian: problem.potential.is_some(),
                l2_norm_u1: true,
                l2_norm_u2: true,
                energy_seminorm: true,
                modal_energies: 0,
            };
            let scheme = cfg.schemes[0];
            let (traj, prov) = run_single(
                &problem,
                scheme,
                cfg.h.expect("validated"),
                cfg.k.expect("validated"),
                cfg.t_end,
                cfg.seed,
                cfg.truncation,
                &observe,
            )?;
            render_single(&traj, scheme, &prov, cfg)
        }
    }
}

fn split(cmd: CommandArgs) -> (Command, RunArgs) {
    match cmd {
        CommandArgs::ConvergenceSpace(a) => (Command::ConvergenceSpace, a),
        CommandArgs::ConvergenceTime(a) => (Command::ConvergenceTime, a),
        CommandArgs::Trace(a) => (Command::Trace, a),
        CommandArgs::SingleRun(a) => (Command::SingleRun, a),
    }
}

/// Parses `argv` into a resolved configuration.
pub fn parse_config<I, T>(argv: I) -> Result<RunConfig>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| Error::usage("arguments", e.to_string()))?;
    let (command, args) = split(cli.command);
    RunConfig::resolve(command, &args)
}

/// Entry point of the binary; returns the process exit code.
pub fn main_with_args<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    let (command, args) = split(cli.command);
    let result = RunConfig::resolve(command, &args).and_then(|cfg| {
        eprintln!("stochwave {command}: seed {}", cfg.seed);
        let text = execute(&cfg, workers_from_env()?)?;
        emit(&text, cfg.output.as_deref())
    });
    match result {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
