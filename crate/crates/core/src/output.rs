//! CSV result files with a `#`-prefixed metadata header.
//!
//! ```text
//! # stochwave 0.1.0
//! # generated_unix: 1760000000
//! # experiment: trace
//! # seed: 42
//! # noise_truncation: 313
//! # quadrature_points: 3
//! # samples: 2000
//! # config: command = "trace"
//! # config: ...
//! time,scheme,mean_H,stderr_H
//! 0e0,STM,2.4e-1,0e0
//! ...
//! #fit_columns,scheme,slope,target_slope,intercept,residual,points
//! #fit,STM,5.6e-3,5.55e-3,2.4e-1,1.1e-4,501
//! ```
//!
//! Convergence files use the columns `resolution,scheme,ms_error,stderr,diverged`
//! (plus `velocity_error,velocity_stderr` when recorded); single runs use
//! `time,scheme,H,l2_u1,l2_u2,energy_seminorm`. Numbers are written with
//! the shortest representation that parses back to the same `f64`;
//! missing values are `nan` and diverged errors `inf`. Only the
//! `generated_unix` line differs between reruns of one configuration.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use crate::cli::RunConfig;
use crate::error::{Error, Result};
use crate::experiments::{ExperimentKind, ExperimentResult, Provenance};
use crate::integrators::{Scheme, Trajectory};

pub const TRACE_COLUMNS: [&str; 4] = ["time", "scheme", "mean_H", "stderr_H"];
pub const CONVERGENCE_COLUMNS: [&str; 5] = ["resolution", "scheme", "ms_error", "stderr", "diverged"];
pub const VELOCITY_COLUMNS: [&str; 2] = ["velocity_error", "velocity_stderr"];
pub const SINGLE_RUN_COLUMNS: [&str; 6] = ["time", "scheme", "H", "l2_u1", "l2_u2", "energy_seminorm"];
pub const FIT_COLUMNS: [&str; 6] = ["scheme", "slope", "target_slope", "intercept", "residual", "points"];

const CONFIG_PREFIX: &str = "# config: ";
const FIT_PREFIX: &str = "#fit,";
const FIT_COLUMNS_PREFIX: &str = "#fit_columns,";
const TIMESTAMP_KEY: &str = "generated_unix";

fn num(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:e}")
    }
}

fn opt(x: Option<f64>) -> String {
    x.map_or_else(|| "nan".into(), num)
}

fn experiment_name(kind: ExperimentKind) -> &'static str {
    match kind {
        ExperimentKind::SpatialConvergence => "convergence-space",
        ExperimentKind::TemporalConvergence => "convergence-time",
        ExperimentKind::Trace => "trace",
    }
}

fn header(out: &mut String, experiment: &str, config: &RunConfig, prov: &Provenance) -> Result<()> {
    let now = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    let echo = toml::to_string(config).map_err(|e| Error::Format(format!("config echo: {e}")))?;
    writeln!(out, "# stochwave {}", env!("CARGO_PKG_VERSION")).ok();
    writeln!(out, "# {TIMESTAMP_KEY}: {now}").ok();
    writeln!(out, "# experiment: {experiment}").ok();
    writeln!(out, "# problem: {}", prov.problem).ok();
    writeln!(out, "# seed: {}", prov.seed).ok();
    writeln!(out, "# noise_truncation: {}", prov.truncation).ok();
    writeln!(out, "# quadrature_points: {}", prov.quadrature_points).ok();
    writeln!(out, "# samples: {}", prov.samples).ok();
    for line in echo.lines() {
        writeln!(out, "{CONFIG_PREFIX}{line}").ok();
    }
    Ok(())
}

/// Renders an experiment result as CSV text.
pub fn render_result(result: &ExperimentResult, config: &RunConfig) -> Result<String> {
    let mut out = String::new();
    header(&mut out, experiment_name(result.kind), config, &result.provenance)?;
    match result.kind {
        ExperimentKind::Trace => {
            writeln!(out, "{}", TRACE_COLUMNS.join(",")).ok();
            for series in &result.trace {
                for ((t, m), se) in series.times.iter().zip(series.mean()).zip(series.stderr()) {
                    writeln!(out, "{},{},{},{}", num(*t), series.scheme, num(m), opt(se)).ok();
                }
            }
        }
        _ => {
            let velocity = result.errors.iter().any(|e| e.velocity.is_some());
            let mut cols = CONVERGENCE_COLUMNS.to_vec();
            if velocity {
                cols.extend(VELOCITY_COLUMNS);
            }
            writeln!(out, "{}", cols.join(",")).ok();
            for e in &result.errors {
                write!(
                    out,
                    "{},{},{},{},{}",
                    num(e.resolution),
                    e.scheme,
                    num(e.ms_error()),
                    opt(e.stderr()),
                    e.diverged
                )
                .ok();
                if velocity {
                    write!(out, ",{},{}", opt(e.velocity_error()), opt(e.velocity_stderr())).ok();
                }
                out.push('\n');
            }
        }
    }
    writeln!(out, "{FIT_COLUMNS_PREFIX}{}", FIT_COLUMNS.join(",")).ok();
    for (scheme, fit) in result.slopes() {
        let target = opt(result.target_slope);
        match fit {
            Ok(f) => writeln!(
                out,
                "{FIT_PREFIX}{scheme},{},{target},{},{},{}",
                num(f.slope),
                num(f.intercept),
                num(f.residual),
                f.points
            ),
            Err(_) => writeln!(out, "{FIT_PREFIX}{scheme},nan,{target},nan,nan,0"),
        }
        .ok();
    }
    Ok(out)
}

/// Renders the observables of one trajectory as CSV text.
pub fn render_single(
    traj: &Trajectory,
    scheme: Scheme,
    prov: &Provenance,
    config: &RunConfig,
) -> Result<String> {
    let mut out = String::new();
    header(&mut out, "single-run", config, prov)?;
    writeln!(out, "{}", SINGLE_RUN_COLUMNS.join(",")).ok();
    for (t, r) in traj.times.iter().zip(&traj.records) {
        writeln!(
            out,
            "{},{scheme},{},{},{},{}",
            num(*t),
            opt(r.hamiltonian),
            opt(r.l2_norm_u1),
            opt(r.l2_norm_u2),
            opt(r.energy_seminorm)
        )
        .ok();
    }
    Ok(out)
}

/// Writes `text` to `path`, or to standard output when `path` is `None`.
pub fn emit(text: &str, path: Option<&Path>) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// A parsed result file.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultFile {
    /// `key: value` header lines other than the config echo, in order.
    pub header: Vec<(String, String)>,
    pub config: RunConfig,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub fit_columns: Vec<String>,
    pub fits: Vec<Vec<String>>,
}

impl ResultFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut header = Vec::new();
        let mut echo = String::new();
        let mut columns: Option<Vec<String>> = None;
        let mut rows = Vec::new();
        let mut fit_columns = Vec::new();
        let mut fits = Vec::new();
        let split = |s: &str| s.split(',').map(str::to_owned).collect::<Vec<_>>();
        for line in text.lines() {
            if let Some(rest) = line.strip_prefix(CONFIG_PREFIX) {
                echo.push_str(rest);
                echo.push('\n');
            } else if let Some(rest) = line.strip_prefix(FIT_COLUMNS_PREFIX) {
                fit_columns = split(rest);
            } else if let Some(rest) = line.strip_prefix(FIT_PREFIX) {
                fits.push(split(rest));
            } else if let Some(rest) = line.strip_prefix("# ") {
                match rest.split_once(": ") {
                    Some((k, v)) => header.push((k.to_owned(), v.to_owned())),
                    None => header.push((rest.to_owned(), String::new())),
                }
            } else if line.is_empty() {
                continue;
            } else if columns.is_none() {
                columns = Some(split(line));
            } else {
                rows.push(split(line));
            }
        }
        let columns = columns.ok_or_else(|| Error::Format("result file has no column line".into()))?;
        if let Some(bad) = rows.iter().find(|r| r.len() != columns.len()) {
            return Err(Error::Format(format!(
                "row `{}` has {} fields, expected {}",
                bad.join(","),
                bad.len(),
                columns.len()
            )));
        }
        let config = RunConfig::from_toml(&echo)?;
        Ok(Self {
            header,
            config,
            columns,
            rows,
            fit_columns,
            fits,
        })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?)
    }

    pub fn header_value(&self, key: &str) -> Option<&str> {
        self.header
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Values of a numeric column.
    pub fn column(&self, name: &str) -> Result<Vec<f64>> {
        let idx = self
            .columns
            .iter()
            .position(|c| c == name)
            .ok_or_else(|| Error::Format(format!("no column `{name}`")))?;
        self.rows
            .iter()
            .map(|r| {
                r[idx]
                    .parse::<f64>()
                    .map_err(|e| Error::Format(format!("column `{name}`: {e}")))
            })
            .collect()
    }
}

/// Text with the timestamp line removed, for comparing reruns.
pub fn strip_timestamp(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with(&format!("# {TIMESTAMP_KEY}:")))
        .map(|l| format!("{l}\n"))
        .collect()
}
