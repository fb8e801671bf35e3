//! Monte-Carlo drivers: spatial and temporal mean-square convergence under
//! coupled noise paths, and the drift of the expected Hamiltonian.
//!
//! Samples are processed in fixed-size chunks. Each chunk is reduced
//! sequentially and chunks are merged in sample order, so a result depends
//! only on the configuration and seed, never on the number of workers.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FemFunction, FemSpace};
use crate::integrators::{integrate, RhsEvaluator, Scheme, SchemeConfig, State, Stepper, Trajectory};
use crate::noise::{coarsen_path, trace_projected, NoiseIncrement, NoiseKind, NoiseModel, NoiseProjector, PathCoupling};
use crate::observables::{MeanAccumulator, ObservableSet};
use crate::problems::ProblemSpec;

const CHUNK: u64 = 8;

/// Gauss points per cell used for every nonlinear load and potential.
pub const QUADRATURE_POINTS: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    SpatialConvergence,
    TemporalConvergence,
    Trace,
}

/// Settings of a convergence study.
///
/// Spatial studies refine the mesh width along `ladder` at the fixed time
/// step `fixed`; temporal studies refine the time step along `ladder` on the
/// fixed mesh width `fixed`. `reference` is the resolution of the
/// reference solution.
#[derive(Debug, Clone)]
pub struct ConvergenceConfig {
    pub problem: ProblemSpec,
    pub ladder: Vec<f64>,
    pub reference: f64,
    pub fixed: f64,
    pub t_end: f64,
    pub samples: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    /// Number of noise modes; `None` uses [`NoiseModel::with_default_truncation`].
    pub truncation: Option<usize>,
    pub record_velocity: bool,
    /// Index of the first sample, for splitting a study into batches.
    pub first_sample: u64,
    pub workers: Option<usize>,
}

#[derive(Debug, Clone)]
pub struct TraceConfig {
    pub problem: ProblemSpec,
    pub h: f64,
    pub k: f64,
    pub t_end: f64,
    pub samples: usize,
    pub seed: u64,
    pub schemes: Vec<Scheme>,
    pub truncation: Option<usize>,
    pub first_sample: u64,
    pub workers: Option<usize>,
}

/// Squared errors of one scheme at one resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEntry {
    pub scheme: Scheme,
    pub resolution: f64,
    pub position: MeanAccumulator,
    pub velocity: Option<MeanAccumulator>,
    /// Samples in which the scheme produced a non-finite state.
    pub diverged: u64,
}

impl ErrorEntry {
    fn new(scheme: Scheme, resolution: f64, velocity: bool) -> Self {
        Self {
            scheme,
            resolution,
            position: MeanAccumulator::new(),
            velocity: velocity.then(MeanAccumulator::new),
            diverged: 0,
        }
    }

    pub fn is_diverged(&self) -> bool {
        self.diverged > 0
    }

    /// `sqrt(E‖u₁ − u₁^ref‖²)`; infinite once any sample diverged.
    pub fn ms_error(&self) -> f64 {
        rms(&self.position, self.diverged)
    }

    /// Standard error of [`ms_error`](Self::ms_error) by the delta method,
    /// `se(mean of squares) / (2·rms)`.
    pub fn stderr(&self) -> Option<f64> {
        rms_stderr(&self.position, self.diverged)
    }

    pub fn velocity_error(&self) -> Option<f64> {
        self.velocity.as_ref().map(|v| rms(v, self.diverged))
    }

    pub fn velocity_stderr(&self) -> Option<f64> {
        self.velocity.as_ref().and_then(|v| rms_stderr(v, self.diverged))
    }

    fn merge(&mut self, other: &ErrorEntry) {
        self.position.merge(&other.position);
        if let (Some(a), Some(b)) = (self.velocity.as_mut(), other.velocity.as_ref()) {
            a.merge(b);
        }
        self.diverged += other.diverged;
    }
}

fn rms(acc: &MeanAccumulator, diverged: u64) -> f64 {
    if diverged > 0 {
        f64::INFINITY
    } else {
        acc.mean().max(0.0).sqrt()
    }
}

fn rms_stderr(acc: &MeanAccumulator, diverged: u64) -> Option<f64> {
    if diverged > 0 {
        return None;
    }
    let r = acc.mean().max(0.0).sqrt();
    acc.stderr().map(|se| if r > 0.0 { se / (2.0 * r) } else { 0.0 })
}

/// Expected Hamiltonian of one scheme along the time grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceSeries {
    pub scheme: Scheme,
    pub times: Vec<f64>,
    pub hamiltonian: Vec<MeanAccumulator>,
    /// Samples dropped because the scheme produced a non-finite state.
    pub diverged: u64,
}

impl TraceSeries {
    pub fn mean(&self) -> Vec<f64> {
        self.hamiltonian.iter().map(MeanAccumulator::mean).collect()
    }

    pub fn stderr(&self) -> Vec<Option<f64>> {
        self.hamiltonian.iter().map(MeanAccumulator::stderr).collect()
    }

    /// Least-squares slope of `E[H]` against time over the whole window.
    pub fn drift(&self) -> Result<SlopeFit> {
        fit_slope(&self.times, &self.mean())
    }

    fn merge(&mut self, other: &TraceSeries) {
        for (a, b) in self.hamiltonian.iter_mut().zip(&other.hamiltonian) {
            a.merge(b);
        }
        self.diverged += other.diverged;
    }
}

/// Ordinary least-squares line `y ≈ slope·x + intercept`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    /// Root-mean-square residual.
    pub residual: f64,
    pub points: usize,
}

/// Least-squares fit through at least three finite points. Convergence
/// studies pass `log₂` resolutions and `log₂` errors.
pub fn fit_slope(xs: &[f64], ys: &[f64]) -> Result<SlopeFit> {
    if xs.len() != ys.len() {
        return Err(Error::invalid(format!(
            "fit needs equally many abscissae and values, got {} and {}",
            xs.len(),
            ys.len()
        )));
    }
    if xs.len() < 3 {
        return Err(Error::invalid(format!(
            "fit needs at least 3 points, got {}",
            xs.len()
        )));
    }
    if xs.iter().chain(ys).any(|v| !v.is_finite()) {
        return Err(Error::invalid("fit points must be finite"));
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::invalid("fit abscissae are all equal"));
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| (y - slope * x - intercept).powi(2))
        .sum();
    Ok(SlopeFit {
        slope,
        intercept,
        residual: (ss / n).sqrt(),
        points: xs.len(),
    })
}

/// Everything needed to rerun an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub problem: String,
    pub noise: NoiseKind,
    pub truncation: usize,
    pub quadrature_points: usize,
    pub seed: u64,
    pub first_sample: u64,
    pub samples: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentResult {
    pub kind: ExperimentKind,
    pub errors: Vec<ErrorEntry>,
    pub trace: Vec<TraceSeries>,
    /// Rate predicted for the problem's regularity, or `½Tr(PₕQPₕ)` for
    /// trace runs.
    pub target_slope: Option<f64>,
    pub provenance: Provenance,
}

impl ExperimentResult {
    pub fn schemes(&self) -> Vec<Scheme> {
        let mut out: Vec<Scheme> = Vec::new();
        let all = self
            .errors
            .iter()
            .map(|e| e.scheme)
            .chain(self.trace.iter().map(|t| t.scheme));
        for s in all {
            if !out.contains(&s) {
                out.push(s);
            }
        }
        out
    }

    pub fn entries(&self, scheme: Scheme) -> impl Iterator<Item = &ErrorEntry> {
        self.errors.iter().filter(move |e| e.scheme == scheme)
    }

    /// Log-log convergence slope of one scheme. Diverged and zero errors
    /// are left out of the fit.
    pub fn convergence_slope(&self, scheme: Scheme) -> Result<SlopeFit> {
        let (xs, ys): (Vec<f64>, Vec<f64>) = self
            .entries(scheme)
            .filter(|e| !e.is_diverged() && e.ms_error() > 0.0)
            .map(|e| (e.resolution.log2(), e.ms_error().log2()))
            .unzip();
        fit_slope(&xs, &ys)
    }

    /// Slope per scheme: the log-log rate for convergence studies, the
    /// drift of `E[H]` for trace runs.
    pub fn slopes(&self) -> Vec<(Scheme, Result<SlopeFit>)> {
        self.schemes()
            .into_iter()
            .map(|s| {
                let fit = match self.kind {
                    ExperimentKind::Trace => self
                        .trace
                        .iter()
                        .find(|t| t.scheme == s)
                        .expect("scheme listed")
                        .drift(),
                    _ => self.convergence_slope(s),
                };
                (s, fit)
            })
            .collect()
    }

    /// Combines two batches of the same experiment run on disjoint samples.
    pub fn merge(&mut self, other: &ExperimentResult) -> Result<()> {
        let compatible = self.kind == other.kind
            && self.errors.len() == other.errors.len()
            && self.trace.len() == other.trace.len()
            && self.provenance.seed == other.provenance.seed
            && self.provenance.truncation == other.provenance.truncation
            && self
                .errors
                .iter()
                .zip(&other.errors)
                .all(|(a, b)| a.scheme == b.scheme && a.resolution == b.resolution)
            && self
                .trace
                .iter()
                .zip(&other.trace)
                .all(|(a, b)| a.scheme == b.scheme && a.times == b.times);
        if !compatible {
            return Err(Error::invalid("cannot merge results of different experiments"));
        }
        for (a, b) in self.errors.iter_mut().zip(&other.errors) {
            a.merge(b);
        }
        for (a, b) in self.trace.iter_mut().zip(&other.trace) {
            a.merge(b);
        }
        self.provenance.samples += other.provenance.samples;
        self.provenance.first_sample = self.provenance.first_sample.min(other.provenance.first_sample);
        Ok(())
    }
}

/// Mesh and noise loads for one resolution.
struct Level {
    space: FemSpace,
    projector: NoiseProjector,
}

impl Level {
    fn new(n_cells: usize, modes: usize, problem: &ProblemSpec) -> Result<Self> {
        let space = FemSpace::new(n_cells)?;
        let projector =
            NoiseProjector::new(&space.mesh, modes, !problem.diffusion.is_additive());
        Ok(Self { space, projector })
    }

    fn run(
        &self,
        problem: &ProblemSpec,
        scheme: Scheme,
        k: f64,
        incs: &[NoiseIncrement],
        observe: &ObservableSet,
    ) -> Result<Trajectory> {
        let rhs = RhsEvaluator::new(&self.space, problem, &self.projector)?;
        let mut stepper = Stepper::new(rhs, SchemeConfig::new(scheme, k)?)?;
        let initial = State::initial(problem, &self.space)?;
        integrate(&mut stepper, initial, incs.len(), incs, observe)
    }
}

/// Cells of a uniform mesh of width `h`.
fn cells_for(h: f64, what: &str) -> Result<usize> {
    let n = (1.0 / h).round();
    if !(h > 0.0) || n < 2.0 || ((1.0 / h) - n).abs() > 1e-9 * n {
        return Err(Error::invalid(format!(
            "{what} {h} does not divide (0, 1) into at least 2 cells"
        )));
    }
    Ok(n as usize)
}

/// Steps of length `k` in `[0, t_end]`.
fn steps_for(k: f64, t_end: f64, what: &str) -> Result<usize> {
    let n = (t_end / k).round();
    if !(k > 0.0 && t_end > 0.0) || n < 1.0 || (t_end / k - n).abs() > 1e-9 * n {
        return Err(Error::invalid(format!(
            "{what} {k} does not divide the horizon {t_end}"
        )));
    }
    Ok(n as usize)
}

fn check_common(samples: usize, schemes: &[Scheme]) -> Result<()> {
    if samples == 0 {
        return Err(Error::invalid("sample count must be positive"));
    }
    if schemes.is_empty() {
        return Err(Error::invalid("no schemes selected"));
    }
    Ok(())
}

fn noise_model(problem: &ProblemSpec, truncation: Option<usize>, finest_dofs: usize) -> Result<NoiseModel> {
    match truncation {
        Some(j) => NoiseModel::new(problem.noise, j),
        None => NoiseModel::with_default_truncation(problem.noise, finest_dofs),
    }
}

/// Runs `per_sample` on every sample index. Each chunk of samples is folded
/// with `reduce` and the chunk results are merged in sample order.
fn monte_carlo<T, S, F, R, M>(
    workers: Option<usize>,
    first: u64,
    count: usize,
    empty: impl Fn() -> S + Sync,
    per_sample: F,
    reduce: R,
    merge: M,
) -> Result<S>
where
    S: Send,
    F: Fn(u64) -> Result<T> + Sync,
    R: Fn(&mut S, T) + Sync,
    M: Fn(&mut S, &S),
{
    let end = first + count as u64;
    let chunks: Vec<(u64, u64)> = (first..end)
        .step_by(CHUNK as usize)
        .map(|s| (s, (s + CHUNK).min(end)))
        .collect();
    let job = || {
        chunks
            .par_iter()
            .map(|&(a, b)| {
                let mut acc = empty();
                for sample in a..b {
                    reduce(&mut acc, per_sample(sample)?);
                }
                Ok(acc)
            })
            .collect::<Result<Vec<S>>>()
    };
    let partials = match workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {n} workers: {e}")))?
            .install(job)?,
        None => job()?,
    };
    let mut total = empty();
    for part in &partials {
        merge(&mut total, part);
    }
    Ok(total)
}

fn is_divergence(e: &Error) -> bool {
    matches!(e, Error::NumericalFailure { .. })
}

/// Squared position and velocity errors of one sample, per entry; `None`
/// marks a diverged run.
type SampleErrors = Vec<Option<(f64, f64)>>;

fn empty_entries(schemes: &[Scheme], ladder: &[f64], velocity: bool) -> Vec<ErrorEntry> {
    schemes
        .iter()
        .flat_map(|s| ladder.iter().map(move |r| ErrorEntry::new(*s, *r, velocity)))
        .collect()
}

fn reduce_errors(acc: &mut Vec<ErrorEntry>, sample: SampleErrors) {
    for (entry, err) in acc.iter_mut().zip(sample) {
        match err {
            Some((p, v)) => {
                entry.position.push(p);
                if let Some(acc) = entry.velocity.as_mut() {
                    acc.push(v);
                }
            }
            None => entry.diverged += 1,
        }
    }
}

fn merge_errors(acc: &mut Vec<ErrorEntry>, part: &Vec<ErrorEntry>) {
    for (a, b) in acc.iter_mut().zip(part) {
        a.merge(b);
    }
}

fn convergence_target(problem: &ProblemSpec, kind: ExperimentKind) -> Option<f64> {
    problem.regularity.map(|r| match kind {
        ExperimentKind::SpatialConvergence => r.spatial_rate(),
        _ => r.temporal_rate(),
    })
}

fn check_convergence(cfg: &ConvergenceConfig) -> Result<()> {
    check_common(cfg.samples, &cfg.schemes)?;
    if cfg.ladder.is_empty() {
        return Err(Error::invalid("resolution ladder is empty"));
    }
    if let Some(bad) = cfg.ladder.iter().find(|r| **r < cfg.reference) {
        return Err(Error::invalid(format!(
            "ladder entry {bad} is finer than the reference {}",
            cfg.reference
        )));
    }
    Ok(())
}

/// Mean-square error in space at `t_end`: every ladder mesh and the
/// reference mesh run with the time step `cfg.fixed` on the same noise
/// path; coarse solutions are interpolated to the reference mesh and
/// compared in its L₂ norm. Each scheme is compared with its own reference.
pub fn run_spatial_convergence(cfg: &ConvergenceConfig) -> Result<ExperimentResult> {
    check_convergence(cfg)?;
    let problem = &cfg.problem;
    let n_ref = cells_for(cfg.reference, "reference mesh width")?;
    let n_steps = steps_for(cfg.fixed, cfg.t_end, "time step")?;
    let ladder_cells = cfg
        .ladder
        .iter()
        .map(|h| {
            let n = cells_for(*h, "mesh width")?;
            if n_ref % n != 0 || !(n_ref / n).is_power_of_two() {
                return Err(Error::invalid(format!(
                    "mesh width {h} is not dyadically nested in the reference {}",
                    cfg.reference
                )));
            }
            Ok(n)
        })
        .collect::<Result<Vec<_>>>()?;
    let model = noise_model(problem, cfg.truncation, n_ref - 1)?;
    let reference = Level::new(n_ref, model.truncation(), problem)?;
    let levels = ladder_cells
        .iter()
        .map(|n| Level::new(*n, model.truncation(), problem))
        .collect::<Result<Vec<_>>>()?;
    let none = ObservableSet::none();
    let ref_ops = &reference.space.ops;
    let ref_mesh = &reference.space.mesh;

    let per_sample = |sample: u64| -> Result<SampleErrors> {
        let coupling = PathCoupling::new(cfg.seed, sample, cfg.fixed, n_steps)?;
        let incs: Vec<_> = (0..n_steps).map(|i| coupling.fine_increment(&model, i)).collect();
        let mut out = Vec::with_capacity(cfg.schemes.len() * levels.len());
        for scheme in &cfg.schemes {
            let exact = match reference.run(problem, *scheme, cfg.fixed, &incs, &none) {
                Ok(t) => Some(t.final_state),
                Err(e) if is_divergence(&e) => None,
                Err(e) => return Err(e),
            };
            for level in &levels {
                let run = match level.run(problem, *scheme, cfg.fixed, &incs, &none) {
                    Ok(t) => Some(t.final_state),
                    Err(e) if is_divergence(&e) => None,
                    Err(e) => return Err(e),
                };
                out.push(match (&exact, run) {
                    (Some(exact), Some(run)) => {
                        let fine = |v: &FemFunction| level.space.mesh.prolongate(v, ref_mesh);
                        let d1 = &fine(&run.u1)?.coeffs - &exact.u1.coeffs;
                        let d2 = &fine(&run.u2)?.coeffs - &exact.u2.coeffs;
                        Some((
                            ref_ops.mass().quadratic_form(&d1),
                            ref_ops.mass().quadratic_form(&d2),
                        ))
                    }
                    _ => None,
                });
            }
        }
        Ok(out)
    };

    let errors = monte_carlo(
        cfg.workers,
        cfg.first_sample,
        cfg.samples,
        || empty_entries(&cfg.schemes, &cfg.ladder, cfg.record_velocity),
        per_sample,
        reduce_errors,
        merge_errors,
    )?;
    Ok(ExperimentResult {
        kind: ExperimentKind::SpatialConvergence,
        errors,
        trace: Vec::new(),
        target_slope: convergence_target(problem, ExperimentKind::SpatialConvergence),
        provenance: provenance(problem, &model, cfg.seed, cfg.first_sample, cfg.samples),
    })
}

/// Mean-square error in time at `t_end` on the fixed mesh `cfg.fixed`:
/// the reference is the trigonometric method at step `cfg.reference`, and
/// every scheme runs at every ladder step on the coarsened reference path.
pub fn run_temporal_convergence(cfg: &ConvergenceConfig) -> Result<ExperimentResult> {
    check_convergence(cfg)?;
    let problem = &cfg.problem;
    let n_cells = cells_for(cfg.fixed, "mesh width")?;
    let n_fine = steps_for(cfg.reference, cfg.t_end, "reference time step")?;
    let model = noise_model(problem, cfg.truncation, n_cells - 1)?;
    let level = Level::new(n_cells, model.truncation(), problem)?;
    let probe = PathCoupling::new(cfg.seed, 0, cfg.reference, n_fine)?;
    let ratios = cfg
        .ladder
        .iter()
        .map(|k| probe.ratio(*k))
        .collect::<Result<Vec<_>>>()?;
    let none = ObservableSet::none();
    let mass = level.space.ops.mass();

    let per_sample = |sample: u64| -> Result<SampleErrors> {
        let coupling = PathCoupling::new(cfg.seed, sample, cfg.reference, n_fine)?;
        let fine: Vec<_> = (0..n_fine).map(|i| coupling.fine_increment(&model, i)).collect();
        let exact = level
            .run(problem, Scheme::Stm, cfg.reference, &fine, &none)?
            .final_state;
        let paths = ratios
            .iter()
            .map(|r| coarsen_path(&fine, *r))
            .collect::<Result<Vec<_>>>()?;
        let mut out = Vec::with_capacity(cfg.schemes.len() * paths.len());
        for scheme in &cfg.schemes {
            for (k, path) in cfg.ladder.iter().zip(&paths) {
                out.push(match level.run(problem, *scheme, *k, path, &none) {
                    Ok(t) => {
                        let d1 = &t.final_state.u1.coeffs - &exact.u1.coeffs;
                        let d2 = &t.final_state.u2.coeffs - &exact.u2.coeffs;
                        Some((mass.quadratic_form(&d1), mass.quadratic_form(&d2)))
                    }
                    Err(e) if is_divergence(&e) => None,
                    Err(e) => return Err(e),
                });
            }
        }
        Ok(out)
    };

    let errors = monte_carlo(
        cfg.workers,
        cfg.first_sample,
        cfg.samples,
        || empty_entries(&cfg.schemes, &cfg.ladder, cfg.record_velocity),
        per_sample,
        reduce_errors,
        merge_errors,
    )?;
    Ok(ExperimentResult {
        kind: ExperimentKind::TemporalConvergence,
        errors,
        trace: Vec::new(),
        target_slope: convergence_target(problem, ExperimentKind::TemporalConvergence),
        provenance: provenance(problem, &model, cfg.seed, cfg.first_sample, cfg.samples),
    })
}

/// Expected Hamiltonian along each scheme, all schemes sharing each
/// sample's noise path. The target drift is `½Tr(PₕQPₕ)`.
pub fn run_trace(cfg: &TraceConfig) -> Result<ExperimentResult> {
    check_common(cfg.samples, &cfg.schemes)?;
    let problem = &cfg.problem;
    if !problem.diffusion.is_additive() {
        return Err(Error::invalid(format!(
            "trace runs need additive noise, but `{}` has multiplicative noise, for which the \
             expected Hamiltonian obeys no trace formula",
            problem.name
        )));
    }
    if problem.potential.is_none() {
        return Err(Error::invalid(format!(
            "problem `{}` has no potential V, so its Hamiltonian is undefined",
            problem.name
        )));
    }
    let n_cells = cells_for(cfg.h, "mesh width")?;
    let n_steps = steps_for(cfg.k, cfg.t_end, "time step")?;
    let model = noise_model(problem, cfg.truncation, n_cells - 1)?;
    let level = Level::new(n_cells, model.truncation(), problem)?;
    let target = 0.5 * trace_projected(&model, &level.space.mesh, &level.space.ops);
    let times: Vec<f64> = (0..=n_steps).map(|n| n as f64 * cfg.k).collect();
    let observe = ObservableSet::hamiltonian_only();

    let per_sample = |sample: u64| -> Result<Vec<Option<Vec<f64>>>> {
        let coupling = PathCoupling::new(cfg.seed, sample, cfg.k, n_steps)?;
        let incs: Vec<_> = (0..n_steps).map(|i| coupling.fine_increment(&model, i)).collect();
        cfg.schemes
            .iter()
            .map(|scheme| match level.run(problem, *scheme, cfg.k, &incs, &observe) {
                Ok(t) => Ok(Some(
                    t.records
                        .iter()
                        .map(|r| r.hamiltonian.expect("recorded"))
                        .collect(),
                )),
                Err(e) if is_divergence(&e) => Ok(None),
                Err(e) => Err(e),
            })
            .collect()
    };
    let empty = || {
        cfg.schemes
            .iter()
            .map(|s| TraceSeries {
                scheme: *s,
                times: times.clone(),
                hamiltonian: vec![MeanAccumulator::new(); times.len()],
                diverged: 0,
            })
            .collect::<Vec<_>>()
    };
    let reduce = |acc: &mut Vec<TraceSeries>, sample: Vec<Option<Vec<f64>>>| {
        for (series, values) in acc.iter_mut().zip(sample) {
            match values {
                Some(v) => {
                    for (a, x) in series.hamiltonian.iter_mut().zip(v) {
                        a.push(x);
                    }
                }
                None => series.diverged += 1,
            }
        }
    };
    let merge = |acc: &mut Vec<TraceSeries>, part: &Vec<TraceSeries>| {
        for (a, b) in acc.iter_mut().zip(part) {
            a.merge(b);
        }
    };
    let trace = monte_carlo(cfg.workers, cfg.first_sample, cfg.samples, empty, per_sample, reduce, merge)?;
    Ok(ExperimentResult {
        kind: ExperimentKind::Trace,
        errors: Vec::new(),
        trace,
        target_slope: Some(target),
        provenance: provenance(problem, &model, cfg.seed, cfg.first_sample, cfg.samples),
    })
}

/// One trajectory on the mesh of width `h`, recording `observe` at every
/// step.
#[allow(clippy::too_many_arguments)]
pub fn run_single(
    problem: &ProblemSpec,
    scheme: Scheme,
    h: f64,
    k: f64,
    t_end: f64,
    seed: u64,
    truncation: Option<usize>,
    observe: &ObservableSet,
) -> Result<(Trajectory, Provenance)> {
    let n_cells = cells_for(h, "mesh width")?;
    let n_steps = steps_for(k, t_end, "time step")?;
    let model = noise_model(problem, truncation, n_cells - 1)?;
    let level = Level::new(n_cells, model.truncation(), problem)?;
    let coupling = PathCoupling::new(seed, 0, k, n_steps)?;
    let incs: Vec<_> = (0..n_steps).map(|i| coupling.fine_increment(&model, i)).collect();
    let traj = level.run(problem, scheme, k, &incs, observe)?;
    Ok((traj, provenance(problem, &model, seed, 0, 1)))
}

fn provenance(problem: &ProblemSpec, model: &NoiseModel, seed: u64, first: u64, samples: usize) -> Provenance {
    Provenance {
        problem: problem.name.clone(),
        noise: model.kind(),
        truncation: model.truncation(),
        quadrature_points: QUADRATURE_POINTS,
        seed,
        first_sample: first,
        samples: samples as u64,
    }
}

#[cfg(test)]
mod tests;
