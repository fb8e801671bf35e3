//! One-step maps of the semi-discrete system
//!
//! ```text
//! du₁ = u₂ dt,   du₂ = (−Λₕu₁ + Pₕf(u₁)) dt + Pₕ(g(u₁) dW)
//! ```
//!
//! for the stochastic trigonometric method and four Maruyama-type schemes.
//! All schemes work on load vectors `b = k·∫f(u₁)φ + ∫g(u₁)ΔWφ` so that
//! only the mass matrix has to be inverted.

use std::borrow::Borrow;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::composed_load;
use crate::fem::{FemFunction, FemSpace, TridiagFactor};
use crate::noise::{NoiseIncrement, NoiseProjector};
use crate::observables::{ObservableRecord, ObservableSet};
use crate::problems::{Diffusion, ProblemSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Scheme {
    /// Stochastic trigonometric method.
    #[serde(rename = "STM")]
    Stm,
    /// Forward Euler-Maruyama.
    #[serde(rename = "EM")]
    Em,
    /// Semi-implicit Euler-Maruyama.
    #[serde(rename = "SEM")]
    Sem,
    /// Backward Euler-Maruyama (drift implicit).
    #[serde(rename = "BEM")]
    Bem,
    /// Semi-implicit Crank-Nicolson-Maruyama.
    #[serde(rename = "CNM")]
    Cnm,
}

impl Scheme {
    pub const ALL: [Scheme; 5] = [Scheme::Stm, Scheme::Em, Scheme::Sem, Scheme::Bem, Scheme::Cnm];

    pub fn label(self) -> &'static str {
        match self {
            Scheme::Stm => "STM",
            Scheme::Em => "EM",
            Scheme::Sem => "SEM",
            Scheme::Bem => "BEM",
            Scheme::Cnm => "CNM",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.pad(self.label())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "STM" => Ok(Scheme::Stm),
            "EM" => Ok(Scheme::Em),
            "SEM" => Ok(Scheme::Sem),
            "BEM" => Ok(Scheme::Bem),
            "CNM" => Ok(Scheme::Cnm),
            other => Err(Error::usage(
                "schemes",
                format!("unknown scheme `{other}`; expected STM, EM, SEM, BEM or CNM"),
            )),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SchemeConfig {
    pub scheme: Scheme,
    pub k: f64,
    /// Fixed-point tolerance of the backward Euler iteration.
    pub bem_tol: f64,
    pub bem_max_iter: usize,
}

impl SchemeConfig {
    pub fn new(scheme: Scheme, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {k}")));
        }
        Ok(Self {
            scheme,
            k,
            bem_tol: 1e-12,
            bem_max_iter: 50,
        })
    }
}

/// Position and velocity coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub u1: FemFunction,
    pub u2: FemFunction,
}

impl State {
    pub fn new(u1: FemFunction, u2: FemFunction) -> Result<Self> {
        if u1.len() != u2.len() {
            return Err(Error::invalid("position and velocity lengths differ"));
        }
        Ok(Self { u1, u2 })
    }

    pub fn zeros(n: usize) -> Self {
        Self {
            u1: FemFunction::zeros(n),
            u2: FemFunction::zeros(n),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.u1.is_finite() && self.u2.is_finite()
    }

    pub fn initial(problem: &ProblemSpec, space: &FemSpace) -> Result<Self> {
        let (u1, u2) = problem.initial_state(space)?;
        Ok(Self { u1, u2 })
    }
}

/// Galerkin right-hand sides `Pₕf(u₁)` and `Pₕ(g(u₁)ΔW)`.
#[derive(Debug, Clone, Copy)]
pub struct RhsEvaluator<'a> {
    pub space: &'a FemSpace,
    pub problem: &'a ProblemSpec,
    pub projector: &'a NoiseProjector,
}

impl<'a> RhsEvaluator<'a> {
    pub fn new(
        space: &'a FemSpace,
        problem: &'a ProblemSpec,
        projector: &'a NoiseProjector,
    ) -> Result<Self> {
        if !problem.diffusion.is_additive() && !projector.supports_multiplicative() {
            return Err(Error::invalid(
                "multiplicative noise needs a projector built with cell moments",
            ));
        }
        Ok(Self {
            space,
            problem,
            projector,
        })
    }

    /// `bᵢ = ∫ f(u₁) φᵢ`, 3-point Gauss per cell on the piecewise-linear `u₁`.
    pub fn drift_load(&self, u1_nodal: &[f64]) -> DVector<f64> {
        composed_load(&self.space.mesh, u1_nodal, |u| self.problem.drift.eval(u))
    }

    /// `bᵢ = ∫ g(u₁) ΔW φᵢ`.
    ///
    /// Additive noise uses the closed-form sine-hat loads. Otherwise `g(u₁)`
    /// is replaced by its nodal interpolant and integrated exactly against
    /// every sine mode, which stays accurate for modes far above the mesh
    /// resolution; for affine `g` (all built-in problems) this is exact.
    pub fn noise_load(
        &self,
        u1_nodal: &[f64],
        inc: &NoiseIncrement,
        scratch: &mut NoiseScratch,
        out: &mut DVector<f64>,
    ) -> Result<()> {
        match &self.problem.diffusion {
            Diffusion::Additive => self.projector.load_into(inc, out),
            Diffusion::Multiplicative(g) => {
                scratch.g_nodal.clear();
                scratch.g_nodal.extend(u1_nodal.iter().map(|u| g.eval(*u)));
                self.projector
                    .weighted_load_into(inc, &scratch.g_nodal, &mut scratch.cells, out)
            }
        }
    }

    /// Returns `Pₕf(u₁)` and an action that maps increments to `Pₕ(g(u₁)ΔW)`.
    pub fn evaluate(&self, u1: &FemFunction) -> (FemFunction, GAction<'a>) {
        let nodal = self.space.mesh.with_boundary(u1);
        let pf = self.space.ops.mass_solve(&self.drift_load(&nodal));
        (
            pf,
            GAction {
                rhs: *self,
                u1_nodal: nodal,
            },
        )
    }
}

/// `ΔW ↦ Pₕ(g(u₁)ΔW)` for a frozen `u₁`.
#[derive(Debug)]
pub struct GAction<'a> {
    rhs: RhsEvaluator<'a>,
    u1_nodal: Vec<f64>,
}

impl GAction<'_> {
    pub fn apply(&self, inc: &NoiseIncrement) -> Result<FemFunction> {
        let mut scratch = NoiseScratch::new(self.rhs.space);
        let mut b = DVector::zeros(self.rhs.space.n_dofs());
        self.rhs.noise_load(&self.u1_nodal, inc, &mut scratch, &mut b)?;
        Ok(self.rhs.space.ops.mass_solve(&b))
    }
}

/// Work buffers of the multiplicative noise load.
#[derive(Debug, Clone)]
pub struct NoiseScratch {
    g_nodal: Vec<f64>,
    cells: [DVector<f64>; 3],
}

impl NoiseScratch {
    pub fn new(space: &FemSpace) -> Self {
        let n = space.mesh.n_cells();
        Self {
            g_nodal: Vec::with_capacity(n + 1),
            cells: [DVector::zeros(n), DVector::zeros(n), DVector::zeros(n)],
        }
    }
}

/// Per-mode propagator entries of `E_h(k)`.
#[derive(Debug, Clone)]
struct TrigCache {
    cos: DVector<f64>,
    /// `sin(kω)/ω`.
    sin_over_omega: DVector<f64>,
    /// `ω sin(kω)`.
    omega_sin: DVector<f64>,
}

impl TrigCache {
    fn new(space: &FemSpace, k: f64) -> Self {
        let lam = space.decomp.eigenvalues();
        let omega = lam.map(f64::sqrt);
        Self {
            cos: omega.map(|w| (k * w).cos()),
            sin_over_omega: omega.map(|w| (k * w).sin() / w),
            omega_sin: omega.map(|w| w * (k * w).sin()),
        }
    }
}

/// Advances states by one step of a fixed scheme and step size. Owns the
/// cached propagator or factorisation for `(mesh, k)` and scratch space, so
/// each Monte-Carlo worker holds its own.
#[derive(Debug, Clone)]
pub struct Stepper<'a> {
    rhs: RhsEvaluator<'a>,
    scheme: Scheme,
    k: f64,
    bem_tol: f64,
    bem_max_iter: usize,
    trig: Option<TrigCache>,
    factor: Option<TridiagFactor>,
    scratch: NoiseScratch,
    load: DVector<f64>,
    work: DVector<f64>,
    modal_a: DVector<f64>,
    modal_b: DVector<f64>,
    last_bem_iterations: usize,
}

impl<'a> Stepper<'a> {
    /// `k = 0` is accepted here (the step is then the identity up to the
    /// increment); [`SchemeConfig::new`] is where `k > 0` is enforced.
    pub fn new(rhs: RhsEvaluator<'a>, config: SchemeConfig) -> Result<Self> {
        let k = config.k;
        if !(k >= 0.0 && k.is_finite()) {
            return Err(Error::invalid(format!("time step must be nonnegative, got {k}")));
        }
        let space = rhs.space;
        let ops = &space.ops;
        let (trig, factor) = match config.scheme {
            Scheme::Stm => (Some(TrigCache::new(space, k)), None),
            Scheme::Em => (None, None),
            Scheme::Sem | Scheme::Bem => {
                (None, Some(ops.mass().combine(1.0, ops.stiffness(), k * k).factor()?))
            }
            Scheme::Cnm => (
                None,
                Some(ops.mass().combine(1.0, ops.stiffness(), 0.25 * k * k).factor()?),
            ),
        };
        let n = space.n_dofs();
        Ok(Self {
            rhs,
            scheme: config.scheme,
            k,
            bem_tol: config.bem_tol,
            bem_max_iter: config.bem_max_iter,
            trig,
            factor,
            scratch: NoiseScratch::new(space),
            load: DVector::zeros(n),
            work: DVector::zeros(n),
            modal_a: DVector::zeros(n),
            modal_b: DVector::zeros(n),
            last_bem_iterations: 0,
        })
    }

    pub fn scheme(&self) -> Scheme {
        self.scheme
    }

    pub fn k(&self) -> f64 {
        self.k
    }

    /// Fixed-point iterations used by the most recent backward Euler step.
    pub fn last_bem_iterations(&self) -> usize {
        self.last_bem_iterations
    }

    pub fn step(&mut self, state: &State, inc: &NoiseIncrement) -> Result<State> {
        let next = match self.scheme {
            Scheme::Stm => self.stm_step(state, inc)?,
            Scheme::Em => self.em_step(state, inc)?,
            Scheme::Sem => self.sem_step(state, inc)?,
            Scheme::Bem => self.bem_step(state, inc)?,
            Scheme::Cnm => self.cnm_step(state, inc)?,
        };
        if !next.is_finite() {
            return Err(Error::numerical(
                format!("{} produced a non-finite state", self.scheme),
                None,
            ));
        }
        Ok(next)
    }

    /// `self.load = k·∫f(u₁)φ + ∫g(u₁)ΔWφ`.
    fn explicit_load(&mut self, u1: &FemFunction, inc: &NoiseIncrement) -> Result<Vec<f64>> {
        let nodal = self.rhs.space.mesh.with_boundary(u1);
        self.rhs
            .noise_load(&nodal, inc, &mut self.scratch, &mut self.load)?;
        let drift = self.rhs.drift_load(&nodal);
        self.load.axpy(self.k, &drift, 1.0);
        Ok(nodal)
    }

    /// `U⁺ = E_h(k)(U + (0, Pₕf(U₁)k + Pₕg(U₁)ΔW))`, evaluated mode by mode.
    pub fn stm_step(&mut self, state: &State, inc: &NoiseIncrement) -> Result<State> {
        self.explicit_load(&state.u1, inc)?;
        let space = self.rhs.space;
        let trig = self.trig.get_or_insert_with(|| TrigCache::new(space, self.k));
        let ops = &space.ops;
        let phi = space.decomp.eigenvectors();

        ops.mass().mul_into(&state.u1, &mut self.work);
        self.modal_a.gemv_tr(1.0, phi, &self.work, 0.0);
        // Modal velocity plus load: Φᵀ(M u₂ + b).
        ops.mass().mul_into(&state.u2, &mut self.work);
        self.work += &self.load;
        self.modal_b.gemv_tr(1.0, phi, &self.work, 0.0);

        for j in 0..self.modal_a.len() {
            let (a, b) = (self.modal_a[j], self.modal_b[j]);
            self.modal_a[j] = trig.cos[j] * a + trig.sin_over_omega[j] * b;
            self.modal_b[j] = -trig.omega_sin[j] * a + trig.cos[j] * b;
        }
        Ok(State {
            u1: space.decomp.from_modal(&self.modal_a),
            u2: space.decomp.from_modal(&self.modal_b),
        })
    }

    /// `X⁺ = X + kAX + kF(X) + G(X)ΔW`.
    pub fn em_step(&mut self, state: &State, inc: &NoiseIncrement) -> Result<State> {
        self.explicit_load(&state.u1, inc)?;
        let ops = &self.rhs.space.ops;
        let u1 = &state.u1.coeffs + self.k * &state.u2.coeffs;
        ops.stiffness().mul_into(&state.u1, &mut self.work);
        let mut rhs = &self.load - self.k * &self.work;
        ops.mass_solve_in_place(&mut rhs);
        Ok(State {
            u1: u1.into(),
            u2: (&state.u2.coeffs + rhs).into(),
        })
    }

    /// `(I − kA)X⁺ = X + kF(X) + G(X)ΔW`.
    pub fn sem_step(&mut self, state: &State, inc: &NoiseIncrement) -> Result<State> {
        self.explicit_load(&state.u1, inc)?;
        Ok(self.implicit_euler_solve(state))
    }

    /// Solves the semi-implicit Euler system with the current `self.load`:
    /// `(M + k²S)u₁⁺ = M(u₁ + k u₂) + k b`, `M u₂⁺ = M u₂ + b − kSu₁⁺`.
    fn implicit_euler_solve(&mut self, state: &State) -> State {
        let ops = &self.rhs.space.ops;
        let k = self.k;
        let factor = self.factor.as_ref().expect("implicit Euler factor");
        let shifted = &state.u1.coeffs + k * &state.u2.coeffs;
        let mut rhs1 = ops.mass().mul(&shifted);
        rhs1.axpy(k, &self.load, 1.0);
        factor.solve_in_place(&mut rhs1);
        let u1_next = rhs1;

        ops.stiffness().mul_into(&u1_next, &mut self.work);
        let mut rhs2 = &self.load - k * &self.work;
        ops.mass_solve_in_place(&mut rhs2);
        State {
            u1: u1_next.into(),
            u2: (&state.u2.coeffs + rhs2).into(),
        }
    }

    /// `X⁺ = X + kAX⁺ + kF(X⁺) + G(X)ΔW`, with the drift resolved by
    /// fixed-point iteration started from the semi-implicit step.
    pub fn bem_step(&mut self, state: &State, inc: &NoiseIncrement) -> Result<State> {
        let mesh = &self.rhs.space.mesh;
        let nodal = mesh.with_boundary(&state.u1);
        let mut noise = DVector::zeros(state.u1.len());
        self.rhs
            .noise_load(&nodal, inc, &mut self.scratch, &mut noise)?;

        let mut current = state.clone();
        let mut last_change = f64::INFINITY;
        for iter in 1..=self.bem_max_iter {
            let nodal = mesh.with_boundary(&current.u1);
            let drift = self.rhs.drift_load(&nodal);
            self.load.copy_from(&noise);
            self.load.axpy(self.k, &drift, 1.0);
            let next = self.implicit_euler_solve(state);

            let ops = &self.rhs.space.ops;
            let d1 = &next.u1.coeffs - &current.u1.coeffs;
            let d2 = &next.u2.coeffs - &current.u2.coeffs;
            let change = (ops.mass().quadratic_form(&d1) + ops.mass().quadratic_form(&d2))
                .max(0.0)
                .sqrt();
            let size = (ops.mass().quadratic_form(&next.u1) + ops.mass().quadratic_form(&next.u2))
                .max(0.0)
                .sqrt();
            current = next;
            // The first pass only produces the semi-implicit predictor.
            if iter > 1 && change <= self.bem_tol * size.max(1.0) {
                self.last_bem_iterations = iter;
                return Ok(current);
            }
            if !change.is_finite() {
                break;
            }
            last_change = change;
        }
        Err(Error::numerical(
            format!(
                "backward Euler fixed point did not converge in {} iterations (last change {last_change:e})",
                self.bem_max_iter
            ),
            None,
        ))
    }

    /// `(I − k/2 A)X⁺ = (I + k/2 A)X + kF(X) + G(X)ΔW`.
    pub fn cnm_step(&mut self, state: &State, inc: &NoiseIncrement) -> Result<State> {
        self.explicit_load(&state.u1, inc)?;
        let ops = &self.rhs.space.ops;
        let k = self.k;
        let q = 0.25 * k * k;
        let factor = self.factor.as_ref().expect("Crank-Nicolson factor");

        ops.stiffness().mul_into(&state.u1, &mut self.work);
        let mut rhs1 = ops.mass().mul(&(&state.u1.coeffs + k * &state.u2.coeffs));
        rhs1.axpy(-q, &self.work, 1.0);
        rhs1.axpy(0.5 * k, &self.load, 1.0);
        factor.solve_in_place(&mut rhs1);
        let u1_next = rhs1;

        let sum = &u1_next + &state.u1.coeffs;
        ops.stiffness().mul_into(&sum, &mut self.work);
        let mut rhs2 = &self.load - 0.5 * k * &self.work;
        ops.mass_solve_in_place(&mut rhs2);
        Ok(State {
            u1: u1_next.into(),
            u2: (&state.u2.coeffs + rhs2).into(),
        })
    }
}

/// Time series produced by [`integrate`].
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub final_state: State,
    pub times: Vec<f64>,
    pub records: Vec<ObservableRecord>,
}

/// Runs `n_steps` steps from `initial`, drawing one increment per step.
/// Observables are recorded at t = 0 and after every step when `observe` is
/// non-empty.
pub fn integrate(
    stepper: &mut Stepper<'_>,
    initial: State,
    n_steps: usize,
    increments: impl IntoIterator<Item = impl Borrow<NoiseIncrement>>,
    observe: &ObservableSet,
) -> Result<Trajectory> {
    let space = stepper.rhs.space;
    let problem = stepper.rhs.problem;
    let recording = !observe.is_empty();
    let mut times = Vec::new();
    let mut records = Vec::new();
    if recording {
        times.push(0.0);
        records.push(observe.evaluate(space, problem, &initial)?);
    }
    let mut state = initial;
    let mut incs = increments.into_iter();
    for n in 0..n_steps {
        let inc = incs.next().ok_or_else(|| {
            Error::invalid(format!("noise path ended after {n} of {n_steps} increments"))
        })?;
        state = stepper.step(&state, inc.borrow()).map_err(|e| match e {
            Error::NumericalFailure { message, .. } => Error::NumericalFailure {
                message: format!("{message} at step {}", n + 1),
                step: Some(n + 1),
            },
            other => other,
        })?;
        if recording {
            times.push((n + 1) as f64 * stepper.k);
            records.push(observe.evaluate(space, problem, &state)?);
        }
    }
    Ok(Trajectory {
        final_state: state,
        times,
        records,
    })
}
