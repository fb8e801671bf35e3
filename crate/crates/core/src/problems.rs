//! Problem definitions: nonlinearities, potential, initial data and noise.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::fem::{l2_project, ritz_project, FemFunction, FemSpace};
use crate::noise::NoiseKind;

/// A named scalar function of one real variable.
#[derive(Clone)]
pub struct ScalarFn {
    label: String,
    f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

impl ScalarFn {
    pub fn new(label: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        Self {
            label: label.into(),
            f: Arc::new(f),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::new(format!("{c}"), move |_| c)
    }

    pub fn from_expr(label: impl Into<String>, e: Expr) -> Self {
        Self::new(label, move |x| e.eval(x))
    }

    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn label(&self) -> &str {
        &self.label
    }
}

impl fmt::Debug for ScalarFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarFn({})", self.label)
    }
}

/// The diffusion coefficient `g`.
#[derive(Debug, Clone)]
pub enum Diffusion {
    /// `g ≡ 1`.
    Additive,
    Multiplicative(ScalarFn),
}

impl Diffusion {
    pub fn eval(&self, u: f64) -> f64 {
        match self {
            Diffusion::Additive => 1.0,
            Diffusion::Multiplicative(g) => g.eval(u),
        }
    }

    pub fn is_additive(&self) -> bool {
        matches!(self, Diffusion::Additive)
    }
}

/// Which projection maps an initial field into the finite element space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Projector {
    Ritz,
    L2,
}

#[derive(Debug, Clone)]
pub struct InitialField {
    pub value: ScalarFn,
    pub derivative: Option<ScalarFn>,
    pub projector: Projector,
}

impl InitialField {
    pub fn zero() -> Self {
        Self {
            value: ScalarFn::constant(0.0),
            derivative: Some(ScalarFn::constant(0.0)),
            projector: Projector::Ritz,
        }
    }

    pub fn ritz(value: ScalarFn, derivative: ScalarFn) -> Self {
        Self {
            value,
            derivative: Some(derivative),
            projector: Projector::Ritz,
        }
    }

    pub fn l2(value: ScalarFn) -> Self {
        Self {
            value,
            derivative: None,
            projector: Projector::L2,
        }
    }

    pub fn project(&self, space: &FemSpace) -> Result<FemFunction> {
        match self.projector {
            Projector::L2 => Ok(l2_project(&space.mesh, &space.ops, |x| self.value.eval(x))),
            Projector::Ritz => {
                let d = self.derivative.as_ref().map(|d| move |x: f64| d.eval(x));
                let dyn_ref = d.as_ref().map(|d| d as &dyn Fn(f64) -> f64);
                ritz_project(&space.mesh, &space.ops, dyn_ref)
            }
        }
    }
}

/// Regularity index β of the assumptions on `f`, `g` and the noise, as far
/// as it is known for a problem.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Regularity {
    Exactly(f64),
    /// Any β strictly below the bound.
    Below(f64),
}

impl Regularity {
    fn beta(self) -> f64 {
        match self {
            Regularity::Exactly(b) | Regularity::Below(b) => b,
        }
    }

    /// Mean-square order of the position error in time, `min(β, 1)`.
    pub fn temporal_rate(self) -> f64 {
        self.beta().min(1.0)
    }

    /// Mean-square order of the position error in space, `2β/3`.
    pub fn spatial_rate(self) -> f64 {
        2.0 * self.beta() / 3.0
    }
}

/// A semilinear stochastic wave equation on (0, 1) with Dirichlet conditions.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub name: String,
    /// `f` in `du̇ = (u_xx + f(u)) dt + g(u) dW`.
    pub drift: ScalarFn,
    pub diffusion: Diffusion,
    /// `V` with `f = −V′`, needed for the Hamiltonian.
    pub potential: Option<ScalarFn>,
    pub u0: InitialField,
    pub v0: InitialField,
    pub noise: NoiseKind,
    pub regularity: Option<Regularity>,
    /// Default final time of the problem's experiments.
    pub t_end: f64,
}

pub const BUILTIN_NAMES: [&str; 4] = [
    "anderson",
    "sine-gordon-additive",
    "sine-gordon-multiplicative",
    "linear-additive",
];

impl ProblemSpec {
    /// Looks up a built-in problem by its command-line name.
    pub fn builtin(name: &str) -> Result<Self> {
        match name {
            "anderson" => Ok(anderson()),
            "sine-gordon-additive" => Ok(sine_gordon_additive()),
            "sine-gordon-multiplicative" => Ok(sine_gordon_multiplicative()),
            "linear-additive" => Ok(linear_additive(NoiseKind::White)),
            other => Err(Error::usage(
                "problem",
                format!("unknown problem `{other}`; expected one of {BUILTIN_NAMES:?} or `custom`"),
            )),
        }
    }

    /// Replaces the noise covariance, updating derived metadata.
    pub fn with_noise(mut self, noise: NoiseKind) -> Self {
        self.noise = noise;
        self.regularity = match self.name.as_str() {
            "anderson" | "sine-gordon-multiplicative" => Some(Regularity::Below(noise_beta(noise))),
            "sine-gordon-additive" | "linear-additive" => Some(match noise {
                NoiseKind::Power { s } if s >= 1.0 => Regularity::Exactly(s),
                _ => Regularity::Below(noise_beta(noise)),
            }),
            _ => self.regularity,
        };
        self
    }

    pub fn initial_state(&self, space: &FemSpace) -> Result<(FemFunction, FemFunction)> {
        Ok((self.u0.project(space)?, self.v0.project(space)?))
    }

    /// Finite-difference check that `f = −V′` on a grid of sample points.
    pub fn check_potential(&self) -> Result<()> {
        let v = self
            .potential
            .as_ref()
            .ok_or_else(|| Error::invalid(format!("problem `{}` has no potential", self.name)))?;
        let eps = 1e-4;
        for i in 0..=80 {
            let u = -4.0 + 0.1 * i as f64;
            let dv = (v.eval(u + eps) - v.eval(u - eps)) / (2.0 * eps);
            let gap = (self.drift.eval(u) + dv).abs();
            if gap > 1e-6 * (1.0 + dv.abs()) {
                return Err(Error::invalid(format!(
                    "f(u) ≠ −V′(u) at u = {u}: mismatch {gap:e}"
                )));
            }
        }
        Ok(())
    }
}

/// Upper bound on β for a noise kind acting in one space dimension: `s + 1/2`.
fn noise_beta(noise: NoiseKind) -> f64 {
    match noise {
        NoiseKind::White | NoiseKind::Off => 0.5,
        NoiseKind::Power { s } => s + 0.5,
    }
}

fn sin_mode(k: f64) -> InitialField {
    InitialField::ritz(
        ScalarFn::new(format!("sin({k}*pi*x)"), move |x| (k * PI * x).sin()),
        ScalarFn::new(format!("{k}*pi*cos({k}*pi*x)"), move |x| {
            k * PI * (k * PI * x).cos()
        }),
    )
}

fn l2_sin_mode(k: f64) -> InitialField {
    InitialField::l2(ScalarFn::new(format!("sin({k}*pi*x)"), move |x| {
        (k * PI * x).sin()
    }))
}

fn identity() -> ScalarFn {
    ScalarFn::new("u", |u| u)
}

fn sine_gordon_drift() -> ScalarFn {
    ScalarFn::new("-sin(u)", |u| -u.sin())
}

fn sine_gordon_potential() -> ScalarFn {
    ScalarFn::new("1-cos(u)", |u| 1.0 - u.cos())
}

/// Hyperbolic Anderson model: `f = 0`, `g(u) = u`, `u₀ = sin 2πx`,
/// `v₀ = sin 3πx`, horizon 1.
pub fn anderson() -> ProblemSpec {
    ProblemSpec {
        name: "anderson".into(),
        drift: ScalarFn::constant(0.0),
        diffusion: Diffusion::Multiplicative(identity()),
        potential: Some(ScalarFn::constant(0.0)),
        u0: sin_mode(2.0),
        v0: l2_sin_mode(3.0),
        noise: NoiseKind::White,
        regularity: Some(Regularity::Below(0.5)),
        t_end: 1.0,
    }
}

/// Sine-Gordon with additive noise; `u₀ = 0` and `v₀ = 1_{[1/4, 3/4]}`.
pub fn sine_gordon_additive() -> ProblemSpec {
    ProblemSpec {
        name: "sine-gordon-additive".into(),
        drift: sine_gordon_drift(),
        diffusion: Diffusion::Additive,
        potential: Some(sine_gordon_potential()),
        u0: InitialField::zero(),
        v0: InitialField::l2(ScalarFn::new("1_[1/4,3/4](x)", |x| {
            if (0.25..=0.75).contains(&x) {
                1.0
            } else {
                0.0
            }
        })),
        noise: NoiseKind::White,
        regularity: Some(Regularity::Below(0.5)),
        t_end: 0.5,
    }
}

/// Sine-Gordon with multiplicative noise `g(u) = u`.
pub fn sine_gordon_multiplicative() -> ProblemSpec {
    ProblemSpec {
        name: "sine-gordon-multiplicative".into(),
        drift: sine_gordon_drift(),
        diffusion: Diffusion::Multiplicative(identity()),
        potential: Some(sine_gordon_potential()),
        u0: sin_mode(2.0),
        v0: l2_sin_mode(3.0),
        noise: NoiseKind::White,
        regularity: Some(Regularity::Below(0.5)),
        t_end: 0.5,
    }
}

/// Linear wave equation with additive noise and zero initial data.
pub fn linear_additive(noise: NoiseKind) -> ProblemSpec {
    ProblemSpec {
        name: "linear-additive".into(),
        drift: ScalarFn::constant(0.0),
        diffusion: Diffusion::Additive,
        potential: Some(ScalarFn::constant(0.0)),
        u0: InitialField::zero(),
        v0: InitialField::zero(),
        noise,
        regularity: None,
        t_end: 1.0,
    }
    .with_noise(noise)
}

/// [`linear_additive`] with caller-supplied initial data.
pub fn linear_additive_with(noise: NoiseKind, u0: InitialField, v0: InitialField) -> ProblemSpec {
    ProblemSpec {
        u0,
        v0,
        ..linear_additive(noise)
    }
}

/// Expression sources of a user-defined problem.
#[derive(Debug, Clone, Default, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct CustomProblem {
    /// `f(u)`.
    pub f: String,
    /// `g(u)`; `"1"` gives additive noise.
    pub g: String,
    /// Optional potential `V(u)`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub potential: Option<String>,
    /// `u₀(x)`, Ritz-projected with its symbolic derivative.
    #[serde(default = "zero_src")]
    pub u0: String,
    /// `v₀(x)`, L₂-projected.
    #[serde(default = "zero_src")]
    pub v0: String,
    #[serde(default = "default_custom_t_end")]
    pub t_end: f64,
}

fn zero_src() -> String {
    "0".into()
}

fn default_custom_t_end() -> f64 {
    1.0
}

impl CustomProblem {
    pub fn build(&self, noise: NoiseKind) -> Result<ProblemSpec> {
        let f = Expr::parse(&self.f, "u", "f")?;
        let g = Expr::parse(&self.g, "u", "g")?;
        let potential = self
            .potential
            .as_deref()
            .map(|src| Expr::parse(src, "u", "potential").map(|e| ScalarFn::from_expr(src, e)))
            .transpose()?;
        let u0 = Expr::parse(&self.u0, "x", "u0")?;
        let du0 = u0.derivative();
        let v0 = Expr::parse(&self.v0, "x", "v0")?;
        if !(self.t_end > 0.0 && self.t_end.is_finite()) {
            return Err(Error::usage("t_end", "must be positive"));
        }
        let diffusion = if g.is_constant(1.0) {
            Diffusion::Additive
        } else {
            Diffusion::Multiplicative(ScalarFn::from_expr(self.g.clone(), g))
        };
        let spec = ProblemSpec {
            name: "custom".into(),
            drift: ScalarFn::from_expr(self.f.clone(), f),
            diffusion,
            potential,
            u0: InitialField::ritz(
                ScalarFn::from_expr(self.u0.clone(), u0),
                ScalarFn::from_expr(format!("d/dx {}", self.u0), du0),
            ),
            v0: InitialField::l2(ScalarFn::from_expr(self.v0.clone(), v0)),
            noise,
            regularity: None,
            t_end: self.t_end,
        };
        if spec.potential.is_some() {
            spec.check_potential()
                .map_err(|e| Error::usage("potential", e.to_string()))?;
        }
        Ok(spec)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn lipschitz_estimate(f: impl Fn(f64) -> f64) -> f64 {
        let pts: Vec<f64> = (0..60).map(|i| -6.0 + 0.2 * i as f64).collect();
        let mut l: f64 = 0.0;
        for a in &pts {
            for b in &pts {
                if a != b {
                    l = l.max((f(*a) - f(*b)).abs() / (a - b).abs());
                }
            }
        }
        l
    }

    #[test]
    fn anderson_definition() {
        let p = anderson();
        assert_eq!(p.diffusion.eval(2.5), 2.5);
        assert_eq!(p.drift.eval(2.5), 0.0);
        assert!((p.u0.value.eval(0.25) - 1.0).abs() < 1e-15);
        assert_eq!(p.t_end, 1.0);
        let p = p.with_noise(NoiseKind::Power { s: 0.5 });
        assert_eq!(p.regularity, Some(Regularity::Below(1.0)));
        assert!((p.regularity.unwrap().spatial_rate() - 2.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn sine_gordon_additive_definition() {
        let p = sine_gordon_additive();
        assert_eq!(p.v0.value.eval(0.5), 1.0);
        assert_eq!(p.v0.value.eval(0.1), 0.0);
        assert_eq!(p.drift.eval(0.0), 0.0);
        assert_eq!(p.potential.as_ref().unwrap().eval(0.0), 0.0);
        assert!(p.diffusion.is_additive());
        assert_eq!(p.v0.projector, Projector::L2);
        let p = p.with_noise(NoiseKind::Power { s: 2.0 });
        assert_eq!(p.regularity, Some(Regularity::Exactly(2.0)));
    }

    #[test]
    fn sine_gordon_multiplicative_definition() {
        let p = sine_gordon_multiplicative();
        assert_eq!(p.diffusion.eval(1.0), 1.0);
        assert!(p.drift.eval(PI).abs() < 1e-15);
        let du0 = p.u0.derivative.as_ref().unwrap();
        assert!((du0.eval(0.1) - 2.0 * PI * (0.2 * PI).cos()).abs() < 1e-14);
    }

    #[test]
    fn builtins_satisfy_potential_and_lipschitz_checks() {
        for name in BUILTIN_NAMES {
            let p = ProblemSpec::builtin(name).unwrap();
            p.check_potential().unwrap();
            assert!(lipschitz_estimate(|u| p.drift.eval(u)) <= 1.0 + 1e-12);
            assert!(lipschitz_estimate(|u| p.diffusion.eval(u)) <= 1.0 + 1e-12);
        }
        assert!(ProblemSpec::builtin("heat").is_err());
    }

    #[test]
    fn mismatched_potential_is_caught() {
        let mut p = sine_gordon_additive();
        p.potential = Some(ScalarFn::new("cos(u)", |u| u.cos()));
        assert!(p.check_potential().is_err());
    }

    #[test]
    fn linear_additive_zero_data() {
        let p = linear_additive(NoiseKind::Off);
        let space = FemSpace::new(8).unwrap();
        let (u, v) = p.initial_state(&space).unwrap();
        assert_eq!(u.amax(), 0.0);
        assert_eq!(v.amax(), 0.0);
    }

    #[test]
    fn custom_problem_from_expressions() {
        let c = CustomProblem {
            f: "-sin(u)".into(),
            g: "1".into(),
            potential: Some("1 - cos(u)".into()),
            u0: "sin(pi*x)".into(),
            v0: "0".into(),
            t_end: 0.5,
        };
        let p = c.build(NoiseKind::White).unwrap();
        assert!(p.diffusion.is_additive());
        assert!((p.drift.eval(1.0) + 1f64.sin()).abs() < 1e-15);
        let space = FemSpace::new(16).unwrap();
        let (u, _) = p.initial_state(&space).unwrap();
        // Ritz projection of a smooth function interpolates it at the nodes in 1D.
        for (x, ui) in space.mesh.nodes().iter().zip(u.iter()) {
            assert!(((PI * x).sin() - ui).abs() < 1e-6);
        }

        let bad = CustomProblem {
            f: "-sin(u".into(),
            g: "u".into(),
            ..Default::default()
        };
        assert!(matches!(bad.build(NoiseKind::White), Err(Error::Usage { field, .. }) if field == "f"));
        let wrong_v = CustomProblem {
            f: "-sin(u)".into(),
            g: "u".into(),
            potential: Some("cos(u)".into()),
            u0: "0".into(),
            v0: "0".into(),
            t_end: 1.0,
        };
        assert!(wrong_v.build(NoiseKind::White).is_err());
    }
}
