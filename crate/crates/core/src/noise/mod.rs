//! Q-Wiener noise on (0, 1) in the Dirichlet sine basis.
//!
//! The covariance `Q` shares eigenfunctions `e_j(x) = √2 sin(jπx)` with the
//! Laplacian, so an increment over `dt` is `Σ_j sqrt(q_j dt) ξ_j e_j` with
//! independent standard normals `ξ_j`, truncated after `J` modes.

mod loads;

use std::f64::consts::PI;

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FemFunction, FemOperators, Mesh1D};

pub use loads::{sine_hat_integral, sine_hat_matrix, CellMoments};

/// Relative tail mass left out by the default truncation of a trace-class
/// power-law covariance.
pub const DEFAULT_TAIL_FRACTION: f64 = 1e-8;

/// Upper limit of the tail-rule truncation unless the mesh has more nodes.
pub const MAX_DEFAULT_MODES: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseKind {
    /// `Q = I`.
    White,
    /// `Q = Λ^{-s}`.
    Power { s: f64 },
    Off,
}

/// Covariance of the driving noise together with its truncation level.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    kind: NoiseKind,
    truncation: usize,
    variances: Vec<f64>,
}

impl NoiseModel {
    pub fn new(kind: NoiseKind, truncation: usize) -> Result<Self> {
        if truncation == 0 {
            return Err(Error::invalid("noise truncation must be at least one mode"));
        }
        if let NoiseKind::Power { s } = kind {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(Error::invalid(format!(
                    "covariance exponent must be nonnegative, got {s}"
                )));
            }
        }
        let variances = (1..=truncation)
            .map(|j| match kind {
                NoiseKind::White => 1.0,
                NoiseKind::Power { s } => ((j as f64) * PI).powi(2).powf(-s),
                NoiseKind::Off => 0.0,
            })
            .collect();
        Ok(Self {
            kind,
            truncation,
            variances,
        })
    }

    pub fn white(truncation: usize) -> Result<Self> {
        Self::new(NoiseKind::White, truncation)
    }

    pub fn power(s: f64, truncation: usize) -> Result<Self> {
        Self::new(NoiseKind::Power { s }, truncation)
    }

    pub fn off() -> Self {
        Self::new(NoiseKind::Off, 1).expect("valid")
    }

    /// Truncation chosen from the kind and the finest mesh it must drive:
    /// white and non-trace-class noise keep one mode per interior node of
    /// that mesh; `Λ^{-s}` with `s > 1/2` keeps the smallest `J` whose tail
    /// holds less than [`DEFAULT_TAIL_FRACTION`] of the trace, but never
    /// more than `max(MAX_DEFAULT_MODES, finest_dofs)` modes.
    pub fn with_default_truncation(kind: NoiseKind, finest_dofs: usize) -> Result<Self> {
        let j = match kind {
            NoiseKind::Off => 1,
            NoiseKind::White => finest_dofs.max(1),
            NoiseKind::Power { s } if s > 0.5 => {
                tail_rule_truncation(2.0 * s, MAX_DEFAULT_MODES.max(finest_dofs))
            }
            NoiseKind::Power { .. } => finest_dofs.max(1),
        };
        Self::new(kind, j)
    }

    pub fn kind(&self) -> NoiseKind {
        self.kind
    }

    pub fn truncation(&self) -> usize {
        self.truncation
    }

    /// Mode variances `q_1..q_J`.
    pub fn variances(&self) -> &[f64] {
        &self.variances
    }

    pub fn is_off(&self) -> bool {
        matches!(self.kind, NoiseKind::Off)
    }

    /// Whether the untruncated covariance has finite trace.
    pub fn is_trace_class(&self) -> bool {
        match self.kind {
            NoiseKind::Off => true,
            NoiseKind::White => false,
            NoiseKind::Power { s } => s > 0.5,
        }
    }

    /// `Σ_{j ≤ J} q_j`.
    pub fn partial_trace(&self) -> f64 {
        self.variances.iter().sum()
    }

    /// Draws one increment over `dt` from `rng`.
    pub fn sample_increment(&self, dt: f64, rng: &mut impl Rng) -> Result<NoiseIncrement> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::invalid(format!("time step must be positive, got {dt}")));
        }
        if self.is_off() {
            return Ok(NoiseIncrement::zero(self.truncation, dt));
        }
        let xi = DVector::from_iterator(
            self.truncation,
            (0..self.truncation).map(|_| rng.sample::<f64, _>(StandardNormal)),
        );
        let spectral_coeffs = DVector::from_iterator(
            self.truncation,
            self.variances
                .iter()
                .zip(xi.iter())
                .map(|(q, x)| (q * dt).sqrt() * x),
        );
        Ok(NoiseIncrement {
            xi,
            dt,
            spectral_coeffs,
        })
    }
}

/// Smallest J with `Σ_{j>J} j^{-p} < DEFAULT_TAIL_FRACTION · ζ(p)`, p > 1,
/// or `cap` if that is smaller.
fn tail_rule_truncation(p: f64, cap: usize) -> usize {
    let total = power_sum_tail(p, 0);
    let mut j = 1;
    while j < cap && power_sum_tail(p, j) >= DEFAULT_TAIL_FRACTION * total {
        j += 1;
    }
    j
}

/// `Σ_{j > n} j^{-p}` via explicit terms up to 64 and Euler-Maclaurin beyond.
fn power_sum_tail(p: f64, n: usize) -> f64 {
    let cut = n.max(64);
    let explicit: f64 = (n + 1..=cut).map(|j| (j as f64).powf(-p)).sum();
    let c = cut as f64;
    explicit + c.powf(1.0 - p) / (p - 1.0) - 0.5 * c.powf(-p) + p / 12.0 * c.powf(-p - 1.0)
}

/// One Wiener increment `ΔW = Σ_j spectral_coeffs_j e_j`.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseIncrement {
    /// Standardised draws behind the coefficients.
    pub xi: DVector<f64>,
    pub dt: f64,
    /// `sqrt(q_j dt) ξ_j`.
    pub spectral_coeffs: DVector<f64>,
}

impl NoiseIncrement {
    pub fn zero(modes: usize, dt: f64) -> Self {
        Self {
            xi: DVector::zeros(modes),
            dt,
            spectral_coeffs: DVector::zeros(modes),
        }
    }

    pub fn modes(&self) -> usize {
        self.spectral_coeffs.len()
    }
}

/// Precomputed sine-mode loads of one mesh for a fixed number of modes.
///
/// `project` gives `Pₕ ΔW`; `weighted_load` gives the load of `g(u) ΔW`
/// with `g(u)` replaced by its nodal interpolant, integrated exactly.
#[derive(Debug, Clone)]
pub struct NoiseProjector {
    modes: usize,
    hat_loads: nalgebra::DMatrix<f64>,
    /// `hat_loadsᵀ`, laid out for contiguous dot products.
    hat_loads_t: nalgebra::DMatrix<f64>,
    cell_moments: Option<CellMoments>,
}

impl NoiseProjector {
    pub fn new(mesh: &Mesh1D, modes: usize, multiplicative: bool) -> Self {
        let hat_loads = sine_hat_matrix(mesh, modes);
        Self {
            modes,
            hat_loads_t: hat_loads.transpose(),
            hat_loads,
            cell_moments: multiplicative.then(|| CellMoments::new(mesh, modes)),
        }
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn hat_loads(&self) -> &nalgebra::DMatrix<f64> {
        &self.hat_loads
    }

    /// `bᵢ = ∫ ΔW φᵢ`.
    pub fn load_into(&self, inc: &NoiseIncrement, out: &mut DVector<f64>) -> Result<()> {
        self.check(inc)?;
        loads::mul_transpose(&self.hat_loads_t, &inc.spectral_coeffs, out);
        Ok(())
    }

    /// `bᵢ = ∫ gI ΔW φᵢ` for nodal values `g_nodal` (boundary included).
    pub fn weighted_load_into(
        &self,
        inc: &NoiseIncrement,
        g_nodal: &[f64],
        scratch: &mut [DVector<f64>; 3],
        out: &mut DVector<f64>,
    ) -> Result<()> {
        self.check(inc)?;
        let cm = self.cell_moments.as_ref().ok_or_else(|| {
            Error::invalid("noise projector was built without multiplicative support")
        })?;
        cm.weighted_load(&inc.spectral_coeffs, g_nodal, scratch, out);
        Ok(())
    }

    pub fn supports_multiplicative(&self) -> bool {
        self.cell_moments.is_some()
    }

    fn check(&self, inc: &NoiseIncrement) -> Result<()> {
        if inc.modes() != self.modes {
            return Err(Error::invalid(format!(
                "increment has {} modes, projector expects {}",
                inc.modes(),
                self.modes
            )));
        }
        Ok(())
    }
}

/// `Pₕ ΔW`, via the closed-form sine-hat loads and a mass solve.
pub fn project_increment(mesh: &Mesh1D, ops: &FemOperators, inc: &NoiseIncrement) -> FemFunction {
    let b = sine_hat_matrix(mesh, inc.modes()) * &inc.spectral_coeffs;
    ops.mass_solve(&b)
}

/// `Tr(Pₕ Q Pₕ) = Σ_j q_j ‖Pₕ e_j‖²` over the model's truncation.
pub fn trace_projected(model: &NoiseModel, mesh: &Mesh1D, ops: &FemOperators) -> f64 {
    if model.is_off() {
        return 0.0;
    }
    let h = mesh.h();
    let mut b = DVector::zeros(mesh.n_dofs());
    model
        .variances()
        .iter()
        .enumerate()
        .map(|(j, q)| {
            for (i, x) in mesh.nodes().iter().enumerate() {
                b[i] = sine_hat_integral(j + 1, *x, h);
            }
            // ‖Pₕe_j‖² = cᵀMc with Mc = b, i.e. bᵀM⁻¹b.
            let c = ops.mass_solve(&b);
            q * c.dot(&b)
        })
        .sum()
}

/// Deterministic random stream for one (sample, step) pair.
///
/// The ChaCha key comes from the master seed; the 64-bit stream id is a hash
/// of the two indices, so streams can be produced in any order or in
/// parallel and still give the same draws.
pub fn stream_rng(master_seed: u64, sample: u64, step: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(splitmix64(splitmix64(sample) ^ step));
    rng
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Noise path of one Monte-Carlo sample, generated on the finest time grid
/// and aggregated to coarser steps by summing fine increments.
#[derive(Debug, Clone)]
pub struct PathCoupling {
    pub master_seed: u64,
    pub sample: u64,
    pub finest_dt: f64,
    pub n_fine_steps: usize,
}

impl PathCoupling {
    pub fn new(master_seed: u64, sample: u64, finest_dt: f64, n_fine_steps: usize) -> Result<Self> {
        if !(finest_dt > 0.0 && finest_dt.is_finite()) {
            return Err(Error::invalid(format!(
                "finest time step must be positive, got {finest_dt}"
            )));
        }
        Ok(Self {
            master_seed,
            sample,
            finest_dt,
            n_fine_steps,
        })
    }

    /// The fine increment with index `step`.
    pub fn fine_increment(&self, model: &NoiseModel, step: usize) -> NoiseIncrement {
        let mut rng = stream_rng(self.master_seed, self.sample, step as u64);
        model
            .sample_increment(self.finest_dt, &mut rng)
            .expect("finest_dt validated at construction")
    }

    /// Number of fine steps per coarse step of length `step`.
    pub fn ratio(&self, step: f64) -> Result<usize> {
        let r = step / self.finest_dt;
        let rounded = r.round();
        if !(rounded >= 1.0) || (r - rounded).abs() > 1e-9 * rounded {
            return Err(Error::invalid(format!(
                "step {step} is not an integer multiple of the finest step {}",
                self.finest_dt
            )));
        }
        let ratio = rounded as usize;
        if self.n_fine_steps % ratio != 0 {
            return Err(Error::invalid(format!(
                "{} fine steps do not split into coarse steps of {ratio}",
                self.n_fine_steps
            )));
        }
        Ok(ratio)
    }

    /// Increments over consecutive steps of length `step`, each the sum of
    /// its constituent fine increments.
    pub fn coupled_increments<'a>(
        &'a self,
        model: &'a NoiseModel,
        step: f64,
    ) -> Result<CoupledIncrements<'a>> {
        let ratio = self.ratio(step)?;
        Ok(CoupledIncrements {
            coupling: self,
            model,
            ratio,
            next: 0,
            count: self.n_fine_steps / ratio,
        })
    }
}

/// Sum of consecutive increments, accumulated in order. The standardised
/// draws are rescaled so that they stay standard normal.
pub fn sum_increments(incs: impl IntoIterator<Item = NoiseIncrement>) -> NoiseIncrement {
    let mut it = incs.into_iter();
    let mut acc = it.next().expect("at least one increment");
    let mut count = 1usize;
    for inc in it {
        acc.spectral_coeffs += &inc.spectral_coeffs;
        acc.xi += &inc.xi;
        acc.dt += inc.dt;
        count += 1;
    }
    if count > 1 {
        acc.xi /= (count as f64).sqrt();
    }
    acc
}

/// Aggregates a fine path into steps of `ratio` fine increments, with the
/// same summation order as [`CoupledIncrements`].
pub fn coarsen_path(fine: &[NoiseIncrement], ratio: usize) -> Result<Vec<NoiseIncrement>> {
    if ratio == 0 || fine.len() % ratio != 0 {
        return Err(Error::invalid(format!(
            "{} fine increments do not split into groups of {ratio}",
            fine.len()
        )));
    }
    Ok(fine
        .chunks(ratio)
        .map(|c| sum_increments(c.iter().cloned()))
        .collect())
}

/// Iterator returned by [`PathCoupling::coupled_increments`].
#[derive(Debug)]
pub struct CoupledIncrements<'a> {
    coupling: &'a PathCoupling,
    model: &'a NoiseModel,
    ratio: usize,
    next: usize,
    count: usize,
}

impl Iterator for CoupledIncrements<'_> {
    type Item = NoiseIncrement;

    fn next(&mut self) -> Option<NoiseIncrement> {
        if self.next >= self.count {
            return None;
        }
        let first = self.next * self.ratio;
        self.next += 1;
        let fine = (first..first + self.ratio).map(|i| self.coupling.fine_increment(self.model, i));
        Some(sum_increments(fine))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        let left = self.count - self.next;
        (left, Some(left))
    }
}

impl ExactSizeIterator for CoupledIncrements<'_> {}

#[cfg(test)]
mod tests;
