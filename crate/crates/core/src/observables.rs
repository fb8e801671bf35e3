//! Hamiltonian, discrete norms and Monte-Carlo averages along trajectories.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{composed_integral, FemSpace};
use crate::integrators::State;
use crate::problems::ProblemSpec;

/// `H = ½‖u₂‖² + ½‖Λₕ^{1/2}u₁‖² + ∫V(u₁)`.
///
/// The quadratic terms are the exact forms `uᵀMu` and `uᵀSu`; the potential
/// term uses 3-point Gauss per cell on the piecewise-linear `u₁`.
pub fn hamiltonian(state: &State, space: &FemSpace, problem: &ProblemSpec) -> Result<f64> {
    let v = problem.potential.as_ref().ok_or_else(|| {
        Error::invalid(format!(
            "problem `{}` has no potential V, so its Hamiltonian is undefined",
            problem.name
        ))
    })?;
    let ops = &space.ops;
    let quadratic =
        0.5 * (ops.mass().quadratic_form(&state.u2) + ops.stiffness().quadratic_form(&state.u1));
    let nodal = space.mesh.with_boundary(&state.u1);
    Ok(quadratic + composed_integral(&space.mesh, &nodal, |u| v.eval(u)))
}

/// `½(λⱼaⱼ² + bⱼ²)` for the first `m` eigenmodes.
pub fn modal_energies(state: &State, space: &FemSpace, m: usize) -> Result<Vec<f64>> {
    let d = &space.decomp;
    let a = d.to_modal(&space.ops, &state.u1)?;
    let b = d.to_modal(&space.ops, &state.u2)?;
    Ok((0..m.min(d.len()))
        .map(|j| 0.5 * (d.eigenvalues()[j] * a[j] * a[j] + b[j] * b[j]))
        .collect())
}

/// Which quantities to record along a trajectory.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ObservableSet {
    pub hamiltonian: bool,
    pub l2_norm_u1: bool,
    pub l2_norm_u2: bool,
    pub energy_seminorm: bool,
    /// Number of leading modes whose energy is recorded.
    pub modal_energies: usize,
}

impl ObservableSet {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn hamiltonian_only() -> Self {
        Self {
            hamiltonian: true,
            ..Self::default()
        }
    }

    pub fn is_empty(&self) -> bool {
        !(self.hamiltonian
            || self.l2_norm_u1
            || self.l2_norm_u2
            || self.energy_seminorm
            || self.modal_energies > 0)
    }

    pub fn evaluate(
        &self,
        space: &FemSpace,
        problem: &ProblemSpec,
        state: &State,
    ) -> Result<ObservableRecord> {
        let ops = &space.ops;
        Ok(ObservableRecord {
            hamiltonian: self
                .hamiltonian
                .then(|| hamiltonian(state, space, problem))
                .transpose()?,
            l2_norm_u1: self.l2_norm_u1.then(|| ops.l2_norm(&state.u1)),
            l2_norm_u2: self.l2_norm_u2.then(|| ops.l2_norm(&state.u2)),
            energy_seminorm: self.energy_seminorm.then(|| ops.energy_seminorm(&state.u1)),
            modal_energies: if self.modal_energies > 0 {
                modal_energies(state, space, self.modal_energies)?
            } else {
                Vec::new()
            },
        })
    }
}

/// Observables of one state; fields not requested are `None` or empty.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    pub hamiltonian: Option<f64>,
    pub l2_norm_u1: Option<f64>,
    pub l2_norm_u2: Option<f64>,
    pub energy_seminorm: Option<f64>,
    pub modal_energies: Vec<f64>,
}

/// Streaming mean and variance (Welford), mergeable across batches.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct MeanAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl MeanAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn merge(&mut self, other: &MeanAccumulator) {
        if other.count == 0 {
            return;
        }
        if self.count == 0 {
            *self = *other;
            return;
        }
        let n = (self.count + other.count) as f64;
        let delta = other.mean - self.mean;
        let (na, nb) = (self.count as f64, other.count as f64);
        self.mean += delta * nb / n;
        self.m2 += other.m2 + delta * delta * na * nb / n;
        self.count += other.count;
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        if self.count == 0 {
            f64::NAN
        } else {
            self.mean
        }
    }

    /// Unbiased sample variance; `None` below two samples.
    pub fn variance(&self) -> Option<f64> {
        (self.count >= 2).then(|| self.m2.max(0.0) / (self.count - 1) as f64)
    }

    /// `std / √M`; `None` below two samples.
    pub fn stderr(&self) -> Option<f64> {
        self.variance().map(|v| (v / self.count as f64).sqrt())
    }
}

impl FromIterator<f64> for MeanAccumulator {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        let mut acc = Self::new();
        iter.into_iter().for_each(|x| acc.push(x));
        acc
    }
}

/// Pointwise mean and standard error of equally long observable series.
/// Standard errors are `None` when fewer than two samples are given.
pub fn expected_observable_path<S: AsRef<[f64]>>(
    samples: &[S],
) -> Result<(Vec<f64>, Vec<Option<f64>>)> {
    let Some(first) = samples.first() else {
        return Err(Error::invalid("no samples to average"));
    };
    let len = first.as_ref().len();
    let mut acc = vec![MeanAccumulator::new(); len];
    for (i, s) in samples.iter().enumerate() {
        let s = s.as_ref();
        if s.len() != len {
            return Err(Error::invalid(format!(
                "sample {i} has {} entries, expected {len}",
                s.len()
            )));
        }
        for (a, x) in acc.iter_mut().zip(s) {
            a.push(*x);
        }
    }
    Ok((
        acc.iter().map(MeanAccumulator::mean).collect(),
        acc.iter().map(MeanAccumulator::stderr).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::FemFunction;
    use crate::integrators::{RhsEvaluator, SchemeConfig, Scheme, Stepper};
    use crate::noise::{NoiseIncrement, NoiseKind, NoiseProjector};
    use crate::problems::{linear_additive, sine_gordon_additive};

    #[test]
    fn zero_state_has_zero_energy() {
        let space = FemSpace::new(8).unwrap();
        let h = hamiltonian(&State::zeros(7), &space, &sine_gordon_additive()).unwrap();
        assert_eq!(h, 0.0);
    }

    #[test]
    fn missing_potential_is_rejected() {
        let space = FemSpace::new(4).unwrap();
        let mut p = linear_additive(NoiseKind::Off);
        p.potential = None;
        assert!(matches!(
            hamiltonian(&State::zeros(3), &space, &p),
            Err(Error::InvalidArgument(_))
        ));
    }

    #[test]
    fn indicator_velocity_energy() {
        let space = FemSpace::new(10).unwrap();
        let problem = sine_gordon_additive();
        let (u1, u2) = problem.initial_state(&space).unwrap();
        assert!(u1.iter().all(|x| *x == 0.0));
        let h = hamiltonian(&State { u1, u2 }, &space, &problem).unwrap();
        // L2 projection of the indicator of [1/4, 3/4]; deviation is O(h).
        assert!((h - 0.25).abs() < 0.1 * 0.25, "H = {h}");
        assert!((h - 0.25).abs() > 1e-6);
    }

    #[test]
    fn quadratic_forms_match_modal_sum() {
        let space = FemSpace::new(12).unwrap();
        let problem = linear_additive(NoiseKind::Off);
        let n = space.n_dofs();
        let u1 = FemFunction::from_iterator(n, (0..n).map(|i| (i as f64 * 0.7).sin()));
        let u2 = FemFunction::from_iterator(n, (0..n).map(|i| (i as f64 * 1.3).cos()));
        let state = State { u1, u2 };
        let h = hamiltonian(&state, &space, &problem).unwrap();
        let modal: f64 = modal_energies(&state, &space, n).unwrap().iter().sum();
        assert!((h - modal).abs() < 1e-10 * h.abs().max(1.0), "{h} vs {modal}");
    }

    #[test]
    fn energy_is_invariant_under_free_stm_step() {
        let space = FemSpace::new(16).unwrap();
        let problem = linear_additive(NoiseKind::Off);
        let proj = NoiseProjector::new(&space.mesh, 1, false);
        let rhs = RhsEvaluator::new(&space, &problem, &proj).unwrap();
        let mut stepper = Stepper::new(rhs, SchemeConfig::new(Scheme::Stm, 0.037).unwrap()).unwrap();
        let n = space.n_dofs();
        let state = State {
            u1: FemFunction::from_iterator(n, (0..n).map(|i| 1.0 / (1.0 + i as f64))),
            u2: FemFunction::from_iterator(n, (0..n).map(|i| (i as f64).sin())),
        };
        let h0 = hamiltonian(&state, &space, &problem).unwrap();
        let next = stepper.step(&state, &NoiseIncrement::zero(1, 0.037)).unwrap();
        let h1 = hamiltonian(&next, &space, &problem).unwrap();
        assert!((h1 - h0).abs() <= 1e-12 * h0);
    }

    #[test]
    fn two_sample_statistics() {
        let (mean, se) = expected_observable_path(&[vec![0.0], vec![2.0]]).unwrap();
        assert_eq!(mean, vec![1.0]);
        assert!((se[0].unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn identical_samples_have_zero_stderr() {
        let samples = vec![vec![3.5, -1.0]; 7];
        let (mean, se) = expected_observable_path(&samples).unwrap();
        assert_eq!(mean, vec![3.5, -1.0]);
        assert!(se.iter().all(|s| *s == Some(0.0)));
    }

    #[test]
    fn single_sample_stderr_is_flagged() {
        let (_, se) = expected_observable_path(&[vec![1.0, 2.0]]).unwrap();
        assert_eq!(se, vec![None, None]);
        assert!(expected_observable_path::<Vec<f64>>(&[]).is_err());
        assert!(expected_observable_path(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn merged_batches_match_single_batch() {
        let xs: Vec<f64> = (0..101).map(|i| ((i * 37) % 17) as f64 * 0.3 - 1.1).collect();
        let whole: MeanAccumulator = xs.iter().copied().collect();
        let mut left: MeanAccumulator = xs[..50].iter().copied().collect();
        let right: MeanAccumulator = xs[50..].iter().copied().collect();
        left.merge(&right);
        assert_eq!(left.count(), whole.count());
        assert!((left.mean() - whole.mean()).abs() < 1e-12);
        assert!((left.stderr().unwrap() - whole.stderr().unwrap()).abs() < 1e-12);
    }
}
