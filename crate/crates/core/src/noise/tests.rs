use std::f64::consts::{PI, SQRT_2};

use proptest::prelude::*;

use super::*;
use crate::fem::{l2_project, FemSpace};

/// `Tr(PₕΛ^{-2}Pₕ)` on the 10-cell mesh with the tail-rule truncation
/// (J = 313), computed offline with 40-point Gauss-Legendre loads and a
/// dense inverse of the mass matrix.
const TRACE_POWER2_TEN_CELLS: f64 = 0.011_104_991_861_874_667;

fn empirical_variance(samples: &[f64]) -> f64 {
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
}

#[test]
fn off_gives_zero_increment() {
    let model = NoiseModel::off();
    let mut rng = stream_rng(1, 0, 0);
    let inc = model.sample_increment(0.3, &mut rng).unwrap();
    assert!(inc.spectral_coeffs.iter().all(|c| *c == 0.0));
}

#[test]
fn nonpositive_dt_is_rejected() {
    let model = NoiseModel::white(3).unwrap();
    let mut rng = stream_rng(1, 0, 0);
    assert!(model.sample_increment(0.0, &mut rng).is_err());
}

#[test]
fn white_mode_variances() {
    let model = NoiseModel::white(4).unwrap();
    let n = 10_000;
    let mut per_mode = vec![Vec::with_capacity(n); 4];
    for s in 0..n {
        let mut rng = stream_rng(42, s as u64, 0);
        let inc = model.sample_increment(1.0, &mut rng).unwrap();
        for (j, c) in inc.spectral_coeffs.iter().enumerate() {
            per_mode[j].push(*c);
        }
    }
    for m in &per_mode {
        let v = empirical_variance(m);
        assert!((v - 1.0).abs() < 0.05, "variance {v}");
    }
}

#[test]
fn power_mode_variances() {
    let model = NoiseModel::power(2.0, 3).unwrap();
    let dt = 0.5;
    let n = 10_000;
    let mut per_mode = vec![Vec::with_capacity(n); 3];
    for s in 0..n {
        let mut rng = stream_rng(7, s as u64, 3);
        let inc = model.sample_increment(dt, &mut rng).unwrap();
        for (j, c) in inc.spectral_coeffs.iter().enumerate() {
            per_mode[j].push(*c);
        }
    }
    for (j, m) in per_mode.iter().enumerate() {
        let target = dt * ((j + 1) as f64 * PI).powi(-4);
        let v = empirical_variance(m);
        assert!((v - target).abs() < 0.05 * target, "mode {j}: {v} vs {target}");
    }
}

#[test]
fn tail_rule_truncation_is_minimal() {
    let model = NoiseModel::with_default_truncation(NoiseKind::Power { s: 2.0 }, 9).unwrap();
    assert_eq!(model.truncation(), 313);
    // Brute-force tail check with a long explicit sum.
    let tail = |j: usize| (j + 1..2_000_000).map(|k| (k as f64).powi(-4)).sum::<f64>();
    let zeta4 = PI.powi(4) / 90.0;
    assert!(tail(313) < 1e-8 * zeta4);
    assert!(tail(312) >= 1e-8 * zeta4);

    let white = NoiseModel::with_default_truncation(NoiseKind::White, 31).unwrap();
    assert_eq!(white.truncation(), 31);
    let rough = NoiseModel::with_default_truncation(NoiseKind::Power { s: 0.5 }, 63).unwrap();
    assert_eq!(rough.truncation(), 63);
    assert!(!rough.is_trace_class());

    let slow = NoiseModel::with_default_truncation(NoiseKind::Power { s: 1.0 }, 63).unwrap();
    assert_eq!(slow.truncation(), MAX_DEFAULT_MODES);
    let slow_fine = NoiseModel::with_default_truncation(NoiseKind::Power { s: 1.0 }, 2047).unwrap();
    assert_eq!(slow_fine.truncation(), 2047);
}

#[test]
fn projecting_zero_and_single_modes() {
    let sp = FemSpace::new(16).unwrap();
    let z = project_increment(&sp.mesh, &sp.ops, &NoiseIncrement::zero(5, 0.1));
    assert_eq!(z.amax(), 0.0);
    for j in [1usize, 3, 9, 20] {
        let mut inc = NoiseIncrement::zero(20, 1.0);
        inc.spectral_coeffs[j - 1] = 1.0;
        let c = project_increment(&sp.mesh, &sp.ops, &inc);
        assert!(sp.ops.l2_norm(&c) <= 1.0 + 1e-12);
        let via_quadrature = l2_project(&sp.mesh, &sp.ops, |x| SQRT_2 * (j as f64 * PI * x).sin());
        // Three-point Gauss is not exact for the sine; it is accurate to O(h⁶ j⁶).
        let tol = 1e-6 * (j as f64).powi(6).max(1.0);
        assert!((&c.coeffs - &via_quadrature.coeffs).amax() < tol, "mode {j}");
    }
}

#[test]
fn first_mode_projection_keeps_its_norm() {
    let sp = FemSpace::new(64).unwrap();
    let mut inc = NoiseIncrement::zero(1, 1.0);
    inc.spectral_coeffs[0] = 1.0;
    let c = project_increment(&sp.mesh, &sp.ops, &inc);
    let norm2 = sp.ops.mass().quadratic_form(&c);
    assert!((norm2 - 1.0).abs() < 0.01);
}

#[test]
fn trace_values() {
    let sp = FemSpace::new(10).unwrap();
    assert_eq!(trace_projected(&NoiseModel::off(), &sp.mesh, &sp.ops), 0.0);

    let model = NoiseModel::with_default_truncation(NoiseKind::Power { s: 2.0 }, 9).unwrap();
    let t = trace_projected(&model, &sp.mesh, &sp.ops);
    assert!((t - TRACE_POWER2_TEN_CELLS).abs() < 1e-14, "{t}");

    let model = NoiseModel::power(2.0, 200).unwrap();
    let mut last = 0.0;
    for n in [8, 32, 128, 256] {
        let sp = FemSpace::new(n).unwrap();
        let t = trace_projected(&model, &sp.mesh, &sp.ops);
        assert!(t < 1.0 / 90.0);
        assert!(t > last);
        last = t;
    }
    assert!((last - 1.0 / 90.0).abs() < 1e-6);
}

#[test]
fn nested_meshes_see_the_same_increment() {
    let model = NoiseModel::power(1.0, 24).unwrap();
    let mut rng = stream_rng(9, 0, 0);
    let inc = model.sample_increment(1.0, &mut rng).unwrap();
    let gap = |n: usize| {
        let coarse = FemSpace::new(n).unwrap();
        let fine = FemSpace::new(2 * n).unwrap();
        let pc = project_increment(&coarse.mesh, &coarse.ops, &inc);
        let pf = project_increment(&fine.mesh, &fine.ops, &inc);
        let up = coarse.mesh.prolongate(&pc, &fine.mesh).unwrap();
        fine.ops.l2_norm(&FemFunction::from(&up.coeffs - &pf.coeffs))
    };
    let (g1, g2) = (gap(32), gap(64));
    assert!(g1 / g2 > 3.0, "{g1} {g2}");
}

#[test]
fn coupling_sums_fine_increments() {
    let model = NoiseModel::white(7).unwrap();
    let coupling = PathCoupling::new(123, 4, 0.01, 8).unwrap();
    let raw: Vec<_> = coupling.coupled_increments(&model, 0.01).unwrap().collect();
    assert_eq!(raw.len(), 8);
    for (i, inc) in raw.iter().enumerate() {
        assert_eq!(inc, &coupling.fine_increment(&model, i));
    }
    let pairs: Vec<_> = coupling.coupled_increments(&model, 0.02).unwrap().collect();
    assert_eq!(pairs.len(), 4);
    for (n, inc) in pairs.iter().enumerate() {
        let expected = &raw[2 * n].spectral_coeffs + &raw[2 * n + 1].spectral_coeffs;
        assert_eq!(inc.spectral_coeffs, expected);
        assert!((inc.dt - 0.02).abs() < 1e-15);
    }
    let again: Vec<_> = coupling.coupled_increments(&model, 0.02).unwrap().collect();
    assert_eq!(pairs, again);
    assert_eq!(coarsen_path(&raw, 2).unwrap(), pairs);
    let quads: Vec<_> = coupling.coupled_increments(&model, 0.04).unwrap().collect();
    assert_eq!(coarsen_path(&raw, 4).unwrap(), quads);
    assert!(coarsen_path(&raw, 3).is_err());
}

#[test]
fn coupling_rejects_non_integral_ratio() {
    let model = NoiseModel::white(2).unwrap();
    let coupling = PathCoupling::new(1, 0, 0.01, 8).unwrap();
    assert!(matches!(
        coupling.coupled_increments(&model, 0.015),
        Err(Error::InvalidArgument(_))
    ));
    assert!(coupling.coupled_increments(&model, 0.03).is_err());
}

#[test]
fn streams_differ_between_samples_and_steps() {
    let model = NoiseModel::white(3).unwrap();
    let a = model.sample_increment(1.0, &mut stream_rng(5, 0, 0)).unwrap();
    let b = model.sample_increment(1.0, &mut stream_rng(5, 1, 0)).unwrap();
    let c = model.sample_increment(1.0, &mut stream_rng(5, 0, 1)).unwrap();
    let d = model.sample_increment(1.0, &mut stream_rng(6, 0, 0)).unwrap();
    assert_ne!(a, b);
    assert_ne!(a, c);
    assert_ne!(a, d);
}

#[test]
fn covariance_of_projected_loads() {
    // Small version of the acceptance check: 8 cells, white noise.
    let sp = FemSpace::new(8).unwrap();
    let model = NoiseModel::white(sp.n_dofs()).unwrap();
    let proj = NoiseProjector::new(&sp.mesh, model.truncation(), false);
    let dt = 0.01;
    let n = 4000;
    let dim = sp.n_dofs();
    let mut loads = Vec::with_capacity(n);
    let mut b = DVector::zeros(dim);
    for s in 0..n {
        let inc = model.sample_increment(dt, &mut stream_rng(77, s as u64, 0)).unwrap();
        proj.load_into(&inc, &mut b).unwrap();
        loads.push(b.clone());
    }
    let target = proj.hat_loads() * proj.hat_loads().transpose() * dt;
    for p in 0..dim {
        for q in 0..dim {
            let prods: Vec<f64> = loads.iter().map(|l| l[p] * l[q]).collect();
            let mean = prods.iter().sum::<f64>() / n as f64;
            let se = (empirical_variance(&prods) / n as f64).sqrt();
            assert!((mean - target[(p, q)]).abs() < 4.0 * se, "({p},{q})");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn trace_is_monotone_in_truncation(s in 0.6f64..3.0, j in 1usize..60, n in 2usize..24) {
        let sp = FemSpace::new(n).unwrap();
        let small = NoiseModel::power(s, j).unwrap();
        let large = NoiseModel::power(s, j + 5).unwrap();
        let ts = trace_projected(&small, &sp.mesh, &sp.ops);
        let tl = trace_projected(&large, &sp.mesh, &sp.ops);
        prop_assert!(tl >= ts);
        prop_assert!(ts <= small.partial_trace() * (1.0 + 1e-12));
    }

    #[test]
    fn zero_variance_modes_have_zero_coefficients(seed in any::<u64>()) {
        let model = NoiseModel::off();
        let inc = model.sample_increment(0.1, &mut stream_rng(seed, 0, 0)).unwrap();
        prop_assert!(inc.spectral_coeffs.iter().all(|c| *c == 0.0));
    }
}
