use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::problems::{
    anderson, linear_additive, linear_additive_with, sine_gordon_additive,
    sine_gordon_multiplicative, InitialField, ScalarFn,
};

fn spatial(problem: ProblemSpec, ladder: Vec<f64>, reference: f64, samples: usize) -> ConvergenceConfig {
    ConvergenceConfig {
        problem,
        ladder,
        reference,
        fixed: 1.0 / 64.0,
        t_end: 0.25,
        samples,
        seed: 7,
        schemes: vec![Scheme::Stm],
        truncation: None,
        record_velocity: false,
        first_sample: 0,
        workers: None,
    }
}

fn small_trace(problem: ProblemSpec, samples: usize) -> TraceConfig {
    TraceConfig {
        problem,
        h: 0.125,
        k: 0.05,
        t_end: 1.0,
        samples,
        seed: 11,
        schemes: vec![Scheme::Stm, Scheme::Sem, Scheme::Cnm],
        truncation: None,
        first_sample: 0,
        workers: None,
    }
}

#[test]
fn fit_of_exact_lines() {
    let xs = [-4.0, -5.0, -6.0, -7.0];
    let fit = fit_slope(&xs, &xs).unwrap();
    assert!((fit.slope - 1.0).abs() < 1e-14 && fit.residual < 1e-14);
    let ys: Vec<f64> = xs.iter().map(|x| 0.5 * x + 3.0).collect();
    let fit = fit_slope(&xs, &ys).unwrap();
    assert!((fit.slope - 0.5).abs() < 1e-14);
    assert!((fit.intercept - 3.0).abs() < 1e-13);
    assert_eq!(fit.points, 4);
}

#[test]
fn fit_tolerates_small_multiplicative_noise() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let ks: Vec<f64> = (4..=9).map(|e| 2f64.powi(-e)).collect();
    let xs: Vec<f64> = ks.iter().map(|k| k.log2()).collect();
    let ys: Vec<f64> = ks
        .iter()
        .map(|k| (k.sqrt() * (1.0 + 0.01 * rng.random_range(-1.0..1.0))).log2())
        .collect();
    let fit = fit_slope(&xs, &ys).unwrap();
    assert!((fit.slope - 0.5).abs() < 0.03, "{}", fit.slope);
}

#[test]
fn fit_rejects_degenerate_input() {
    assert!(fit_slope(&[1.0, 2.0], &[1.0, 2.0]).is_err());
    assert!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, f64::NAN, 2.0]).is_err());
    assert!(fit_slope(&[1.0, 1.0, 1.0], &[1.0, 2.0, 3.0]).is_err());
    assert!(fit_slope(&[1.0, 2.0, 3.0], &[1.0, 2.0]).is_err());
}

#[test]
fn ladder_at_the_reference_has_zero_error() {
    let cfg = spatial(anderson(), vec![1.0 / 16.0], 1.0 / 16.0, 3);
    let r = run_spatial_convergence(&cfg).unwrap();
    assert_eq!(r.errors[0].ms_error(), 0.0);
    assert_eq!(r.errors[0].stderr(), Some(0.0));

    let cfg = ConvergenceConfig {
        fixed: 1.0 / 16.0,
        reference: 1.0 / 64.0,
        ladder: vec![1.0 / 64.0],
        ..spatial(sine_gordon_additive(), vec![], 0.0, 3)
    };
    let r = run_temporal_convergence(&cfg).unwrap();
    assert_eq!(r.errors[0].ms_error(), 0.0);
}

#[test]
fn invalid_ladders_are_rejected() {
    let nested = spatial(anderson(), vec![1.0 / 3.0], 1.0 / 8.0, 1);
    assert!(matches!(run_spatial_convergence(&nested), Err(Error::InvalidArgument(_))));
    let coarse_ref = spatial(anderson(), vec![1.0 / 8.0], 1.0 / 4.0, 1);
    assert!(run_spatial_convergence(&coarse_ref).is_err());
    let no_samples = spatial(anderson(), vec![1.0 / 4.0], 1.0 / 8.0, 0);
    assert!(run_spatial_convergence(&no_samples).is_err());
    let temporal = ConvergenceConfig {
        fixed: 1.0 / 8.0,
        reference: 1.0 / 64.0,
        ladder: vec![3.0 / 64.0],
        ..spatial(sine_gordon_additive(), vec![], 0.0, 1)
    };
    assert!(run_temporal_convergence(&temporal).is_err());
}

#[test]
fn smooth_deterministic_data_converge_at_second_order_in_space() {
    let u0 = InitialField::ritz(
        ScalarFn::new("sin(pi x)", |x| (PI * x).sin()),
        ScalarFn::new("pi cos(pi x)", |x| PI * (PI * x).cos()),
    );
    let problem = linear_additive_with(NoiseKind::Off, u0, InitialField::zero());
    let cfg = spatial(problem, vec![0.25, 0.125, 1.0 / 16.0], 1.0 / 128.0, 1);
    let r = run_spatial_convergence(&cfg).unwrap();
    let fit = r.convergence_slope(Scheme::Stm).unwrap();
    assert!((fit.slope - 2.0).abs() < 0.15, "{}", fit.slope);
}

#[test]
fn trace_requires_additive_noise() {
    let cfg = small_trace(sine_gordon_multiplicative(), 2);
    assert!(matches!(run_trace(&cfg), Err(Error::InvalidArgument(_))));
}

#[test]
fn energy_is_flat_without_noise() {
    let v0 = InitialField::l2(ScalarFn::new("sin(2 pi x)", |x| (2.0 * PI * x).sin()));
    let problem = linear_additive_with(NoiseKind::Off, InitialField::zero(), v0);
    let r = run_trace(&small_trace(problem, 2)).unwrap();
    assert_eq!(r.target_slope, Some(0.0));
    for (scheme, fit) in r.slopes() {
        let slope = fit.unwrap().slope;
        match scheme {
            Scheme::Stm | Scheme::Cnm => assert!(slope.abs() < 1e-10, "{scheme}: {slope}"),
            _ => assert!(slope < 0.0, "{scheme}: {slope}"),
        }
    }
}

#[test]
fn results_do_not_depend_on_worker_count() {
    let mut cfg = small_trace(sine_gordon_additive().with_noise(NoiseKind::Power { s: 1.0 }), 19);
    cfg.workers = Some(1);
    let one = run_trace(&cfg).unwrap();
    cfg.workers = Some(3);
    let three = run_trace(&cfg).unwrap();
    assert_eq!(one, three);
}

#[test]
fn split_batches_merge_to_the_full_run() {
    let cfg = spatial(anderson(), vec![0.25, 0.125], 1.0 / 16.0, 12);
    let whole = run_spatial_convergence(&cfg).unwrap();
    let mut first = run_spatial_convergence(&ConvergenceConfig { samples: 5, ..cfg.clone() }).unwrap();
    let second =
        run_spatial_convergence(&ConvergenceConfig { samples: 7, first_sample: 5, ..cfg.clone() }).unwrap();
    first.merge(&second).unwrap();
    assert_eq!(first.provenance.samples, 12);
    for (a, b) in first.errors.iter().zip(&whole.errors) {
        assert!((a.ms_error() - b.ms_error()).abs() < 1e-12);
        assert!((a.stderr().unwrap() - b.stderr().unwrap()).abs() < 1e-12);
    }
    let trace = run_trace(&small_trace(sine_gordon_additive(), 2)).unwrap();
    assert!(first.merge(&trace).is_err());
}

#[test]
fn diverged_entries_are_left_out_of_the_fit() {
    let mut r = run_temporal_convergence(&ConvergenceConfig {
        fixed: 1.0 / 8.0,
        reference: 1.0 / 128.0,
        ladder: vec![1.0 / 4.0, 1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0],
        samples: 4,
        ..spatial(linear_additive(NoiseKind::White), vec![], 0.0, 4)
    })
    .unwrap();
    let before = r.convergence_slope(Scheme::Stm).unwrap();
    assert_eq!(before.points, 4);
    r.errors[0].diverged = 1;
    assert!(r.errors[0].ms_error().is_infinite());
    assert_eq!(r.errors[0].stderr(), None);
    assert_eq!(r.convergence_slope(Scheme::Stm).unwrap().points, 3);
    r.errors[1].diverged = 1;
    assert!(r.convergence_slope(Scheme::Stm).is_err());
}

#[test]
fn velocity_errors_are_optional() {
    let mut cfg = spatial(anderson(), vec![0.25], 0.125, 2);
    let r = run_spatial_convergence(&cfg).unwrap();
    assert!(r.errors[0].velocity_error().is_none());
    cfg.record_velocity = true;
    let r = run_spatial_convergence(&cfg).unwrap();
    assert!(r.errors[0].velocity_error().unwrap() > 0.0);
}

#[test]
fn single_run_records_requested_observables() {
    let observe = ObservableSet {
        hamiltonian: true,
        l2_norm_u1: true,
        ..ObservableSet::none()
    };
    let (traj, prov) =
        run_single(&sine_gordon_additive(), Scheme::Stm, 0.125, 0.1, 1.0, 5, None, &observe).unwrap();
    assert_eq!(traj.records.len(), 11);
    assert!(traj.records.iter().all(|r| r.hamiltonian.is_some() && r.l2_norm_u1.is_some()));
    assert_eq!(prov.truncation, 7);
    assert!(run_single(&sine_gordon_additive(), Scheme::Stm, 0.3, 0.1, 1.0, 5, None, &observe).is_err());
    assert!(run_single(&sine_gordon_additive(), Scheme::Stm, 0.125, 0.3, 1.0, 5, None, &observe).is_err());
}
