// Energy behaviour of the five time integrators on the noise-free
// sine-Gordon equation.

use stochwave::fem::FemSpace;
use stochwave::integrators::{integrate, RhsEvaluator, Scheme, SchemeConfig, State, Stepper};
use stochwave::noise::{NoiseIncrement, NoiseKind, NoiseProjector};
use stochwave::observables::ObservableSet;
use stochwave::problems::sine_gordon_additive;

fn main() -> stochwave::Result<()> {
    let problem = sine_gordon_additive().with_noise(NoiseKind::Off);
    let space = FemSpace::new(10)?;
    let projector = NoiseProjector::new(&space.mesh, 1, false);
    let (k, n_steps) = (0.01, 500);
    let zero = NoiseIncrement::zero(1, k);

    println!("h = 0.1, k = {k}, T = {}", k * n_steps as f64);
    for scheme in Scheme::ALL {
        let rhs = RhsEvaluator::new(&space, &problem, &projector)?;
        let mut stepper = Stepper::new(rhs, SchemeConfig::new(scheme, k)?)?;
        let initial = State::initial(&problem, &space)?;
        let run = integrate(
            &mut stepper,
            initial,
            n_steps,
            std::iter::repeat_n(&zero, n_steps),
            &ObservableSet::hamiltonian_only(),
        );
        match run {
            Ok(traj) => {
                let h: Vec<f64> = traj.records.iter().filter_map(|r| r.hamiltonian).collect();
                let (h0, h1) = (h[0], h[h.len() - 1]);
                println!("{scheme:>4}: H(0) = {h0:.6}, H(T) = {h1:.6}, change {:+.3e}", h1 - h0);
            }
            Err(e) => println!("{scheme:>4}: {e}"),
        }
    }
    Ok(())
}
