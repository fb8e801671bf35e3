// A user-defined problem from expression strings: the φ⁴ wave equation
// `u_tt = u_xx - u³ + Ẇ`, one trajectory per scheme.

use stochwave::experiments::run_single;
use stochwave::integrators::Scheme;
use stochwave::noise::NoiseKind;
use stochwave::observables::ObservableSet;
use stochwave::problems::CustomProblem;

fn main() -> stochwave::Result<()> {
    let problem = CustomProblem {
        f: "-u^3".into(),
        g: "1".into(),
        potential: Some("0.25*u^4".into()),
        u0: "sin(pi*x)".into(),
        v0: "0".into(),
        t_end: 1.0,
    }
    .build(NoiseKind::Power { s: 1.0 })?;

    let observe = ObservableSet { l2_norm_u1: true, ..ObservableSet::hamiltonian_only() };
    for scheme in [Scheme::Stm, Scheme::Cnm, Scheme::Bem] {
        let (traj, prov) = run_single(&problem, scheme, 2f64.powi(-5), 2f64.powi(-7), 1.0, 3, None, &observe)?;
        let last = traj.records.last().expect("recorded");
        println!(
            "{scheme}: J = {}, H(T) = {:.5}, |u(T)| = {:.5}",
            prov.truncation,
            last.hamiltonian.unwrap_or(f64::NAN),
            last.l2_norm_u1.unwrap_or(f64::NAN)
        );
    }
    Ok(())
}
