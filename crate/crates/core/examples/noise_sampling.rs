// Karhunen-Loève sampling of a Q-Wiener increment and its projection onto
// the finite element space.

use stochwave::fem::{FemOperators, Mesh1D};
use stochwave::noise::{project_increment, stream_rng, trace_projected, NoiseKind, NoiseModel};
use stochwave::observables::MeanAccumulator;

fn main() -> stochwave::Result<()> {
    let mesh = Mesh1D::new(10)?;
    let ops = FemOperators::assemble(&mesh);
    let dt = 0.01;

    for kind in [NoiseKind::White, NoiseKind::Power { s: 1.0 }, NoiseKind::Power { s: 2.0 }] {
        let model = NoiseModel::with_default_truncation(kind, mesh.n_dofs())?;
        let target = trace_projected(&model, &mesh, &ops);

        // E‖PₕΔW‖² = dt·Tr(PₕQPₕ).
        let mut acc = MeanAccumulator::new();
        for sample in 0..4000 {
            let inc = model.sample_increment(dt, &mut stream_rng(42, sample, 0))?;
            let p = project_increment(&mesh, &ops, &inc);
            acc.push(ops.l2_norm(&p).powi(2) / dt);
        }
        println!(
            "{kind:?}: J = {}, Tr(PQP) = {target:.5e}, sampled {:.5e} ± {:.1e}",
            model.truncation(),
            acc.mean(),
            acc.stderr().unwrap_or(0.0)
        );
    }
    Ok(())
}
