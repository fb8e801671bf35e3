// Discrete spectrum of the linear finite element Laplacian on (0,1).
//
// Prints the lowest eigenvalues of the pencil `S v = λ M v` next to the
// continuous values `(jπ)²`.

use std::f64::consts::PI;

use stochwave::fem::FemSpace;

fn main() -> stochwave::Result<()> {
    let n_cells = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(32);
    let space = FemSpace::new(n_cells)?;
    let lambda = space.decomp.eigenvalues();
    let h = space.mesh.h();

    println!("h = {h}, {} interior nodes", space.n_dofs());
    println!("{:>3} {:>14} {:>14} {:>10}", "j", "lambda_h", "(j pi)^2", "rel err");
    for j in 1..=lambda.len().min(8) {
        let exact = (j as f64 * PI).powi(2);
        let l = lambda[j - 1];
        println!("{j:>3} {l:>14.6} {exact:>14.6} {:>10.2e}", (l - exact) / exact);
    }
    // The top of the spectrum sits near 12/h², far above (π/h)².
    println!("largest: {:.1} (12/h^2 = {:.1})", lambda[lambda.len() - 1], 12.0 / (h * h));
    Ok(())
}
