// Mean-square spatial convergence of the hyperbolic Anderson model for
// smoother and rougher noise.

use stochwave::experiments::{run_spatial_convergence, ConvergenceConfig};
use stochwave::integrators::Scheme;
use stochwave::noise::NoiseKind;
use stochwave::problems::anderson;

fn main() -> stochwave::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(20);
    for s in [0.0, 0.5] {
        let noise = if s == 0.0 { NoiseKind::White } else { NoiseKind::Power { s } };
        let cfg = ConvergenceConfig {
            problem: anderson().with_noise(noise),
            ladder: (2..=5).map(|p| 2f64.powi(-p)).collect(),
            reference: 2f64.powi(-7),
            fixed: 2f64.powi(-8),
            t_end: 1.0,
            samples,
            seed: 1,
            schemes: vec![Scheme::Stm],
            truncation: None,
            record_velocity: false,
            first_sample: 0,
            workers: None,
        };
        let result = run_spatial_convergence(&cfg)?;
        let errors: Vec<String> = result.errors.iter().map(|e| format!("{:.3e}", e.ms_error())).collect();
        let slope = result.convergence_slope(Scheme::Stm)?.slope;
        println!("Q = Λ^-{s}: errors [{}], slope {slope:.3}", errors.join(", "));
    }
    Ok(())
}
