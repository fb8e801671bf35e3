// Mean-square temporal convergence on sine-Gordon with space-time white
// noise, against an STM reference on the finest step.

use stochwave::experiments::{run_temporal_convergence, ConvergenceConfig};
use stochwave::integrators::Scheme;
use stochwave::problems::sine_gordon_additive;

fn main() -> stochwave::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(40);
    let cfg = ConvergenceConfig {
        problem: sine_gordon_additive(),
        ladder: (4..=7).map(|p| 2f64.powi(-p)).collect(),
        reference: 2f64.powi(-10),
        fixed: 2f64.powi(-6),
        t_end: 0.5,
        samples,
        seed: 1,
        schemes: vec![Scheme::Stm, Scheme::Sem, Scheme::Cnm],
        truncation: None,
        record_velocity: false,
        first_sample: 0,
        workers: None,
    };
    let result = run_temporal_convergence(&cfg)?;

    println!("{:>10} {:>6} {:>12} {:>10}", "k", "scheme", "error", "stderr");
    for e in &result.errors {
        println!(
            "{:>10.3e} {:>6} {:>12.4e} {:>10.2e}",
            e.resolution,
            e.scheme,
            e.ms_error(),
            e.stderr().unwrap_or(f64::NAN)
        );
    }
    for (scheme, fit) in result.slopes() {
        if let Ok(fit) = fit {
            println!("{scheme}: slope {:.3}", fit.slope);
        }
    }
    Ok(())
}
