// Growth of the expected energy under additive noise: each scheme's
// fitted drift against ½Tr(PₕQPₕ).
//
// `cargo run --release --example trace_formula -- 2000` uses the full
// sample count.

use stochwave::experiments::{run_trace, TraceConfig};
use stochwave::integrators::Scheme;
use stochwave::noise::NoiseKind;
use stochwave::problems::sine_gordon_additive;

fn main() -> stochwave::Result<()> {
    let samples = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(100);
    let result = run_trace(&TraceConfig {
        problem: sine_gordon_additive().with_noise(NoiseKind::Power { s: 2.0 }),
        h: 0.1,
        k: 0.01,
        t_end: 5.0,
        samples,
        seed: 1,
        schemes: Scheme::ALL.to_vec(),
        truncation: None,
        first_sample: 0,
        workers: None,
    })?;

    let target = result.target_slope.unwrap_or(f64::NAN);
    println!("M = {samples}, J = {}, target slope {target:.4e}", result.provenance.truncation);
    for series in &result.trace {
        let mean = series.mean();
        let fit = series.drift()?;
        println!(
            "{:>4}: E[H] {:.4} -> {:.4e}, slope {:+.4e}, relative error {:+.2e}",
            series.scheme,
            mean[0],
            mean[mean.len() - 1],
            fit.slope,
            (fit.slope - target) / target
        );
    }
    Ok(())
}
