//! Fit a law to synthetic runs and print its compute-optimal frontier.

use scalaw::{derive_frontier, fit, generate_synthetic, FitConfig, ScalingLaw, SyntheticSpec};

fn main() -> scalaw::Result<()> {
    let truth = ScalingLaw::new(1.27, 0.202, 0.0, 0.909, 0.379)?;
    let runs = generate_synthetic(&SyntheticSpec::log_uniform(truth, 40, (10_000, 100_000_000), (1e7, 1e10), 0.01, 7))?;
    let result = fit(&runs, &FitConfig::default())?;
    let law = result.law;
    println!("fitted: A={:.3} B={:.3} alpha={:.3} beta={:.3}", law.a, law.b, law.alpha, law.beta);

    let frontier = derive_frontier(&law, 6.0)?;
    println!("N* ~ C^{:.3}, D* ~ C^{:.3}, L* = {:.3} C^-{:.3}", frontier.a, frontier.b, frontier.f, frontier.gamma);
    for c in [1e16, 1e17, 1e18, 1e19] {
        let row = frontier.row(c);
        println!("C={c:.0e}  N*={:.3e}  D*={:.3e}  L*={:.3e}", row.optimal_params, row.optimal_tokens, row.optimal_loss);
    }
    Ok(())
}
