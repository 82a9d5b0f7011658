//! Synthesize noisy field-dependent spectra from a known parameter set, then
//! fit them back for each candidate direct-process exponent.

use fluxnoise::fit::{fit, synthesize, FitParameters, FitProblem, Selection};
use fluxnoise::spectrum::log_grid;
use fluxnoise::SpinEnvironment;

fn main() -> fluxnoise::Result<()> {
    let truth = FitParameters {
        gamma0: 0.5,
        gamma_tilde: 2e-5,
        lambda_max: 25.0,
        ..FitParameters::default()
    };
    let envs = [0.0, 10.0, 20.0, 30.0]
        .iter()
        .map(|&b| SpinEnvironment::with_reduced_field(0.01, b))
        .collect::<fluxnoise::Result<Vec<_>>>()?;
    let grid = log_grid(1e-10, 10.0, 8, false)?;
    let observations = synthesize(&truth, 4, &envs, &grid, 0.05, 5)?;
    let result = fit(&FitProblem::new(observations), 1)?;
    for c in &result.candidates {
        let p = &c.parameters;
        println!(
            "n = {}: residual {:.4e}  gamma0 {:.3e}  gamma_tilde {:.3e}  lambda_max {:.2}",
            c.n, c.residual_norm, p.gamma0, p.gamma_tilde, p.lambda_max
        );
    }
    match result.selection {
        Selection::Selected(n) => println!("selected n = {n}"),
        Selection::Indeterminate => println!("exponent indeterminate"),
    }
    Ok(())
}
