//! Local exponent `alpha` (with `S ~ 1/x^alpha`) of the disorder-averaged
//! longitudinal noise at zero field and in a field. The broad rate
//! distribution gives `alpha` near 1 at zero field; the field pins every rate at the direct-process value and
//! leaves a single Lorentzian.

use fluxnoise::disorder::{averaged_spectrum, AveragingMethod, DisorderDistribution};
use fluxnoise::spectrum::{local_log_slope, log_grid};
use fluxnoise::{Channel, RateModel, SpinEnvironment};

fn main() -> fluxnoise::Result<()> {
    let dist = DisorderDistribution::new(RateModel::new(1.0, 5e-6, 4, 30.0)?);
    let grid = log_grid(1e-12, 10.0, 10, false)?;
    for b in [0.0, 10.0, 40.0] {
        let env = SpinEnvironment::with_reduced_field(0.01, b)?;
        let s = averaged_spectrum(&dist, &env, &grid, Channel::Parallel, AveragingMethod::ClosedForm)?.spectrum;
        println!("b = {b}");
        for x in [1e-10, 1e-7, 1e-4, 1e-2, 1.0] {
            println!(
                "  x = {x:8.1e}  S = {:10.4e}  alpha = {:+.3}",
                interpolate(&s, x),
                local_log_slope(&s, x)?
            );
        }
    }
    Ok(())
}

fn interpolate(s: &fluxnoise::Spectrum, x: f64) -> f64 {
    let i = s.grid().partition_point(|&g| g < x).clamp(1, s.len() - 1);
    let (x0, x1) = (s.grid()[i - 1].ln(), s.grid()[i].ln());
    let (y0, y1) = (s.values()[i - 1].ln(), s.values()[i].ln());
    (y0 + (y1 - y0) * (x.ln() - x0) / (x1 - x0)).exp()
}
