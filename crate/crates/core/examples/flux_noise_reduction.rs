//! Flux noise of a random ensemble of surface spins at 10 mK, with and
//! without a 100 G in-plane field, and how much of the low-frequency power
//! the field removes.

use fluxnoise::disorder::{averaged_spectrum, AveragingMethod, DisorderDistribution};
use fluxnoise::flux::{
    assemble_flux_noise, band_report, low_band_reduction, EnsembleSpec, FluxEnsemble, FluxNoise, Magnitude,
    Orientation, SpinCount, UnitVector,
};
use fluxnoise::spectrum::log_grid;
use fluxnoise::{Channel, RateModel, SpinEnvironment};

fn main() -> fluxnoise::Result<()> {
    let spec = EnsembleSpec {
        count: SpinCount::Count(2000),
        magnitude: Magnitude::Constant(1e-20),
        orientation: Orientation::Isotropic3d,
        seed: 11,
    };
    let ensemble = FluxEnsemble::generate(&spec, UnitVector::normalize([1.0, 0.0, 0.0])?)?;
    let (w_par, w_perp) = ensemble.total_weights();
    println!(
        "{} spins, parallel weight share {:.3}",
        ensemble.len(),
        w_par / (w_par + w_perp)
    );

    let dist = DisorderDistribution::new(RateModel::new(1e-3, 5e-6, 4, 10.0)?);
    let grid = log_grid(1e-10, 10.0, 40, true)?;
    let noise = |env: &SpinEnvironment| -> fluxnoise::Result<FluxNoise> {
        let par = averaged_spectrum(&dist, env, &grid, Channel::Parallel, AveragingMethod::ClosedForm)?;
        let perp = averaged_spectrum(&dist, env, &grid, Channel::Perpendicular, AveragingMethod::ClosedForm)?;
        assemble_flux_noise(&ensemble, &par.spectrum, &perp.spectrum, env)
    };

    let env = SpinEnvironment::from_gauss(0.01, 0.0, 2.0, 100.0)?;
    let zero = env.at_field(0.0)?;
    let at_field = noise(&env)?;
    let baseline = noise(&zero)?;
    let b = env.reduced_field();
    let report = band_report(&at_field.total, &baseline.total, b / 10.0, b, b / 2.0)?;
    let shortcut = low_band_reduction(&env, w_par / (w_par + w_perp))?;
    println!("b = {b:.4}");
    println!(
        "low-band power retained: {:.4} (shortcut {:.4})",
        report.retained_fraction, shortcut.retained_fraction
    );

    let in_phi0 = baseline.in_micro_phi0(&zero)?;
    let i = in_phi0.total.grid().partition_point(|&x| x < 1e-6);
    println!(
        "zero-field noise at x = {:.2e}: {:.4e} (uPhi0)^2/Hz",
        in_phi0.total.grid()[i],
        in_phi0.total.values()[i]
    );
    Ok(())
}
