use fluxnoise::disorder::{averaged_spectrum, AveragingMethod, DisorderDistribution};
use fluxnoise::flux::{assemble_flux_noise, band_power, Band, FluxEnsemble, FluxVector, UnitVector};
use fluxnoise::spectrum::log_grid;
use fluxnoise::units::Unit;
use fluxnoise::{Channel, RateModel, SpinEnvironment};

fn flux_total(
    ensemble: &FluxEnsemble,
    dist: &DisorderDistribution,
    env: &SpinEnvironment,
    grid: &[f64],
) -> fluxnoise::Spectrum {
    let par = averaged_spectrum(dist, env, grid, Channel::Parallel, AveragingMethod::ClosedForm).unwrap();
    let perp = averaged_spectrum(dist, env, grid, Channel::Perpendicular, AveragingMethod::ClosedForm).unwrap();
    assemble_flux_noise(ensemble, &par.spectrum, &perp.spectrum, env)
        .unwrap()
        .total
}

#[test]
fn strong_field_empties_the_low_band() {
    let dist = DisorderDistribution::new(RateModel::new(1.0, 5e-6, 4, 30.0).unwrap());
    let grid = log_grid(1e-12, 1e-6, 10, true).unwrap();
    let ensemble = FluxEnsemble::explicit(
        vec![
            FluxVector::new([1e-20, 0.0, 1e-20]).unwrap(),
            FluxVector::new([0.0, 2e-20, 0.0]).unwrap(),
        ],
        UnitVector::z(),
    )
    .unwrap();
    let env = SpinEnvironment::with_reduced_field(0.01, 30.0).unwrap();
    let zero = env.at_field(0.0).unwrap();
    let band = Band::Interval { lo: -1e-6, hi: 1e-6 };
    let on = band_power(&flux_total(&ensemble, &dist, &env, &grid), band).unwrap();
    let off = band_power(&flux_total(&ensemble, &dist, &zero, &grid), band).unwrap();
    assert!(on / off < 1e-6, "retained {}", on / off);
}

#[test]
fn flux_noise_scales_with_coupling_squared() {
    let dist = DisorderDistribution::new(RateModel::new(1e-3, 5e-6, 4, 10.0).unwrap());
    let grid = log_grid(1e-8, 1.0, 5, false).unwrap();
    let env = SpinEnvironment::from_gauss(0.05, 0.0, 2.0, 20.0).unwrap();
    let one = |scale: f64| {
        let e = FluxEnsemble::explicit(
            vec![FluxVector::new([scale, 0.5 * scale, scale]).unwrap()],
            UnitVector::z(),
        )
        .unwrap();
        flux_total(&e, &dist, &env, &grid)
    };
    let a = one(1e-20);
    let b = one(3e-20);
    assert_eq!(a.unit(), Unit::WeberSqPerHz);
    for (x, y) in a.values().iter().zip(b.values()) {
        assert!((y / x - 9.0).abs() < 1e-12);
    }
}
