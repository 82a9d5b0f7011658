//! Drive the Bloch equation weakly, extract the linear susceptibility and
//! turn it into a noise spectrum through the fluctuation-dissipation
//! theorem. The result is compared with the closed-form single-spin spectra.

use fluxnoise::bloch::{bloch_response, BlochSettings, Drive};
use fluxnoise::spin::{single_spin_noise_parallel, single_spin_noise_perpendicular, RelaxationRates};
use fluxnoise::SpinEnvironment;

fn main() -> fluxnoise::Result<()> {
    let env = SpinEnvironment::with_reduced_field(0.01, 1.0)?;
    let rates = RelaxationRates {
        parallel: 0.1,
        perpendicular: 0.05,
    };
    let settings = BlochSettings::default();
    println!(
        "{:>6} {:>12} {:>12} {:>12} {:>12}",
        "x", "S_par ode", "S_par exact", "S_perp ode", "S_perp exact"
    );
    for x in [-1.5, -1.0, -0.3, 0.05, 0.3, 1.0, 1.5] {
        let par = bloch_response(&env, rates, x, Drive::Longitudinal, &settings)?;
        let perp = bloch_response(&env, rates, x, Drive::Transverse, &settings)?;
        println!(
            "{x:>6.2} {:>12.5e} {:>12.5e} {:>12.5e} {:>12.5e}",
            par.noise,
            single_spin_noise_parallel(&env, rates.parallel, x)?,
            perp.noise,
            single_spin_noise_perpendicular(&env, rates.perpendicular, x)?,
        );
    }
    Ok(())
}
