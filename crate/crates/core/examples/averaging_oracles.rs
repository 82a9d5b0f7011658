//! Three independent disorder averages of the longitudinal noise: the closed
//! form, adaptive quadrature over the rate density and seeded Monte Carlo.

use fluxnoise::disorder::{
    averaged_noise_parallel_closed, averaged_noise_parallel_mc, averaged_noise_parallel_quadrature,
    DisorderDistribution,
};
use fluxnoise::{RateModel, SpinEnvironment};

fn main() -> fluxnoise::Result<()> {
    let dist = DisorderDistribution::new(RateModel::new(1.0, 5e-6, 4, 30.0)?);
    for b in [0.0, 10.0] {
        let env = SpinEnvironment::with_reduced_field(0.01, b)?;
        println!("b = {b}");
        for x in [1e-9, 1e-5, 1e-2, 1.0] {
            let closed = averaged_noise_parallel_closed(&dist, &env, x)?;
            let quad = averaged_noise_parallel_quadrature(&dist, &env, x, 1e-10)?;
            let mc = averaged_noise_parallel_mc(&dist, &env, x, 200_000, 7)?;
            println!(
                "  x = {x:7.1e}  closed {closed:.6e}  quadrature {quad:.6e}  monte carlo {:.6e} ± {:.1e}",
                mc.mean, mc.std_error
            );
        }
    }
    Ok(())
}
