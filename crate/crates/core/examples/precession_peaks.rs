//! Single-spin noise in a field: the longitudinal channel is a Lorentzian at
//! zero frequency and the transverse channel has peaks at ±b, the positive
//! one enhanced by detailed balance.

use fluxnoise::spectrum::linear_grid;
use fluxnoise::spin::{single_spin_noise_parallel, single_spin_noise_perpendicular};
use fluxnoise::SpinEnvironment;

fn main() -> fluxnoise::Result<()> {
    let b = 2.0;
    let gamma = 0.2;
    let env = SpinEnvironment::with_reduced_field(0.01, b)?;
    let grid = linear_grid(-4.0, 4.0, 2001)?;
    let par: Vec<f64> = grid
        .iter()
        .map(|&x| single_spin_noise_parallel(&env, gamma, x))
        .collect::<Result<_, _>>()?;
    let perp: Vec<f64> = grid
        .iter()
        .map(|&x| single_spin_noise_perpendicular(&env, gamma, x))
        .collect::<Result<_, _>>()?;

    let argmax = |v: &[f64], keep: &dyn Fn(f64) -> bool| {
        (0..v.len())
            .filter(|&i| keep(grid[i]))
            .max_by(|&i, &j| v[i].total_cmp(&v[j]))
            .unwrap()
    };
    let i = argmax(&par, &|_| true);
    println!("parallel peak at x = {:+.3}, S = {:.4e}", grid[i], par[i]);
    let hi = argmax(&perp, &|x| x > 0.0);
    let lo = argmax(&perp, &|x| x < 0.0);
    println!("perpendicular peaks at x = {:+.3} and {:+.3}", grid[hi], grid[lo]);
    println!(
        "peak ratio S(+b)/S(-b) = {:.4}, e^b = {:.4}",
        perp[hi] / perp[lo],
        b.exp()
    );
    Ok(())
}
