//! Disorder average of the single-spin spectra over `λ ~ U[0, λ_max]`.
//!
//! The longitudinal channel has an exact closed form. Two independent
//! oracles back it up: seeded Monte Carlo over `λ` and deterministic
//! quadrature against the induced rate density `p(Γ)`. The transverse
//! channel has no closed form and is averaged by adaptive quadrature.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::integrate_breakpoints;
use crate::rng;
use crate::spectrum::{Channel, Spectrum};
use crate::spin::{
    chi_parallel_static, chi_perpendicular_static, lorentzian_parallel, lorentzian_perpendicular, quantum_prefactor,
    RateModel, SpinEnvironment,
};
use crate::units::Unit;

/// Default relative tolerance of the transverse average.
pub const DEFAULT_TOLERANCE: f64 = 1e-8;
const PANEL_BUDGET: usize = 20_000;

/// How a disorder average was (or should be) computed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum AveragingMethod {
    ClosedForm,
    MonteCarlo { samples: u64, seed: u64 },
    Quadrature { tolerance: f64 },
}

/// Relaxation rates induced by a uniform `λ`: the density is
/// `p(Γ) = 1/(λ_max (Γ - Γ_B))` on `[Γ_min, Γ_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DisorderDistribution {
    model: RateModel,
}

impl DisorderDistribution {
    pub fn new(model: RateModel) -> Self {
        Self { model }
    }

    pub fn rate_model(&self) -> &RateModel {
        &self.model
    }

    /// Rate density `p(Γ)`; zero outside `[Γ_min, Γ_max]`.
    pub fn density(&self, env: &SpinEnvironment, gamma: f64) -> f64 {
        let m = &self.model;
        if gamma < m.gamma_min(env) || gamma > m.gamma_max(env) {
            return 0.0;
        }
        density_excess(m.lambda_max(), gamma - m.gamma_b(env))
    }

    /// `∫ p(Γ) dΓ` by quadrature (should be 1).
    pub fn normalization(&self, tolerance: f64) -> Result<f64> {
        let lm = self.model.lambda_max();
        let q = integrate_breakpoints(
            |u| density_excess(lm, u),
            &self.excess_breakpoints(),
            tolerance,
            PANEL_BUDGET,
        )?;
        Ok(q.value)
    }

    /// Decade-spaced breakpoints for `u = Γ - Γ_B` on `[Γ₀e^(-λ_max), Γ₀]`.
    fn excess_breakpoints(&self) -> Vec<f64> {
        let g0 = self.model.gamma0();
        let lo = g0 * (-self.model.lambda_max()).exp();
        let mut points = vec![lo];
        let mut u = lo * 10.0;
        while u < g0 * (1.0 - 1e-12) {
            points.push(u);
            u *= 10.0;
        }
        points.push(g0);
        points
    }

    /// Unit-spaced breakpoints on `[0, λ_max]`.
    fn lambda_breakpoints(&self) -> Vec<f64> {
        let lm = self.model.lambda_max();
        let mut points: Vec<f64> = (0..).map(f64::from).take_while(|&l| l < lm).collect();
        points.push(lm);
        points
    }
}

#[inline]
fn density_excess(lambda_max: f64, excess: f64) -> f64 {
    1.0 / (lambda_max * excess)
}

/// Disorder average of `Γ/(x² + Γ²)`, i.e. the curly bracket of the
/// averaged longitudinal spectrum. Even in `x`.
fn averaged_lorentzian(model: &RateModel, env: &SpinEnvironment, x: f64) -> f64 {
    let lm = model.lambda_max();
    let g0 = model.gamma0();
    let gb = model.gamma_b(env);
    let gmax = model.gamma_max(env);
    let gmin = model.gamma_min(env);
    let spread = model.gamma_spread();
    let x = x.abs();
    let x2 = x * x;

    // [atan(Γmax/x) - atan(Γmin/x)]/x = atan(z)/x with z = x(Γmax-Γmin)/(x² + ΓmaxΓmin)
    let denom = x2 + gmax * gmin;
    let z = x * spread / denom;
    let arctan_term = if z.abs() < 1e-8 {
        spread / denom * (1.0 - z * z / 3.0)
    } else {
        z.atan() / x
    };
    let weight = if gb == 0.0 { 1.0 } else { x2 / (x2 + gb * gb) };
    let disordered = weight * arctan_term / lm;

    if gb == 0.0 {
        return disordered;
    }
    // 1 - ln((Γmax² + x²)/(Γmin² + x²))/(2λ_max) = ln(R)/(2λ_max), with
    // R - 1 expanded so that no term cancels.
    let eps = gb * lm.exp() / g0;
    let delta = gb / g0;
    let r_minus_1 = (g0 * gb * lm.exp_m1() * (2.0 + eps + delta) + x2 * (2.0 * lm).exp_m1()) / (gmax * gmax + x2);
    let bracket = if r_minus_1.is_finite() {
        r_minus_1.ln_1p() / (2.0 * lm)
    } else {
        1.0 - ((gmax * gmax + x2).ln() - (gmin * gmin + x2).ln()) / (2.0 * lm)
    };
    disordered + bracket * gb / (x2 + gb * gb)
}

/// Closed-form disorder-averaged longitudinal noise.
pub fn averaged_noise_parallel_closed(dist: &DisorderDistribution, env: &SpinEnvironment, x: f64) -> Result<f64> {
    check_frequency(x)?;
    let chi = chi_parallel_static(env);
    Ok(2.0 * quantum_prefactor(x) * chi * averaged_lorentzian(&dist.model, env, x))
}

/// Longitudinal average by quadrature of the single-spin spectrum against
/// `p(Γ)`, integrating in `u = Γ - Γ_B` on decade panels.
pub fn averaged_noise_parallel_quadrature(
    dist: &DisorderDistribution,
    env: &SpinEnvironment,
    x: f64,
    tolerance: f64,
) -> Result<f64> {
    check_frequency(x)?;
    let gb = dist.model.gamma_b(env);
    let lm = dist.model.lambda_max();
    let q = integrate_breakpoints(
        |u| lorentzian_parallel(gb + u, x) * density_excess(lm, u),
        &dist.excess_breakpoints(),
        tolerance,
        PANEL_BUDGET,
    )?;
    Ok(2.0 * quantum_prefactor(x) * chi_parallel_static(env) * q.value)
}

/// Transverse average by adaptive quadrature over `λ`. `Γ⊥(λ)` follows the
/// model's transverse policy from the same `λ` as `Γ∥`.
pub fn averaged_noise_perpendicular(
    dist: &DisorderDistribution,
    env: &SpinEnvironment,
    x: f64,
    tolerance: f64,
) -> Result<f64> {
    check_frequency(x)?;
    if !(tolerance > 0.0) {
        return Err(Error::invalid(
            "tolerance",
            format!("must be positive, got {tolerance}"),
        ));
    }
    let m = dist.model;
    let b = env.reduced_field();
    let q = integrate_breakpoints(
        |l| lorentzian_perpendicular(b, m.rates_unchecked(env, l).perpendicular, x),
        &dist.lambda_breakpoints(),
        tolerance,
        PANEL_BUDGET,
    )?;
    Ok(quantum_prefactor(x) * chi_perpendicular_static(env) * q.value / m.lambda_max())
}

/// Monte Carlo estimate with its standard error.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Monte Carlo disorder averages of both channels at one frequency from the
/// same draws of `λ`. The stream is keyed by `(seed, |x|)`, so `±x` see the
/// same spins and the result does not depend on grid layout.
pub fn averaged_noise_mc(
    dist: &DisorderDistribution,
    env: &SpinEnvironment,
    x: f64,
    samples: u64,
    seed: u64,
) -> Result<(McEstimate, McEstimate)> {
    check_frequency(x)?;
    if samples == 0 {
        return Err(Error::invalid("samples", "need at least one sample"));
    }
    let m = dist.model;
    let b = env.reduced_field();
    let mut stream = rng::stream(seed, x.abs().to_bits());
    let mut par = Welford::default();
    let mut perp = Welford::default();
    for _ in 0..samples {
        let lambda = m.lambda_max() * stream.random::<f64>();
        let rates = m.rates_unchecked(env, lambda);
        par.push(lorentzian_parallel(rates.parallel, x));
        perp.push(lorentzian_perpendicular(b, rates.perpendicular, x));
    }
    let p = quantum_prefactor(x);
    let scale_par = 2.0 * p * chi_parallel_static(env);
    let scale_perp = p * chi_perpendicular_static(env);
    Ok((par.estimate(scale_par), perp.estimate(scale_perp)))
}

/// Longitudinal Monte Carlo average; see [`averaged_noise_mc`].
pub fn averaged_noise_parallel_mc(
    dist: &DisorderDistribution,
    env: &SpinEnvironment,
    x: f64,
    samples: u64,
    seed: u64,
) -> Result<McEstimate> {
    averaged_noise_mc(dist, env, x, samples, seed).map(|(p, _)| p)
}

#[derive(Default)]
struct Welford {
    n: u64,
    mean: f64,
    m2: f64,
}

impl Welford {
    fn push(&mut self, v: f64) {
        self.n += 1;
        let d = v - self.mean;
        self.mean += d / self.n as f64;
        self.m2 += d * (v - self.mean);
    }

    fn estimate(&self, scale: f64) -> McEstimate {
        let var = if self.n > 1 { self.m2 / (self.n - 1) as f64 } else { 0.0 };
        McEstimate {
            mean: scale * self.mean,
            std_error: scale * (var / self.n as f64).sqrt(),
        }
    }
}

fn check_frequency(x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid("x", format!("frequency must be finite, got {x}")))
    }
}

/// A disorder-averaged spectrum together with the method that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct AveragedSpectrum {
    pub spectrum: Spectrum,
    pub method: AveragingMethod,
    /// Per-point standard errors, for Monte Carlo only.
    pub std_errors: Option<Vec<f64>>,
}

/// Evaluate one channel on a grid. The transverse channel has no closed
/// form; `ClosedForm` falls back to quadrature at [`DEFAULT_TOLERANCE`] and
/// the returned method says so.
pub fn averaged_spectrum(
    dist: &DisorderDistribution,
    env: &SpinEnvironment,
    grid: &[f64],
    channel: Channel,
    method: AveragingMethod,
) -> Result<AveragedSpectrum> {
    let method = match (channel, method) {
        (Channel::Total, _) => {
            return Err(Error::invalid(
                "channel",
                "averaged spectra are per channel (parallel or perpendicular)",
            ))
        }
        (Channel::Perpendicular, AveragingMethod::ClosedForm) => AveragingMethod::Quadrature {
            tolerance: DEFAULT_TOLERANCE,
        },
        (_, m) => m,
    };
    let points: Vec<(f64, Option<f64>)> = grid
        .par_iter()
        .map(|&x| -> Result<(f64, Option<f64>)> {
            match (channel, method) {
                (Channel::Parallel, AveragingMethod::ClosedForm) => {
                    Ok((averaged_noise_parallel_closed(dist, env, x)?, None))
                }
                (Channel::Parallel, AveragingMethod::Quadrature { tolerance }) => {
                    Ok((averaged_noise_parallel_quadrature(dist, env, x, tolerance)?, None))
                }
                (Channel::Perpendicular, AveragingMethod::Quadrature { tolerance }) => {
                    Ok((averaged_noise_perpendicular(dist, env, x, tolerance)?, None))
                }
                (_, AveragingMethod::MonteCarlo { samples, seed }) => {
                    let (par, perp) = averaged_noise_mc(dist, env, x, samples, seed)?;
                    let e = if channel == Channel::Parallel { par } else { perp };
                    Ok((e.mean, Some(e.std_error)))
                }
                _ => unreachable!("method resolved above"),
            }
        })
        .collect::<Result<_>>()?;
    let values = points.iter().map(|p| p.0).collect();
    let std_errors = matches!(method, AveragingMethod::MonteCarlo { .. })
        .then(|| points.iter().map(|p| p.1.unwrap_or(0.0)).collect());
    Ok(AveragedSpectrum {
        spectrum: Spectrum::new(grid.to_vec(), values, channel, Unit::ReducedNoise)?,
        method,
        std_errors,
    })
}
