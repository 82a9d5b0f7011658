//! Time-domain Bloch-equation oracle.
//!
//! A spin relaxing toward its instantaneous equilibrium is driven by a weak
//! sinusoidal field; the steady-state response gives the dynamical
//! susceptibility, and the fluctuation-dissipation relation turns its
//! imaginary part into a noise spectrum. This route shares no code with the
//! closed-form Lorentzians and serves as their independent check.
//!
//! The applied field is taken along ẑ; the state is the deviation
//! `d = s - s_eq ẑ`, which keeps the small response free of cancellation.

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::spectrum::{Channel, Spectrum};
use crate::spin::{
    chi_parallel_static, chi_perpendicular_static, equilibrium_polarization, quantum_prefactor, RelaxationRates,
    SpinEnvironment,
};
use crate::units::Unit;

/// Which component is driven and measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Drive {
    /// Drive and read out along the applied field.
    Longitudinal,
    /// Drive and read out along x̂, perpendicular to the field.
    Transverse,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochSettings {
    /// Drive amplitude in reduced field units.
    pub amplitude: f64,
    /// Step size as a fraction of the fastest rate's inverse; at most 0.1.
    pub step_fraction: f64,
    /// Transient discarded before measuring, in units of the slowest decay time.
    pub transient_decays: f64,
    /// Number of drive periods projected onto.
    pub measure_periods: usize,
    /// Largest accepted change of the state over one period, relative to the
    /// response amplitude.
    pub drift_tolerance: f64,
    /// Hard cap on the number of integration steps.
    pub max_steps: u64,
}

impl Default for BlochSettings {
    fn default() -> Self {
        Self {
            amplitude: 1e-4,
            step_fraction: 0.05,
            transient_decays: 25.0,
            measure_periods: 20,
            drift_tolerance: 1e-8,
            max_steps: 400_000_000,
        }
    }
}

impl BlochSettings {
    fn validate(&self) -> Result<()> {
        if !(self.amplitude > 0.0 && self.amplitude.is_finite()) {
            return Err(Error::invalid("amplitude", "must be positive"));
        }
        if !(self.step_fraction > 0.0 && self.step_fraction <= 0.1) {
            return Err(Error::invalid("step_fraction", "must lie in (0, 0.1]"));
        }
        if !(self.transient_decays >= 25.0) {
            return Err(Error::invalid(
                "transient_decays",
                "at least 25 decay times are required",
            ));
        }
        if self.measure_periods < 20 {
            return Err(Error::invalid("measure_periods", "at least 20 periods are required"));
        }
        Ok(())
    }
}

/// Steady-state response at one drive frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochResponse {
    pub susceptibility: Complex64,
    /// `2 p(x) Im χ / x`, in `ħ/(k_B T)`.
    pub noise: f64,
    /// Relative state change per period over the measurement window.
    pub drift: f64,
    pub steps: u64,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Dynamics {
    pub b: f64,
    pub s_eq: f64,
    pub chi_parallel: f64,
    pub chi_perpendicular: f64,
    pub gamma_parallel: f64,
    pub gamma_perpendicular: f64,
}

impl Dynamics {
    fn new(env: &SpinEnvironment, rates: RelaxationRates) -> Self {
        Self {
            b: env.reduced_field(),
            s_eq: equilibrium_polarization(env),
            chi_parallel: chi_parallel_static(env),
            chi_perpendicular: chi_perpendicular_static(env),
            gamma_parallel: rates.parallel,
            gamma_perpendicular: rates.perpendicular,
        }
    }

    /// `dd/dτ` for deviation `d` under drive field `h`.
    pub(crate) fn rhs(&self, d: [f64; 3], h: [f64; 3]) -> [f64; 3] {
        let s = [d[0], d[1], self.s_eq + d[2]];
        // b ẑ × d plus h × s
        let prec = [
            -self.b * d[1] + h[1] * s[2] - h[2] * s[1],
            self.b * d[0] + h[2] * s[0] - h[0] * s[2],
            h[0] * s[1] - h[1] * s[0],
        ];
        [
            prec[0] - self.gamma_perpendicular * (d[0] + self.chi_perpendicular * h[0]),
            prec[1] - self.gamma_perpendicular * (d[1] + self.chi_perpendicular * h[1]),
            prec[2] - self.gamma_parallel * (d[2] + self.chi_parallel * h[2]),
        ]
    }

    /// One classical RK4 step.
    pub(crate) fn step(&self, d: [f64; 3], t: f64, dt: f64, field: &impl Fn(f64) -> [f64; 3]) -> [f64; 3] {
        let add = |a: [f64; 3], k: [f64; 3], c: f64| [a[0] + c * k[0], a[1] + c * k[1], a[2] + c * k[2]];
        let h0 = field(t);
        let hm = field(t + 0.5 * dt);
        let h1 = field(t + dt);
        let k1 = self.rhs(d, h0);
        let k2 = self.rhs(add(d, k1, 0.5 * dt), hm);
        let k3 = self.rhs(add(d, k2, 0.5 * dt), hm);
        let k4 = self.rhs(add(d, k3, dt), h1);
        let mut out = d;
        for i in 0..3 {
            out[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        out
    }
}

/// Spin expectation at a reduced time, field along ẑ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlochState {
    pub s: [f64; 3],
    pub time: f64,
}

/// A sinusoidal field perturbation `amplitude·cos(frequency·τ)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriveSpec {
    pub direction: Drive,
    pub amplitude: f64,
    pub frequency: f64,
}

impl DriveSpec {
    fn field(&self, t: f64) -> [f64; 3] {
        let h = self.amplitude * (self.frequency * t).cos();
        match self.direction {
            Drive::Longitudinal => [0.0, 0.0, h],
            Drive::Transverse => [h, 0.0, 0.0],
        }
    }
}

/// One RK4 step of the Bloch equation. `dt` must not exceed
/// `0.1/max(Γ∥, Γ⊥, b, x_d)`.
pub fn step(
    state: &BlochState,
    env: &SpinEnvironment,
    rates: RelaxationRates,
    drive: Option<&DriveSpec>,
    dt: f64,
) -> Result<BlochState> {
    let x_d = drive.map_or(0.0, |d| d.frequency.abs());
    let fastest = rates
        .parallel
        .max(rates.perpendicular)
        .max(env.reduced_field())
        .max(x_d);
    if !(dt > 0.0) || dt * fastest > 0.1 {
        return Err(Error::invalid(
            "dt",
            format!("step {dt} exceeds 0.1 divided by the fastest rate {fastest}"),
        ));
    }
    let dyn_ = Dynamics::new(env, rates);
    let d0 = [state.s[0], state.s[1], state.s[2] - dyn_.s_eq];
    let d = match drive {
        Some(spec) => dyn_.step(d0, state.time, dt, &|t| spec.field(t)),
        None => dyn_.step(d0, state.time, dt, &|_| [0.0; 3]),
    };
    Ok(BlochState {
        s: [d[0], d[1], d[2] + dyn_.s_eq],
        time: state.time + dt,
    })
}

/// Closed-form susceptibility `χ = -δs/δb` for comparison with the oracle.
pub fn analytic_susceptibility(env: &SpinEnvironment, rates: RelaxationRates, x: f64, drive: Drive) -> Complex64 {
    let i = Complex64::i();
    match drive {
        Drive::Longitudinal => {
            let g = rates.parallel;
            chi_parallel_static(env) * g / (g - i * x)
        }
        Drive::Transverse => {
            let g = rates.perpendicular;
            let b = env.reduced_field();
            let up = (g - i * b) / (g - i * (b + x));
            let down = (g + i * b) / (g + i * (b - x));
            0.5 * chi_perpendicular_static(env) * (up + down)
        }
    }
}

/// Integrate the driven Bloch equation at reduced frequency `x` and project
/// the steady state onto the drive.
pub fn bloch_response(
    env: &SpinEnvironment,
    rates: RelaxationRates,
    x: f64,
    drive: Drive,
    settings: &BlochSettings,
) -> Result<BlochResponse> {
    settings.validate()?;
    if !(x.is_finite() && x != 0.0) {
        return Err(Error::invalid(
            "x",
            "the oracle needs a finite non-zero drive frequency",
        ));
    }
    for (name, g) in [
        ("gamma_parallel", rates.parallel),
        ("gamma_perpendicular", rates.perpendicular),
    ] {
        if !(g > 0.0 && g.is_finite()) {
            return Err(Error::invalid(name, format!("decay rate must be positive, got {g}")));
        }
    }
    let dyn_ = Dynamics::new(env, rates);
    let w = x.abs();
    let period = 2.0 * std::f64::consts::PI / w;
    let fastest = rates.parallel.max(rates.perpendicular).max(dyn_.b).max(w);
    let slowest = rates.parallel.min(rates.perpendicular);
    let steps_per_period = (period * fastest / settings.step_fraction).ceil().max(16.0) as u64;
    let dt = period / steps_per_period as f64;
    let transient_periods = (settings.transient_decays / (slowest * period)).ceil() as u64;
    let total = (transient_periods + settings.measure_periods as u64) * steps_per_period;
    if total > settings.max_steps {
        return Err(Error::invalid(
            "x",
            format!(
                "oracle would need {total} steps, above the cap of {}",
                settings.max_steps
            ),
        ));
    }

    let a = settings.amplitude;
    let field = |t: f64| -> [f64; 3] {
        let h = a * (w * t).cos();
        match drive {
            Drive::Longitudinal => [0.0, 0.0, h],
            Drive::Transverse => [h, 0.0, 0.0],
        }
    };
    let component = match drive {
        Drive::Longitudinal => 2,
        Drive::Transverse => 0,
    };

    let mut d = [0.0; 3];
    let mut step = 0u64;
    let time = |k: u64| k as f64 * dt;
    while step < transient_periods * steps_per_period {
        d = dyn_.step(d, time(step), dt, &field);
        step += 1;
    }
    let start = d;
    let mut cos_sum = 0.0;
    let mut sin_sum = 0.0;
    let mut comp = [0.0; 2];
    let measure_steps = settings.measure_periods as u64 * steps_per_period;
    // trapezoid on a periodic integrand: uniform weights over whole periods
    for _ in 0..measure_steps {
        let phase = w * time(step);
        let v = d[component];
        for (acc, (sum, term)) in comp
            .iter_mut()
            .zip([(&mut cos_sum, v * phase.cos()), (&mut sin_sum, v * phase.sin())])
        {
            let y = term - *acc;
            let t = *sum + y;
            *acc = (t - *sum) - y;
            *sum = t;
        }
        d = dyn_.step(d, time(step), dt, &field);
        step += 1;
    }
    let span = measure_steps as f64 * dt;
    let re = -2.0 / (a * span) * cos_sum * dt;
    // sin(xτ) with signed x makes Im χ odd in x
    let im = -2.0 / (a * span) * sin_sum * dt * x.signum();
    let chi = Complex64::new(re, im);

    let change = ((d[0] - start[0]).powi(2) + (d[1] - start[1]).powi(2) + (d[2] - start[2]).powi(2)).sqrt();
    let scale = chi.norm() * a;
    let drift = if scale > 0.0 {
        change / scale / settings.measure_periods as f64
    } else {
        0.0
    };
    if drift > settings.drift_tolerance {
        return Err(Error::SteadyStateNotReached { drift });
    }
    Ok(BlochResponse {
        susceptibility: chi,
        noise: 2.0 * quantum_prefactor(x) * im / x,
        drift,
        steps: step,
    })
}

/// Oracle noise spectrum on `grid`, one Bloch run per point.
pub fn bloch_noise_spectrum(
    env: &SpinEnvironment,
    rates: RelaxationRates,
    grid: &[f64],
    drive: Drive,
    settings: &BlochSettings,
) -> Result<Spectrum> {
    let values = grid
        .par_iter()
        .map(|&x| bloch_response(env, rates, x, drive, settings).map(|r| r.noise))
        .collect::<Result<Vec<f64>>>()?;
    let channel = match drive {
        Drive::Longitudinal => Channel::Parallel,
        Drive::Transverse => Channel::Perpendicular,
    };
    Spectrum::new(grid.to_vec(), values, channel, Unit::ReducedNoise)
}
