//! Single-spin quantities: equilibrium polarization, static susceptibilities,
//! relaxation rates and the analytic longitudinal/transverse noise spectra.
//!
//! All functions work in reduced units. The reduced field is
//! `b = gμ_B B/(k_B T)`, frequencies are `x = ħω/(k_B T)`, rates are in units
//! of `k_B T/ħ` and spectra in units of `ħ/(k_B T)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::{BOHR_MAGNETON, BOLTZMANN, HBAR, TESLA_PER_GAUSS};

/// Below this magnitude `x/(1 - e^-x)` and `tanh(b/2)/(2b)` are taken from
/// their Taylor series.
pub(crate) const SERIES_CUTOFF: f64 = 1e-6;

/// Largest accepted disorder width; keeps `e^(2 λ_max)` finite.
pub const LAMBDA_MAX_LIMIT: f64 = 300.0;

/// Thermal environment of a spin: temperature, Curie–Weiss shift, g-factor
/// and applied field. The spin's local field is taken to be the applied
/// field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpinEnvironment {
    temperature: f64,
    curie_weiss_temperature: f64,
    g_factor: f64,
    field: f64,
}

impl SpinEnvironment {
    /// `temperature` and `curie_weiss_temperature` in kelvin, `field` in tesla.
    pub fn new(temperature: f64, curie_weiss_temperature: f64, g_factor: f64, field: f64) -> Result<Self> {
        if !(temperature.is_finite() && temperature > 0.0) {
            return Err(Error::invalid(
                "temperature",
                format!("must be positive, got {temperature}"),
            ));
        }
        if !curie_weiss_temperature.is_finite() || temperature <= curie_weiss_temperature {
            return Err(Error::invalid(
                "curie_weiss_temperature",
                format!("must be below the temperature ({temperature} K), got {curie_weiss_temperature} K"),
            ));
        }
        if !(g_factor.is_finite() && g_factor > 0.0) {
            return Err(Error::invalid("g_factor", format!("must be positive, got {g_factor}")));
        }
        if !(field.is_finite() && field >= 0.0) {
            return Err(Error::invalid("field", format!("must be non-negative, got {field}")));
        }
        Ok(Self {
            temperature,
            curie_weiss_temperature,
            g_factor,
            field,
        })
    }

    /// Same as [`SpinEnvironment::new`] with the field given in gauss.
    pub fn from_gauss(temperature: f64, curie_weiss_temperature: f64, g_factor: f64, field_gauss: f64) -> Result<Self> {
        Self::new(
            temperature,
            curie_weiss_temperature,
            g_factor,
            field_gauss * TESLA_PER_GAUSS,
        )
    }

    /// Environment at temperature `temperature` (g = 2, no Curie–Weiss shift)
    /// whose field is chosen so that the reduced field equals `b`.
    pub fn with_reduced_field(temperature: f64, b: f64) -> Result<Self> {
        let g = 2.0;
        let field = b * BOLTZMANN * temperature / (g * BOHR_MAGNETON);
        Self::new(temperature, 0.0, g, field)
    }

    pub fn with_curie_weiss(self, curie_weiss_temperature: f64) -> Result<Self> {
        Self::new(self.temperature, curie_weiss_temperature, self.g_factor, self.field)
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    pub fn curie_weiss_temperature(&self) -> f64 {
        self.curie_weiss_temperature
    }

    pub fn g_factor(&self) -> f64 {
        self.g_factor
    }

    /// Applied field in tesla.
    pub fn field(&self) -> f64 {
        self.field
    }

    pub fn field_gauss(&self) -> f64 {
        self.field / TESLA_PER_GAUSS
    }

    /// Zeeman energy over thermal energy, `b = gμ_B B/(k_B T)`.
    pub fn reduced_field(&self) -> f64 {
        self.g_factor * BOHR_MAGNETON * self.field / (BOLTZMANN * self.temperature)
    }

    /// Larmor angular frequency `gμ_B B/ħ` in rad/s. Its reduced form is
    /// [`reduced_field`](Self::reduced_field).
    pub fn larmor_angular_frequency(&self) -> f64 {
        self.g_factor * BOHR_MAGNETON * self.field / HBAR
    }

    /// Same environment at a different field (tesla).
    pub fn at_field(&self, field: f64) -> Result<Self> {
        Self::new(self.temperature, self.curie_weiss_temperature, self.g_factor, field)
    }
}

/// `x / (1 - e^-x)`, the quantum detailed-balance factor, finite at `x = 0`.
pub fn quantum_prefactor(x: f64) -> f64 {
    if x.abs() < SERIES_CUTOFF {
        1.0 + x / 2.0 + x * x / 12.0
    } else {
        x / -(-x).exp_m1()
    }
}

/// Equilibrium spin projection along the field, `-tanh(b/2)/2`.
pub fn equilibrium_polarization(env: &SpinEnvironment) -> f64 {
    -0.5 * (0.5 * env.reduced_field()).tanh()
}

/// Static longitudinal susceptibility in units of `1/(k_B T)`, including the
/// Curie–Weiss enhancement `T/(T - T_CW)`.
pub fn chi_parallel_static(env: &SpinEnvironment) -> f64 {
    let c = (0.5 * env.reduced_field()).cosh();
    let curie_weiss = env.temperature / (env.temperature - env.curie_weiss_temperature);
    curie_weiss / (4.0 * c * c)
}

/// Static transverse susceptibility `tanh(b/2)/(2b)` in units of `1/(k_B T)`.
pub fn chi_perpendicular_static(env: &SpinEnvironment) -> f64 {
    let b = env.reduced_field();
    if b < SERIES_CUTOFF {
        0.25 - b * b / 48.0
    } else {
        (0.5 * b).tanh() / (2.0 * b)
    }
}

/// How the transverse decay rate follows from the longitudinal one.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransversePolicy {
    /// Γ⊥ = Γ∥/2, the pure energy-relaxation limit.
    #[default]
    HalfParallel,
    /// Γ⊥ = Γ∥.
    Equal,
    /// Γ⊥ = r·Γ∥ with r ≥ 1/2.
    Ratio(f64),
}

impl TransversePolicy {
    pub fn ratio(&self) -> f64 {
        match *self {
            TransversePolicy::HalfParallel => 0.5,
            TransversePolicy::Equal => 1.0,
            TransversePolicy::Ratio(r) => r,
        }
    }
}

/// Longitudinal and transverse decay rates of one spin, in `k_B T/ħ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxationRates {
    pub parallel: f64,
    pub perpendicular: f64,
}

/// Cross plus direct relaxation:
/// `Γ∥(λ) = Γ₀ e^(-λ) + γ̃ bⁿ` with `λ ~ U[0, λ_max]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RateModel {
    gamma0: f64,
    gamma_tilde: f64,
    n: u32,
    lambda_max: f64,
    transverse: TransversePolicy,
}

impl RateModel {
    pub fn new(gamma0: f64, gamma_tilde: f64, n: u32, lambda_max: f64) -> Result<Self> {
        Self::with_policy(gamma0, gamma_tilde, n, lambda_max, TransversePolicy::default())
    }

    pub fn with_policy(
        gamma0: f64,
        gamma_tilde: f64,
        n: u32,
        lambda_max: f64,
        transverse: TransversePolicy,
    ) -> Result<Self> {
        if !(gamma0.is_finite() && gamma0 > 0.0) {
            return Err(Error::invalid("gamma0", format!("must be positive, got {gamma0}")));
        }
        if !(gamma_tilde.is_finite() && gamma_tilde >= 0.0) {
            return Err(Error::invalid(
                "gamma_tilde",
                format!("must be non-negative, got {gamma_tilde}"),
            ));
        }
        if n != 2 && n != 4 {
            return Err(Error::invalid(
                "n",
                format!("direct-relaxation exponent must be 2 or 4, got {n}"),
            ));
        }
        if !(lambda_max > 0.0 && lambda_max <= LAMBDA_MAX_LIMIT) {
            return Err(Error::invalid(
                "lambda_max",
                format!("must lie in (0, {LAMBDA_MAX_LIMIT}], got {lambda_max}"),
            ));
        }
        if let TransversePolicy::Ratio(r) = transverse {
            if !(r.is_finite() && r >= 0.5) {
                return Err(Error::invalid(
                    "transverse_policy",
                    format!("ratio must be >= 1/2, got {r}"),
                ));
            }
        }
        Ok(Self {
            gamma0,
            gamma_tilde,
            n,
            lambda_max,
            transverse,
        })
    }

    pub fn gamma0(&self) -> f64 {
        self.gamma0
    }

    pub fn gamma_tilde(&self) -> f64 {
        self.gamma_tilde
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn transverse(&self) -> TransversePolicy {
        self.transverse
    }

    /// Field-induced direct relaxation rate `Γ_B = γ̃ bⁿ`.
    pub fn gamma_b(&self, env: &SpinEnvironment) -> f64 {
        self.gamma_tilde * env.reduced_field().powi(self.n as i32)
    }

    pub fn gamma_min(&self, env: &SpinEnvironment) -> f64 {
        self.gamma0 * (-self.lambda_max).exp() + self.gamma_b(env)
    }

    pub fn gamma_max(&self, env: &SpinEnvironment) -> f64 {
        self.gamma0 + self.gamma_b(env)
    }

    /// `Γ_max - Γ_min = Γ₀(1 - e^(-λ_max))`, free of cancellation.
    pub fn gamma_spread(&self) -> f64 {
        -self.gamma0 * (-self.lambda_max).exp_m1()
    }

    /// Rates of a spin with disorder variable `lambda`.
    pub fn relaxation_rates(&self, env: &SpinEnvironment, lambda: f64) -> Result<RelaxationRates> {
        if !(0.0..=self.lambda_max).contains(&lambda) {
            return Err(Error::invalid(
                "lambda",
                format!("must lie in [0, {}], got {lambda}", self.lambda_max),
            ));
        }
        Ok(self.rates_unchecked(env, lambda))
    }

    pub(crate) fn rates_unchecked(&self, env: &SpinEnvironment, lambda: f64) -> RelaxationRates {
        let parallel = self.gamma0 * (-lambda).exp() + self.gamma_b(env);
        RelaxationRates {
            parallel,
            perpendicular: self.transverse.ratio() * parallel,
        }
    }
}

fn check_rate(name: &'static str, rate: f64) -> Result<()> {
    if rate.is_finite() && rate > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(name, format!("decay rate must be positive, got {rate}")))
    }
}

/// Longitudinal spin noise of a single spin with decay rate `gamma`.
pub fn single_spin_noise_parallel(env: &SpinEnvironment, gamma: f64, x: f64) -> Result<f64> {
    check_rate("gamma_parallel", gamma)?;
    Ok(parallel_noise(chi_parallel_static(env), gamma, x))
}

/// Transverse spin noise of a single spin with decay rate `gamma`; peaks at
/// `x = ±b`.
pub fn single_spin_noise_perpendicular(env: &SpinEnvironment, gamma: f64, x: f64) -> Result<f64> {
    check_rate("gamma_perpendicular", gamma)?;
    Ok(perpendicular_noise(
        chi_perpendicular_static(env),
        env.reduced_field(),
        gamma,
        x,
    ))
}

#[inline]
pub(crate) fn lorentzian_parallel(gamma: f64, x: f64) -> f64 {
    gamma / (x * x + gamma * gamma)
}

/// The even-in-x part of the transverse spectrum: `Γ·[L(x-b) + L(x+b)]`.
#[inline]
pub(crate) fn lorentzian_perpendicular(b: f64, gamma: f64, x: f64) -> f64 {
    let x = x.abs();
    let g2 = gamma * gamma;
    let lo = x - b;
    let hi = x + b;
    gamma * (1.0 / (lo * lo + g2) + 1.0 / (hi * hi + g2))
}

#[inline]
pub(crate) fn parallel_noise(chi: f64, gamma: f64, x: f64) -> f64 {
    2.0 * quantum_prefactor(x) * chi * lorentzian_parallel(gamma, x)
}

#[inline]
pub(crate) fn perpendicular_noise(chi: f64, b: f64, gamma: f64, x: f64) -> f64 {
    quantum_prefactor(x) * chi * lorentzian_perpendicular(b, gamma, x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate_infinite;
    use proptest::prelude::*;

    fn ten_mk_hundred_gauss() -> SpinEnvironment {
        SpinEnvironment::from_gauss(0.010, 0.0, 2.0, 100.0).unwrap()
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn reduced_field_at_ten_millikelvin() {
        let b = ten_mk_hundred_gauss().reduced_field();
        // 2 μ_B (0.01 T) / (k_B 0.01 K)
        assert!(rel(b, 2.0 * 9.2740100657e-24 / 1.380649e-23) < 1e-15);
        assert!((b - 1.343).abs() < 1e-3);
    }

    #[test]
    fn polarization_limits() {
        let zero = SpinEnvironment::new(0.01, 0.0, 2.0, 0.0).unwrap();
        assert_eq!(equilibrium_polarization(&zero), 0.0);
        let huge = SpinEnvironment::with_reduced_field(0.01, 200.0).unwrap();
        assert!((equilibrium_polarization(&huge) + 0.5).abs() < 1e-15);
        let s = equilibrium_polarization(&ten_mk_hundred_gauss());
        assert!((s + 0.29305).abs() < 5e-5, "{s}");
    }

    #[test]
    fn susceptibilities_at_reference_points() {
        let zero = SpinEnvironment::new(0.01, 0.0, 2.0, 0.0).unwrap();
        assert_eq!(chi_parallel_static(&zero), 0.25);
        assert_eq!(chi_perpendicular_static(&zero), 0.25);

        let env = ten_mk_hundred_gauss();
        assert!((chi_parallel_static(&env) - 0.1642).abs() < 1e-4);
        assert!((chi_perpendicular_static(&env) - 0.2181).abs() < 1e-4);

        let cw = zero.with_curie_weiss(0.005).unwrap();
        assert!(rel(chi_parallel_static(&cw), 0.5) < 1e-15);

        let strong = SpinEnvironment::with_reduced_field(0.01, 1e4).unwrap();
        assert!(rel(chi_perpendicular_static(&strong), 1.0 / 2e4) < 1e-12);
    }

    #[test]
    fn curie_weiss_at_or_above_temperature_is_rejected() {
        assert!(SpinEnvironment::new(0.01, 0.01, 2.0, 0.0).is_err());
        assert!(SpinEnvironment::new(0.01, 0.02, 2.0, 0.0).is_err());
        assert!(SpinEnvironment::new(0.01, -0.02, 2.0, 0.0).is_ok());
    }

    #[test]
    fn chi_perpendicular_is_continuous_through_series_cutoff() {
        let below = SpinEnvironment::with_reduced_field(0.01, 0.999e-6).unwrap();
        let above = SpinEnvironment::with_reduced_field(0.01, 1.001e-6).unwrap();
        assert!(rel(chi_perpendicular_static(&below), chi_perpendicular_static(&above)) < 1e-14);
    }

    #[test]
    fn larmor_frequency_per_gauss() {
        let env = SpinEnvironment::from_gauss(0.01, 0.0, 2.0, 1.0).unwrap();
        let f = env.larmor_angular_frequency() / (2.0 * std::f64::consts::PI);
        assert!((f / 2.80e6 - 1.0).abs() < 5e-3, "{f}");
        let env100 = SpinEnvironment::from_gauss(0.01, 0.0, 2.0, 100.0).unwrap();
        let f100 = env100.larmor_angular_frequency() / (2.0 * std::f64::consts::PI);
        assert!((f100 / 1e6 - 279.9).abs() < 0.05, "{f100}");
        let off = SpinEnvironment::new(0.01, 0.0, 2.0, 0.0).unwrap();
        assert_eq!(off.larmor_angular_frequency(), 0.0);
    }

    #[test]
    fn relaxation_rates_examples() {
        let zero = SpinEnvironment::new(0.01, 0.0, 2.0, 0.0).unwrap();
        let m = RateModel::new(1.0, 5e-6, 4, 30.0).unwrap();
        let r = m.relaxation_rates(&zero, 0.0).unwrap();
        assert_eq!(r.parallel, 1.0);
        assert_eq!(r.perpendicular, 0.5);
        let r = m.relaxation_rates(&zero, 30.0).unwrap();
        assert!(rel(r.parallel, 9.357622968840175e-14) < 1e-12);

        let env = SpinEnvironment::with_reduced_field(0.01, 10.0).unwrap();
        let wide = RateModel::new(1.0, 5e-6, 4, 200.0).unwrap();
        let r = wide.relaxation_rates(&env, 200.0).unwrap();
        assert!(rel(r.parallel, 0.05) < 1e-12);

        assert!(m.relaxation_rates(&zero, -0.1).is_err());
        assert!(m.relaxation_rates(&zero, 30.1).is_err());
    }

    #[test]
    fn rate_model_validation() {
        assert!(RateModel::new(0.0, 0.0, 4, 30.0).is_err());
        assert!(RateModel::new(1.0, -1.0, 4, 30.0).is_err());
        assert!(RateModel::new(1.0, 0.0, 3, 30.0).is_err());
        assert!(RateModel::new(1.0, 0.0, 2, 0.0).is_err());
        assert!(RateModel::with_policy(1.0, 0.0, 2, 1.0, TransversePolicy::Ratio(0.4)).is_err());
        assert!(RateModel::with_policy(1.0, 0.0, 2, 1.0, TransversePolicy::Ratio(0.5)).is_ok());
    }

    #[test]
    fn parallel_noise_examples() {
        let zero = SpinEnvironment::new(0.01, 0.0, 2.0, 0.0).unwrap();
        assert!(rel(single_spin_noise_parallel(&zero, 0.1, 0.0).unwrap(), 5.0) < 1e-15);
        assert!(rel(single_spin_noise_parallel(&zero, 0.1, 1e-9).unwrap(), 5.0) < 1e-8);
        // 2/(1 - e^-1) * 0.25 * 1/2
        let expected = 0.25 / (1.0 - (-1.0f64).exp());
        assert!(rel(single_spin_noise_parallel(&zero, 1.0, 1.0).unwrap(), expected) < 1e-15);
        assert!((expected - 0.3955).abs() < 1e-4);
        assert!(single_spin_noise_parallel(&zero, 0.0, 1.0).is_err());
        assert!(single_spin_noise_parallel(&zero, -1.0, 1.0).is_err());
    }

    #[test]
    fn perpendicular_noise_examples() {
        let env = SpinEnvironment::with_reduced_field(0.01, 5.0).unwrap();
        let chi = (2.5f64).tanh() / 10.0;
        let pref = 5.0 / (1.0 - (-5.0f64).exp());
        let expected = pref * 0.05 * chi * (1.0 / 0.0025 + 1.0 / (100.0 + 0.0025));
        let got = single_spin_noise_perpendicular(&env, 0.05, 5.0).unwrap();
        assert!(rel(got, expected) < 1e-12);
        assert!((got - 9.93).abs() < 5e-3, "{got}");
        assert!(single_spin_noise_perpendicular(&env, 0.0, 5.0).is_err());
    }

    #[test]
    fn prefactor_is_continuous_through_series_cutoff() {
        for x in [0.999e-6, -0.999e-6] {
            let y = x * 1.002;
            assert!(rel(quantum_prefactor(x), quantum_prefactor(y)) < 1e-8);
        }
        assert_eq!(quantum_prefactor(0.0), 1.0);
    }

    #[test]
    fn classical_sum_rule() {
        // (1/2π) ∫ S∥ dx with the prefactor replaced by its classical value
        // equals χ∥ = 1/(4 cosh²(b/2)).
        for (b, gamma) in [(0.0, 0.3), (1.343, 0.05), (4.0, 2.0)] {
            let env = SpinEnvironment::with_reduced_field(0.01, b).unwrap();
            let chi = chi_parallel_static(&env);
            let integral = integrate_infinite(
                // the classical part is even; use x > 0 where p(x) cannot underflow
                |x| single_spin_noise_parallel(&env, gamma, x.abs()).unwrap() / quantum_prefactor(x.abs()),
                gamma,
                1e-12,
                4000,
            )
            .unwrap()
            .value;
            let c = (0.5 * b).cosh();
            let total = integral / (2.0 * std::f64::consts::PI);
            assert!(rel(total, chi) < 1e-6, "b={b}: {total} vs {chi}");
            assert!(rel(chi, 1.0 / (4.0 * c * c)) < 1e-14);
        }
    }

    #[test]
    fn susceptibilities_are_monotone_in_field() {
        let mut prev_par = f64::INFINITY;
        let mut prev_perp = f64::INFINITY;
        for i in 0..400 {
            let b = i as f64 * 0.05;
            let env = SpinEnvironment::with_reduced_field(0.01, b).unwrap();
            let par = chi_parallel_static(&env);
            let perp = chi_perpendicular_static(&env);
            assert!(par <= prev_par && perp <= prev_perp);
            assert!(perp <= 0.25);
            prev_par = par;
            prev_perp = perp;
        }
    }

    proptest! {
        #[test]
        fn detailed_balance(b in 0.0f64..20.0, gamma in 1e-4f64..10.0, x in 0.0f64..50.0) {
            let env = SpinEnvironment::with_reduced_field(0.01, b).unwrap();
            let boltz = (-x).exp();
            let p_pos = single_spin_noise_parallel(&env, gamma, x).unwrap();
            let p_neg = single_spin_noise_parallel(&env, gamma, -x).unwrap();
            prop_assert!(rel(p_neg, boltz * p_pos) < 1e-12);
            let t_pos = single_spin_noise_perpendicular(&env, gamma, x).unwrap();
            let t_neg = single_spin_noise_perpendicular(&env, gamma, -x).unwrap();
            prop_assert!(rel(t_neg, boltz * t_pos) < 1e-12);
        }

        #[test]
        fn zero_field_isotropy(gamma in 1e-4f64..10.0, x in -50.0f64..50.0) {
            let env = SpinEnvironment::new(0.01, 0.0, 2.0, 0.0).unwrap();
            let par = single_spin_noise_parallel(&env, gamma, x).unwrap();
            let perp = single_spin_noise_perpendicular(&env, gamma, x).unwrap();
            prop_assert!(rel(perp, par) < 1e-12);
        }

        #[test]
        fn spectra_are_positive(b in 0.0f64..50.0, gamma in 1e-6f64..100.0, x in -200.0f64..200.0) {
            let env = SpinEnvironment::with_reduced_field(0.01, b).unwrap();
            prop_assert!(single_spin_noise_parallel(&env, gamma, x).unwrap() > 0.0);
            prop_assert!(single_spin_noise_perpendicular(&env, gamma, x).unwrap() >= 0.0);
        }
    }
}
