//! Physical constants and conversions at the SI boundary.
//!
//! The numerical core works in reduced units: energies in `k_B T`, rates and
//! angular frequencies in `k_B T / ħ`, and spin-noise spectra in `ħ / (k_B T)`.
//! Everything in this module is the bridge between those and laboratory units.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use serde::{Serialize, Serializer};

use crate::error::{Error, Result};
use crate::spin::SpinEnvironment;

/// Bohr magneton, J/T.
pub const BOHR_MAGNETON: f64 = 9.2740100657e-24;
/// Boltzmann constant, J/K.
pub const BOLTZMANN: f64 = 1.380649e-23;
/// Reduced Planck constant, J·s.
pub const HBAR: f64 = 1.054571817e-34;
/// Magnetic flux quantum, Wb.
pub const FLUX_QUANTUM: f64 = 2.067833848e-15;

pub const TESLA_PER_GAUSS: f64 = 1e-4;

/// One micro flux quantum, Wb.
const MICRO_FLUX_QUANTUM: f64 = FLUX_QUANTUM * 1e-6;

/// Units understood by [`convert_units`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Unit {
    Gauss,
    Tesla,
    /// Cyclic frequency `f` in Hz.
    Hertz,
    /// Reduced angular frequency `x = ħω/(k_B T)` with `ω = 2πf`.
    ReducedFrequency,
    /// Flux noise in Wb²/Hz (numerically equal to Wb²·s).
    WeberSqPerHz,
    /// Flux noise in (μΦ₀)²/Hz.
    MicroPhi0SqPerHz,
    /// Spin noise in seconds.
    Seconds,
    /// Spin noise in `ħ/(k_B T)`.
    ReducedNoise,
    /// Divided by a reference value; not convertible.
    Normalized,
}

impl fmt::Display for Unit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Unit::Gauss => "G",
            Unit::Tesla => "T",
            Unit::Hertz => "Hz",
            Unit::ReducedFrequency => "hbar*omega/kT",
            Unit::WeberSqPerHz => "Wb^2/Hz",
            Unit::MicroPhi0SqPerHz => "uPhi0^2/Hz",
            Unit::Seconds => "s",
            Unit::ReducedNoise => "hbar/kT",
            Unit::Normalized => "normalized",
        };
        f.write_str(s)
    }
}

impl FromStr for Unit {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [
            Unit::Gauss,
            Unit::Tesla,
            Unit::Hertz,
            Unit::ReducedFrequency,
            Unit::WeberSqPerHz,
            Unit::MicroPhi0SqPerHz,
            Unit::Seconds,
            Unit::ReducedNoise,
            Unit::Normalized,
        ]
        .into_iter()
        .find(|u| u.to_string() == s.trim())
        .ok_or_else(|| Error::invalid("unit", format!("unknown unit tag `{s}`")))
    }
}

impl Serialize for Unit {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

/// Convert `value` between two supported units. Temperature-dependent pairs
/// read `k_B T` from `env`.
pub fn convert_units(value: f64, from: Unit, to: Unit, env: &SpinEnvironment) -> Result<f64> {
    use Unit::*;
    if from == to {
        return Ok(value);
    }
    let kt = BOLTZMANN * env.temperature();
    let out = match (from, to) {
        (Gauss, Tesla) => value * TESLA_PER_GAUSS,
        (Tesla, Gauss) => value / TESLA_PER_GAUSS,
        (Hertz, ReducedFrequency) => 2.0 * PI * HBAR * value / kt,
        (ReducedFrequency, Hertz) => value * kt / (2.0 * PI * HBAR),
        (WeberSqPerHz, MicroPhi0SqPerHz) => value / (MICRO_FLUX_QUANTUM * MICRO_FLUX_QUANTUM),
        (MicroPhi0SqPerHz, WeberSqPerHz) => value * (MICRO_FLUX_QUANTUM * MICRO_FLUX_QUANTUM),
        (ReducedNoise, Seconds) => value * HBAR / kt,
        (Seconds, ReducedNoise) => value * kt / HBAR,
        _ => {
            return Err(Error::UnsupportedConversion {
                from: from.to_string(),
                to: to.to_string(),
            })
        }
    };
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn env() -> SpinEnvironment {
        SpinEnvironment::new(0.010, 0.0, 2.0, 0.01).unwrap()
    }

    #[test]
    fn gauss_to_tesla() {
        assert_eq!(convert_units(1.0, Unit::Gauss, Unit::Tesla, &env()).unwrap(), 1e-4);
    }

    #[test]
    fn larmor_frequency_maps_to_reduced_field() {
        // 1 G, g = 2: x computed from the Larmor frequency equals b.
        let env = SpinEnvironment::new(0.010, 0.0, 2.0, 1e-4).unwrap();
        let f_larmor = env.larmor_angular_frequency() / (2.0 * PI);
        let x = convert_units(f_larmor, Unit::Hertz, Unit::ReducedFrequency, &env).unwrap();
        assert!((x / env.reduced_field() - 1.0).abs() < 1e-12);
        // the quoted round figure 2.80 MHz is good to 0.1%
        let x_quoted = convert_units(2.80e6, Unit::Hertz, Unit::ReducedFrequency, &env).unwrap();
        assert!((x_quoted / env.reduced_field() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn unsupported_pair_is_rejected() {
        let err = convert_units(1.0, Unit::Gauss, Unit::Hertz, &env()).unwrap_err();
        assert!(matches!(err, Error::UnsupportedConversion { .. }));
    }

    #[test]
    fn round_trips() {
        let pairs = [
            (Unit::Gauss, Unit::Tesla),
            (Unit::Hertz, Unit::ReducedFrequency),
            (Unit::WeberSqPerHz, Unit::MicroPhi0SqPerHz),
            (Unit::ReducedNoise, Unit::Seconds),
        ];
        for v in [1e-30, 3.7e-12, 1.0, 42.0, 9.9e17] {
            for (a, b) in pairs {
                let there = convert_units(v, a, b, &env()).unwrap();
                let back = convert_units(there, b, a, &env()).unwrap();
                assert!(((back - v) / v).abs() < 1e-14, "{a} -> {b} -> {a}: {v} vs {back}");
            }
        }
    }
}
