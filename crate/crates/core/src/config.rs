//! Strict JSON run configuration.
//!
//! Unknown keys are rejected and every range check runs before any
//! computation starts. Rates are reduced (`ħΓ/k_B T`) at the base
//! temperature `temperature_mK`; a temperature sweep rescales them with
//! `Γ₀` fixed in SI units and the direct rate growing as `Tⁿ`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::disorder::AveragingMethod;
use crate::error::{Error, Result};
use crate::flux::{EnsembleSpec, FluxEnsemble, FluxVector, UnitVector};
use crate::spectrum::log_grid;
use crate::spin::{RateModel, SpinEnvironment, TransversePolicy};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub rates: Option<RatesConfig>,
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub ensemble: Option<EnsembleConfig>,
    #[serde(default = "default_method")]
    pub method: AveragingMethod,
    #[serde(default)]
    pub output: OutputConfig,
    #[serde(default)]
    pub oracle: Option<OracleConfig>,
    #[serde(default)]
    pub fit: Option<FitConfig>,
}

fn default_method() -> AveragingMethod {
    AveragingMethod::ClosedForm
}

#[allow(non_snake_case)]
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub temperature_mK: f64,
    #[serde(default)]
    pub t_cw_mK: f64,
    #[serde(default = "default_g")]
    pub g_factor: f64,
    #[serde(default)]
    pub fields_gauss: Vec<f64>,
    /// Extra temperatures to sweep; the base temperature is used when empty.
    #[serde(default)]
    pub temperatures_mK: Vec<f64>,
}

fn default_g() -> f64 {
    2.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RatesConfig {
    pub gamma0: f64,
    pub gamma_tilde: f64,
    pub n: u32,
    pub lambda_max: f64,
    #[serde(default)]
    pub transverse_policy: TransversePolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x_min: f64,
    pub x_max: f64,
    pub points_per_decade: usize,
    #[serde(default)]
    pub include_negative: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleConfig {
    /// Direction of the applied field; normalized on load.
    #[serde(default = "default_direction")]
    pub field_direction: [f64; 3],
    #[serde(default)]
    pub generate: Option<EnsembleSpec>,
    /// Explicit flux vectors, Wb.
    #[serde(default)]
    pub vectors: Option<Vec<[f64; 3]>>,
    /// CSV with columns Fx, Fy, Fz in Wb, relative to the config file.
    #[serde(default)]
    pub vectors_csv: Option<PathBuf>,
    /// Draw an individual `λ` per spin instead of sharing the average.
    #[serde(default)]
    pub per_spin: bool,
}

fn default_direction() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Format {
    #[default]
    Csv,
    Json,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    #[default]
    None,
    /// Divide by the zero-field total at `x_min`.
    B0AtXmin,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub format: Format,
    #[serde(default)]
    pub normalization: Normalization,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    /// Points per Bloch table.
    #[serde(default = "default_oracle_points")]
    pub points: usize,
    #[serde(default = "default_oracle_samples")]
    pub mc_samples: u64,
    #[serde(default = "default_step_fraction")]
    pub step_fraction: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self {
            points: default_oracle_points(),
            mc_samples: default_oracle_samples(),
            step_fraction: default_step_fraction(),
        }
    }
}

fn default_oracle_points() -> usize {
    21
}

fn default_oracle_samples() -> u64 {
    100_000
}

fn default_step_fraction() -> f64 {
    0.05
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// Observations CSV, relative to the config file.
    #[serde(default)]
    pub observations: Option<PathBuf>,
    #[serde(default = "default_candidates")]
    pub candidates: Vec<u32>,
    #[serde(default)]
    pub free_t_cw: bool,
    #[serde(default = "default_starts")]
    pub starts: usize,
    #[serde(default)]
    pub lambda_max_bounds: Option<(f64, f64)>,
}

fn default_candidates() -> Vec<u32> {
    vec![2, 4]
}

fn default_starts() -> usize {
    8
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive and finite, got {v}")))
    }
}

fn config_err(context: &str, e: Error) -> Error {
    match e {
        Error::InvalidParameter { name, reason } => Error::Config(format!("{context}.{name}: {reason}")),
        other => other,
    }
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Range checks for every block that is present.
    pub fn validate(&self) -> Result<()> {
        let env = &self.environment;
        positive("environment.temperature_mK", env.temperature_mK)?;
        positive("environment.g_factor", env.g_factor)?;
        for &t in &env.temperatures_mK {
            positive("environment.temperatures_mK", t)?;
        }
        for &f in &env.fields_gauss {
            if !(f >= 0.0 && f.is_finite()) {
                return Err(Error::Config(format!("environment.fields_gauss must be >= 0, got {f}")));
            }
        }
        for t in self.temperatures_mk() {
            if !(t > env.t_cw_mK) {
                return Err(Error::Config(format!(
                    "environment.t_cw_mK ({}) must be below every temperature ({t})",
                    env.t_cw_mK
                )));
            }
        }
        if let Some(r) = &self.rates {
            for t in self.temperatures_mk() {
                self.rate_model(t).map_err(|e| config_err("rates", e))?;
            }
            if !matches!(r.n, 2 | 4) {
                return Err(Error::Config(format!("rates.n must be 2 or 4, got {}", r.n)));
            }
        }
        if let Some(g) = &self.grid {
            positive("grid.x_min", g.x_min)?;
            positive("grid.x_max", g.x_max)?;
            if !(g.x_min < g.x_max) {
                return Err(Error::Config("grid.x_min must be below grid.x_max".into()));
            }
            if g.points_per_decade < 4 {
                return Err(Error::Config(format!(
                    "grid.points_per_decade must be >= 4, got {}",
                    g.points_per_decade
                )));
            }
        }
        match self.method {
            AveragingMethod::ClosedForm => {}
            AveragingMethod::MonteCarlo { samples, .. } => {
                if samples == 0 {
                    return Err(Error::Config("method.monte_carlo.samples must be >= 1".into()));
                }
            }
            AveragingMethod::Quadrature { tolerance } => {
                if !(tolerance > 0.0 && tolerance < 1.0) {
                    return Err(Error::Config(format!(
                        "method.quadrature.tolerance must lie in (0, 1), got {tolerance}"
                    )));
                }
            }
        }
        if let Some(e) = &self.ensemble {
            let sources = [e.generate.is_some(), e.vectors.is_some(), e.vectors_csv.is_some()]
                .iter()
                .filter(|&&s| s)
                .count();
            if sources != 1 {
                return Err(Error::Config(
                    "ensemble needs exactly one of generate, vectors, vectors_csv".into(),
                ));
            }
            UnitVector::normalize(e.field_direction).map_err(|err| config_err("ensemble", err))?;
            if let Some(g) = &e.generate {
                g.count.resolve().map_err(|err| config_err("ensemble.generate", err))?;
            }
        }
        if let Some(o) = &self.oracle {
            if o.points < 2 {
                return Err(Error::Config("oracle.points must be >= 2".into()));
            }
            if o.mc_samples == 0 {
                return Err(Error::Config("oracle.mc_samples must be >= 1".into()));
            }
            if !(o.step_fraction > 0.0 && o.step_fraction <= 0.1) {
                return Err(Error::Config("oracle.step_fraction must lie in (0, 0.1]".into()));
            }
        }
        if let Some(f) = &self.fit {
            if f.candidates.is_empty() || f.candidates.iter().any(|n| !matches!(n, 2 | 4)) {
                return Err(Error::Config(
                    "fit.candidates must be a non-empty subset of [2, 4]".into(),
                ));
            }
            if f.starts < 8 {
                return Err(Error::Config("fit.starts must be >= 8".into()));
            }
        }
        Ok(())
    }

    /// Temperatures of the sweep in mK, base temperature when no sweep is set.
    pub fn temperatures_mk(&self) -> Vec<f64> {
        if self.environment.temperatures_mK.is_empty() {
            vec![self.environment.temperature_mK]
        } else {
            self.environment.temperatures_mK.clone()
        }
    }

    pub fn environment_at(&self, temperature_mk: f64, field_gauss: f64) -> Result<SpinEnvironment> {
        let e = &self.environment;
        SpinEnvironment::from_gauss(temperature_mk * 1e-3, e.t_cw_mK * 1e-3, e.g_factor, field_gauss)
    }

    /// The configured rate model, rescaled from the base temperature.
    pub fn rate_model(&self, temperature_mk: f64) -> Result<RateModel> {
        let r = self
            .rates
            .as_ref()
            .ok_or_else(|| Error::Config("missing rates block".into()))?;
        let ratio = temperature_mk / self.environment.temperature_mK;
        RateModel::with_policy(
            r.gamma0 / ratio,
            r.gamma_tilde * ratio.powi(r.n as i32),
            r.n,
            r.lambda_max,
            r.transverse_policy,
        )
    }

    pub fn grid_points(&self) -> Result<Vec<f64>> {
        let g = self
            .grid
            .as_ref()
            .ok_or_else(|| Error::Config("missing grid block".into()))?;
        log_grid(g.x_min, g.x_max, g.points_per_decade, g.include_negative)
    }

    /// Build the flux ensemble; relative CSV paths resolve against `base`.
    pub fn flux_ensemble(&self, base: &Path, seed_override: Option<u64>) -> Result<Option<FluxEnsemble>> {
        let Some(e) = &self.ensemble else {
            return Ok(None);
        };
        let direction = UnitVector::normalize(e.field_direction)?;
        let ensemble = if let Some(spec) = &e.generate {
            let mut spec = spec.clone();
            if let Some(s) = seed_override {
                spec.seed = s;
            }
            FluxEnsemble::generate(&spec, direction)?
        } else if let Some(v) = &e.vectors {
            let vectors = v.iter().map(|c| FluxVector::new(*c)).collect::<Result<Vec<_>>>()?;
            FluxEnsemble::explicit(vectors, direction)?
        } else {
            let path = e.vectors_csv.as_ref().expect("validated source");
            FluxEnsemble::explicit(crate::output::read_flux_vectors(&base.join(path))?, direction)?
        };
        Ok(Some(ensemble))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIG2: &str = r#"{
        "environment": {"temperature_mK": 10, "fields_gauss": [0, 100]},
        "rates": {"gamma0": 1, "gamma_tilde": 5e-6, "n": 4, "lambda_max": 30},
        "grid": {"x_min": 1e-10, "x_max": 1e-2, "points_per_decade": 4},
        "output": {"normalization": "b0_at_xmin"}
    }"#;

    #[test]
    fn parses_and_validates() {
        let c = RunConfig::from_json(FIG2).unwrap();
        c.validate().unwrap();
        assert_eq!(c.method, AveragingMethod::ClosedForm);
        assert_eq!(c.output.normalization, Normalization::B0AtXmin);
        assert_eq!(c.grid_points().unwrap().len(), 33);
        assert_eq!(
            c.rates.as_ref().unwrap().transverse_policy,
            TransversePolicy::HalfParallel
        );
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let bad = FIG2.replace("\"n\": 4", "\"n\": 4, \"nn\": 1");
        assert!(matches!(RunConfig::from_json(&bad), Err(Error::Config(_))));
        let bad = FIG2.replace("\"output\"", "\"outputs\"");
        assert!(RunConfig::from_json(&bad).is_err());
    }

    #[test]
    fn range_errors_name_the_field() {
        let cases = [
            (
                "\"points_per_decade\": 4",
                "\"points_per_decade\": 3",
                "points_per_decade",
            ),
            ("\"x_min\": 1e-10", "\"x_min\": 1", "x_min"),
            ("\"lambda_max\": 30", "\"lambda_max\": 301", "lambda_max"),
            (
                "\"temperature_mK\": 10",
                "\"temperature_mK\": 10, \"t_cw_mK\": 20",
                "t_cw_mK",
            ),
            ("\"n\": 4", "\"n\": 3", "rates.n"),
        ];
        for (from, to, needle) in cases {
            let c = RunConfig::from_json(&FIG2.replace(from, to)).unwrap();
            let msg = c.validate().unwrap_err().to_string();
            assert!(msg.contains(needle), "{msg}");
        }
    }

    #[test]
    fn methods_and_ensembles_parse() {
        let mc = FIG2.replace(
            "\"output\"",
            r#""method": {"monte_carlo": {"samples": 1000, "seed": 7}},
               "ensemble": {"generate": {"count": {"areal_density": 5e16, "area": 1e-12},
                    "magnitude": {"constant": 1e-20}, "orientation": "isotropic_3d", "seed": 2}},
               "output""#,
        );
        let c = RunConfig::from_json(&mc).unwrap();
        c.validate().unwrap();
        assert_eq!(c.method, AveragingMethod::MonteCarlo { samples: 1000, seed: 7 });
        let e = c.flux_ensemble(Path::new("."), None).unwrap().unwrap();
        assert_eq!(e.len(), 50_000);

        let two_sources = FIG2.replace(
            "\"output\"",
            r#""ensemble": {"vectors": [[0, 0, 1e-20]], "vectors_csv": "f.csv"}, "output""#,
        );
        assert!(RunConfig::from_json(&two_sources).unwrap().validate().is_err());
        let planar = FIG2.replace(
            "\"output\"",
            r#""ensemble": {"generate": {"count": 10, "magnitude": {"constant": 1},
                 "orientation": {"planar_2d": {"normal": [0, 0, 1]}}}}, "output""#,
        );
        RunConfig::from_json(&planar).unwrap().validate().unwrap();
    }

    #[test]
    fn temperature_sweep_rescales_rates() {
        let c =
            RunConfig::from_json(&FIG2.replace("\"fields_gauss\"", "\"temperatures_mK\": [10, 20], \"fields_gauss\""))
                .unwrap();
        c.validate().unwrap();
        let m = c.rate_model(20.0).unwrap();
        assert!((m.gamma0() - 0.5).abs() < 1e-15 && (m.gamma_tilde() - 5e-6 * 16.0).abs() < 1e-18);
    }
}
