//! Field and temperature sweeps driven by a [`RunConfig`].

use std::path::Path;

use serde::Serialize;

use crate::config::{Normalization, RunConfig};
use crate::disorder::{averaged_spectrum, AveragingMethod, DisorderDistribution, DEFAULT_TOLERANCE};
use crate::error::{Error, Result};
use crate::flux::{assemble_flux_noise, assemble_flux_noise_per_spin};
use crate::spectrum::{Channel, Spectrum};
use crate::units::Unit;

/// What a sweep reports per field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepKind {
    /// Disorder-averaged spin noise; the total is the longitudinal channel,
    /// i.e. a flux vector along the field.
    Spin,
    /// Device flux noise of the configured ensemble.
    Flux,
}

/// All channels at one (temperature, field) point.
#[derive(Debug, Clone, PartialEq)]
pub struct FieldResult {
    pub temperature_mk: f64,
    pub field_gauss: f64,
    pub reduced_field: f64,
    pub parallel: Spectrum,
    pub perpendicular: Spectrum,
    pub total: Spectrum,
    pub std_error_parallel: Option<Vec<f64>>,
    pub std_error_perpendicular: Option<Vec<f64>>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Metadata {
    pub program: String,
    pub version: String,
    pub kind: SweepKind,
    pub method_parallel: AveragingMethod,
    pub method_perpendicular: AveragingMethod,
    pub method_seed: Option<u64>,
    pub ensemble_seed: Option<u64>,
    pub spin_count: Option<usize>,
    /// Zero-field total at `x_min` per temperature, when normalizing.
    pub normalization_reference: Vec<f64>,
    pub config: RunConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepOutput {
    pub metadata: Metadata,
    pub results: Vec<FieldResult>,
}

/// Replace every seed in the config by `seed`.
pub fn apply_seed(config: &mut RunConfig, seed: u64) {
    if let AveragingMethod::MonteCarlo { seed: s, .. } = &mut config.method {
        *s = seed;
    }
    if let Some(g) = config.ensemble.as_mut().and_then(|e| e.generate.as_mut()) {
        g.seed = seed;
    }
}

/// Evaluate every (temperature, field) point of the config. `base` resolves
/// relative paths inside the config.
pub fn run_sweep(config: &RunConfig, kind: SweepKind, base: &Path) -> Result<SweepOutput> {
    config.validate()?;
    let grid = config.grid_points()?;
    let ensemble = match kind {
        SweepKind::Spin => None,
        SweepKind::Flux => Some(
            config
                .flux_ensemble(base, None)?
                .ok_or_else(|| Error::Config("the flux command needs an ensemble block".into()))?,
        ),
    };
    let per_spin = config.ensemble.as_ref().is_some_and(|e| e.per_spin);
    let ensemble_seed = config
        .ensemble
        .as_ref()
        .and_then(|e| e.generate.as_ref())
        .map(|g| g.seed);

    let mut results = Vec::new();
    let mut references = Vec::new();
    for t in config.temperatures_mk() {
        let model = config.rate_model(t)?;
        let dist = DisorderDistribution::new(model);
        let evaluate = |field: f64| -> Result<FieldResult> {
            let env = config.environment_at(t, field)?;
            let par = averaged_spectrum(&dist, &env, &grid, Channel::Parallel, config.method)?;
            let perp = averaged_spectrum(&dist, &env, &grid, Channel::Perpendicular, config.method)?;
            let (parallel, perpendicular, total, warnings) = match &ensemble {
                None => {
                    let total = Spectrum::new(
                        grid.clone(),
                        par.spectrum.values().to_vec(),
                        Channel::Total,
                        Unit::ReducedNoise,
                    )?;
                    (par.spectrum.clone(), perp.spectrum.clone(), total, Vec::new())
                }
                Some(e) if per_spin => {
                    let seed = ensemble_seed.unwrap_or(0);
                    let f = assemble_flux_noise_per_spin(e, &dist, &env, &grid, seed)?;
                    (f.parallel, f.perpendicular, f.total, f.warnings)
                }
                Some(e) => {
                    let f = assemble_flux_noise(e, &par.spectrum, &perp.spectrum, &env)?;
                    (f.parallel, f.perpendicular, f.total, f.warnings)
                }
            };
            Ok(FieldResult {
                temperature_mk: t,
                field_gauss: field,
                reduced_field: env.reduced_field(),
                parallel,
                perpendicular,
                total,
                std_error_parallel: par.std_errors,
                std_error_perpendicular: perp.std_errors,
                warnings,
            })
        };
        let mut block = config
            .environment
            .fields_gauss
            .iter()
            .map(|&f| evaluate(f))
            .collect::<Result<Vec<_>>>()?;
        if config.output.normalization == Normalization::B0AtXmin {
            let x_min = config.grid.as_ref().expect("grid validated").x_min;
            let idx = grid.iter().position(|&x| x == x_min).expect("log grid contains x_min");
            let reference = match block.iter().find(|r| r.field_gauss == 0.0) {
                Some(r) => r.total.values()[idx],
                None => evaluate(0.0)?.total.values()[idx],
            };
            if !(reference > 0.0) {
                return Err(Error::invalid(
                    "normalization",
                    "zero-field reference value is not positive",
                ));
            }
            for r in &mut block {
                normalize(r, reference)?;
            }
            references.push(reference);
        }
        results.extend(block);
    }

    Ok(SweepOutput {
        metadata: Metadata {
            program: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            kind,
            method_parallel: config.method,
            method_perpendicular: match config.method {
                AveragingMethod::ClosedForm => AveragingMethod::Quadrature {
                    tolerance: DEFAULT_TOLERANCE,
                },
                m => m,
            },
            method_seed: match config.method {
                AveragingMethod::MonteCarlo { seed, .. } => Some(seed),
                _ => None,
            },
            ensemble_seed: if kind == SweepKind::Flux { ensemble_seed } else { None },
            spin_count: ensemble.as_ref().map(|e| e.len()),
            normalization_reference: references,
            config: config.clone(),
        },
        results,
    })
}

fn normalize(r: &mut FieldResult, reference: f64) -> Result<()> {
    let f = 1.0 / reference;
    r.parallel = r.parallel.scaled(f, Unit::Normalized)?;
    r.perpendicular = r.perpendicular.scaled(f, Unit::Normalized)?;
    // exact division so the reference point lands on 1.0
    let total: Vec<f64> = r.total.values().iter().map(|v| v / reference).collect();
    r.total = Spectrum::new(r.total.grid().to_vec(), total, Channel::Total, Unit::Normalized)?;
    for s in [&mut r.std_error_parallel, &mut r.std_error_perpendicular]
        .into_iter()
        .flatten()
    {
        s.iter_mut().for_each(|v| *v /= reference);
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(extra: &str) -> RunConfig {
        RunConfig::from_json(&format!(
            r#"{{
            "environment": {{"temperature_mK": 10, "fields_gauss": [0, 150]}},
            "rates": {{"gamma0": 1, "gamma_tilde": 5e-6, "n": 4, "lambda_max": 30}},
            "grid": {{"x_min": 1e-10, "x_max": 1e-2, "points_per_decade": 4}}
            {extra}
        }}"#
        ))
        .unwrap()
    }

    #[test]
    fn normalized_zero_field_curve_starts_at_one() {
        let c = config(r#", "output": {"normalization": "b0_at_xmin"}"#);
        let out = run_sweep(&c, SweepKind::Spin, Path::new(".")).unwrap();
        assert_eq!(out.results.len(), 2);
        assert_eq!(out.results[0].total.values()[0], 1.0);
        assert_eq!(out.results[0].total.unit(), Unit::Normalized);
        assert!(out.results[1].total.values()[0] < 1.0);
        assert_eq!(
            out.metadata.method_perpendicular,
            AveragingMethod::Quadrature { tolerance: 1e-8 }
        );
    }

    #[test]
    fn reference_is_computed_when_zero_field_is_absent() {
        let mut c = config(r#", "output": {"normalization": "b0_at_xmin"}"#);
        c.environment.fields_gauss = vec![150.0];
        let out = run_sweep(&c, SweepKind::Spin, Path::new(".")).unwrap();
        let full = run_sweep(
            &config(r#", "output": {"normalization": "b0_at_xmin"}"#),
            SweepKind::Spin,
            Path::new("."),
        )
        .unwrap();
        assert_eq!(out.results[0].total, full.results[1].total);
    }

    #[test]
    fn monte_carlo_agrees_with_closed_form() {
        // the per-sample spread is about 4x the mean, so 1% needs ~1e6 samples
        let mut closed_config = config("");
        closed_config.grid.as_mut().unwrap().x_min = 1e-6;
        let closed = run_sweep(&closed_config, SweepKind::Spin, Path::new(".")).unwrap();
        let mut c = config(r#", "method": {"monte_carlo": {"samples": 2000000, "seed": 1}}"#);
        c.grid.as_mut().unwrap().x_min = 1e-6;
        let mc = run_sweep(&c, SweepKind::Spin, Path::new(".")).unwrap();
        for (a, b) in closed.results.iter().zip(&mc.results) {
            for (u, v) in a.parallel.values().iter().zip(b.parallel.values()) {
                assert!(((u - v) / u).abs() < 0.01, "{u} {v}");
            }
        }
        assert_eq!(mc.metadata.method_seed, Some(1));
    }

    #[test]
    fn flux_sweep_needs_an_ensemble() {
        assert!(run_sweep(&config(""), SweepKind::Flux, Path::new(".")).is_err());
        let c = config(r#", "ensemble": {"vectors": [[0, 0, 1e-20], [1e-20, 0, 0]]}"#);
        let out = run_sweep(&c, SweepKind::Flux, Path::new(".")).unwrap();
        assert_eq!(out.metadata.spin_count, Some(2));
        assert_eq!(out.results[0].total.unit(), Unit::WeberSqPerHz);
    }

    #[test]
    fn seed_override_reaches_every_stream() {
        let mut c = config(
            r#", "method": {"monte_carlo": {"samples": 10, "seed": 1}},
               "ensemble": {"generate": {"count": 3, "magnitude": {"constant": 1e-20}, "orientation": "isotropic_3d", "seed": 2}}"#,
        );
        apply_seed(&mut c, 99);
        let out = run_sweep(&c, SweepKind::Flux, Path::new(".")).unwrap();
        assert_eq!(
            (out.metadata.method_seed, out.metadata.ensemble_seed),
            (Some(99), Some(99))
        );
    }
}
