//! The command-line subcommands as library calls. Each returns the paths it
//! wrote.

use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::bloch::{bloch_response, BlochSettings, Drive};
use crate::config::{FitConfig, Format, Normalization, RunConfig};
use crate::disorder::{
    averaged_noise_mc, averaged_noise_parallel_closed, averaged_noise_parallel_quadrature, AveragingMethod,
    DisorderDistribution,
};
use crate::error::{Error, Result};
use crate::fit::{fit as run_fit, FitProblem};
use crate::output::{read_observations, read_spectrum_csv, write_json, write_sweep, write_table};
use crate::spectrum::{linear_grid, log_grid, log_slopes, Channel, Spectrum};
use crate::spin::{single_spin_noise_parallel, single_spin_noise_perpendicular, RelaxationRates, SpinEnvironment};
use crate::sweep::{apply_seed, run_sweep, SweepKind, SweepOutput};
use crate::units::{convert_units, Unit};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CommandOptions {
    pub config: PathBuf,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub format: Option<Format>,
    /// Extra input file (observations for `fit`, a spectrum CSV for `slope`).
    pub input: Option<PathBuf>,
}

struct Loaded {
    config: RunConfig,
    base: PathBuf,
    out: PathBuf,
    format: Format,
}

fn load(opts: &CommandOptions) -> Result<Loaded> {
    let mut config = RunConfig::load(&opts.config)?;
    if let Some(seed) = opts.seed {
        apply_seed(&mut config, seed);
    }
    if let Some(f) = opts.format {
        config.output.format = f;
    }
    config.validate()?;
    let base = opts.config.parent().map(Path::to_path_buf).unwrap_or_default();
    let out = match (&opts.out, &config.output.directory) {
        (Some(o), _) => o.clone(),
        (None, Some(d)) => base.join(d),
        (None, None) => PathBuf::from("."),
    };
    std::fs::create_dir_all(&out).map_err(|e| Error::io(&out, e))?;
    Ok(Loaded {
        format: config.output.format,
        config,
        base,
        out,
    })
}

/// Disorder-averaged spin spectra for every configured field.
pub fn spectrum(opts: &CommandOptions) -> Result<Vec<PathBuf>> {
    let l = load(opts)?;
    let output = run_sweep(&l.config, SweepKind::Spin, &l.base)?;
    write_sweep(&output, &l.out, "spectrum", l.format)
}

/// Device flux noise in Wb²/Hz, plus a (μΦ₀)²/Hz copy unless normalized.
pub fn flux(opts: &CommandOptions) -> Result<Vec<PathBuf>> {
    let l = load(opts)?;
    let output = run_sweep(&l.config, SweepKind::Flux, &l.base)?;
    let mut paths = write_sweep(&output, &l.out, "flux", l.format)?;
    if l.config.output.normalization == Normalization::None {
        paths.extend(write_sweep(&in_micro_phi0(&output)?, &l.out, "flux_uphi0", l.format)?);
    }
    Ok(paths)
}

fn in_micro_phi0(output: &SweepOutput) -> Result<SweepOutput> {
    let mut converted = output.clone();
    // the flux conversion does not depend on the environment
    let env = SpinEnvironment::with_reduced_field(1.0, 0.0)?;
    let f = convert_units(1.0, Unit::WeberSqPerHz, Unit::MicroPhi0SqPerHz, &env)?;
    for r in &mut converted.results {
        r.parallel = r.parallel.scaled(f, Unit::MicroPhi0SqPerHz)?;
        r.perpendicular = r.perpendicular.scaled(f, Unit::MicroPhi0SqPerHz)?;
        r.total = r.total.scaled(f, Unit::MicroPhi0SqPerHz)?;
        for s in [&mut r.std_error_parallel, &mut r.std_error_perpendicular]
            .into_iter()
            .flatten()
        {
            s.iter_mut().for_each(|v| *v *= f);
        }
    }
    Ok(converted)
}

#[derive(Serialize)]
struct JsonTable<'a> {
    header: &'a [&'a str],
    rows: &'a [Vec<f64>],
}

fn emit_table(out: &Path, stem: &str, format: Format, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
    match format {
        Format::Csv => {
            let path = out.join(format!("{stem}.csv"));
            write_table(&path, header, rows)?;
            Ok(path)
        }
        Format::Json => {
            let path = out.join(format!("{stem}.json"));
            write_json(&JsonTable { header, rows }, &path)?;
            Ok(path)
        }
    }
}

fn relative_error(analytic: f64, other: f64) -> f64 {
    if analytic == 0.0 {
        (other - analytic).abs()
    } else {
        ((other - analytic) / analytic).abs()
    }
}

/// Verification tables: Bloch/FDT against both single-spin channels, and
/// Monte Carlo and quadrature against the closed-form disorder average.
/// Uses the first configured temperature and field.
pub fn oracle(opts: &CommandOptions) -> Result<Vec<PathBuf>> {
    let l = load(opts)?;
    let c = &l.config;
    let settings = c.oracle.clone().unwrap_or_default();
    let t = c.temperatures_mk()[0];
    let field = c.environment.fields_gauss.first().copied().unwrap_or(0.0);
    let env = c.environment_at(t, field)?;
    let model = c.rate_model(t)?;
    let rates = model.relaxation_rates(&env, 0.0)?;
    let mut paths = Vec::new();

    let bloch = BlochSettings {
        step_fraction: settings.step_fraction,
        ..BlochSettings::default()
    };
    let header = ["x", "analytic", "oracle", "relative_error"];
    let g = rates.parallel;
    let xs = log_grid(0.01 * g, 100.0 * g, 1, false)?;
    let xs = resample(&xs, settings.points);
    let rows = bloch_rows(&env, rates, &xs, Drive::Longitudinal, &bloch, |x| {
        single_spin_noise_parallel(&env, rates.parallel, x)
    })?;
    paths.push(emit_table(&l.out, "oracle_bloch_parallel", l.format, &header, &rows)?);

    let gp = rates.perpendicular;
    let b = env.reduced_field();
    let xs = if b > 10.0 * gp {
        linear_grid(b - 5.0 * gp, b + 5.0 * gp, settings.points)?
    } else {
        resample(&log_grid(0.01 * gp, 100.0 * gp.max(b), 1, false)?, settings.points)
    };
    let rows = bloch_rows(&env, rates, &xs, Drive::Transverse, &bloch, |x| {
        single_spin_noise_perpendicular(&env, rates.perpendicular, x)
    })?;
    paths.push(emit_table(
        &l.out,
        "oracle_bloch_perpendicular",
        l.format,
        &header,
        &rows,
    )?);

    let dist = DisorderDistribution::new(model);
    let grid = c.grid_points()?;
    let seed = match c.method {
        AveragingMethod::MonteCarlo { seed, .. } => seed,
        _ => opts.seed.unwrap_or(0),
    };
    let rows = grid
        .iter()
        .map(|&x| {
            let closed = averaged_noise_parallel_closed(&dist, &env, x)?;
            let (mc, _) = averaged_noise_mc(&dist, &env, x, settings.mc_samples, seed)?;
            let z = if mc.std_error > 0.0 {
                (mc.mean - closed) / mc.std_error
            } else {
                0.0
            };
            Ok(vec![x, closed, mc.mean, mc.std_error, z])
        })
        .collect::<Result<Vec<_>>>()?;
    paths.push(emit_table(
        &l.out,
        "oracle_monte_carlo",
        l.format,
        &["x", "closed_form", "monte_carlo", "std_error", "z_score"],
        &rows,
    )?);

    let tolerance = match c.method {
        AveragingMethod::Quadrature { tolerance } => tolerance,
        _ => 1e-10,
    };
    let rows = grid
        .iter()
        .map(|&x| {
            let closed = averaged_noise_parallel_closed(&dist, &env, x)?;
            let quad = averaged_noise_parallel_quadrature(&dist, &env, x, tolerance)?;
            Ok(vec![x, closed, quad, relative_error(closed, quad)])
        })
        .collect::<Result<Vec<_>>>()?;
    paths.push(emit_table(
        &l.out,
        "oracle_quadrature",
        l.format,
        &["x", "closed_form", "quadrature", "relative_error"],
        &rows,
    )?);
    Ok(paths)
}

/// `n` log-spaced points between the ends of `grid`.
fn resample(grid: &[f64], n: usize) -> Vec<f64> {
    let (a, b) = (grid[0].ln(), grid[grid.len() - 1].ln());
    (0..n)
        .map(|i| {
            if i + 1 == n {
                grid[grid.len() - 1]
            } else {
                (a + (b - a) * i as f64 / (n - 1) as f64).exp()
            }
        })
        .collect()
}

fn bloch_rows(
    env: &SpinEnvironment,
    rates: RelaxationRates,
    xs: &[f64],
    drive: Drive,
    settings: &BlochSettings,
    analytic: impl Fn(f64) -> Result<f64>,
) -> Result<Vec<Vec<f64>>> {
    xs.iter()
        .map(|&x| {
            let a = analytic(x)?;
            let o = bloch_response(env, rates, x, drive, settings)?.noise;
            Ok(vec![x, a, o, relative_error(a, o)])
        })
        .collect()
}

/// Fit the observations (from `--input` or the config's fit block) and
/// write the result as JSON.
pub fn fit(opts: &CommandOptions) -> Result<Vec<PathBuf>> {
    let l = load(opts)?;
    let c = &l.config;
    let fc = c.fit.clone().unwrap_or(FitConfig {
        observations: None,
        candidates: vec![2, 4],
        free_t_cw: false,
        starts: 8,
        lambda_max_bounds: None,
    });
    let path = match (&opts.input, &fc.observations) {
        (Some(p), _) => p.clone(),
        (None, Some(p)) => l.base.join(p),
        (None, None) => return Err(Error::Config("fit needs --input or fit.observations".into())),
    };
    let e = &c.environment;
    let (observations, _) = read_observations(&path, e.temperature_mK * 1e-3, e.t_cw_mK * 1e-3, e.g_factor)?;
    let all_zero_field = observations.iter().all(|o| o.env.field() == 0.0);
    let mut problem = FitProblem::new(observations);
    problem.candidates = fc.candidates.clone();
    problem.starts = fc.starts;
    problem.free.t_cw = fc.free_t_cw;
    if all_zero_field {
        problem.free.gamma_tilde = false;
        problem.candidates.truncate(1);
    }
    if let Some(bounds) = fc.lambda_max_bounds {
        problem.bounds.lambda_max = bounds;
    }
    if let Some(r) = &c.rates {
        problem.fixed.gamma0 = r.gamma0;
        problem.fixed.gamma_tilde = r.gamma_tilde;
        problem.fixed.lambda_max = r.lambda_max;
    }
    problem.fixed.t_cw = e.t_cw_mK * 1e-3;
    if fc.free_t_cw {
        problem.bounds.t_cw = (-e.temperature_mK * 1e-3, 0.99 * e.temperature_mK * 1e-3);
    }
    let result = run_fit(&problem, opts.seed.unwrap_or(0))?;
    let out = l.out.join("fit.json");
    write_json(&result, &out)?;
    Ok(vec![out])
}

/// Local exponent `α(x) = -d ln S/d ln x` of the total channel per field,
/// from `--input` (a spectrum CSV) or from a fresh spin sweep.
pub fn slope(opts: &CommandOptions) -> Result<Vec<PathBuf>> {
    let l = load(opts)?;
    let mut curves: Vec<(f64, Spectrum)> = Vec::new();
    if let Some(input) = &opts.input {
        let rows = read_spectrum_csv(input)?;
        let mut fields: Vec<f64> = Vec::new();
        for r in &rows {
            if !fields.contains(&r.field_gauss) {
                fields.push(r.field_gauss);
            }
        }
        for f in fields {
            let pts: Vec<(f64, f64)> = rows
                .iter()
                .filter(|r| r.field_gauss == f && r.x > 0.0)
                .map(|r| (r.x, r.S_total))
                .collect();
            let (grid, values) = pts.into_iter().unzip();
            curves.push((f, Spectrum::new(grid, values, Channel::Total, Unit::Normalized)?));
        }
    } else {
        let output = run_sweep(&l.config, SweepKind::Spin, &l.base)?;
        for r in output.results {
            let pts: Vec<(f64, f64)> = r.total.iter().filter(|p| p.0 > 0.0).collect();
            let (grid, values) = pts.into_iter().unzip();
            curves.push((
                r.field_gauss,
                Spectrum::new(grid, values, Channel::Total, r.total.unit())?,
            ));
        }
    }
    let rows: Vec<Vec<f64>> = curves
        .iter()
        .flat_map(|(f, s)| log_slopes(s).into_iter().map(move |(x, a)| vec![*f, x, a]))
        .collect();
    Ok(vec![emit_table(
        &l.out,
        "slope",
        l.format,
        &["field_gauss", "x", "alpha"],
        &rows,
    )?])
}
