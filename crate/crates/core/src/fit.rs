//! Log-space least-squares fits of the disorder-averaged longitudinal
//! spectrum, with discrimination of the direct-relaxation exponent.
//!
//! Shape parameters (`Γ₀`, `γ̃`, `λ_max`, optionally `T_CW`) are searched by
//! a multi-start bounded simplex in log coordinates; the overall amplitude
//! enters every residual additively in log space and is solved for exactly
//! at each step. Each exponent candidate gets its own continuous fit.
//!
//! Across temperatures the reduced rates are rescaled from the reference
//! temperature (the first observation's): `Γ₀ ∝ T_ref/T` and
//! `γ̃ ∝ (T/T_ref)ⁿ`.

use rand::Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::Serialize;

use crate::disorder::{averaged_noise_parallel_closed, DisorderDistribution};
use crate::error::{Error, Result};
use crate::rng;
use crate::simplex::{minimize, NelderMead};
use crate::spin::{RateModel, SpinEnvironment, LAMBDA_MAX_LIMIT};

/// One measured (or synthesized) spectral value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub env: SpinEnvironment,
    pub x: f64,
    pub value: f64,
    /// Standard deviation of `ln value`; 1 when absent.
    pub sigma: Option<f64>,
}

/// Model parameters, rates at the reference temperature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FitParameters {
    pub amplitude: f64,
    pub gamma0: f64,
    pub gamma_tilde: f64,
    pub lambda_max: f64,
    /// Curie–Weiss temperature, K.
    pub t_cw: f64,
}

impl Default for FitParameters {
    fn default() -> Self {
        Self {
            amplitude: 1.0,
            gamma0: 1.0,
            gamma_tilde: 5e-6,
            lambda_max: 30.0,
            t_cw: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreeParameters {
    pub amplitude: bool,
    pub gamma0: bool,
    pub gamma_tilde: bool,
    pub lambda_max: bool,
    pub t_cw: bool,
}

impl Default for FreeParameters {
    fn default() -> Self {
        Self {
            amplitude: true,
            gamma0: true,
            gamma_tilde: true,
            lambda_max: true,
            t_cw: false,
        }
    }
}

/// Closed intervals for each shape parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ParameterBounds {
    pub gamma0: (f64, f64),
    pub gamma_tilde: (f64, f64),
    pub lambda_max: (f64, f64),
    pub t_cw: (f64, f64),
}

impl Default for ParameterBounds {
    fn default() -> Self {
        Self {
            gamma0: (1e-8, 1e4),
            gamma_tilde: (1e-16, 1e2),
            lambda_max: (1e-3, LAMBDA_MAX_LIMIT),
            t_cw: (-1.0, 0.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitProblem {
    pub observations: Vec<Observation>,
    pub bounds: ParameterBounds,
    pub free: FreeParameters,
    /// Values of parameters that are not free (and fallback initial values).
    pub fixed: FitParameters,
    pub candidates: Vec<u32>,
    pub starts: usize,
}

impl FitProblem {
    pub fn new(observations: Vec<Observation>) -> Self {
        Self {
            observations,
            bounds: ParameterBounds::default(),
            free: FreeParameters::default(),
            fixed: FitParameters::default(),
            candidates: vec![2, 4],
            starts: 8,
        }
    }

    pub fn reference_temperature(&self) -> f64 {
        self.observations.first().map_or(f64::NAN, |o| o.env.temperature())
    }

    fn free_count(&self) -> usize {
        let f = &self.free;
        [f.amplitude, f.gamma0, f.gamma_tilde, f.lambda_max, f.t_cw]
            .iter()
            .filter(|&&v| v)
            .count()
    }

    pub fn validate(&self) -> Result<()> {
        if self.observations.is_empty() {
            return Err(Error::invalid("observations", "no observations"));
        }
        let needed = 8 * self.free_count().max(1);
        if self.observations.len() < needed {
            return Err(Error::invalid(
                "observations",
                format!(
                    "{} observations for {} free parameters; at least {needed} needed",
                    self.observations.len(),
                    self.free_count()
                ),
            ));
        }
        for o in &self.observations {
            if !(o.value > 0.0 && o.value.is_finite()) {
                return Err(Error::invalid(
                    "observations",
                    format!("spectral values must be positive, got {}", o.value),
                ));
            }
            if !o.x.is_finite() {
                return Err(Error::invalid("observations", "frequencies must be finite"));
            }
            if let Some(s) = o.sigma {
                if !(s > 0.0 && s.is_finite()) {
                    return Err(Error::invalid(
                        "observations",
                        format!("sigma must be positive, got {s}"),
                    ));
                }
            }
        }
        if self.candidates.is_empty() || self.candidates.iter().any(|n| !matches!(n, 2 | 4)) {
            return Err(Error::invalid(
                "candidates",
                "exponent candidates must be a non-empty subset of {2, 4}",
            ));
        }
        if self.free.gamma_tilde && self.candidates.len() > 1 {
            let mut fields: Vec<u64> = self.observations.iter().map(|o| o.env.field().to_bits()).collect();
            fields.sort_unstable();
            fields.dedup();
            if fields.len() < 2 {
                return Err(Error::invalid(
                    "observations",
                    "discriminating the exponent with a free direct rate needs at least two field values",
                ));
            }
        }
        let b = &self.bounds;
        let f = &self.free;
        for (name, on, (lo, hi)) in [
            ("gamma0", f.gamma0, b.gamma0),
            ("gamma_tilde", f.gamma_tilde, b.gamma_tilde),
            ("lambda_max", f.lambda_max, b.lambda_max),
        ] {
            if on && !(lo > 0.0 && hi >= lo && hi.is_finite()) {
                return Err(Error::invalid(
                    name,
                    format!("bounds must satisfy 0 < lo <= hi, got ({lo}, {hi})"),
                ));
            }
        }
        if b.lambda_max.1 > LAMBDA_MAX_LIMIT {
            return Err(Error::invalid(
                "lambda_max",
                format!("upper bound above {LAMBDA_MAX_LIMIT}"),
            ));
        }
        let t_min = self
            .observations
            .iter()
            .map(|o| o.env.temperature())
            .fold(f64::INFINITY, f64::min);
        if self.free.t_cw && !(b.t_cw.0 <= b.t_cw.1 && b.t_cw.1 < t_min) {
            return Err(Error::invalid("t_cw", "bounds must lie below every temperature"));
        }
        if self.starts < 8 {
            return Err(Error::invalid("starts", "at least 8 starts are required"));
        }
        Ok(())
    }
}

/// Rate model at the temperature of `env`, rescaled from `t_ref`.
fn rates_at(params: &FitParameters, n: u32, env: &SpinEnvironment, t_ref: f64) -> Result<RateModel> {
    let ratio = env.temperature() / t_ref;
    RateModel::new(
        params.gamma0 / ratio,
        params.gamma_tilde * ratio.powi(n as i32),
        n,
        params.lambda_max,
    )
}

fn model_value(params: &FitParameters, n: u32, obs: &Observation, t_ref: f64) -> Result<f64> {
    let env = if params.t_cw != obs.env.curie_weiss_temperature() {
        obs.env.with_curie_weiss(params.t_cw)?
    } else {
        obs.env
    };
    let dist = DisorderDistribution::new(rates_at(params, n, &env, t_ref)?);
    Ok(params.amplitude * averaged_noise_parallel_closed(&dist, &env, obs.x)?)
}

/// `[ln S_model - ln S_obs] / σ` for every observation.
pub fn model_residuals(params: &FitParameters, n: u32, problem: &FitProblem) -> Result<Vec<f64>> {
    let b = &problem.bounds;
    let f = &problem.free;
    let inside = |free: bool, v: f64, (lo, hi): (f64, f64)| !free || (v >= lo && v <= hi);
    if !(params.amplitude > 0.0)
        || !inside(f.gamma0, params.gamma0, b.gamma0)
        || !inside(f.gamma_tilde, params.gamma_tilde, b.gamma_tilde)
        || !inside(f.lambda_max, params.lambda_max, b.lambda_max)
    {
        return Err(Error::invalid(
            "parameters",
            format!("{params:?} outside the fit bounds"),
        ));
    }
    let t_ref = problem.reference_temperature();
    problem
        .observations
        .iter()
        .map(|o| Ok((model_value(params, n, o, t_ref)?.ln() - o.value.ln()) / o.sigma.unwrap_or(1.0)))
        .collect()
}

/// Forward-model values on `grid` for every environment, multiplied by
/// `exp(ε)` with `ε ~ N(0, noise_level²)` from the stream `(seed, 0)`.
pub fn synthesize(
    params: &FitParameters,
    n: u32,
    envs: &[SpinEnvironment],
    grid: &[f64],
    noise_level: f64,
    seed: u64,
) -> Result<Vec<Observation>> {
    if !(noise_level >= 0.0 && noise_level.is_finite()) {
        return Err(Error::invalid(
            "noise_level",
            format!("must be >= 0, got {noise_level}"),
        ));
    }
    let Some(t_ref) = envs.first().map(|e| e.temperature()) else {
        return Ok(Vec::new());
    };
    let normal = Normal::new(0.0, noise_level).map_err(|e| Error::invalid("noise_level", e.to_string()))?;
    let mut stream = rng::stream(seed, 0);
    let mut out = Vec::with_capacity(envs.len() * grid.len());
    for env in envs {
        for &x in grid {
            let mut obs = Observation {
                env: *env,
                x,
                value: 0.0,
                sigma: None,
            };
            let exact = model_value(params, n, &obs, t_ref)?;
            obs.value = if noise_level > 0.0 {
                exact * normal.sample(&mut stream).exp()
            } else {
                exact
            };
            out.push(obs);
        }
    }
    Ok(out)
}

/// Crude one-dimensional uncertainties of `ln(parameter)` (linear for
/// `t_cw`) from the residual curvature along each axis; `None` where the
/// parameter is fixed or the curvature is not positive.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct CrudeUncertainties {
    pub gamma0: Option<f64>,
    pub gamma_tilde: Option<f64>,
    pub lambda_max: Option<f64>,
    pub t_cw: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateFit {
    pub n: u32,
    pub parameters: FitParameters,
    /// Mean squared (weighted) log residual.
    pub residual_norm: f64,
    pub uncertainties: CrudeUncertainties,
    pub evaluations: usize,
    pub restarts: usize,
    pub starts_converged: usize,
    pub termination: String,
    /// `λ_max` ended at its lower bound, so the data look like a single
    /// Lorentzian and `λ_max` is not determined.
    pub lambda_max_degenerate: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Selection {
    Selected(u32),
    /// Candidate norms within 1% of each other.
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FitResult {
    pub candidates: Vec<CandidateFit>,
    pub selection: Selection,
    pub reference_temperature: f64,
}

impl FitResult {
    pub fn selected(&self) -> Option<&CandidateFit> {
        match self.selection {
            Selection::Selected(n) => self.candidates.iter().find(|c| c.n == n),
            Selection::Indeterminate => None,
        }
    }
}

const TIE_TOLERANCE: f64 = 0.01;
const MAX_RESTARTS: usize = 10;

/// Fit every exponent candidate and select the best.
pub fn fit(problem: &FitProblem, seed: u64) -> Result<FitResult> {
    problem.validate()?;
    let candidates = problem
        .candidates
        .iter()
        .map(|&n| fit_candidate(problem, n, seed))
        .collect::<Result<Vec<_>>>()?;
    let selection = if candidates.len() == 1 {
        Selection::Selected(candidates[0].n)
    } else {
        let mut sorted: Vec<&CandidateFit> = candidates.iter().collect();
        sorted.sort_by(|a, b| a.residual_norm.total_cmp(&b.residual_norm).then(a.n.cmp(&b.n)));
        let (best, next) = (sorted[0].residual_norm, sorted[1].residual_norm);
        if next - best < TIE_TOLERANCE * best {
            Selection::Indeterminate
        } else {
            Selection::Selected(sorted[0].n)
        }
    };
    Ok(FitResult {
        candidates,
        selection,
        reference_temperature: problem.reference_temperature(),
    })
}

/// Maps between the simplex coordinates and physical parameters.
struct Layout<'a> {
    problem: &'a FitProblem,
    n: u32,
    t_ref: f64,
    log_obs: Vec<f64>,
    weights: Vec<f64>,
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Axis {
    Gamma0,
    GammaTilde,
    LambdaMax,
    TCw,
}

impl<'a> Layout<'a> {
    fn new(problem: &'a FitProblem, n: u32) -> Self {
        Self {
            problem,
            n,
            t_ref: problem.reference_temperature(),
            log_obs: problem.observations.iter().map(|o| o.value.ln()).collect(),
            weights: problem
                .observations
                .iter()
                .map(|o| o.sigma.map_or(1.0, |s| 1.0 / (s * s)))
                .collect(),
        }
    }

    fn axes(&self) -> Vec<Axis> {
        let f = &self.problem.free;
        [
            (f.gamma0, Axis::Gamma0),
            (f.gamma_tilde, Axis::GammaTilde),
            (f.lambda_max, Axis::LambdaMax),
            (f.t_cw, Axis::TCw),
        ]
        .into_iter()
        .filter_map(|(on, a)| on.then_some(a))
        .collect()
    }

    fn bounds(&self) -> (Vec<f64>, Vec<f64>) {
        let b = &self.problem.bounds;
        self.axes()
            .iter()
            .map(|a| match a {
                Axis::Gamma0 => (b.gamma0.0.ln(), b.gamma0.1.ln()),
                Axis::GammaTilde => (b.gamma_tilde.0.ln(), b.gamma_tilde.1.ln()),
                Axis::LambdaMax => (b.lambda_max.0.ln(), b.lambda_max.1.ln()),
                Axis::TCw => b.t_cw,
            })
            .unzip()
    }

    fn encode(&self, p: &FitParameters) -> Vec<f64> {
        self.axes()
            .iter()
            .map(|a| match a {
                Axis::Gamma0 => p.gamma0.ln(),
                Axis::GammaTilde => p.gamma_tilde.ln(),
                Axis::LambdaMax => p.lambda_max.ln(),
                Axis::TCw => p.t_cw,
            })
            .collect()
    }

    fn decode(&self, theta: &[f64]) -> FitParameters {
        let mut p = self.problem.fixed;
        for (a, v) in self.axes().iter().zip(theta) {
            match a {
                Axis::Gamma0 => p.gamma0 = v.exp(),
                Axis::GammaTilde => p.gamma_tilde = v.exp(),
                Axis::LambdaMax => p.lambda_max = v.exp(),
                Axis::TCw => p.t_cw = *v,
            }
        }
        p
    }

    /// Parameters with the amplitude solved for, and the mean squared
    /// weighted log residual.
    fn evaluate(&self, theta: &[f64]) -> Option<(FitParameters, f64)> {
        let mut p = self.decode(theta);
        p.amplitude = 1.0;
        let mut diffs = Vec::with_capacity(self.log_obs.len());
        for (o, lo) in self.problem.observations.iter().zip(&self.log_obs) {
            let m = model_value(&p, self.n, o, self.t_ref).ok()?;
            if !(m > 0.0 && m.is_finite()) {
                return None;
            }
            diffs.push(m.ln() - lo);
        }
        let log_amp = if self.problem.free.amplitude {
            let wsum: f64 = self.weights.iter().sum();
            -diffs.iter().zip(&self.weights).map(|(d, w)| d * w).sum::<f64>() / wsum
        } else {
            self.problem.fixed.amplitude.ln()
        };
        p.amplitude = log_amp.exp();
        let norm = diffs
            .iter()
            .zip(&self.weights)
            .map(|(d, w)| (d + log_amp).powi(2) * w)
            .sum::<f64>()
            / diffs.len() as f64;
        Some((p, norm))
    }

    fn objective(&self, theta: &[f64]) -> f64 {
        self.evaluate(theta).map_or(f64::INFINITY, |(_, v)| v)
    }
}

fn fit_candidate(problem: &FitProblem, n: u32, seed: u64) -> Result<CandidateFit> {
    let layout = Layout::new(problem, n);
    let (lower, upper) = layout.bounds();
    let guess = layout.encode(&initial_guess(problem, n));
    let dim = guess.len();

    if dim == 0 {
        let (parameters, residual_norm) = layout
            .evaluate(&[])
            .ok_or_else(|| Error::FitFailed("model could not be evaluated at the fixed parameters".into()))?;
        return Ok(CandidateFit {
            n,
            parameters,
            residual_norm,
            uncertainties: CrudeUncertainties::default(),
            evaluations: 1,
            restarts: 0,
            starts_converged: 1,
            termination: "no free shape parameters".into(),
            lambda_max_degenerate: false,
        });
    }

    let starts: Vec<Vec<f64>> = (0..problem.starts)
        .map(|k| {
            if k == 0 {
                return guess.clone();
            }
            let mut s = rng::stream(seed, (u64::from(n) << 32) | k as u64);
            guess
                .iter()
                .zip(lower.iter().zip(&upper))
                .map(|(g, (lo, hi))| {
                    let spread = (0.25 * (hi - lo)).min(3.0);
                    (g + spread * (2.0 * s.random::<f64>() - 1.0)).clamp(*lo, *hi)
                })
                .collect()
        })
        .collect();

    let options = NelderMead {
        max_evaluations: 600 * dim,
        x_tolerance: 1e-5,
        f_tolerance: 1e-10,
        initial_step: 0.7,
    };
    let runs: Vec<(crate::simplex::Minimum, usize, usize)> = starts
        .par_iter()
        .map(|start| {
            let objective = |t: &[f64]| layout.objective(t);
            let mut best = minimize(objective, start, &lower, &upper, &options);
            let mut evaluations = best.evaluations;
            let mut restarts = 0;
            // a fresh simplex around the best point either improves it or
            // confirms a minimum, which also covers flat valleys where the
            // simplex never shrinks below the step tolerance
            for _ in 0..MAX_RESTARTS {
                let again = minimize(
                    objective,
                    &best.point,
                    &lower,
                    &upper,
                    &NelderMead {
                        initial_step: 0.1,
                        ..options
                    },
                );
                evaluations += again.evaluations;
                restarts += 1;
                let gain = best.value - again.value;
                if gain >= 0.0 {
                    best.point = again.point;
                    best.value = again.value;
                }
                if gain <= 1e-6 * best.value + 1e-15 {
                    best.converged = true;
                    break;
                }
                best.converged = again.converged;
            }
            (best, evaluations, restarts)
        })
        .collect();

    let starts_converged = runs.iter().filter(|r| r.0.converged && r.0.value.is_finite()).count();
    let evaluations = runs.iter().map(|r| r.1).sum();
    let restarts = runs.iter().map(|r| r.2).sum();
    if starts_converged == 0 {
        let best = runs.iter().map(|r| r.0.value).fold(f64::INFINITY, f64::min);
        return Err(Error::FitFailed(format!(
            "n = {n}: none of {} starts converged ({evaluations} evaluations, best residual norm {best})",
            runs.len()
        )));
    }
    let (best, _, _) = runs
        .iter()
        .filter(|r| r.0.converged)
        .min_by(|a, b| a.0.value.total_cmp(&b.0.value))
        .expect("at least one converged start");
    let (parameters, residual_norm) = layout
        .evaluate(&best.point)
        .ok_or_else(|| Error::FitFailed("model failed at the optimum".into()))?;

    let axes = layout.axes();
    let mut uncertainties = CrudeUncertainties::default();
    let dof = (problem.observations.len() as f64 - (dim + usize::from(problem.free.amplitude)) as f64).max(1.0);
    let variance = residual_norm * problem.observations.len() as f64 / dof;
    for (i, axis) in axes.iter().enumerate() {
        let h = 1e-3;
        let at = |d: f64| {
            let mut t = best.point.clone();
            t[i] += d;
            layout.objective(&t)
        };
        let curvature = (at(h) - 2.0 * residual_norm + at(-h)) / (h * h);
        let sigma = (curvature > 0.0 && curvature.is_finite())
            .then(|| (2.0 * variance / (problem.observations.len() as f64 * curvature)).sqrt());
        match axis {
            Axis::Gamma0 => uncertainties.gamma0 = sigma,
            Axis::GammaTilde => uncertainties.gamma_tilde = sigma,
            Axis::LambdaMax => uncertainties.lambda_max = sigma,
            Axis::TCw => uncertainties.t_cw = sigma,
        }
    }
    let lambda_max_degenerate = axes
        .iter()
        .position(|a| *a == Axis::LambdaMax)
        .is_some_and(|i| best.point[i] - lower[i] < 1e-3);

    Ok(CandidateFit {
        n,
        parameters,
        residual_norm,
        uncertainties,
        evaluations,
        restarts,
        starts_converged,
        termination: if best.converged {
            "simplex converged".into()
        } else {
            "evaluation budget exhausted".into()
        },
        lambda_max_degenerate,
    })
}

/// Starting point read off the spectral shape: the knee where the lowest
/// field spectrum steepens past slope -1.5 gives `Γ₀`, the onset of its
/// slope -1 region gives `λ_max`, and the half-plateau point of the highest
/// field spectrum gives the direct rate.
fn initial_guess(problem: &FitProblem, n: u32) -> FitParameters {
    let t_ref = problem.reference_temperature();
    let mut guess = problem.fixed;
    let curves = curves_by_environment(&problem.observations);
    let Some(lowest) = curves.first() else {
        return guess;
    };
    let slopes: Vec<(f64, f64)> = lowest
        .points
        .windows(2)
        .filter(|w| w[1].0 > w[0].0)
        .map(|w| {
            (
                (w[0].0 * w[1].0).sqrt(),
                (w[1].1 / w[0].1).ln() / (w[1].0 / w[0].0).ln(),
            )
        })
        .collect();
    let t_scale = lowest.env.temperature() / t_ref;
    let x_max = lowest.points.last().map_or(1.0, |p| p.0);
    let knee = slopes.iter().find(|s| s.1 < -1.5).map_or(10.0 * x_max, |s| s.0);
    if problem.free.gamma0 {
        guess.gamma0 = knee * t_scale;
    }
    if problem.free.lambda_max {
        guess.lambda_max = match slopes.iter().position(|s| s.1 < -0.5) {
            Some(0) => (knee / lowest.points[0].0).ln() + 2.0,
            Some(i) => (knee / slopes[i].0).ln(),
            None => 1.0,
        };
    }
    if problem.free.gamma_tilde {
        if let Some(high) = curves.iter().rev().find(|c| c.env.reduced_field() > 0.0) {
            let plateau = high.points[0].1;
            let last = high.points.last().map_or(1.0, |p| p.0);
            let half = high
                .points
                .iter()
                .find(|p| p.1 < 0.5 * plateau)
                .map_or(10.0 * last, |p| p.0);
            let ratio = high.env.temperature() / t_ref;
            guess.gamma_tilde = half / high.env.reduced_field().powi(n as i32) / ratio.powi(n as i32);
        }
    }
    let b = &problem.bounds;
    guess.gamma0 = guess.gamma0.clamp(b.gamma0.0, b.gamma0.1);
    guess.gamma_tilde = guess.gamma_tilde.clamp(b.gamma_tilde.0, b.gamma_tilde.1);
    guess.lambda_max = guess.lambda_max.clamp(b.lambda_max.0, b.lambda_max.1);
    guess.t_cw = guess.t_cw.clamp(b.t_cw.0, b.t_cw.1);
    guess
}

struct Curve {
    env: SpinEnvironment,
    points: Vec<(f64, f64)>,
}

/// Positive-frequency observations grouped by environment, sorted by
/// reduced field.
fn curves_by_environment(observations: &[Observation]) -> Vec<Curve> {
    let mut curves: Vec<Curve> = Vec::new();
    for o in observations.iter().filter(|o| o.x > 0.0) {
        match curves.iter_mut().find(|c| c.env == o.env) {
            Some(c) => c.points.push((o.x, o.value)),
            None => curves.push(Curve {
                env: o.env,
                points: vec![(o.x, o.value)],
            }),
        }
    }
    for c in &mut curves {
        c.points.sort_by(|a, b| a.0.total_cmp(&b.0));
    }
    curves.sort_by(|a, b| a.env.reduced_field().total_cmp(&b.env.reduced_field()));
    curves
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectrum::log_grid;

    fn envs(fields: &[f64]) -> Vec<SpinEnvironment> {
        fields
            .iter()
            .map(|&b| SpinEnvironment::with_reduced_field(0.01, b).unwrap())
            .collect()
    }

    fn truth(gamma_tilde: f64) -> FitParameters {
        FitParameters {
            amplitude: 1.0,
            gamma0: 1.0,
            gamma_tilde,
            lambda_max: 30.0,
            t_cw: 0.0,
        }
    }

    fn rel(a: f64, b: f64) -> f64 {
        ((a - b) / b).abs()
    }

    #[test]
    fn exact_data_has_zero_residuals() {
        let grid = log_grid(1e-8, 1e-2, 4, false).unwrap();
        let obs = synthesize(&truth(5e-6), 4, &envs(&[0.0, 20.0]), &grid, 0.0, 1).unwrap();
        let problem = FitProblem::new(obs);
        let r = model_residuals(&truth(5e-6), 4, &problem).unwrap();
        assert!(r.iter().all(|v| v.abs() < 1e-14));
        let scaled = FitParameters {
            amplitude: 3.0,
            ..truth(5e-6)
        };
        let r = model_residuals(&scaled, 4, &problem).unwrap();
        assert!(r.iter().all(|v| (v - 3f64.ln()).abs() < 1e-12));
        let outside = FitParameters {
            lambda_max: 400.0,
            ..truth(5e-6)
        };
        assert!(model_residuals(&outside, 4, &problem).is_err());
    }

    #[test]
    fn synthesized_noise_has_requested_spread() {
        let grid = log_grid(1e-10, 1e-2, 30, false).unwrap();
        let obs = synthesize(&truth(5e-6), 4, &envs(&[0.0]), &grid, 0.05, 9).unwrap();
        assert!(obs.len() >= 200);
        let exact = synthesize(&truth(5e-6), 4, &envs(&[0.0]), &grid, 0.0, 9).unwrap();
        let rms = (obs
            .iter()
            .zip(&exact)
            .map(|(a, b)| (a.value / b.value).ln().powi(2))
            .sum::<f64>()
            / obs.len() as f64)
            .sqrt();
        assert!((rms - 0.05).abs() < 0.01, "{rms}");
        assert_eq!(obs, synthesize(&truth(5e-6), 4, &envs(&[0.0]), &grid, 0.05, 9).unwrap());
    }

    #[test]
    fn round_trip_selects_quartic_exponent() {
        let grid = log_grid(1e-10, 1e-2, 4, false).unwrap();
        let obs = synthesize(&truth(5e-6), 4, &envs(&[0.0, 10.0, 20.0, 30.0]), &grid, 0.0, 0).unwrap();
        let result = fit(&FitProblem::new(obs), 3).unwrap();
        assert_eq!(result.selection, Selection::Selected(4));
        let p = result.selected().unwrap().parameters;
        assert!(
            rel(p.gamma0, 1.0) < 0.01 && rel(p.gamma_tilde, 5e-6) < 0.01 && rel(p.lambda_max, 30.0) < 0.01,
            "{p:?}"
        );
        assert!(rel(p.amplitude, 1.0) < 0.01);
    }

    #[test]
    fn round_trip_selects_quadratic_exponent() {
        let grid = log_grid(1e-10, 1e-2, 4, false).unwrap();
        let obs = synthesize(&truth(4.5e-3), 2, &envs(&[0.0, 10.0, 20.0, 30.0]), &grid, 0.0, 0).unwrap();
        let result = fit(&FitProblem::new(obs), 3).unwrap();
        assert_eq!(result.selection, Selection::Selected(2));
    }

    #[test]
    fn scaling_observations_changes_only_amplitude() {
        let grid = log_grid(1e-10, 1e-2, 4, false).unwrap();
        let obs = synthesize(&truth(5e-6), 4, &envs(&[0.0, 10.0, 20.0, 30.0]), &grid, 0.02, 5).unwrap();
        let mut problem = FitProblem::new(obs.clone());
        problem.candidates = vec![4];
        let base = fit(&problem, 1).unwrap();
        problem.observations = obs
            .iter()
            .map(|o| Observation {
                value: 7.0 * o.value,
                ..*o
            })
            .collect();
        let scaled = fit(&problem, 1).unwrap();
        let (a, b) = (base.candidates[0].parameters, scaled.candidates[0].parameters);
        assert!(rel(b.amplitude, 7.0 * a.amplitude) < 1e-6);
        assert!(
            rel(a.gamma0, b.gamma0) < 1e-6
                && rel(a.gamma_tilde, b.gamma_tilde) < 1e-6
                && rel(a.lambda_max, b.lambda_max) < 1e-6
        );
        assert_eq!(
            base,
            fit(
                &FitProblem {
                    observations: obs,
                    ..problem.clone()
                },
                1
            )
            .unwrap()
        );
    }

    #[test]
    fn single_lorentzian_flags_degenerate_width() {
        let gen = FitParameters {
            amplitude: 2.0,
            gamma0: 1e-3,
            gamma_tilde: 0.0,
            lambda_max: 1e-6,
            t_cw: 0.0,
        };
        let grid = log_grid(1e-6, 1.0, 8, false).unwrap();
        let obs = synthesize(&gen, 4, &envs(&[0.0]), &grid, 0.0, 0).unwrap();
        let mut problem = FitProblem::new(obs);
        problem.free.gamma_tilde = false;
        problem.fixed.gamma_tilde = 0.0;
        problem.candidates = vec![4];
        let result = fit(&problem, 0).unwrap();
        let c = &result.candidates[0];
        assert!(rel(c.parameters.gamma0, 1e-3) < 0.02, "{:?}", c.parameters);
        assert!(c.lambda_max_degenerate);
    }

    #[test]
    fn validation() {
        let grid = log_grid(1e-4, 1e-2, 4, false).unwrap();
        let obs = synthesize(&truth(5e-6), 4, &envs(&[0.0]), &grid, 0.0, 0).unwrap();
        assert!(FitProblem::new(obs.clone()).validate().is_err());
        let grid = log_grid(1e-10, 1e-2, 4, false).unwrap();
        let single_field = synthesize(&truth(5e-6), 4, &envs(&[10.0]), &grid, 0.0, 0).unwrap();
        assert!(FitProblem::new(single_field.clone()).validate().is_err());
        let mut p = FitProblem::new(single_field);
        p.candidates = vec![3];
        assert!(p.validate().is_err());
    }
}
