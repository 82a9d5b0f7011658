//! Device flux noise from per-spin spectra and flux vectors.
//!
//! Each spin contributes `|F·B̂|² S∥ + |F×B̂|² S⊥`; cross-spin correlations
//! are neglected. Band-power helpers quantify how a field pushes the
//! transverse contribution out of the low-frequency band.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::disorder::DisorderDistribution;
use crate::error::{Error, Result};
use crate::rng;
use crate::spectrum::{Channel, Spectrum};
use crate::spin::{
    chi_parallel_static, chi_perpendicular_static, parallel_noise, perpendicular_noise, SpinEnvironment,
};
use crate::units::{convert_units, Unit, TESLA_PER_GAUSS};

/// Per-spin flux coupling `gμ_B B_I(R)/I`, Wb per unit spin.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FluxVector([f64; 3]);

impl FluxVector {
    pub fn new(components: [f64; 3]) -> Result<Self> {
        if components.iter().all(|c| c.is_finite()) {
            Ok(Self(components))
        } else {
            Err(Error::invalid(
                "flux_vector",
                format!("components must be finite, got {components:?}"),
            ))
        }
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    pub fn norm_squared(&self) -> f64 {
        dot(&self.0, &self.0)
    }
}

/// A direction, normalized to 1 within 1e-12.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnitVector([f64; 3]);

impl UnitVector {
    pub fn new(v: [f64; 3]) -> Result<Self> {
        let n = dot(&v, &v).sqrt();
        if (n - 1.0).abs() > 1e-12 || !n.is_finite() {
            return Err(Error::invalid("direction", format!("must be a unit vector, |v| = {n}")));
        }
        Ok(Self(v))
    }

    /// Normalize any non-zero vector.
    pub fn normalize(v: [f64; 3]) -> Result<Self> {
        let n = dot(&v, &v).sqrt();
        if !(n > 0.0 && n.is_finite()) {
            return Err(Error::invalid(
                "direction",
                "cannot normalize a zero or non-finite vector",
            ));
        }
        Ok(Self([v[0] / n, v[1] / n, v[2] / n]))
    }

    pub fn z() -> Self {
        Self([0.0, 0.0, 1.0])
    }

    pub fn components(&self) -> [f64; 3] {
        self.0
    }

    /// Some unit vector perpendicular to this one.
    pub fn perpendicular(&self) -> Self {
        let v = self.0;
        let axis = if v[0].abs() <= v[1].abs() && v[0].abs() <= v[2].abs() {
            [1.0, 0.0, 0.0]
        } else if v[1].abs() <= v[2].abs() {
            [0.0, 1.0, 0.0]
        } else {
            [0.0, 0.0, 1.0]
        };
        Self::normalize(cross(&v, &axis)).expect("axis chosen least aligned")
    }
}

fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

/// Split `|F|²` into `(|F·B̂|², |F×B̂|²)`.
pub fn decompose(f: &FluxVector, b_hat: &UnitVector) -> (f64, f64) {
    let par = dot(&f.0, &b_hat.0);
    let c = cross(&f.0, &b_hat.0);
    (par * par, dot(&c, &c))
}

/// Neumaier-compensated sum.
pub(crate) fn compensated_sum(values: impl IntoIterator<Item = f64>) -> f64 {
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for v in values {
        let t = sum + v;
        if sum.abs() >= v.abs() {
            comp += (sum - t) + v;
        } else {
            comp += (v - t) + sum;
        }
        sum = t;
    }
    sum + comp
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Orientation {
    #[serde(rename = "isotropic_3d")]
    Isotropic3d,
    FixedParallel,
    FixedPerpendicular,
    /// Uniform in the plane perpendicular to `normal`.
    #[serde(rename = "planar_2d")]
    Planar2d {
        normal: [f64; 3],
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Magnitude {
    /// Every vector has this length, Wb.
    Constant(f64),
    /// Piecewise-uniform distribution: bin `i` spans `edges[i]..edges[i+1]`
    /// with relative weight `weights[i]`.
    Histogram { edges: Vec<f64>, weights: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum SpinCount {
    Count(u64),
    /// Spins per m² times area in m², rounded half-to-even.
    Density {
        areal_density: f64,
        area: f64,
    },
}

impl SpinCount {
    pub fn resolve(&self) -> Result<u64> {
        let n = match *self {
            SpinCount::Count(n) => n,
            SpinCount::Density { areal_density, area } => {
                if !(areal_density > 0.0 && area > 0.0) || !(areal_density * area).is_finite() {
                    return Err(Error::invalid("areal_density", "density and area must be positive"));
                }
                (areal_density * area).round_ties_even() as u64
            }
        };
        if n == 0 {
            return Err(Error::invalid("count", "ensemble must contain at least one spin"));
        }
        Ok(n)
    }
}

/// Recipe for a random ensemble of flux vectors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSpec {
    pub count: SpinCount,
    pub magnitude: Magnitude,
    pub orientation: Orientation,
    #[serde(default)]
    pub seed: u64,
}

/// Flux vectors of every spin plus the field direction they are resolved
/// against.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxEnsemble {
    vectors: Vec<FluxVector>,
    field_direction: UnitVector,
}

impl FluxEnsemble {
    pub fn explicit(vectors: Vec<FluxVector>, field_direction: UnitVector) -> Result<Self> {
        if vectors.is_empty() {
            return Err(Error::invalid("ensemble", "must contain at least one flux vector"));
        }
        Ok(Self {
            vectors,
            field_direction,
        })
    }

    pub fn generate(spec: &EnsembleSpec, field_direction: UnitVector) -> Result<Self> {
        let count = spec.count.resolve()?;
        let sampler = MagnitudeSampler::new(&spec.magnitude)?;
        let plane = match &spec.orientation {
            Orientation::Planar2d { normal } => {
                let n = UnitVector::normalize(*normal)?;
                let e1 = n.perpendicular();
                Some((e1, UnitVector::normalize(cross(&n.0, &e1.0))?))
            }
            _ => None,
        };
        let mut stream = rng::stream(spec.seed, 0);
        let perp = field_direction.perpendicular();
        let vectors = (0..count)
            .map(|_| {
                let m = sampler.sample(&mut stream);
                let dir = match &spec.orientation {
                    Orientation::FixedParallel => field_direction.0,
                    Orientation::FixedPerpendicular => perp.0,
                    Orientation::Isotropic3d => {
                        let z = 2.0 * stream.random::<f64>() - 1.0;
                        let phi = 2.0 * std::f64::consts::PI * stream.random::<f64>();
                        let r = (1.0 - z * z).max(0.0).sqrt();
                        [r * phi.cos(), r * phi.sin(), z]
                    }
                    Orientation::Planar2d { .. } => {
                        let (e1, e2) = plane.expect("plane set for planar orientation");
                        let phi = 2.0 * std::f64::consts::PI * stream.random::<f64>();
                        let (s, c) = phi.sin_cos();
                        [
                            c * e1.0[0] + s * e2.0[0],
                            c * e1.0[1] + s * e2.0[1],
                            c * e1.0[2] + s * e2.0[2],
                        ]
                    }
                };
                FluxVector([m * dir[0], m * dir[1], m * dir[2]])
            })
            .collect();
        Self::explicit(vectors, field_direction)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn vectors(&self) -> &[FluxVector] {
        &self.vectors
    }

    pub fn field_direction(&self) -> UnitVector {
        self.field_direction
    }

    /// Summed `(Σ|F·B̂|², Σ|F×B̂|²)`, Wb².
    pub fn total_weights(&self) -> (f64, f64) {
        let w: Vec<(f64, f64)> = self
            .vectors
            .iter()
            .map(|f| decompose(f, &self.field_direction))
            .collect();
        (
            compensated_sum(w.iter().map(|p| p.0)),
            compensated_sum(w.iter().map(|p| p.1)),
        )
    }

    /// Concatenate two ensembles resolved against the same direction.
    pub fn merged(&self, other: &FluxEnsemble) -> Result<Self> {
        if self.field_direction != other.field_direction {
            return Err(Error::invalid(
                "ensemble",
                "cannot merge ensembles with different field directions",
            ));
        }
        let mut vectors = self.vectors.clone();
        vectors.extend_from_slice(&other.vectors);
        Self::explicit(vectors, self.field_direction)
    }
}

struct MagnitudeSampler {
    edges: Vec<f64>,
    cumulative: Vec<f64>,
}

impl MagnitudeSampler {
    fn new(m: &Magnitude) -> Result<Self> {
        match m {
            Magnitude::Constant(v) => {
                if !(v.is_finite() && *v >= 0.0) {
                    return Err(Error::invalid("magnitude", format!("must be finite and >= 0, got {v}")));
                }
                Ok(Self {
                    edges: vec![*v, *v],
                    cumulative: vec![1.0],
                })
            }
            Magnitude::Histogram { edges, weights } => {
                if edges.len() != weights.len() + 1 || weights.is_empty() {
                    return Err(Error::invalid(
                        "magnitude",
                        "histogram needs len(edges) = len(weights) + 1",
                    ));
                }
                if edges[0] < 0.0 || edges.windows(2).any(|w| !(w[1] > w[0])) {
                    return Err(Error::invalid(
                        "magnitude",
                        "histogram edges must be non-negative and increasing",
                    ));
                }
                if weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
                    return Err(Error::invalid("magnitude", "histogram weights must be finite and >= 0"));
                }
                let total: f64 = weights.iter().sum();
                if !(total > 0.0) {
                    return Err(Error::invalid("magnitude", "histogram weights sum to zero"));
                }
                let mut acc = 0.0;
                let cumulative = weights
                    .iter()
                    .map(|w| {
                        acc += w / total;
                        acc
                    })
                    .collect();
                Ok(Self {
                    edges: edges.clone(),
                    cumulative,
                })
            }
        }
    }

    fn sample(&self, stream: &mut rng::Stream) -> f64 {
        if self.cumulative.len() == 1 && self.edges[0] == self.edges[1] {
            return self.edges[0];
        }
        let u: f64 = stream.random();
        let bin = self
            .cumulative
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.cumulative.len() - 1);
        let t: f64 = stream.random();
        self.edges[bin] + t * (self.edges[bin + 1] - self.edges[bin])
    }
}

/// Device flux noise split by channel, Wb²/Hz.
#[derive(Debug, Clone, PartialEq)]
pub struct FluxNoise {
    pub parallel: Spectrum,
    pub perpendicular: Spectrum,
    pub total: Spectrum,
    pub spin_count: usize,
    pub warnings: Vec<String>,
}

impl FluxNoise {
    /// The same spectra in (μΦ₀)²/Hz.
    pub fn in_micro_phi0(&self, env: &SpinEnvironment) -> Result<FluxNoise> {
        let f = convert_units(1.0, Unit::WeberSqPerHz, Unit::MicroPhi0SqPerHz, env)?;
        Ok(FluxNoise {
            parallel: self.parallel.scaled(f, Unit::MicroPhi0SqPerHz)?,
            perpendicular: self.perpendicular.scaled(f, Unit::MicroPhi0SqPerHz)?,
            total: self.total.scaled(f, Unit::MicroPhi0SqPerHz)?,
            spin_count: self.spin_count,
            warnings: self.warnings.clone(),
        })
    }
}

pub(crate) fn field_warnings(env: &SpinEnvironment) -> Vec<String> {
    if env.field() < TESLA_PER_GAUSS {
        vec![format!(
            "applied field {} G is below 1 G; the wire's own field is neglected in the spin's local field",
            env.field_gauss()
        )]
    } else {
        Vec::new()
    }
}

/// Flux noise when every spin shares the same (disorder-averaged) spin
/// spectra, given in `ħ/(k_B T)` on a common grid.
pub fn assemble_flux_noise(
    ensemble: &FluxEnsemble,
    s_parallel: &Spectrum,
    s_perpendicular: &Spectrum,
    env: &SpinEnvironment,
) -> Result<FluxNoise> {
    if !s_parallel.same_grid(s_perpendicular) {
        return Err(Error::GridMismatch(
            "parallel and perpendicular spectra differ in grid".into(),
        ));
    }
    for s in [s_parallel, s_perpendicular] {
        if s.unit() != Unit::ReducedNoise {
            return Err(Error::invalid(
                "spectrum",
                format!("expected spin noise in {}, got {}", Unit::ReducedNoise, s.unit()),
            ));
        }
    }
    let to_seconds = convert_units(1.0, Unit::ReducedNoise, Unit::Seconds, env)?;
    let (w_par, w_perp) = ensemble.total_weights();
    let grid = s_parallel.grid().to_vec();
    let par: Vec<f64> = s_parallel.values().iter().map(|s| w_par * s * to_seconds).collect();
    let perp: Vec<f64> = s_perpendicular
        .values()
        .iter()
        .map(|s| w_perp * s * to_seconds)
        .collect();
    finish(grid, par, perp, ensemble.len(), env)
}

/// Stream keys of per-spin disorder draws, kept apart from the orientation
/// stream `(seed, 0)`.
const PER_SPIN_KEY: u64 = 1 << 63;

/// Flux noise with an individual `λ_j` drawn for every spin, summing
/// single-spin spectra explicitly.
pub fn assemble_flux_noise_per_spin(
    ensemble: &FluxEnsemble,
    dist: &DisorderDistribution,
    env: &SpinEnvironment,
    grid: &[f64],
    seed: u64,
) -> Result<FluxNoise> {
    let model = dist.rate_model();
    let b = env.reduced_field();
    let chi_par = chi_parallel_static(env);
    let chi_perp = chi_perpendicular_static(env);
    let to_seconds = convert_units(1.0, Unit::ReducedNoise, Unit::Seconds, env)?;
    let spins: Vec<(f64, f64, f64, f64)> = ensemble
        .vectors
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let lambda = model.lambda_max() * rng::stream(seed, PER_SPIN_KEY | j as u64).random::<f64>();
            let rates = model.rates_unchecked(env, lambda);
            let (wp, wt) = decompose(f, &ensemble.field_direction);
            (wp, wt, rates.parallel, rates.perpendicular)
        })
        .collect();
    let columns: Vec<(f64, f64)> = grid
        .par_iter()
        .map(|&x| {
            let par = compensated_sum(spins.iter().map(|s| s.0 * parallel_noise(chi_par, s.2, x)));
            let perp = compensated_sum(spins.iter().map(|s| s.1 * perpendicular_noise(chi_perp, b, s.3, x)));
            (par * to_seconds, perp * to_seconds)
        })
        .collect();
    let (par, perp) = columns.into_iter().unzip();
    finish(grid.to_vec(), par, perp, ensemble.len(), env)
}

fn finish(grid: Vec<f64>, par: Vec<f64>, perp: Vec<f64>, count: usize, env: &SpinEnvironment) -> Result<FluxNoise> {
    let total: Vec<f64> = par.iter().zip(&perp).map(|(a, b)| a + b).collect();
    Ok(FluxNoise {
        parallel: Spectrum::new(grid.clone(), par, Channel::Parallel, Unit::WeberSqPerHz)?,
        perpendicular: Spectrum::new(grid.clone(), perp, Channel::Perpendicular, Unit::WeberSqPerHz)?,
        total: Spectrum::new(grid, total, Channel::Total, Unit::WeberSqPerHz)?,
        spin_count: count,
        warnings: field_warnings(env),
    })
}

/// A frequency band in reduced units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Band {
    /// `lo ≤ x ≤ hi`.
    Interval { lo: f64, hi: f64 },
    /// `|x| ≤ cutoff`.
    Low { cutoff: f64 },
    /// The two windows `|x ∓ center| ≤ half_width`.
    Precession { center: f64, half_width: f64 },
}

/// Trapezoidal `∫ S dx` over `band`, with linear interpolation at band
/// edges that fall between grid points. Result is in spectrum units times
/// reduced frequency; [`mean_square`] converts to a physical variance.
pub fn band_power(spectrum: &Spectrum, band: Band) -> Result<f64> {
    match band {
        Band::Interval { lo, hi } => interval_power(spectrum, lo, hi),
        Band::Low { cutoff } => interval_power(spectrum, -cutoff, cutoff),
        Band::Precession { center, half_width } => {
            if !(half_width > 0.0 && center > half_width) {
                return Err(Error::invalid(
                    "band",
                    "precession windows need 0 < half_width < center",
                ));
            }
            Ok(interval_power(spectrum, center - half_width, center + half_width)?
                + interval_power(spectrum, -center - half_width, -center + half_width)?)
        }
    }
}

/// `(1/2π)·(k_B T/ħ)·power`: the physical variance carried by a band power.
pub fn mean_square(power: f64, env: &SpinEnvironment) -> f64 {
    power / (2.0 * std::f64::consts::PI) * crate::units::BOLTZMANN * env.temperature() / crate::units::HBAR
}

fn interval_power(spectrum: &Spectrum, lo: f64, hi: f64) -> Result<f64> {
    let grid = spectrum.grid();
    let values = spectrum.values();
    if grid.is_empty() || !(hi > lo) || lo < grid[0] || hi > grid[grid.len() - 1] {
        return Err(Error::invalid(
            "band",
            format!(
                "band [{lo}, {hi}] must lie inside the grid [{}, {}]",
                grid.first().copied().unwrap_or(f64::NAN),
                grid.last().copied().unwrap_or(f64::NAN)
            ),
        ));
    }
    let interp = |x: f64| -> f64 {
        let i = grid.partition_point(|g| *g < x);
        if grid[i] == x {
            return values[i];
        }
        let t = (x - grid[i - 1]) / (grid[i] - grid[i - 1]);
        values[i - 1] + t * (values[i] - values[i - 1])
    };
    let mut xs = vec![lo];
    let mut ys = vec![interp(lo)];
    for (x, y) in grid.iter().zip(values) {
        if *x > lo && *x < hi {
            xs.push(*x);
            ys.push(*y);
        }
    }
    xs.push(hi);
    ys.push(interp(hi));
    Ok(compensated_sum(
        xs.windows(2)
            .zip(ys.windows(2))
            .map(|(x, y)| 0.5 * (x[1] - x[0]) * (y[0] + y[1])),
    ))
}

/// Low-band and precession-band power of a spectrum compared with a
/// zero-field baseline on the same grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BandPowerReport {
    pub low_band: f64,
    pub precession_band: f64,
    pub baseline_low_band: f64,
    pub retained_fraction: f64,
}

pub fn band_report(
    spectrum: &Spectrum,
    baseline: &Spectrum,
    low_cutoff: f64,
    larmor: f64,
    half_width: f64,
) -> Result<BandPowerReport> {
    if larmor - half_width <= low_cutoff {
        return Err(Error::invalid("band", "low band and precession windows overlap"));
    }
    let low_band = band_power(spectrum, Band::Low { cutoff: low_cutoff })?;
    let baseline_low_band = band_power(baseline, Band::Low { cutoff: low_cutoff })?;
    let precession_band = band_power(
        spectrum,
        Band::Precession {
            center: larmor,
            half_width,
        },
    )?;
    Ok(BandPowerReport {
        low_band,
        precession_band,
        baseline_low_band,
        retained_fraction: low_band / baseline_low_band,
    })
}

/// Shortcut prediction for the low-band noise left at field `b` relative to
/// zero field, assuming the transverse contribution has fully moved to the
/// precession peaks.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LowBandReduction {
    /// `1/cosh²(b/2)`, the factor on the parallel flux-vector share.
    pub parallel_factor: f64,
    /// `χ⊥(b)/χ⊥(0) = 2 tanh(b/2)/b`, the amplitude left in the precession
    /// peaks relative to the zero-field transverse noise.
    pub perpendicular_precession_factor: f64,
    /// `p∥ / cosh²(b/2)`: fraction of the zero-field low-band power kept.
    pub retained_fraction: f64,
    /// `1 - retained_fraction`.
    pub removed_fraction: f64,
}

pub fn low_band_reduction(env: &SpinEnvironment, parallel_share: f64) -> Result<LowBandReduction> {
    if !(0.0..=1.0).contains(&parallel_share) {
        return Err(Error::invalid(
            "parallel_share",
            format!("must lie in [0, 1], got {parallel_share}"),
        ));
    }
    let b = env.reduced_field();
    let c = (0.5 * b).cosh();
    let parallel_factor = 1.0 / (c * c);
    let zero = env.at_field(0.0)?;
    let perpendicular_precession_factor = chi_perpendicular_static(env) / chi_perpendicular_static(&zero);
    // at zero field nothing leaves the band
    let retained_fraction = if b == 0.0 {
        1.0
    } else {
        parallel_share * parallel_factor
    };
    Ok(LowBandReduction {
        parallel_factor,
        perpendicular_precession_factor,
        retained_fraction,
        removed_fraction: 1.0 - retained_fraction,
    })
}
