//! Sampled spectra on a reduced-frequency grid, grid builders and the local
//! power-law exponent.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::units::Unit;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    /// Spin fluctuations along the field.
    Parallel,
    /// Spin fluctuations transverse to the field.
    Perpendicular,
    Total,
}

/// Noise values on a strictly increasing grid of `x = ħω/(k_B T)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    grid: Vec<f64>,
    values: Vec<f64>,
    channel: Channel,
    unit: Unit,
}

impl Spectrum {
    pub fn new(grid: Vec<f64>, values: Vec<f64>, channel: Channel, unit: Unit) -> Result<Self> {
        if grid.len() != values.len() {
            return Err(Error::GridMismatch(format!(
                "{} grid points but {} values",
                grid.len(),
                values.len()
            )));
        }
        check_grid(&grid)?;
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(
                "values",
                format!("spectrum values must be finite and >= 0, found {v}"),
            ));
        }
        Ok(Self {
            grid,
            values,
            channel,
            unit,
        })
    }

    /// Evaluate `f` on every grid point.
    pub fn from_fn(grid: Vec<f64>, channel: Channel, unit: Unit, f: impl Fn(f64) -> Result<f64>) -> Result<Self> {
        let values = grid.iter().map(|&x| f(x)).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values, channel, unit)
    }

    pub fn grid(&self) -> &[f64] {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn channel(&self) -> Channel {
        self.channel
    }

    pub fn unit(&self) -> Unit {
        self.unit
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.grid.iter().copied().zip(self.values.iter().copied())
    }

    /// Multiply every value by `factor` (≥ 0), relabelling the unit.
    pub fn scaled(&self, factor: f64, unit: Unit) -> Result<Self> {
        Self::new(
            self.grid.clone(),
            self.values.iter().map(|v| v * factor).collect(),
            self.channel,
            unit,
        )
    }

    pub fn same_grid(&self, other: &Spectrum) -> bool {
        self.grid == other.grid
    }

    /// Largest relative violation of `S(-x) = e^(-x) S(x)` over the grid
    /// points whose mirror image is also on the grid. `None` when there is
    /// no such pair.
    pub fn detailed_balance_residual(&self) -> Option<f64> {
        let mut worst: Option<f64> = None;
        for (i, &x) in self.grid.iter().enumerate() {
            if x <= 0.0 {
                continue;
            }
            let Ok(j) = self.grid.binary_search_by(|g| g.total_cmp(&-x)) else {
                continue;
            };
            let expected = (-x).exp() * self.values[i];
            let r = if expected == 0.0 {
                self.values[j].abs()
            } else {
                ((self.values[j] - expected) / expected).abs()
            };
            worst = Some(worst.map_or(r, |w: f64| w.max(r)));
        }
        worst
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if let Some(x) = grid.iter().find(|x| !x.is_finite()) {
        return Err(Error::invalid("grid", format!("non-finite frequency {x}")));
    }
    if grid.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("grid", "frequencies must be strictly increasing"));
    }
    Ok(())
}

/// Logarithmic grid from `x_min` to `x_max` (both included) with at least
/// `points_per_decade` points per decade. With `include_negative` the grid
/// is mirrored to negative frequencies and `x = 0` is inserted.
pub fn log_grid(x_min: f64, x_max: f64, points_per_decade: usize, include_negative: bool) -> Result<Vec<f64>> {
    if !(x_min > 0.0 && x_max > x_min && x_max.is_finite()) {
        return Err(Error::invalid(
            "grid",
            format!("need 0 < x_min < x_max, got [{x_min}, {x_max}]"),
        ));
    }
    if points_per_decade < 1 {
        return Err(Error::invalid("points_per_decade", "must be at least 1"));
    }
    let decades = (x_max / x_min).log10();
    let intervals = ((decades * points_per_decade as f64) - 1e-9).ceil().max(1.0) as usize;
    let ratio = x_max.ln() - x_min.ln();
    let mut positive: Vec<f64> = (0..=intervals)
        .map(|i| {
            if i == 0 {
                x_min
            } else if i == intervals {
                x_max
            } else {
                (x_min.ln() + ratio * i as f64 / intervals as f64).exp()
            }
        })
        .collect();
    if !include_negative {
        return Ok(positive);
    }
    let mut grid: Vec<f64> = positive.iter().rev().map(|x| -x).collect();
    grid.push(0.0);
    grid.append(&mut positive);
    Ok(grid)
}

/// `n` evenly spaced points on `[a, b]`.
pub fn linear_grid(a: f64, b: f64, n: usize) -> Result<Vec<f64>> {
    if n < 2 || !(b > a) {
        return Err(Error::invalid(
            "grid",
            format!("need n >= 2 and a < b, got n = {n}, [{a}, {b}]"),
        ));
    }
    let step = (b - a) / (n - 1) as f64;
    Ok((0..n)
        .map(|i| if i == n - 1 { b } else { a + step * i as f64 })
        .collect())
}

/// Local power-law exponent `α(x) = -d ln S / d ln x` at the grid point
/// nearest to `x`, by a centered difference on the log-log grid.
pub fn local_log_slope(spectrum: &Spectrum, x: f64) -> Result<f64> {
    let grid = spectrum.grid();
    if grid.len() < 3 {
        return Err(Error::invalid("x", "need at least three grid points"));
    }
    let i = match grid.binary_search_by(|g| g.total_cmp(&x)) {
        Ok(i) => i,
        Err(i) => {
            if i == 0 || i == grid.len() {
                return Err(Error::invalid("x", format!("{x} lies outside the grid")));
            }
            if (x - grid[i - 1]).abs() <= (grid[i] - x).abs() {
                i - 1
            } else {
                i
            }
        }
    };
    slope_at(spectrum, i)
}

fn slope_at(spectrum: &Spectrum, i: usize) -> Result<f64> {
    let grid = spectrum.grid();
    let values = spectrum.values();
    if i == 0 || i + 1 >= grid.len() {
        return Err(Error::invalid("x", "local slope needs an interior grid point"));
    }
    let (x0, x1) = (grid[i - 1], grid[i + 1]);
    let (s0, s1) = (values[i - 1], values[i + 1]);
    if x0 <= 0.0 || s0 <= 0.0 || s1 <= 0.0 {
        return Err(Error::invalid("x", "local slope needs positive frequencies and values"));
    }
    Ok(-(s1.ln() - s0.ln()) / (x1.ln() - x0.ln()))
}

/// `(x, α(x))` at every interior grid point where the slope is defined.
pub fn log_slopes(spectrum: &Spectrum) -> Vec<(f64, f64)> {
    (1..spectrum.len().saturating_sub(1))
        .filter_map(|i| slope_at(spectrum, i).ok().map(|a| (spectrum.grid()[i], a)))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spectrum(grid: Vec<f64>, f: impl Fn(f64) -> f64) -> Spectrum {
        Spectrum::from_fn(grid, Channel::Total, Unit::ReducedNoise, |x| Ok(f(x))).unwrap()
    }

    #[test]
    fn log_grid_endpoints_and_density() {
        let g = log_grid(1e-10, 1e-2, 10, false).unwrap();
        assert_eq!(g.len(), 81);
        assert_eq!(g[0], 1e-10);
        assert_eq!(*g.last().unwrap(), 1e-2);
        let sym = log_grid(1e-3, 1.0, 4, true).unwrap();
        assert_eq!(sym.len(), 2 * 13 + 1);
        assert_eq!(sym[13], 0.0);
        assert_eq!(sym[0], -1.0);
        assert!(log_grid(1.0, 1.0, 4, false).is_err());
        assert!(log_grid(0.0, 1.0, 4, false).is_err());
    }

    #[test]
    fn rejects_bad_spectra() {
        assert!(Spectrum::new(vec![1.0, 1.0], vec![1.0, 1.0], Channel::Total, Unit::ReducedNoise).is_err());
        assert!(Spectrum::new(vec![1.0, 2.0], vec![1.0, -1.0], Channel::Total, Unit::ReducedNoise).is_err());
        assert!(matches!(
            Spectrum::new(vec![1.0, 2.0], vec![1.0], Channel::Total, Unit::ReducedNoise),
            Err(Error::GridMismatch(_))
        ));
    }

    #[test]
    fn slope_of_inverse_frequency_is_one() {
        let s = spectrum(log_grid(1e-6, 1e3, 7, false).unwrap(), |x| 3.0 / x);
        for (_, a) in log_slopes(&s) {
            assert!((a - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lorentzian_tail_slope_tends_to_two() {
        let g = 1e-3;
        let s = spectrum(log_grid(1e-6, 1e3, 10, false).unwrap(), |x| g / (x * x + g * g));
        let a = local_log_slope(&s, 1e3 / 10f64.powf(0.3)).unwrap();
        assert!((a - 2.0).abs() < 1e-6, "{a}");
        let a_low = local_log_slope(&s, 1e-5).unwrap();
        assert!(a_low.abs() < 1e-3);
    }

    #[test]
    fn slope_rejects_boundary_points() {
        let s = spectrum(log_grid(1e-3, 1.0, 4, false).unwrap(), |x| 1.0 / x);
        assert!(local_log_slope(&s, 1e-3).is_err());
        assert!(local_log_slope(&s, 1.0).is_err());
        assert!(local_log_slope(&s, 10.0).is_err());
    }

    #[test]
    fn detailed_balance_residual_on_symmetric_grid() {
        let s = spectrum(log_grid(1e-2, 10.0, 5, true).unwrap(), |x| {
            crate::spin::quantum_prefactor(x) / (1.0 + x * x)
        });
        assert!(s.detailed_balance_residual().unwrap() < 1e-12);
        let one_sided = spectrum(log_grid(1e-2, 10.0, 5, false).unwrap(), |x| x);
        assert!(one_sided.detailed_balance_residual().is_none());
    }
}
