//! Globally adaptive Gauss–Kronrod (7/15) quadrature with a panel budget.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

// Kronrod abscissae on [0, 1); odd indices are the Gauss points.
const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_728_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quadrature {
    pub value: f64,
    pub abs_error: f64,
    pub panels: usize,
}

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
}

impl PartialEq for Panel {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Panel {}
impl PartialOrd for Panel {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Panel {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gauss_kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> Panel {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    Panel {
        a,
        b,
        value: kronrod * half,
        error: ((kronrod - gauss) * half).abs(),
    }
}

/// Integrate `f` over `[a, b]` to relative tolerance `rel_tol`.
pub fn integrate<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, rel_tol: f64, max_panels: usize) -> Result<Quadrature> {
    integrate_breakpoints(f, &[a, b], rel_tol, max_panels)
}

/// Integrate over consecutive intervals `points[i]..points[i+1]`, which seed
/// the initial panels. Panels are bisected in order of estimated error until
/// the summed error estimate drops below `rel_tol·|value|` or the panel budget
/// is exhausted, which is reported as an error.
pub fn integrate_breakpoints<F: Fn(f64) -> f64>(
    f: F,
    points: &[f64],
    rel_tol: f64,
    max_panels: usize,
) -> Result<Quadrature> {
    if points.len() < 2 {
        return Err(Error::invalid("points", "need at least two breakpoints"));
    }
    if !(rel_tol > 0.0) {
        return Err(Error::invalid("rel_tol", format!("must be positive, got {rel_tol}")));
    }
    let mut heap = BinaryHeap::with_capacity(max_panels.max(points.len()));
    for w in points.windows(2) {
        if !(w[1] > w[0]) {
            return Err(Error::invalid("points", "breakpoints must be strictly increasing"));
        }
        heap.push(gauss_kronrod(&f, w[0], w[1]));
    }
    let totals = |heap: &BinaryHeap<Panel>| heap.iter().fold((0.0, 0.0), |(v, e), p| (v + p.value, e + p.error));
    let (mut value, mut error) = totals(&heap);
    loop {
        if !value.is_finite() {
            return Err(Error::QuadratureNonConvergence {
                panels: heap.len(),
                error: f64::INFINITY,
                requested: rel_tol,
            });
        }
        if error <= rel_tol * value.abs() || error <= f64::MIN_POSITIVE {
            // running sums drift; confirm with a fresh summation
            let (v, e) = totals(&heap);
            if e <= rel_tol * v.abs() || e <= f64::MIN_POSITIVE {
                return Ok(Quadrature {
                    value: v,
                    abs_error: e,
                    panels: heap.len(),
                });
            }
            value = v;
            error = e;
        }
        if heap.len() >= max_panels {
            return Err(Error::QuadratureNonConvergence {
                panels: heap.len(),
                error: error / value.abs(),
                requested: rel_tol,
            });
        }
        let worst = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (worst.a + worst.b);
        let left = gauss_kronrod(&f, worst.a, mid);
        let right = gauss_kronrod(&f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
}

/// Integrate over the whole real line using `x = scale·t/(1 - t²)`.
/// `scale` should be comparable to the width of the integrand's main feature.
pub fn integrate_infinite<F: Fn(f64) -> f64>(f: F, scale: f64, rel_tol: f64, max_panels: usize) -> Result<Quadrature> {
    if !(scale > 0.0) {
        return Err(Error::invalid("scale", format!("must be positive, got {scale}")));
    }
    let mapped = |t: f64| {
        let d = 1.0 - t * t;
        let x = scale * t / d;
        let jac = scale * (1.0 + t * t) / (d * d);
        let v = f(x) * jac;
        if v.is_finite() {
            v
        } else {
            0.0
        }
    };
    integrate_breakpoints(mapped, &[-1.0, -0.5, 0.0, 0.5, 1.0], rel_tol, max_panels)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| x.powi(6) - 3.0 * x, 0.0, 2.0, 1e-14, 10).unwrap();
        assert!((q.value - (128.0 / 7.0 - 6.0)).abs() < 1e-13);
    }

    #[test]
    fn peaked_integrand_converges() {
        let g = 1e-4;
        let q = integrate(|x| g / (x * x + g * g), -1.0, 1.0, 1e-10, 2000).unwrap();
        let exact = 2.0 * (1.0 / g).atan();
        assert!(((q.value - exact) / exact).abs() < 1e-10);
    }

    #[test]
    fn infinite_range_lorentzian() {
        let g = 0.3;
        let q = integrate_infinite(|x| g / (x * x + g * g), g, 1e-12, 2000).unwrap();
        assert!((q.value / std::f64::consts::PI - 1.0).abs() < 1e-11);
    }

    #[test]
    fn budget_exhaustion_is_an_error() {
        let err = integrate(|x| (1.0 / x).sin(), 1e-8, 1.0, 1e-14, 8).unwrap_err();
        assert!(matches!(err, Error::QuadratureNonConvergence { .. }));
    }
}
