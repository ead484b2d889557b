//! Globally adaptive Gauss-Kronrod (7/15) quadrature for complex integrands,
//! with breakpoints and doubly infinite ranges.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_845_693_013,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
pub struct QuadratureOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadratureOptions {
    fn default() -> Self {
        QuadratureOptions {
            abs_tol: 1e-12,
            rel_tol: 1e-10,
            max_subdivisions: 4000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Quadrature {
    pub value: C64,
    pub error: f64,
    pub evaluations: usize,
}

struct Segment {
    a: f64,
    b: f64,
    value: C64,
    error: f64,
}

impl PartialEq for Segment {
    fn eq(&self, other: &Self) -> bool {
        self.error == other.error
    }
}
impl Eq for Segment {}
impl PartialOrd for Segment {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Segment {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn kronrod<F: Fn(f64) -> C64>(f: &F, a: f64, b: f64) -> (C64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for j in 0..7 {
        let dx = half * XGK[j];
        let pair = f(center - dx) + f(center + dx);
        kronrod += pair * WGK[j];
        if j % 2 == 1 {
            gauss += pair * WG[j / 2];
        }
    }
    let value = kronrod * half;
    let error = ((kronrod - gauss) * half).norm();
    (value, error)
}

/// Integrates over `[points[0], points[last]]`, seeding the subdivision at
/// every interior point.
pub fn integrate_with_points<F: Fn(f64) -> C64>(f: F, points: &[f64], opts: QuadratureOptions) -> Result<Quadrature> {
    let mut pts: Vec<f64> = points.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    if pts.len() < 2 {
        return Ok(Quadrature {
            value: C64::new(0.0, 0.0),
            error: 0.0,
            evaluations: 0,
        });
    }

    let mut heap = BinaryHeap::new();
    let mut total = C64::new(0.0, 0.0);
    let mut total_error = 0.0;
    let mut evaluations = 0;
    for w in pts.windows(2) {
        let (value, error) = kronrod(&f, w[0], w[1]);
        evaluations += 15;
        total += value;
        total_error += error;
        heap.push(Segment {
            a: w[0],
            b: w[1],
            value,
            error,
        });
    }

    let mut subdivisions = 0;
    while total_error > opts.abs_tol.max(opts.rel_tol * total.norm()) {
        if subdivisions >= opts.max_subdivisions {
            return Err(Error::Quadrature(format!(
                "{} subdivisions exhausted, error estimate {:.3e} on value {:.6e}",
                opts.max_subdivisions,
                total_error,
                total.norm()
            )));
        }
        let worst = heap.pop().expect("nonempty");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // interval below floating-point resolution
            return Err(Error::Quadrature(format!(
                "interval [{}, {}] cannot be bisected further",
                worst.a, worst.b
            )));
        }
        let (lv, le) = kronrod(&f, worst.a, mid);
        let (rv, re) = kronrod(&f, mid, worst.b);
        evaluations += 30;
        total += lv + rv - worst.value;
        total_error += le + re - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: lv,
            error: le,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: rv,
            error: re,
        });
        subdivisions += 1;
    }
    // recompute to shed accumulated rounding in the running sums
    let value = heap.iter().map(|s| s.value).sum();
    let error = heap.iter().map(|s| s.error).sum();
    Ok(Quadrature {
        value,
        error,
        evaluations,
    })
}

pub fn integrate<F: Fn(f64) -> C64>(f: F, a: f64, b: f64, opts: QuadratureOptions) -> Result<Quadrature> {
    integrate_with_points(f, &[a, b], opts)
}

/// Integrates over the whole real line. Finite breakpoints bracket the
/// features of `f`; the two tails beyond them are mapped onto `(0, 1]`
/// through `v = edge +- (1 - t) / t`.
pub fn integrate_real_line<F: Fn(f64) -> C64>(
    f: F,
    breakpoints: &[f64],
    opts: QuadratureOptions,
) -> Result<Quadrature> {
    let mut pts: Vec<f64> = breakpoints.iter().copied().filter(|p| p.is_finite()).collect();
    pts.sort_by(f64::total_cmp);
    pts.dedup();
    let (lo, hi) = match (pts.first(), pts.last()) {
        (Some(&lo), Some(&hi)) => (lo, hi),
        _ => (0.0, 0.0),
    };
    let core = integrate_with_points(&f, &pts, opts)?;
    let right = integrate(|t: f64| f(hi + (1.0 - t) / t) / (t * t), 0.0, 1.0, opts)?;
    let left = integrate(|t: f64| f(lo - (1.0 - t) / t) / (t * t), 0.0, 1.0, opts)?;
    Ok(Quadrature {
        value: core.value + right.value + left.value,
        error: core.error + right.error + left.error,
        evaluations: core.evaluations + right.evaluations + left.evaluations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    #[test]
    fn polynomial_is_exact() {
        let q = integrate(|x| C64::new(x.powi(5) - 2.0 * x * x, x), -1.0, 2.0, Default::default()).unwrap();
        assert_relative_eq!(q.value.re, 64.0 / 6.0 - 1.0 / 6.0 - 2.0 * 3.0, epsilon = 1e-13);
        assert_relative_eq!(q.value.im, 1.5, epsilon = 1e-14);
    }

    #[test]
    fn narrow_lorentzian_over_real_line() {
        let w = 1e-4;
        let f = |v: f64| C64::new(1.0 / (v * v + w * w), 0.0);
        let q = integrate_real_line(f, &[-10.0 * w, 0.0, 10.0 * w], Default::default()).unwrap();
        assert_relative_eq!(q.value.re, PI / w, max_relative = 1e-10);
    }

    #[test]
    fn shifted_product_of_poles() {
        // int dv / ((i v - w)(-i (v + d) - w)) = 2 pi / (2 w + i d)
        let (w, d) = (0.01, 0.03);
        let f = |v: f64| C64::new(1.0, 0.0) / (C64::new(-w, v) * C64::new(-w, -(v + d)));
        let q = integrate_real_line(f, &[0.0, -d], Default::default()).unwrap();
        let exact = 2.0 * PI / C64::new(2.0 * w, d);
        assert_relative_eq!((q.value - exact).norm() / exact.norm(), 0.0, epsilon = 1e-9);
    }

    #[test]
    fn exhausted_budget_is_an_error() {
        let opts = QuadratureOptions {
            abs_tol: 0.0,
            rel_tol: 1e-15,
            max_subdivisions: 3,
        };
        let res = integrate(|x| C64::new((1.0 / (x + 1e-3)).sin(), 0.0), 0.0, 1.0, opts);
        assert!(matches!(res, Err(Error::Quadrature(_))));
    }
}
