//! Globally adaptive Gauss–Kronrod (7/15) quadrature.
//!
//! The vector-valued form integrates several integrands sharing the same
//! abscissae, which is how the insured recursion evaluates ∫uφ/ω and ∫vφ/ω
//! together.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

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
    0.209_482_141_084_727_8,
];
/// Gauss weights for the odd Kronrod nodes (XGK[1], XGK[3], XGK[5], XGK[7]).
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadSettings {
    pub abs_tol: f64,
    pub rel_tol: f64,
    pub max_subdivisions: usize,
}

impl Default for QuadSettings {
    fn default() -> Self {
        QuadSettings {
            abs_tol: 1e-11,
            rel_tol: 1e-12,
            max_subdivisions: 2000,
        }
    }
}

impl QuadSettings {
    pub fn with_abs_tol(abs_tol: f64) -> Self {
        QuadSettings {
            abs_tol,
            ..Self::default()
        }
    }
}

struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl<const N: usize> Eq for Segment<N> {}
impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error
            .total_cmp(&other.error)
            .then_with(|| other.a.total_cmp(&self.a))
    }
}

fn kronrod<const N: usize, F: FnMut(f64) -> [f64; N]>(f: &mut F, a: f64, b: f64) -> ([f64; N], f64) {
    let centre = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let mut k = [0.0; N];
    let mut g = [0.0; N];
    let fc = f(centre);
    for i in 0..N {
        k[i] = WGK[7] * fc[i];
        g[i] = WG[3] * fc[i];
    }
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(centre - dx);
        let f2 = f(centre + dx);
        for i in 0..N {
            let s = f1[i] + f2[i];
            k[i] += WGK[j] * s;
            if j % 2 == 1 {
                g[i] += WG[j / 2] * s;
            }
        }
    }
    let mut err = 0.0;
    for i in 0..N {
        k[i] *= half;
        g[i] *= half;
        err += (k[i] - g[i]).abs();
    }
    (k, err)
}

/// Integrates a vector-valued function over `[a, b]`.
///
/// Converges when the summed error estimate is below
/// `max(abs_tol, rel_tol · max_i |I_i|)`.
pub fn integrate_vec<const N: usize, F>(mut f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<[f64; N]>
where
    F: FnMut(f64) -> [f64; N],
{
    if !(a.is_finite() && b.is_finite()) {
        return Err(Error::Quadrature(format!("non-finite limits [{a}, {b}]")));
    }
    if a == b {
        return Ok([0.0; N]);
    }
    let (value, error) = kronrod(&mut f, a, b);
    let mut total = value;
    let mut total_err = error;
    let mut heap = BinaryHeap::new();
    heap.push(Segment { a, b, value, error });
    let mut splits = 0;
    loop {
        let scale = total.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let target = settings.abs_tol.max(settings.rel_tol * scale);
        if total.iter().any(|v| !v.is_finite()) {
            return Err(Error::Quadrature("integrand produced a non-finite value".into()));
        }
        if total_err <= target {
            return Ok(total);
        }
        if splits >= settings.max_subdivisions {
            return Err(Error::Quadrature(format!(
                "error estimate {total_err:e} above target {target:e} after {splits} subdivisions on [{a}, {b}]"
            )));
        }
        let worst = heap.pop().expect("heap holds at least one segment");
        let mid = 0.5 * (worst.a + worst.b);
        if !(mid > worst.a && mid < worst.b) {
            // Interval can no longer be split in floating point.
            return Err(Error::Quadrature(format!(
                "interval around {mid} exhausted with error {total_err:e}"
            )));
        }
        let (v1, e1) = kronrod(&mut f, worst.a, mid);
        let (v2, e2) = kronrod(&mut f, mid, worst.b);
        for i in 0..N {
            total[i] += v1[i] + v2[i] - worst.value[i];
        }
        total_err += e1 + e2 - worst.error;
        heap.push(Segment {
            a: worst.a,
            b: mid,
            value: v1,
            error: e1,
        });
        heap.push(Segment {
            a: mid,
            b: worst.b,
            value: v2,
            error: e2,
        });
        splits += 1;
        if splits % 64 == 0 {
            // Refresh running sums to shed accumulated cancellation.
            total = [0.0; N];
            total_err = 0.0;
            for s in heap.iter() {
                for i in 0..N {
                    total[i] += s.value[i];
                }
                total_err += s.error;
            }
        }
    }
}

/// Scalar convenience wrapper around [`integrate_vec`].
pub fn integrate<F: FnMut(f64) -> f64>(mut f: F, a: f64, b: f64, settings: &QuadSettings) -> Result<f64> {
    integrate_vec(|x| [f(x)], a, b, settings).map(|v| v[0])
}
