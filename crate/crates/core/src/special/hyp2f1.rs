//! Gauss hypergeometric function ₂F₁(a, b; c; z) for complex parameters and
//! real argument z ≤ 1.
//!
//! Regimes:
//! * `z = 1`: Gauss summation, needs `Re(c − a − b) > 0`.
//! * `−0.5 ≤ z ≤ 0.9`: direct power series.
//! * `z < −0.5`: Pfaff transform `(1 − z)^{−a} ₂F₁(a, c − b; c; z/(z − 1))`,
//!   which lands the argument in `(1/3, 1)`.
//! * `0.9 < z < 1`: Taylor re-expansion of the hypergeometric ODE, started
//!   from the series value at 0.9 and stepping towards 1 with steps of half
//!   the distance to the singular point.
//!
//! When `b = conj(a)` (or all parameters are real) and `c` is real, the
//! series runs in real arithmetic: the term ratio numerator `(a+n)(b+n)` is
//! then real.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::gamma::{is_gamma_pole, ln_gamma};
use crate::error::{Error, Result};

/// Complex scalar used for hypergeometric parameters.
pub type ComplexScalar = Complex64;

/// Largest argument summed directly.
const DIRECT_SERIES_MAX: f64 = 0.9;
/// Arguments below this go through the Pfaff transform.
const PFAFF_BELOW: f64 = -0.5;
/// Internal safety factor on the tail estimate relative to `rel_tol`.
const TAIL_MARGIN: f64 = 1e-3;

/// Truncation control for series evaluations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesControl {
    pub max_terms: usize,
    pub rel_tol: f64,
}

impl SeriesControl {
    pub fn new(max_terms: usize, rel_tol: f64) -> Result<Self> {
        if max_terms < 100 {
            return Err(Error::InvalidParameter(format!(
                "max_terms must be at least 100, got {max_terms}"
            )));
        }
        if !(rel_tol > 0.0 && rel_tol <= 1e-6) {
            return Err(Error::InvalidParameter(format!(
                "rel_tol must lie in (0, 1e-6], got {rel_tol}"
            )));
        }
        Ok(SeriesControl { max_terms, rel_tol })
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl {
            max_terms: 10_000,
            rel_tol: 1e-12,
        }
    }
}

/// ₂F₁(a, b; c; z) with the default [`SeriesControl`].
pub fn gauss_2f1(a: ComplexScalar, b: ComplexScalar, c: ComplexScalar, z: f64) -> Result<ComplexScalar> {
    gauss_2f1_with(a, b, c, z, &SeriesControl::default())
}

/// Derivative d/dz ₂F₁(a, b; c; z) = (ab/c) ₂F₁(a+1, b+1; c+1; z).
pub fn gauss_2f1_derivative(
    a: ComplexScalar,
    b: ComplexScalar,
    c: ComplexScalar,
    z: f64,
    ctrl: &SeriesControl,
) -> Result<ComplexScalar> {
    let one = Complex64::new(1.0, 0.0);
    Ok(a * b / c * gauss_2f1_with(a + one, b + one, c + one, z, ctrl)?)
}

pub fn gauss_2f1_with(
    a: ComplexScalar,
    b: ComplexScalar,
    c: ComplexScalar,
    z: f64,
    ctrl: &SeriesControl,
) -> Result<ComplexScalar> {
    for p in [a, b, c] {
        if !(p.re.is_finite() && p.im.is_finite()) {
            return Err(Error::Domain(format!("non-finite hypergeometric parameter {p}")));
        }
    }
    if z.is_nan() {
        return Err(Error::Domain("hypergeometric argument is NaN".into()));
    }
    if is_gamma_pole(c) {
        return Err(Error::Pole {
            what: "hypergeometric lower parameter c",
            at: c.re,
        });
    }
    if z == 0.0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    if let Some(degree) = polynomial_degree(a).into_iter().chain(polynomial_degree(b)).min() {
        if z.is_finite() && degree < ctrl.max_terms {
            return Ok(terminating_sum(a, b, c, z, degree));
        }
    }
    if z > 1.0 || z.is_infinite() {
        return Err(Error::Divergence {
            what: "hypergeometric series",
            z,
        });
    }
    if z == 1.0 {
        return gauss_sum(a, b, c);
    }
    if z < PFAFF_BELOW {
        let (prefactor, f) = pfaff_parts(a, b, c, z, ctrl)?;
        let value = prefactor * f;
        if has_real_terms(a, b, c) {
            // The alternative Pfaff form (1 − z)^{−b}F(c − a, b; c; w) is the
            // complex conjugate of this one, so the exact value is real.
            return Ok(Complex64::new(value.re, 0.0));
        }
        return Ok(value);
    }
    series_or_continuation(a, b, c, z, 1.0 - z, ctrl)
}

/// The two factors of ₂F₁(a, b; c; z) = (1 − z)^{−a} · ₂F₁(a, c − b; c; z/(z − 1))
/// for z < 0. Callers that know the product is real use their magnitudes to
/// judge the imaginary round-off.
pub(crate) fn pfaff_parts(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: f64,
    ctrl: &SeriesControl,
) -> Result<(Complex64, Complex64)> {
    debug_assert!(z < 0.0);
    if is_gamma_pole(c) {
        return Err(Error::Pole {
            what: "hypergeometric lower parameter c",
            at: c.re,
        });
    }
    // 1 − w = 1/(1 − z) keeps full relative precision near w = 1.
    let w = z / (z - 1.0);
    let prefactor = (-a * (1.0 - z).ln()).exp();
    let cb = c - b;
    if let Some(degree) = polynomial_degree(a).into_iter().chain(polynomial_degree(cb)).min() {
        if degree < ctrl.max_terms {
            return Ok((prefactor, terminating_sum(a, cb, c, w, degree)));
        }
    }
    Ok((prefactor, series_or_continuation(a, cb, c, w, 1.0 / (1.0 - z), ctrl)?))
}

/// `distance` is 1 − z, supplied separately so callers can provide it at
/// better precision than `1.0 - z`.
fn series_or_continuation(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    z: f64,
    distance: f64,
    ctrl: &SeriesControl,
) -> Result<Complex64> {
    if z <= DIRECT_SERIES_MAX {
        direct_series(a, b, c, z, ctrl)
    } else {
        continue_towards_one(a, b, c, distance, ctrl)
    }
}

/// Degree of the polynomial if `p` is a non-positive integer.
fn polynomial_degree(p: Complex64) -> Option<usize> {
    if is_gamma_pole(p) {
        Some((-p.re) as usize)
    } else {
        None
    }
}

fn terminating_sum(a: Complex64, b: Complex64, c: Complex64, z: f64, degree: usize) -> Complex64 {
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    for n in 0..degree {
        let nf = n as f64;
        term *= (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        sum += term;
    }
    sum
}

fn gauss_sum(a: Complex64, b: Complex64, c: Complex64) -> Result<Complex64> {
    let s = c - a - b;
    if s.re <= 0.0 {
        return Err(Error::Divergence {
            what: "Gauss summation (Re(c − a − b) ≤ 0)",
            z: 1.0,
        });
    }
    if is_gamma_pole(c - a) || is_gamma_pole(c - b) {
        return Ok(Complex64::new(0.0, 0.0));
    }
    Ok((ln_gamma(c)? + ln_gamma(s)? - ln_gamma(c - a)? - ln_gamma(c - b)?).exp())
}

fn has_real_terms(a: Complex64, b: Complex64, c: Complex64) -> bool {
    c.im == 0.0 && ((a.im == 0.0 && b.im == 0.0) || b == a.conj())
}

fn direct_series(a: Complex64, b: Complex64, c: Complex64, z: f64, ctrl: &SeriesControl) -> Result<Complex64> {
    if has_real_terms(a, b, c) {
        return direct_series_real(a, b, c.re, z, ctrl).map(|v| Complex64::new(v, 0.0));
    }
    let mut term = Complex64::new(1.0, 0.0);
    let mut sum = term;
    let mut quiet = 0;
    for n in 0..ctrl.max_terms {
        let nf = n as f64;
        let ratio = (a + nf) * (b + nf) / ((c + nf) * (nf + 1.0)) * z;
        term *= ratio;
        sum += term;
        if tail_is_small(term.norm(), ratio.norm(), z, sum.norm(), ctrl) {
            quiet += 1;
            if quiet == 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConverged {
        what: "hypergeometric series",
        iterations: ctrl.max_terms,
    })
}

fn direct_series_real(a: Complex64, b: Complex64, c: f64, z: f64, ctrl: &SeriesControl) -> Result<f64> {
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut quiet = 0;
    for n in 0..ctrl.max_terms {
        let nf = n as f64;
        let numer = ((a + nf) * (b + nf)).re;
        let ratio = numer / ((c + nf) * (nf + 1.0)) * z;
        term *= ratio;
        sum += term;
        if tail_is_small(term.abs(), ratio.abs(), z, sum.abs(), ctrl) {
            quiet += 1;
            if quiet == 2 {
                return Ok(sum);
            }
        } else {
            quiet = 0;
        }
    }
    Err(Error::NonConverged {
        what: "hypergeometric series",
        iterations: ctrl.max_terms,
    })
}

/// Geometric tail bound: the term ratio tends to `z`, so the remaining sum is
/// at most `|term| q / (1 − q)` with `q = max(|ratio|, |z|)` once `q < 1`.
fn tail_is_small(term: f64, ratio: f64, z: f64, sum: f64, ctrl: &SeriesControl) -> bool {
    if term == 0.0 {
        return true;
    }
    let q = ratio.max(z.abs());
    if q >= 1.0 {
        return false;
    }
    term * q / (1.0 - q) <= TAIL_MARGIN * ctrl.rel_tol * sum.max(f64::MIN_POSITIVE)
}

fn continue_towards_one(a: Complex64, b: Complex64, c: Complex64, distance: f64, ctrl: &SeriesControl) -> Result<Complex64> {
    let one = Complex64::new(1.0, 0.0);
    let start = DIRECT_SERIES_MAX;
    let mut value = direct_series(a, b, c, start, ctrl)?;
    let mut slope = a * b / c * direct_series(a + one, b + one, c + one, start, ctrl)?;
    // Positions are tracked as distances to 1; halving is exact.
    let mut d = 1.0 - start;
    let mut steps = 0;
    while d > distance {
        let target = (0.5 * d).max(distance);
        (value, slope) = taylor_step(a, b, c, d, value, slope, d - target, ctrl)?;
        d = target;
        steps += 1;
        if steps > ctrl.max_terms {
            return Err(Error::NonConverged {
                what: "hypergeometric continuation",
                iterations: steps,
            });
        }
    }
    Ok(value)
}

/// Advances (F, F′) from `x0 = 1 − d0` to `x0 + h` using the Taylor series of
/// the solution of z(1−z)F″ + [c − (a+b+1)z]F′ − abF = 0 about `x0`.
#[allow(clippy::too_many_arguments)]
fn taylor_step(
    a: Complex64,
    b: Complex64,
    c: Complex64,
    d0: f64,
    value: Complex64,
    slope: Complex64,
    h: f64,
    ctrl: &SeriesControl,
) -> Result<(Complex64, Complex64)> {
    let x0 = 1.0 - d0;
    let p0 = x0 * d0;
    let p1 = 2.0 * d0 - 1.0;
    let p2 = -1.0;
    let q0 = c - (a + b + 1.0) * x0;
    let q1 = -(a + b + 1.0);
    let r = -(a * b);

    // e_k = c_k h^k
    let mut e_prev = value;
    let mut e_curr = slope * h;
    let mut f = e_prev + e_curr;
    let mut hf = e_curr;
    let mut quiet = 0;
    for k in 0..ctrl.max_terms {
        let kf = k as f64;
        let next = -((q0 * (kf + 1.0) + p1 * kf * (kf + 1.0)) * e_curr * h
            + (r + q1 * kf + p2 * kf * (kf - 1.0)) * e_prev * h * h)
            / (p0 * (kf + 1.0) * (kf + 2.0));
        f += next;
        hf += next * (kf + 2.0);
        let scale = f.norm() + hf.norm();
        if next.norm() <= 1e-17 * scale {
            quiet += 1;
            if quiet == 2 {
                return Ok((f, hf / h));
            }
        } else {
            quiet = 0;
        }
        e_prev = e_curr;
        e_curr = next;
    }
    Err(Error::NonConverged {
        what: "hypergeometric Taylor step",
        iterations: ctrl.max_terms,
    })
}
