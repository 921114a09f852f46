//! Regularized upper incomplete gamma Q(s, z) = Γ(s; z)/Γ(s).

use super::gamma::ln_gamma_abs;
use crate::error::{Error, Result};

const MAX_ITER: usize = 10_000;
const EPS: f64 = 1e-16;
const TINY: f64 = 1e-300;

/// Q(s, z) for s > 0, z ≥ 0.
///
/// Power series for P = 1 − Q when z < s + 1, modified Lentz continued
/// fraction for Q otherwise.
pub fn reg_upper_inc_gamma(s: f64, z: f64) -> Result<f64> {
    if !(s > 0.0) || !s.is_finite() {
        return Err(Error::Domain(format!("incomplete gamma needs s > 0, got {s}")));
    }
    if !(z >= 0.0) {
        return Err(Error::Domain(format!("incomplete gamma needs z >= 0, got {z}")));
    }
    if z == 0.0 {
        return Ok(1.0);
    }
    if z.is_infinite() {
        return Ok(0.0);
    }
    let log_prefactor = s * z.ln() - z - ln_gamma_abs(s)?;
    let q = if z < s + 1.0 {
        1.0 - lower_series(s, z, log_prefactor)?
    } else {
        upper_fraction(s, z, log_prefactor)?
    };
    Ok(q.clamp(0.0, 1.0))
}

fn lower_series(s: f64, z: f64, log_prefactor: f64) -> Result<f64> {
    let mut denom = s;
    let mut term = 1.0 / s;
    let mut sum = term;
    for _ in 0..MAX_ITER {
        denom += 1.0;
        term *= z / denom;
        sum += term;
        if term.abs() < sum.abs() * EPS {
            return Ok(sum * log_prefactor.exp());
        }
    }
    Err(Error::NonConverged {
        what: "incomplete gamma series",
        iterations: MAX_ITER,
    })
}

fn upper_fraction(s: f64, z: f64, log_prefactor: f64) -> Result<f64> {
    let mut b = z + 1.0 - s;
    let mut c = 1.0 / TINY;
    let mut d = 1.0 / b;
    let mut h = d;
    for i in 1..=MAX_ITER {
        let an = -(i as f64) * (i as f64 - s);
        b += 2.0;
        d = an * d + b;
        if d.abs() < TINY {
            d = TINY;
        }
        c = b + an / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(log_prefactor.exp() * h);
        }
    }
    Err(Error::NonConverged {
        what: "incomplete gamma continued fraction",
        iterations: MAX_ITER,
    })
}
