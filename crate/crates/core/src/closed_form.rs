//! Uninsured trapping probabilities, their power-law asymptote, the
//! exponential-loss comparison curve and the algebraic decay exponent.

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{net_profit_margin_uninsured, ModelParams};
use crate::numerics::{bisect, integrate, QuadSettings};
use crate::special::{gauss_2f1, ln_gamma_abs, reg_upper_inc_gamma};

/// Largest overshoot outside [0, 1] attributed to round-off.
pub const PROBABILITY_SLACK: f64 = 1e-9;

/// Clamps `p` to [0, 1] if it lies within [`PROBABILITY_SLACK`] of it.
pub fn checked_probability(p: f64) -> Result<f64> {
    if !p.is_finite() || p < -PROBABILITY_SLACK || p > 1.0 + PROBABILITY_SLACK {
        return Err(Error::ProbabilityOutOfRange(p));
    }
    Ok(p.clamp(0.0, 1.0))
}

fn c(x: f64) -> Complex64 {
    Complex64::new(x, 0.0)
}

fn check_uninsured(x: f64, m: &ModelParams) -> Result<f64> {
    let rho = m.rho();
    if rho >= m.alpha {
        return Err(Error::ConstraintViolated(format!(
            "lambda/r = {rho} is not below alpha = {}",
            m.alpha
        )));
    }
    if !(x >= m.x_star_base) {
        return Err(Error::Domain(format!(
            "capital {x} is below the critical capital {}",
            m.x_star_base
        )));
    }
    Ok(rho)
}

/// Γ(α) / (Γ(ρ) Γ(α − ρ + 1))
fn leading_constant(alpha: f64, rho: f64) -> Result<f64> {
    Ok((ln_gamma_abs(alpha)? - ln_gamma_abs(rho)? - ln_gamma_abs(alpha - rho + 1.0)?).exp())
}

/// f(x) = Γ(α)/(Γ(ρ)Γ(α−ρ+1)) · (x/x*)^{ρ−α} · ₂F₁(α−ρ, 1−ρ; α−ρ+1; x*/x), ρ = λ/r.
pub fn trapping_prob_uninsured(x: f64, m: &ModelParams) -> Result<f64> {
    let rho = check_uninsured(x, m)?;
    let alpha = m.alpha;
    let ratio = x / m.x_star_base;
    let z = if x == m.x_star_base { 1.0 } else { m.x_star_base / x };
    let f = gauss_2f1(c(alpha - rho), c(1.0 - rho), c(alpha - rho + 1.0), z)?;
    checked_probability(leading_constant(alpha, rho)? * ratio.powf(rho - alpha) * f.re)
}

/// f(x) = 1 − Γ(α)/(Γ(ρ+1)Γ(α−ρ)) · (1−x*/x)^ρ · ₂F₁(ρ, 1+ρ−α; 1+ρ; 1−x*/x).
pub fn trapping_prob_uninsured_alt(x: f64, m: &ModelParams) -> Result<f64> {
    let rho = check_uninsured(x, m)?;
    let alpha = m.alpha;
    let w = (x - m.x_star_base) / x;
    if w == 0.0 {
        return Ok(1.0);
    }
    let k = (ln_gamma_abs(alpha)? - ln_gamma_abs(rho + 1.0)? - ln_gamma_abs(alpha - rho)?).exp();
    let f = gauss_2f1(c(rho), c(1.0 + rho - alpha), c(1.0 + rho), w)?;
    checked_probability(1.0 - k * w.powf(rho) * f.re)
}

/// Trapping probability under Exp(μ) random-valued losses: Q(λ/r, μ(x − x*)).
pub fn trapping_prob_exp_losses(x: f64, mu: f64, lambda: f64, r: f64, x_star: f64) -> Result<f64> {
    if !(mu > 0.0 && lambda > 0.0 && r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "mu, lambda and r must be positive (got {mu}, {lambda}, {r})"
        )));
    }
    if !(x >= x_star) {
        return Err(Error::Domain(format!("capital {x} is below the critical capital {x_star}")));
    }
    reg_upper_inc_gamma(lambda / r, mu * (x - x_star))
}

/// Power-law asymptote Γ(α)/(Γ(ρ)Γ(α−ρ+1)) · (x/x*)^{ρ−α}.
pub fn asymptotic_power(x: f64, m: &ModelParams) -> Result<f64> {
    let rho = check_uninsured(x, m)?;
    Ok(leading_constant(m.alpha, rho)? * (x / m.x_star_base).powf(rho - m.alpha))
}

/// Constant A with f(x) = 1 + A·v(x − x*) when α = 1 and there is no cover:
/// A = −1/(Γ(1+ρ)Γ(1−ρ)) = −sin(πρ)/(πρ).
pub fn analytic_uniform_constant(rho: f64) -> Result<f64> {
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::ConstraintViolated(format!("lambda/r = {rho} must lie in (0, 1)")));
    }
    Ok(-(PI * rho).sin() / (PI * rho))
}

/// Capital grid on which the uninsured curve is evaluated.
#[derive(Debug, Clone, PartialEq)]
pub struct UninsuredCurveSpec {
    pub model: ModelParams,
    pub grid: Vec<f64>,
}

impl UninsuredCurveSpec {
    pub fn new(model: ModelParams, grid: Vec<f64>) -> Result<Self> {
        if net_profit_margin_uninsured(&model) <= 0.0 {
            return Err(Error::ConstraintViolated(format!(
                "lambda/r = {} is not below alpha = {}",
                model.rho(),
                model.alpha
            )));
        }
        if grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::InvalidParameter("capital grid must be strictly increasing".into()));
        }
        if let Some(&first) = grid.first() {
            if !(first >= model.x_star_base) {
                return Err(Error::Domain(format!(
                    "grid starts at {first}, below the critical capital {}",
                    model.x_star_base
                )));
            }
        }
        Ok(UninsuredCurveSpec { model, grid })
    }

    pub fn evaluate(&self) -> Result<Vec<f64>> {
        self.grid
            .par_iter()
            .map(|&x| trapping_prob_uninsured(x, &self.model))
            .collect()
    }
}

/// Parameters of the algebraic-decay equation
/// rγ − λ + λ·E[Y^γ] = 0, Y = 1 − κ(1 − Z), Z ~ Beta(α, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecayQuery {
    pub alpha: f64,
    pub lambda: f64,
    pub r: f64,
    pub kappa: f64,
}

impl DecayQuery {
    pub fn new(alpha: f64, lambda: f64, r: f64, kappa: f64) -> Result<Self> {
        for (name, v) in [("alpha", alpha), ("lambda", lambda), ("r", r)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("{name} must be positive, got {v}")));
            }
        }
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        Ok(DecayQuery { alpha, lambda, r, kappa })
    }

    /// E[Y^γ] = α∫₀¹ (1−κ+κt)^γ t^{α−1} dt; +∞ where it diverges (κ = 1, γ ≤ −α).
    pub fn moment(&self, gamma: f64) -> Result<f64> {
        let (alpha, kappa) = (self.alpha, self.kappa);
        if kappa == 1.0 {
            return Ok(if gamma > -alpha { alpha / (gamma + alpha) } else { f64::INFINITY });
        }
        let q = 1.0 - kappa;
        if alpha == 1.0 {
            let e = gamma + 1.0;
            if e == 0.0 {
                return Ok(-q.ln() / kappa);
            }
            return Ok(-(e * q.ln()).exp_m1() / (kappa * e));
        }
        let settings = QuadSettings::with_abs_tol(1e-11);
        if alpha < 1.0 {
            // t = w^{1/α} removes the t^{α−1} endpoint singularity.
            integrate(|w| (q + kappa * w.powf(1.0 / alpha)).powf(gamma), 0.0, 1.0, &settings)
        } else {
            integrate(
                |t| alpha * (q + kappa * t).powf(gamma) * t.powf(alpha - 1.0),
                0.0,
                1.0,
                &settings,
            )
        }
    }

    /// Left side rγ − λ + λ·E[Y^γ].
    pub fn equation(&self, gamma: f64) -> Result<f64> {
        Ok(self.r * gamma - self.lambda + self.lambda * self.moment(gamma)?)
    }
}

const DECAY_EPS: f64 = 1e-9;

/// Negative root γ of the decay equation; the trivial root γ = 0 is excluded.
///
/// The search starts on (−α − λ/r − 10, −1e−9). With cover the root can sit
/// far below that, so the lower end is pushed out until the sign flips.
pub fn decay_exponent(q: &DecayQuery) -> Result<f64> {
    let g = |x: f64| q.equation(x);
    let hi = -DECAY_EPS;
    if g(hi)? >= 0.0 {
        return Err(Error::NoNegativeRoot);
    }
    let mut lo = -q.alpha - q.lambda / q.r - 10.0;
    let mut widen = 0;
    while g(lo)? <= 0.0 {
        widen += 1;
        if widen > 60 {
            return Err(Error::NoNegativeRoot);
        }
        lo *= 2.0;
    }
    // Bisection needs a plain closure; surface evaluation errors afterwards.
    let mut failure = None;
    let (a, b) = bisect(
        |x| match g(x) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NAN
            }
        },
        lo,
        hi,
        1e-13,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(0.5 * (a + b))
}
