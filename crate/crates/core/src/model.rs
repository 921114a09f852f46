//! Household economics, insured rates and the net-profit constraints.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::gauss_2f1;

/// Which of the two redundant critical levels the caller supplies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CriticalLevel {
    /// Critical capital x*.
    Capital(f64),
    /// Critical income I*.
    Income(f64),
}

/// Parameters of the uninsured capital process. β is fixed to 1, so the
/// remaining proportion is Z ~ Beta(α, 1).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub a: f64,
    pub b: f64,
    pub c_invest: f64,
    pub lambda: f64,
    pub alpha: f64,
    pub x_star_base: f64,
    pub i_star: f64,
}

impl ModelParams {
    pub fn new(a: f64, b: f64, c_invest: f64, lambda: f64, alpha: f64, critical: CriticalLevel) -> Result<Self> {
        check_open_unit("a", a)?;
        check_open_unit("c", c_invest)?;
        check_positive("b", b)?;
        check_positive("lambda", lambda)?;
        check_positive("alpha", alpha)?;
        let (x_star_base, i_star) = match critical {
            CriticalLevel::Capital(x) => {
                check_positive("x*", x)?;
                (x, x * b)
            }
            CriticalLevel::Income(i) => {
                check_positive("I*", i)?;
                (i / b, i)
            }
        };
        Ok(ModelParams {
            a,
            b,
            c_invest,
            lambda,
            alpha,
            x_star_base,
            i_star,
        })
    }

    /// r = (1 − a)·b·c
    pub fn r(&self) -> f64 {
        (1.0 - self.a) * self.b * self.c_invest
    }

    /// λ/r
    pub fn rho(&self) -> f64 {
        self.lambda / self.r()
    }

    pub fn with_lambda(&self, lambda: f64) -> Result<Self> {
        check_positive("lambda", lambda)?;
        Ok(ModelParams { lambda, ..*self })
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        check_positive("alpha", alpha)?;
        Ok(ModelParams { alpha, ..*self })
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must be positive and finite, got {v}")))
    }
}

fn check_open_unit(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in (0, 1), got {v}")))
    }
}

/// Proportional coverage: a fraction 1 − κ of each loss is insured at loading θ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InsuranceParams {
    pub kappa: f64,
    pub theta: f64,
}

impl InsuranceParams {
    pub fn new(kappa: f64, theta: f64) -> Result<Self> {
        if !(kappa > 0.0 && kappa <= 1.0) {
            return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
        }
        if !(theta >= 0.0 && theta.is_finite()) {
            return Err(Error::InvalidParameter(format!("theta must be non-negative, got {theta}")));
        }
        Ok(InsuranceParams { kappa, theta })
    }

    /// κ = 1: no coverage.
    pub fn uninsured() -> Self {
        InsuranceParams { kappa: 1.0, theta: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedRates {
    pub premium: f64,
    pub r_eff: f64,
    pub x_star_eff: f64,
}

impl DerivedRates {
    pub fn rho(&self, lambda: f64) -> f64 {
        lambda / self.r_eff
    }
}

/// Expected-value premium and the growth rate and critical capital net of it.
pub fn derive_rates(m: &ModelParams, ins: &InsuranceParams) -> Result<DerivedRates> {
    let premium = (1.0 + ins.theta) * (1.0 - ins.kappa) * m.lambda / (m.alpha + 1.0);
    if premium >= m.b {
        return Err(Error::PremiumExceedsIncome { premium, b: m.b });
    }
    let net_income = m.b - premium;
    Ok(DerivedRates {
        premium,
        r_eff: (1.0 - m.a) * net_income * m.c_invest,
        x_star_eff: m.i_star / net_income,
    })
}

/// Where an insured household's poverty line sits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum PovertyLine {
    /// I*/(b − π): the line moves up with the premium.
    #[default]
    Variable,
    /// The uninsured x* for every household, as with an international line.
    Fixed,
}

impl PovertyLine {
    /// Derived rates with the critical capital chosen by this convention.
    pub fn rates(&self, m: &ModelParams, ins: &InsuranceParams) -> Result<DerivedRates> {
        let mut rates = derive_rates(m, ins)?;
        if *self == PovertyLine::Fixed {
            rates.x_star_eff = m.x_star_base;
        }
        Ok(rates)
    }
}

/// α − λ/r; positive iff trapping is not certain.
pub fn net_profit_margin_uninsured(m: &ModelParams) -> f64 {
    m.alpha - m.rho()
}

/// B(α, κ) = −E[log(1 − κ(1 − Z))] for Z ~ Beta(α, 1):
///
/// B = κ/((1−κ)(α+1)) · ₂F₁(1, α+1; α+2; −κ/(1−κ)),  B(α, 1) = 1/α.
pub fn lundberg_bound(alpha: f64, kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter(format!("alpha must be positive, got {alpha}")));
    }
    if kappa == 1.0 {
        return Ok(1.0 / alpha);
    }
    let q = 1.0 - kappa;
    let f = gauss_2f1(
        Complex64::new(1.0, 0.0),
        Complex64::new(alpha + 1.0, 0.0),
        Complex64::new(alpha + 2.0, 0.0),
        -kappa / q,
    )?;
    Ok(kappa / (q * (alpha + 1.0)) * f.re)
}

/// B(1, κ) = 1 + ((1−κ)/κ)·ln(1−κ).
pub fn lundberg_bound_uniform(kappa: f64) -> Result<f64> {
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
    }
    if kappa == 1.0 {
        return Ok(1.0);
    }
    if kappa < 1e-3 {
        // Σ κⁿ/(n(n+1)); the closed form cancels badly here.
        let mut sum = 0.0;
        let mut pow = 1.0;
        for n in 1..=12 {
            pow *= kappa;
            sum += pow / (n * (n + 1)) as f64;
        }
        return Ok(sum);
    }
    Ok(1.0 + (1.0 - kappa) / kappa * (-kappa).ln_1p())
}

/// r_eff/λ − B(α, κ); positive iff the insured adjustment coefficient exists.
pub fn net_profit_margin_insured(m: &ModelParams, ins: &InsuranceParams) -> Result<f64> {
    let rates = derive_rates(m, ins)?;
    let bound = if m.alpha == 1.0 {
        lundberg_bound_uniform(ins.kappa)?
    } else {
        lundberg_bound(m.alpha, ins.kappa)?
    };
    Ok(rates.r_eff / m.lambda - bound)
}

/// R = α − λ/r, the positive root of E[Z^{−R}]·E[e^{−R r T̃}] = 1.
pub fn adjustment_coefficient_uninsured(m: &ModelParams) -> Result<f64> {
    let margin = net_profit_margin_uninsured(m);
    if margin <= 0.0 {
        return Err(Error::NoAdjustmentCoefficient { margin });
    }
    Ok(margin)
}

/// Left side of the uninsured Lundberg equation, (α/(α−R))·(λ/(λ+Rr)).
pub fn lundberg_product(m: &ModelParams, big_r: f64) -> f64 {
    m.alpha / (m.alpha - big_r) * (m.lambda / (m.lambda + big_r * m.r()))
}

/// Largest λ for which the insured constraint holds, with r_eff depending on
/// λ through the premium:
///
/// λ_max = (1−a)cb / (B + (1−a)c(1+θ)(1−κ)/(α+1)).
pub fn lambda_upper_boundary(m: &ModelParams, ins: &InsuranceParams) -> Result<f64> {
    let bound = if m.alpha == 1.0 {
        lundberg_bound_uniform(ins.kappa)?
    } else {
        lundberg_bound(m.alpha, ins.kappa)?
    };
    let k = (1.0 - m.a) * m.c_invest;
    Ok(k * m.b / (bound + k * (1.0 + ins.theta) * (1.0 - ins.kappa) / (m.alpha + 1.0)))
}
