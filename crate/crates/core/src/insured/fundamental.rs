//! Fundamental solutions of r̂(x̃)y″ + p(x̃)y′ + c·y = 0 with
//! r̂(x̃) = x̃(x̃ + x*), p(x̃) = (2 − ρ)x̃ + x*(1 − ρ), c = λ(1 − κ)/(rκ), ρ = λ/r.
//!
//! With z = −x̃/x* the equation is Gauss' hypergeometric equation with
//! parameters (a₁, b₁; c₁), a₁ + b₁ = c₁ = 1 − ρ and a₁b₁ = c. The two
//! Frobenius solutions at the origin are
//!
//! u(x̃) = ₂F₁(a₁, b₁; c₁; z),  v(x̃) = (x̃/x*)^ρ ₂F₁(ρ + a₁, ρ + b₁; 1 + ρ; z).
//!
//! For z < −1/2 both are evaluated through the Pfaff transform, which gives
//! the forms with repeated upper parameters and argument x̃/(x̃ + x*).

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::hyp2f1::pfaff_parts;
use crate::special::{gauss_2f1_with, SeriesControl};

/// Imaginary round-off tolerated when a product is known to be real.
pub const IMAG_RESIDUE_TOL: f64 = 1e-10;

const PFAFF_BELOW: f64 = -0.5;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HypergeomTriple {
    pub a1: Complex64,
    pub b1: Complex64,
    pub c1: f64,
    /// λ/r, kept alongside c₁ = 1 − ρ to avoid recovering it by subtraction.
    pub rho: f64,
}

impl HypergeomTriple {
    /// a₁·b₁ = λ(1 − κ)/(rκ)
    pub fn product(&self) -> f64 {
        (self.a1 * self.b1).re
    }

    pub fn is_complex(&self) -> bool {
        self.a1.im != 0.0
    }
}

/// (1 + ρ)² − 4ρ/κ
pub fn discriminant(rho: f64, kappa: f64) -> f64 {
    (1.0 + rho).powi(2) - 4.0 * rho / kappa
}

pub fn hypergeom_params(lambda: f64, r: f64, kappa: f64) -> Result<HypergeomTriple> {
    if !(lambda > 0.0 && r > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "lambda and r must be positive (got {lambda}, {r})"
        )));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(Error::InvalidParameter(format!("kappa must lie in (0, 1], got {kappa}")));
    }
    let rho = lambda / r;
    let c1 = 1.0 - rho;
    let disc = discriminant(rho, kappa);
    let root = if disc >= 0.0 {
        Complex64::new(disc.sqrt(), 0.0)
    } else {
        Complex64::new(0.0, (-disc).sqrt())
    };
    let a1 = 0.5 * c1 + 0.5 * root;
    let b1 = 0.5 * c1 - 0.5 * root;
    Ok(HypergeomTriple { a1, b1, c1, rho })
}

/// Real value of a hypergeometric function whose parameters make it real
/// (b = conj(a) or all parameters real, c real).
fn real_2f1(a: Complex64, b: Complex64, c: f64, z: f64, ctrl: &SeriesControl, what: &'static str) -> Result<f64> {
    let c = Complex64::new(c, 0.0);
    if z >= PFAFF_BELOW {
        // Real-coefficient series; the imaginary part is exactly zero.
        return Ok(gauss_2f1_with(a, b, c, z, ctrl)?.re);
    }
    let (prefactor, f) = pfaff_parts(a, b, c, z, ctrl)?;
    let value = prefactor * f;
    // F is normalised to 1 at the origin; near its zeros the round-off is set
    // by that normalisation rather than by |F|.
    let scale = prefactor.norm() * f.norm().max(1.0);
    if value.im.abs() > IMAG_RESIDUE_TOL * scale {
        return Err(Error::ComplexResidue {
            what,
            residue: value.im.abs() / scale,
        });
    }
    Ok(value.re)
}

/// u, v and their derivatives for one parameter set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FundamentalSystem {
    pub params: HypergeomTriple,
    pub x_star: f64,
    pub ctrl: SeriesControl,
}

impl FundamentalSystem {
    pub fn new(params: HypergeomTriple, x_star: f64) -> Self {
        FundamentalSystem {
            params,
            x_star,
            ctrl: SeriesControl::default(),
        }
    }

    fn z(&self, x: f64) -> f64 {
        -x / self.x_star
    }

    fn check(&self, x: f64) -> Result<()> {
        if x >= 0.0 && x.is_finite() {
            Ok(())
        } else {
            Err(Error::Domain(format!("surplus capital must be non-negative, got {x}")))
        }
    }

    pub fn u(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let p = &self.params;
        real_2f1(p.a1, p.b1, p.c1, self.z(x), &self.ctrl, "u")
    }

    pub fn v(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        if x == 0.0 {
            return Ok(0.0);
        }
        let p = &self.params;
        let f = real_2f1(p.a1 + p.rho, p.b1 + p.rho, 1.0 + p.rho, self.z(x), &self.ctrl, "v")?;
        Ok((x / self.x_star).powf(p.rho) * f)
    }

    /// u′(x̃) = −(1/x*)(a₁b₁/c₁) ₂F₁(a₁+1, b₁+1; c₁+1; z)
    pub fn du(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        let p = &self.params;
        let f = real_2f1(p.a1 + 1.0, p.b1 + 1.0, p.c1 + 1.0, self.z(x), &self.ctrl, "u'")?;
        Ok(-p.product() / (p.c1 * self.x_star) * f)
    }

    /// v′(x̃) = (ρ/x̃)v + (x̃/x*)^ρ (−1/x*) ((ρ+a₁)(ρ+b₁)/(1+ρ)) ₂F₁(ρ+a₁+1, ρ+b₁+1; 2+ρ; z)
    pub fn dv(&self, x: f64) -> Result<f64> {
        self.check(x)?;
        if x == 0.0 {
            return Err(Error::Domain("v' is singular at the origin".into()));
        }
        let p = &self.params;
        let ap = p.a1 + p.rho;
        let bp = p.b1 + p.rho;
        let coef = (ap * bp).re / (1.0 + p.rho);
        let f = real_2f1(ap + 1.0, bp + 1.0, 2.0 + p.rho, self.z(x), &self.ctrl, "v'")?;
        let pow = (x / self.x_star).powf(p.rho);
        Ok(p.rho / x * self.v(x)? - pow * coef / self.x_star * f)
    }

    /// W = u v′ − u′ v from the differentiated series.
    pub fn wronskian(&self, x: f64) -> Result<f64> {
        if !(x > 0.0) {
            return Err(Error::Domain(format!("Wronskian needs positive surplus, got {x}")));
        }
        let w = self.u(x)? * self.dv(x)? - self.du(x)? * self.v(x)?;
        if !(w.abs() >= 1e-300) {
            return Err(Error::DegenerateWronskian { x, value: w });
        }
        Ok(w)
    }

    /// r̂(x̃)W(x̃) in closed form. Abel's identity with p/r̂ = (1−ρ)/x̃ + 1/(x̃+x*)
    /// and the small-x̃ behaviour u → 1, v ~ (x̃/x*)^ρ give r̂W = ρx*(x̃/x*)^ρ.
    pub fn weighted_wronskian(&self, x: f64) -> f64 {
        self.params.rho * self.x_star * (x / self.x_star).powf(self.params.rho)
    }

    /// r̂(x̃) = x̃(x̃ + x*)
    pub fn r_hat(&self, x: f64) -> f64 {
        x * (x + self.x_star)
    }

    /// p(x̃) = (2 − ρ)x̃ + x*(1 − ρ)
    pub fn p_coef(&self, x: f64) -> f64 {
        (2.0 - self.params.rho) * x + self.x_star * self.params.c1
    }

    /// G(x̃, s) = (u(s)v(x̃) − u(x̃)v(s)) / (r̂(s)W(s)), with W from the series.
    pub fn green(&self, x: f64, s: f64) -> Result<f64> {
        if !(s > 0.0 && s <= x) {
            return Err(Error::Domain(format!("Green's function needs 0 < s <= x, got s={s}, x={x}")));
        }
        if s == x {
            return Ok(0.0);
        }
        let num = self.u(s)? * self.v(x)? - self.u(x)? * self.v(s)?;
        Ok(num / (self.r_hat(s) * self.wronskian(s)?))
    }
}

pub fn fundamental_u(x_tilde: f64, p: &HypergeomTriple, x_star_eff: f64) -> Result<f64> {
    FundamentalSystem::new(*p, x_star_eff).u(x_tilde)
}

pub fn fundamental_v(x_tilde: f64, p: &HypergeomTriple, x_star_eff: f64) -> Result<f64> {
    FundamentalSystem::new(*p, x_star_eff).v(x_tilde)
}

pub fn wronskian(x_tilde: f64, p: &HypergeomTriple, x_star_eff: f64) -> Result<f64> {
    FundamentalSystem::new(*p, x_star_eff).wronskian(x_tilde)
}

pub fn greens_function(x_tilde: f64, s: f64, p: &HypergeomTriple, x_star_eff: f64) -> Result<f64> {
    FundamentalSystem::new(*p, x_star_eff).green(x_tilde, s)
}
