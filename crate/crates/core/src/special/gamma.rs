//! Log-gamma and gamma for complex and real arguments (Lanczos, g = 7, n = 9).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS_COEFFS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// ln(2π)/2
const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// True when `z` sits on a pole of Γ: a real non-positive integer.
pub fn is_gamma_pole(z: Complex64) -> bool {
    z.im == 0.0 && z.re <= 0.0 && z.re == z.re.round()
}

/// Log-gamma on the principal sheet for `Re z >= 1/2`, reflected otherwise.
///
/// For real negative non-integer `z` the imaginary part is `±π` times an
/// integer, so `exp(ln_gamma(z))` still carries the correct sign.
pub fn ln_gamma(z: Complex64) -> Result<Complex64> {
    if !(z.re.is_finite() && z.im.is_finite()) {
        return Err(Error::Domain(format!("ln_gamma of non-finite argument {z}")));
    }
    if is_gamma_pole(z) {
        return Err(Error::Pole { what: "gamma", at: z.re });
    }
    Ok(ln_gamma_unchecked(z))
}

fn ln_gamma_unchecked(z: Complex64) -> Complex64 {
    if z.re < 0.5 {
        // Γ(z)Γ(1−z) = π / sin(πz)
        let s = (z * PI).sin();
        return Complex64::new(PI.ln(), 0.0) - s.ln() - ln_gamma_unchecked(Complex64::new(1.0, 0.0) - z);
    }
    let zm = z - 1.0;
    let mut acc = Complex64::new(LANCZOS_COEFFS[0], 0.0);
    for (k, &coef) in LANCZOS_COEFFS.iter().enumerate().skip(1) {
        acc += coef / (zm + k as f64);
    }
    let t = zm + LANCZOS_G + 0.5;
    (zm + 0.5) * t.ln() - t + HALF_LN_2PI + acc.ln()
}

/// `ln |Γ(x)|` for real `x` that is not a pole.
pub fn ln_gamma_abs(x: f64) -> Result<f64> {
    Ok(ln_gamma(Complex64::new(x, 0.0))?.re)
}

/// Real gamma function.
///
/// Negative non-integers are reached through Γ(x) = Γ(x+1)/x, stepping up
/// until the argument is positive.
pub fn gamma(x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(Error::Domain(format!("gamma of non-finite argument {x}")));
    }
    if x <= 0.0 && x == x.round() {
        return Err(Error::Pole { what: "gamma", at: x });
    }
    let mut shift = x;
    let mut divisor = 1.0;
    while shift <= 0.0 {
        divisor *= shift;
        shift += 1.0;
    }
    Ok(ln_gamma_unchecked(Complex64::new(shift, 0.0)).re.exp() / divisor)
}

/// 1/Γ(z), which is entire; zero at the poles of Γ.
pub fn recip_gamma(z: Complex64) -> Complex64 {
    if is_gamma_pole(z) {
        Complex64::new(0.0, 0.0)
    } else {
        (-ln_gamma_unchecked(z)).exp()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn small_integers_give_factorials() {
        assert!(ln_gamma(c(1.0)).unwrap().norm() < 1e-14);
        assert!((ln_gamma(c(5.0)).unwrap().re - 24f64.ln()).abs() < 1e-13);
        let mut fact = 1.0;
        for n in 1..15 {
            if n > 1 {
                fact *= (n - 1) as f64;
            }
            let g = gamma(n as f64).unwrap();
            assert!((g - fact).abs() / fact < 1e-13, "n={n} g={g} fact={fact}");
        }
    }

    #[test]
    fn half_integer_and_duplication() {
        let half = ln_gamma(c(0.5)).unwrap().re;
        assert!((half - 0.5 * PI.ln()).abs() < 1e-14);
        // Legendre duplication: Γ(z)Γ(z+1/2) = 2^{1−2z} √π Γ(2z)
        for &z in &[0.3, 1.7, 2.25, 4.1, 9.6] {
            let lhs = ln_gamma_abs(z).unwrap() + ln_gamma_abs(z + 0.5).unwrap();
            let rhs = (1.0 - 2.0 * z) * 2f64.ln() + 0.5 * PI.ln() + ln_gamma_abs(2.0 * z).unwrap();
            assert!((lhs - rhs).abs() < 1e-13, "z={z}");
        }
    }

    #[test]
    fn poles_are_rejected() {
        assert!(matches!(ln_gamma(c(0.0)), Err(Error::Pole { .. })));
        assert!(matches!(ln_gamma(c(-3.0)), Err(Error::Pole { .. })));
        assert!(matches!(gamma(-2.0), Err(Error::Pole { .. })));
        assert_eq!(recip_gamma(c(-4.0)), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn negative_non_integers_follow_recurrence() {
        // Γ(−1/2) = −2√π
        let g = gamma(-0.5).unwrap();
        assert!((g + 2.0 * PI.sqrt()).abs() < 1e-13);
        let via_complex = ln_gamma(c(-0.5)).unwrap().exp();
        assert!((via_complex.re - g).abs() < 1e-12 && via_complex.im.abs() < 1e-12);
        let g = gamma(-2.5).unwrap();
        assert!((g - gamma(-1.5).unwrap() / -2.5).abs() < 1e-13);
    }

    #[test]
    fn complex_recurrence_and_conjugation() {
        let z = Complex64::new(0.7, 2.3);
        let lhs = ln_gamma(z + 1.0).unwrap().exp();
        let rhs = z * ln_gamma(z).unwrap().exp();
        assert!((lhs - rhs).norm() / lhs.norm() < 1e-13);
        let a = ln_gamma(z).unwrap();
        let b = ln_gamma(z.conj()).unwrap();
        assert!((a.conj() - b).norm() < 1e-13);
    }
}
