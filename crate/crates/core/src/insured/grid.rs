use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Limits 0 = x̃₀ < x̃₁ < … < x̃_{J+1} of the surplus subintervals I_j = [x̃_j, x̃_{j+1}].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubintervalGrid {
    pub limits: Vec<f64>,
    pub kappa: f64,
    pub x_star_eff: f64,
}

impl SubintervalGrid {
    /// Limits up to x̃_{depth+1} from x̃_{j+1} = (x̃_j + x*κ)/(1 − κ).
    pub fn new(kappa: f64, x_star_eff: f64, depth: usize) -> Result<Self> {
        if !(kappa > 0.0 && kappa < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "subinterval limits need kappa in (0, 1), got {kappa}"
            )));
        }
        if !(x_star_eff > 0.0) {
            return Err(Error::InvalidParameter(format!("x* must be positive, got {x_star_eff}")));
        }
        let mut limits = Vec::with_capacity(depth + 2);
        limits.push(0.0);
        for j in 0..=depth {
            limits.push((limits[j] + x_star_eff * kappa) / (1.0 - kappa));
        }
        Ok(SubintervalGrid {
            limits,
            kappa,
            x_star_eff,
        })
    }

    /// Single interval [0, upper] used without cover, where x̃₁ = ∞.
    pub fn single(x_star_eff: f64, upper: f64) -> Result<Self> {
        if !(upper > 0.0 && upper.is_finite()) {
            return Err(Error::InvalidParameter(format!("range must be positive, got {upper}")));
        }
        Ok(SubintervalGrid {
            limits: vec![0.0, upper],
            kappa: 1.0,
            x_star_eff,
        })
    }

    /// J, the index of the last built interval.
    pub fn depth(&self) -> usize {
        self.limits.len() - 2
    }

    pub fn upper(&self) -> f64 {
        *self.limits.last().expect("grid has two limits")
    }

    /// x̃_j = x*((1 − κ)^{−j} − 1)
    pub fn closed_form_limit(kappa: f64, x_star_eff: f64, j: i32) -> f64 {
        x_star_eff * ((1.0 - kappa).powi(-j) - 1.0)
    }

    /// l(s) = (1 − κ)s − x*κ, which maps I_{j+1} onto I_j.
    pub fn shift(&self, s: f64) -> f64 {
        (1.0 - self.kappa) * s - self.x_star_eff * self.kappa
    }

    /// Index j with x̃ ∈ [x̃_j, x̃_{j+1}); the top limit belongs to the last interval.
    pub fn interval_of(&self, x: f64) -> Option<usize> {
        if !(x >= 0.0) || x > self.upper() {
            return None;
        }
        let j = self.limits.partition_point(|&l| l <= x);
        Some((j - 1).min(self.depth()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recurrence_matches_closed_form() {
        for &kappa in &[0.05, 0.3, 0.5, 0.9] {
            let g = SubintervalGrid::new(kappa, 1.6, 19).unwrap();
            for (j, &l) in g.limits.iter().enumerate() {
                let c = SubintervalGrid::closed_form_limit(kappa, 1.6, j as i32);
                assert!((l - c).abs() <= 1e-12 * c.max(1.0), "kappa={kappa} j={j}");
            }
        }
    }

    #[test]
    fn shift_maps_limits_down() {
        let g = SubintervalGrid::new(0.3, 1.6, 4).unwrap();
        for j in 1..g.limits.len() {
            assert!((g.shift(g.limits[j]) - g.limits[j - 1]).abs() < 1e-13);
        }
    }

    #[test]
    fn interval_lookup() {
        let g = SubintervalGrid::new(0.3, 1.6, 3).unwrap();
        assert_eq!(g.interval_of(0.0), Some(0));
        assert_eq!(g.interval_of(g.limits[1]), Some(1));
        assert_eq!(g.interval_of(g.upper()), Some(3));
        assert_eq!(g.interval_of(g.upper() * 1.01), None);
    }
}
