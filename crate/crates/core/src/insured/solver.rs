//! Piecewise solution y of L[y_{j+1}] = c·y_j(l(x̃)) on the surplus subintervals.
//!
//! The nested j-fold integrals are carried as increments
//!
//!   Δ₀ = v,  Δ_{j+1}(x̃) = c ∫_{x̃_{j+1}}^{x̃} G(x̃, s) Δ_j(l(s)) ds,
//!
//! so that y_j = v + Δ₁ + … + Δ_j. With G(x̃, s) = (u(s)v(x̃) − u(x̃)v(s))/ω(s),
//! ω = r̂W, each increment is c·[v(x̃)P(x̃) − u(x̃)Q(x̃)] where P and Q are
//! running integrals of uφ/ω and vφ/ω, φ(s) = Δ_j(l(s)).
//!
//! Increments are stored on Chebyshev–Lobatto panels aligned with the
//! subintervals; v is always evaluated directly.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::fundamental::{hypergeom_params, FundamentalSystem};
use super::grid::SubintervalGrid;
use crate::closed_form::checked_probability;
use crate::error::{Error, Result};
use crate::model::{derive_rates, net_profit_margin_insured, DerivedRates, InsuranceParams, ModelParams};
use crate::numerics::cheb::lobatto_nodes;
use crate::numerics::{integrate_vec, ChebPanel, QuadSettings};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverSettings {
    /// J: increments Δ₁..Δ_J are built and y is available on I₀..I_J.
    pub depth: usize,
    /// Base node count; interval I_k starts with nodes·(k+1).
    pub nodes: usize,
    /// Per-panel cap for the doubling refinement.
    pub max_nodes: usize,
    /// Two resolutions must agree to this, relative to the panel scale.
    pub refine_tol: f64,
    /// Absolute tolerance of the running integrals across one panel.
    pub quad_abs_tol: f64,
    /// Increment values below this fraction of the panel scale are zeroed.
    pub truncate_rel: f64,
    /// The first panel of each increment is split geometrically towards its
    /// lower end with this ratio ...
    pub grading_ratio: f64,
    /// ... into this many extra sub-panels.
    pub grading_levels: usize,
    /// Surplus range of the single interval built without cover (κ = 1).
    pub kappa1_range: f64,
}

impl Default for SolverSettings {
    fn default() -> Self {
        SolverSettings {
            depth: 3,
            nodes: 64,
            max_nodes: 4096,
            refine_tol: 1e-7,
            quad_abs_tol: 1e-10,
            truncate_rel: 1e-14,
            grading_ratio: 0.25,
            grading_levels: 5,
            kappa1_range: 1e4,
        }
    }
}

impl SolverSettings {
    pub fn with_depth(depth: usize) -> Self {
        SolverSettings {
            depth,
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<()> {
        if self.nodes < 4 {
            return Err(Error::InvalidParameter(format!("nodes must be at least 4, got {}", self.nodes)));
        }
        if self.max_nodes < self.nodes {
            return Err(Error::InvalidParameter("max_nodes must not be below nodes".into()));
        }
        if !(self.refine_tol > 0.0 && self.quad_abs_tol > 0.0) {
            return Err(Error::InvalidParameter("tolerances must be positive".into()));
        }
        if !(self.grading_ratio > 0.0 && self.grading_ratio < 1.0) {
            return Err(Error::InvalidParameter("grading ratio must lie in (0, 1)".into()));
        }
        if !(self.kappa1_range > 0.0) {
            return Err(Error::InvalidParameter("kappa1_range must be positive".into()));
        }
        Ok(())
    }
}

/// Interpolant of one increment Δ_j on [x̃_j, x̃_{J+1}].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncrementTable {
    pub index: usize,
    pub panels: Vec<ChebPanel>,
}

impl IncrementTable {
    pub fn lower(&self) -> f64 {
        self.panels[0].a
    }

    pub fn upper(&self) -> f64 {
        self.panels.last().expect("table has panels").b
    }

    /// Δ_j(x̃); zero below the lower limit, where the increment vanishes.
    pub fn eval(&self, x: f64) -> f64 {
        if x <= self.lower() {
            return 0.0;
        }
        let x = x.min(self.upper());
        let k = self.panels.partition_point(|p| p.b < x).min(self.panels.len() - 1);
        self.panels[k].eval(x)
    }

    pub fn node_count(&self) -> usize {
        self.panels.iter().map(|p| p.values.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PiecewiseSolution {
    pub model: ModelParams,
    pub insurance: InsuranceParams,
    pub rates: DerivedRates,
    pub system: FundamentalSystem,
    pub grid: SubintervalGrid,
    /// Δ₁..Δ_J.
    pub increments: Vec<IncrementTable>,
    pub settings: SolverSettings,
}

impl PiecewiseSolution {
    pub fn depth(&self) -> usize {
        self.grid.depth()
    }

    /// c = λ(1 − κ)/(rκ)
    pub fn coupling(&self) -> f64 {
        self.system.params.product()
    }

    fn check_range(&self, x: f64) -> Result<()> {
        if !(x >= 0.0) || x > self.grid.upper() {
            return Err(Error::OutOfBuiltRange {
                x,
                limit: self.grid.upper(),
            });
        }
        Ok(())
    }

    /// Δ_j(x̃), with Δ₀ = v.
    pub fn increment(&self, j: usize, x: f64) -> Result<f64> {
        self.check_range(x)?;
        match j {
            0 => self.system.v(x),
            _ => Ok(self
                .increments
                .get(j - 1)
                .ok_or_else(|| Error::InvalidParameter(format!("increment {j} was not built")))?
                .eval(x)),
        }
    }

    /// y_j(x̃) = v(x̃) + Σ_{i ≤ j} Δ_i(x̃), defined for x̃ ≥ x̃_j.
    pub fn y_partial(&self, j: usize, x: f64) -> Result<f64> {
        self.check_range(x)?;
        if j > self.depth() {
            return Err(Error::InvalidParameter(format!("y_{j} is beyond depth {}", self.depth())));
        }
        let mut y = self.system.v(x)?;
        for table in &self.increments[..j] {
            y += table.eval(x);
        }
        Ok(y)
    }
}

/// φ on the right-hand side of the increment recurrence.
enum Source<'a> {
    V,
    Table(&'a IncrementTable),
}

struct IncrementBuilder<'a> {
    system: &'a FundamentalSystem,
    grid: &'a SubintervalGrid,
    source: Source<'a>,
    settings: &'a SolverSettings,
    coupling: f64,
}

impl IncrementBuilder<'_> {
    fn phi(&self, s: f64) -> Result<f64> {
        let l = self.grid.shift(s);
        match self.source {
            Source::V => self.system.v(l.max(0.0)),
            Source::Table(t) => Ok(t.eval(l)),
        }
    }

    /// ∫_a^b [uφ/ω, vφ/ω] ds, with the share `frac` of the panel tolerance.
    fn segment(&self, a: f64, b: f64, frac: f64) -> Result<[f64; 2]> {
        let settings = QuadSettings {
            abs_tol: self.settings.quad_abs_tol * frac,
            rel_tol: 1e-13,
            max_subdivisions: 500,
        };
        let mut failure = None;
        let result = integrate_vec(
            |s| {
                let eval = || -> Result<[f64; 2]> {
                    let w = self.phi(s)? / self.system.weighted_wronskian(s);
                    Ok([self.system.u(s)? * w, self.system.v(s)? * w])
                };
                eval().unwrap_or_else(|e| {
                    failure.get_or_insert(e);
                    [f64::NAN, f64::NAN]
                })
            },
            a,
            b,
            &settings,
        );
        match (failure, result) {
            (Some(e), _) => Err(e),
            (None, r) => r,
        }
    }

    /// Values of the increment at the n+1 Lobatto nodes of [a, b], given the
    /// running integrals at `a`. Returns values, panel scale and the
    /// running integrals at `b`.
    fn sample(&self, a: f64, b: f64, n: usize, start: [f64; 2]) -> Result<(Vec<f64>, f64, [f64; 2])> {
        let nodes = lobatto_nodes(a, b, n);
        let segments: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| self.segment(nodes[i], nodes[i + 1], (nodes[i + 1] - nodes[i]) / (b - a)))
            .collect::<Result<_>>()?;
        let basis: Vec<(f64, f64)> = nodes
            .par_iter()
            .map(|&x| Ok((self.system.u(x)?, self.system.v(x)?)))
            .collect::<Result<_>>()?;
        let mut acc = start;
        let mut values = Vec::with_capacity(n + 1);
        let mut scale = 0.0f64;
        for i in 0..=n {
            if i > 0 {
                acc[0] += segments[i - 1][0];
                acc[1] += segments[i - 1][1];
            }
            let (u, v) = basis[i];
            let (vp, uq) = (v * acc[0], u * acc[1]);
            values.push(self.coupling * (vp - uq));
            scale = scale.max(self.coupling * (vp.abs() + uq.abs()));
        }
        for value in values.iter_mut() {
            if value.abs() < self.settings.truncate_rel * scale {
                *value = 0.0;
            }
        }
        Ok((values, scale, acc))
    }

    /// Builds one panel, doubling the node count until the interpolant from
    /// every other node reproduces the skipped ones.
    fn panel(&self, a: f64, b: f64, n0: usize, start: [f64; 2]) -> Result<(ChebPanel, [f64; 2])> {
        let mut n = n0 + n0 % 2;
        loop {
            let (values, scale, end) = self.sample(a, b, n, start)?;
            let nodes = lobatto_nodes(a, b, n);
            let coarse = ChebPanel::from_values(a, b, values.iter().step_by(2).copied().collect());
            let gap = (1..n)
                .step_by(2)
                .map(|i| (coarse.eval(nodes[i]) - values[i]).abs())
                .fold(0.0f64, f64::max);
            if gap <= self.settings.refine_tol * scale {
                return Ok((ChebPanel::from_values(a, b, values), end));
            }
            if 2 * n > self.settings.max_nodes {
                return Err(Error::NonConverged {
                    what: "increment interpolant refinement",
                    iterations: n,
                });
            }
            n *= 2;
        }
    }

    /// Panel layout for Δ_index: the first interval graded towards its lower
    /// limit, one panel per later interval.
    fn layout(&self, index: usize) -> Vec<(f64, f64, usize)> {
        let limits = &self.grid.limits;
        let mut out = Vec::new();
        for k in index..=self.grid.depth() {
            let (a, b) = (limits[k], limits[k + 1]);
            let n = self.settings.nodes * (k + 1);
            if k == index {
                let len = b - a;
                let sub = (n / 2).max(16);
                let q = self.settings.grading_ratio;
                let mut left = a;
                for m in (1..=self.settings.grading_levels).rev() {
                    let right = a + len * q.powi(m as i32);
                    out.push((left, right, sub));
                    left = right;
                }
                out.push((left, b, sub));
            } else {
                out.push((a, b, n));
            }
        }
        out
    }

    fn build(&self, index: usize) -> Result<IncrementTable> {
        let mut start = [0.0, 0.0];
        let mut panels = Vec::new();
        for (a, b, n) in self.layout(index) {
            let (panel, end) = self.panel(a, b, n, start)?;
            panels.push(panel);
            start = end;
        }
        Ok(IncrementTable { index, panels })
    }
}

/// Builds y on I₀..I_J for Beta(1, 1) losses.
pub fn build_solution(m: &ModelParams, ins: &InsuranceParams, settings: &SolverSettings) -> Result<PiecewiseSolution> {
    build_solution_with_rates(m, ins, &derive_rates(m, ins)?, settings)
}

/// As [`build_solution`] with explicitly supplied rates, e.g. a fixed poverty line.
pub fn build_solution_with_rates(
    m: &ModelParams,
    ins: &InsuranceParams,
    rates: &DerivedRates,
    settings: &SolverSettings,
) -> Result<PiecewiseSolution> {
    settings.validate()?;
    let rates = *rates;
    if m.alpha != 1.0 {
        return Err(Error::InvalidParameter(format!(
            "the insured solver covers uniform remaining proportions (alpha = 1), got alpha = {}",
            m.alpha
        )));
    }
    let margin = net_profit_margin_insured(m, ins)?;
    if margin <= 0.0 {
        return Err(Error::ConstraintViolated(format!(
            "insured net profit margin r/lambda - B = {margin} is not positive"
        )));
    }
    let params = hypergeom_params(m.lambda, rates.r_eff, ins.kappa)?;
    let system = FundamentalSystem::new(params, rates.x_star_eff);
    if ins.kappa == 1.0 {
        return Ok(PiecewiseSolution {
            model: *m,
            insurance: *ins,
            rates,
            system,
            grid: SubintervalGrid::single(rates.x_star_eff, settings.kappa1_range)?,
            increments: Vec::new(),
            settings: *settings,
        });
    }
    let grid = SubintervalGrid::new(ins.kappa, rates.x_star_eff, settings.depth)?;
    let mut increments: Vec<IncrementTable> = Vec::with_capacity(settings.depth);
    for index in 1..=settings.depth {
        let source = match increments.last() {
            None => Source::V,
            Some(t) => Source::Table(t),
        };
        let builder = IncrementBuilder {
            system: &system,
            grid: &grid,
            source,
            settings,
            coupling: params.product(),
        };
        let table = builder.build(index)?;
        increments.push(table);
    }
    Ok(PiecewiseSolution {
        model: *m,
        insurance: *ins,
        rates,
        system,
        grid,
        increments,
        settings: *settings,
    })
}

/// y(x̃) = y_j(x̃) for x̃ ∈ I_j.
pub fn evaluate_y(sol: &PiecewiseSolution, x_tilde: f64) -> Result<f64> {
    sol.check_range(x_tilde)?;
    let j = sol.grid.interval_of(x_tilde).expect("range checked");
    sol.y_partial(j, x_tilde)
}

/// 1 + A·y(x − x*_eff) without the probability range check.
pub fn insured_value_unchecked(sol: &PiecewiseSolution, a: f64, x: f64) -> Result<f64> {
    let x_tilde = x - sol.rates.x_star_eff;
    if x_tilde < 0.0 {
        return Err(Error::Domain(format!(
            "capital {x} is below the insured critical capital {}",
            sol.rates.x_star_eff
        )));
    }
    Ok(1.0 + a * evaluate_y(sol, x_tilde)?)
}

/// f(x) = 1 + A·y(x − x*_eff).
pub fn trapping_prob_insured(sol: &PiecewiseSolution, a: f64, x: f64) -> Result<f64> {
    checked_probability(insured_value_unchecked(sol, a, x)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CriticalLevel;

    fn fig4_model() -> ModelParams {
        ModelParams::new(0.1, 1.4, 0.4, 1.0, 1.0, CriticalLevel::Capital(1.0)).unwrap()
    }

    #[test]
    fn rejects_non_uniform_losses() {
        let m = fig4_model().with_alpha(2.0).unwrap();
        let ins = InsuranceParams::new(0.3, 0.5).unwrap();
        assert!(matches!(
            build_solution(&m, &ins, &SolverSettings::default()),
            Err(Error::InvalidParameter(_))
        ));
    }

    #[test]
    fn rejects_violated_constraint() {
        let m = fig4_model().with_lambda(2.0).unwrap();
        let ins = InsuranceParams::new(0.9, 0.5).unwrap();
        assert!(matches!(
            build_solution(&m, &ins, &SolverSettings::default()),
            Err(Error::ConstraintViolated(_))
        ));
    }

    #[test]
    fn depth_zero_is_v() {
        let ins = InsuranceParams::new(0.3, 0.5).unwrap();
        let sol = build_solution(&fig4_model(), &ins, &SolverSettings::with_depth(0)).unwrap();
        assert!(sol.increments.is_empty());
        let x = 0.4;
        assert_eq!(evaluate_y(&sol, x).unwrap(), sol.system.v(x).unwrap());
        assert!(matches!(evaluate_y(&sol, 5.0), Err(Error::OutOfBuiltRange { .. })));
        assert_eq!(trapping_prob_insured(&sol, -3.5, sol.rates.x_star_eff).unwrap(), 1.0);
    }

    #[test]
    fn increments_vanish_at_their_lower_limit() {
        let ins = InsuranceParams::new(0.3, 0.5).unwrap();
        let sol = build_solution(&fig4_model(), &ins, &SolverSettings::with_depth(2)).unwrap();
        for (i, t) in sol.increments.iter().enumerate() {
            assert_eq!(t.eval(sol.grid.limits[i + 1]), 0.0);
            assert_eq!(t.panels[0].values[0], 0.0);
        }
    }
}
