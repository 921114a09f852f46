//! Calibration of the insured constant A, the limit probe, the
//! uninsured/insured intersection and parameter sweeps over it.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::closed_form::trapping_prob_uninsured;
use crate::error::{Error, Result};
use crate::insured::{build_solution_with_rates, evaluate_y, insured_value_unchecked, PiecewiseSolution, SolverSettings};
use crate::model::{InsuranceParams, ModelParams, PovertyLine};
use crate::numerics::bisect;
use crate::simulator::{estimate_curve, SimConfig, SimEstimate};

/// Bracket width at which the intersection search stops.
pub const INTERSECTION_TOL: f64 = 1e-8;

/// Differences this small are treated as touching rather than crossing.
pub const TOUCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub a_hat: f64,
    /// Weighted RMS of 1 + Â·v − p̂.
    pub residual_norm: f64,
    pub n_points: usize,
    pub fit_range: (f64, f64),
}

/// Capital range [x*, x* + x̃₁] on which f = 1 + A·v holds exactly.
pub fn first_interval(sol: &PiecewiseSolution) -> (f64, f64) {
    let x_star = sol.rates.x_star_eff;
    (x_star, x_star + sol.grid.limits[1])
}

/// `n` equally spaced capitals in the first interval, excluding x* itself.
pub fn fit_grid(sol: &PiecewiseSolution, n: usize) -> Vec<f64> {
    let (lo, hi) = first_interval(sol);
    (1..=n).map(|i| lo + (hi - lo) * i as f64 / n as f64).collect()
}

/// Inverse-variance weighted least squares for A in p̂ ≈ 1 + A·v(x − x*).
/// Estimates outside the first interval are ignored.
pub fn fit_a(estimates: &[SimEstimate], sol: &PiecewiseSolution) -> Result<FitResult> {
    let (lo, hi) = first_interval(sol);
    let slack = 1e-12 * hi.abs();
    let used: Vec<&SimEstimate> = estimates
        .iter()
        .filter(|e| e.x0 >= lo && e.x0 <= hi + slack)
        .collect();
    if used.len() < 2 {
        return Err(Error::InsufficientData(format!(
            "{} estimates in the first interval [{lo}, {hi}], need at least 2",
            used.len()
        )));
    }
    let max_weight = used
        .iter()
        .filter(|e| e.std_err > 0.0)
        .map(|e| 1.0 / (e.std_err * e.std_err))
        .fold(0.0f64, f64::max);
    let weight = |e: &SimEstimate| match (e.std_err > 0.0, max_weight > 0.0) {
        (true, _) => 1.0 / (e.std_err * e.std_err),
        (false, true) => max_weight,
        (false, false) => 1.0,
    };
    let mut rows = Vec::with_capacity(used.len());
    for e in &used {
        let v = sol.system.v((e.x0 - lo).max(0.0))?;
        rows.push((weight(e), v, e.p_hat));
    }
    if rows.iter().all(|&(_, v, _)| v.abs() < 1e-14) {
        return Err(Error::DegenerateFit("v vanishes at every fit point".into()));
    }
    let num: f64 = rows.iter().map(|&(w, v, p)| w * v * (p - 1.0)).sum();
    let den: f64 = rows.iter().map(|&(w, v, _)| w * v * v).sum();
    let a_hat = num / den;
    let wsum: f64 = rows.iter().map(|&(w, _, _)| w).sum();
    let ss: f64 = rows
        .iter()
        .map(|&(w, v, p)| w * (1.0 + a_hat * v - p).powi(2))
        .sum();
    let xs = used.iter().map(|e| e.x0);
    Ok(FitResult {
        a_hat,
        residual_norm: (ss / wsum).sqrt(),
        n_points: rows.len(),
        fit_range: (xs.clone().fold(f64::INFINITY, f64::min), xs.fold(f64::NEG_INFINITY, f64::max)),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LimitProbe {
    /// (x̃, y(x̃)) at the probe points.
    pub points: Vec<(f64, f64)>,
    /// Aitken extrapolation of the last three values, or the last value when
    /// fewer are available.
    pub l_hat: f64,
    /// −1/L̂
    pub implied_a: f64,
    /// Set when the sequence does not look convergent.
    pub warning: Option<String>,
}

/// Values of y at the interval limits x̃₁..x̃_{J+1} and an extrapolated limit.
/// Without cover the probe points are x̃ = x*(2^k − 1) within the built range.
pub fn probe_limit(sol: &PiecewiseSolution) -> Result<LimitProbe> {
    let xs: Vec<f64> = if sol.insurance.kappa < 1.0 {
        sol.grid.limits[1..].to_vec()
    } else {
        let x_star = sol.rates.x_star_eff;
        (1..)
            .map(|k| x_star * (2f64.powi(k) - 1.0))
            .take_while(|&x| x <= sol.grid.upper())
            .collect()
    };
    if xs.is_empty() {
        return Err(Error::InsufficientData("no probe point inside the built range".into()));
    }
    let points = xs
        .iter()
        .map(|&x| Ok((x, evaluate_y(sol, x)?)))
        .collect::<Result<Vec<_>>>()?;
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let n = ys.len();
    let mut warning = None;
    let l_hat = if n >= 3 {
        let (y0, y1, y2) = (ys[n - 3], ys[n - 2], ys[n - 1]);
        let (d1, d2) = (y1 - y0, y2 - y1);
        if d2.abs() >= d1.abs() {
            warning = Some(format!(
                "endpoint differences do not shrink ({d1:e} then {d2:e}); no limit is evident at this depth"
            ));
        }
        if d2 == d1 {
            y2
        } else {
            y2 - d2 * d2 / (d2 - d1)
        }
    } else {
        warning = Some(format!("{n} probe value(s) cannot indicate convergence; build to depth 2 or more"));
        ys[n - 1]
    };
    Ok(LimitProbe {
        points,
        l_hat,
        implied_a: -1.0 / l_hat,
        warning,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntersectionResult {
    pub x_c: Option<f64>,
    /// Final bisection bracket, or the search range when no crossing exists.
    pub bracket: (f64, f64),
    pub tolerance: f64,
}

/// Insured curve 1 + A·y, with 1 below the insured line (already trapped).
/// Left unclamped: with a fitted A it may dip marginally below zero where y
/// overshoots −1/A.
fn insured_curve(sol: &PiecewiseSolution, a: f64, x: f64) -> Result<f64> {
    if x < sol.rates.x_star_eff {
        Ok(1.0)
    } else {
        insured_value_unchecked(sol, a, x)
    }
}

/// d(x) = f_uninsured(x) − f_insured(x) on the capital axis.
pub fn curve_difference(m: &ModelParams, sol: &PiecewiseSolution, a: f64, x: f64) -> Result<f64> {
    Ok(trapping_prob_uninsured(x, m)? - insured_curve(sol, a, x)?)
}

/// Uniform scan of [lo, hi] plus points clustered geometrically towards lo
/// and towards the insured line, where both curves fall steeply.
fn scan_points(lo: f64, hi: f64, x_star_ins: f64) -> Vec<f64> {
    const UNIFORM: usize = 512;
    let mut xs: Vec<f64> = (0..=UNIFORM).map(|i| lo + (hi - lo) * i as f64 / UNIFORM as f64).collect();
    for start in [lo, x_star_ins] {
        if start >= lo && start < hi {
            xs.push(start);
            xs.extend((1..=52).map(|k| start + (hi - start) * 0.5f64.powi(k)));
        }
    }
    xs.sort_by(f64::total_cmp);
    xs.dedup();
    xs
}

/// First sign change of d on `search_range`, refined by bisection.
///
/// `sol` must have been built for `line`: with a fixed line its critical
/// capital is the uninsured one.
pub fn intersection_xc(
    m: &ModelParams,
    ins: &InsuranceParams,
    sol: &PiecewiseSolution,
    a: f64,
    search_range: (f64, f64),
    line: PovertyLine,
) -> Result<IntersectionResult> {
    let expected = line.rates(m, ins)?;
    if (sol.rates.x_star_eff - expected.x_star_eff).abs() > 1e-12 * expected.x_star_eff {
        return Err(Error::InvalidParameter(format!(
            "solution critical capital {} does not match the {line:?} poverty line {}",
            sol.rates.x_star_eff, expected.x_star_eff
        )));
    }
    let (lo, hi) = search_range;
    if !(lo < hi) {
        return Err(Error::InvalidParameter(format!("empty search range [{lo}, {hi}]")));
    }
    let mut previous: Option<(f64, f64)> = None;
    for x in scan_points(lo, hi, sol.rates.x_star_eff) {
        let d = curve_difference(m, sol, a, x)?;
        // Both curves equal 1 at a shared critical capital up to round-off.
        if d.abs() <= TOUCH_TOL {
            continue;
        }
        if let Some((xp, dp)) = previous {
            if dp.signum() != d.signum() {
                let mut failure = None;
                let bracket = bisect(
                    |t| {
                        curve_difference(m, sol, a, t).unwrap_or_else(|e| {
                            failure.get_or_insert(e);
                            f64::NAN
                        })
                    },
                    xp,
                    x,
                    INTERSECTION_TOL,
                );
                if let Some(e) = failure {
                    return Err(e);
                }
                let bracket = bracket?;
                return Ok(IntersectionResult {
                    x_c: Some(0.5 * (bracket.0 + bracket.1)),
                    bracket,
                    tolerance: INTERSECTION_TOL,
                });
            }
        }
        previous = Some((x, d));
    }
    Ok(IntersectionResult {
        x_c: None,
        bracket: search_range,
        tolerance: INTERSECTION_TOL,
    })
}

/// How a sweep cell obtains its constant A.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConstantSource {
    /// −1/L̂ from [`probe_limit`]; needs depth ≥ 2.
    Limit,
    /// Weighted fit to simulated estimates on the first interval.
    Simulated {
        paths: u64,
        horizon: f64,
        seed: u64,
        points: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepOptions {
    pub settings: SolverSettings,
    pub source: ConstantSource,
    pub line: PovertyLine,
}

impl Default for SweepOptions {
    fn default() -> Self {
        SweepOptions {
            settings: SolverSettings::with_depth(0),
            source: ConstantSource::Simulated {
                paths: 2000,
                horizon: 500.0,
                seed: 1,
                points: 30,
            },
            line: PovertyLine::Variable,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CellStatus {
    Computed,
    NoCrossing,
    Skipped,
    Failed,
}

impl CellStatus {
    pub fn label(&self) -> &'static str {
        match self {
            CellStatus::Computed => "ok",
            CellStatus::NoCrossing => "no_crossing",
            CellStatus::Skipped => "skipped",
            CellStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub kappa: f64,
    pub lambda: f64,
    pub theta: f64,
    pub a_hat: Option<f64>,
    pub x_c: Option<f64>,
    /// x_c − x*
    pub distance: Option<f64>,
    pub status: CellStatus,
    pub note: String,
}

/// Seed of cell `index`, mixed so neighbouring cells get unrelated streams.
pub fn cell_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Constant A for one built solution.
pub fn calibrate_constant(
    m: &ModelParams,
    ins: &InsuranceParams,
    sol: &PiecewiseSolution,
    source: &ConstantSource,
    line: PovertyLine,
) -> Result<f64> {
    match *source {
        ConstantSource::Limit => Ok(probe_limit(sol)?.implied_a),
        ConstantSource::Simulated {
            paths,
            horizon,
            seed,
            points,
        } => {
            let cfg = SimConfig::new(paths, horizon, seed)?.with_poverty_line(line);
            let estimates = estimate_curve(&fit_grid(sol, points), m, Some(ins), &cfg)?;
            Ok(fit_a(&estimates, sol)?.a_hat)
        }
    }
}

fn sweep_cell(m: &ModelParams, kappa: f64, lambda: f64, theta: f64, index: usize, opts: &SweepOptions) -> SweepCell {
    let mut cell = SweepCell {
        kappa,
        lambda,
        theta,
        a_hat: None,
        x_c: None,
        distance: None,
        status: CellStatus::Skipped,
        note: String::new(),
    };
    let setup = || -> Result<(ModelParams, InsuranceParams)> {
        Ok((m.with_lambda(lambda)?, InsuranceParams::new(kappa, theta)?))
    };
    let (m, ins) = match setup() {
        Ok(v) => v,
        Err(e) => {
            cell.note = e.to_string();
            return cell;
        }
    };
    let rates = match opts.line.rates(&m, &ins) {
        Ok(r) => r,
        Err(e) => {
            cell.note = e.to_string();
            return cell;
        }
    };
    let rho = lambda / rates.r_eff;
    if rho >= 1.0 {
        cell.note = format!("lambda/r = {rho} is not below 1");
        return cell;
    }
    if m.rho() >= m.alpha {
        cell.note = format!("uninsured lambda/r = {} is not below alpha", m.rho());
        return cell;
    }
    if kappa == 1.0 {
        // Both curves are the same function.
        cell.x_c = Some(m.x_star_base);
        cell.distance = Some(0.0);
        cell.status = CellStatus::Computed;
        cell.note = "identical curves without cover".into();
        return cell;
    }
    let source = match opts.source {
        ConstantSource::Simulated {
            paths,
            horizon,
            seed,
            points,
        } => ConstantSource::Simulated {
            paths,
            horizon,
            seed: cell_seed(seed, index),
            points,
        },
        s => s,
    };
    let run = || -> Result<(f64, IntersectionResult)> {
        let sol = build_solution_with_rates(&m, &ins, &rates, &opts.settings)?;
        let a = calibrate_constant(&m, &ins, &sol, &source, opts.line)?;
        let (_, hi) = first_interval(&sol);
        let range = (m.x_star_base, hi);
        Ok((a, intersection_xc(&m, &ins, &sol, a, range, opts.line)?))
    };
    match run() {
        Ok((a, result)) => {
            cell.a_hat = Some(a);
            cell.x_c = result.x_c;
            cell.distance = result.x_c.map(|x| x - m.x_star_base);
            cell.status = if result.x_c.is_some() {
                CellStatus::Computed
            } else {
                CellStatus::NoCrossing
            };
        }
        Err(e) => {
            cell.status = match e {
                Error::ConstraintViolated(_) | Error::PremiumExceedsIncome { .. } => CellStatus::Skipped,
                _ => CellStatus::Failed,
            };
            cell.note = e.to_string();
        }
    }
    cell
}

/// x_c − x* over a κ × λ grid, κ-major.
pub fn sweep_xc_distance(
    kappa_grid: &[f64],
    lambda_grid: &[f64],
    theta: f64,
    m: &ModelParams,
    opts: &SweepOptions,
) -> Vec<SweepCell> {
    let cells: Vec<(f64, f64)> = kappa_grid
        .iter()
        .flat_map(|&k| lambda_grid.iter().map(move |&l| (k, l)))
        .collect();
    cells
        .par_iter()
        .enumerate()
        .map(|(i, &(kappa, lambda))| sweep_cell(m, kappa, lambda, theta, i, opts))
        .collect()
}

/// Largest increase of f = 1 + A·y between consecutive points of an
/// `n`-point grid over the built range; a calibrated curve has none.
pub fn monotonicity_violation(sol: &PiecewiseSolution, a: f64, n: usize) -> Result<f64> {
    let upper = sol.grid.upper();
    let mut worst = 0.0f64;
    let mut previous = 1.0 + a * evaluate_y(sol, 0.0)?;
    for i in 1..=n {
        let f = 1.0 + a * evaluate_y(sol, upper * i as f64 / n as f64)?;
        worst = worst.max(f - previous);
        previous = f;
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::insured::build_solution;
    use crate::model::CriticalLevel;

    fn fig4() -> (ModelParams, InsuranceParams) {
        (
            ModelParams::new(0.1, 1.4, 0.4, 1.0, 1.0, CriticalLevel::Capital(1.0)).unwrap(),
            InsuranceParams::new(0.3, 0.5).unwrap(),
        )
    }

    #[test]
    fn exact_data_recovers_constant() {
        let (m, ins) = fig4();
        let sol = build_solution(&m, &ins, &SolverSettings::with_depth(0)).unwrap();
        let est: Vec<SimEstimate> = fit_grid(&sol, 10)
            .into_iter()
            .enumerate()
            .map(|(i, x)| SimEstimate {
                x0: x,
                p_hat: 1.0 - 2.5 * sol.system.v(x - sol.rates.x_star_eff).unwrap(),
                std_err: 0.01 + 0.001 * i as f64,
                n: 2000,
            })
            .collect();
        let fit = fit_a(&est, &sol).unwrap();
        assert!((fit.a_hat + 2.5).abs() < 1e-12);
        assert!(fit.residual_norm < 1e-12);
        assert_eq!(fit.n_points, 10);
    }

    #[test]
    fn constant_data_gives_zero() {
        let (m, ins) = fig4();
        let sol = build_solution(&m, &ins, &SolverSettings::with_depth(0)).unwrap();
        let est: Vec<SimEstimate> = fit_grid(&sol, 5)
            .into_iter()
            .map(|x| SimEstimate {
                x0: x,
                p_hat: 1.0,
                std_err: 0.0,
                n: 100,
            })
            .collect();
        assert_eq!(fit_a(&est, &sol).unwrap().a_hat, 0.0);
    }

    #[test]
    fn too_few_points() {
        let (m, ins) = fig4();
        let sol = build_solution(&m, &ins, &SolverSettings::with_depth(0)).unwrap();
        let est = [SimEstimate {
            x0: 1.8,
            p_hat: 0.9,
            std_err: 0.01,
            n: 100,
        }];
        assert!(matches!(fit_a(&est, &sol), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn depth_zero_probe_warns() {
        let (m, ins) = fig4();
        let sol = build_solution(&m, &ins, &SolverSettings::with_depth(0)).unwrap();
        assert!(probe_limit(&sol).unwrap().warning.is_some());
    }

    #[test]
    fn mismatched_line_is_rejected() {
        let (m, ins) = fig4();
        let sol = build_solution(&m, &ins, &SolverSettings::with_depth(0)).unwrap();
        let r = intersection_xc(&m, &ins, &sol, -3.5, (1.0, 2.0), PovertyLine::Fixed);
        assert!(matches!(r, Err(Error::InvalidParameter(_))));
    }

    #[test]
    fn skipped_cells_are_marked() {
        let (m, _) = fig4();
        let cells = sweep_xc_distance(&[0.5], &[0.8], 0.5, &m, &SweepOptions::default());
        assert_eq!(cells[0].status, CellStatus::Skipped);
        assert!(cells[0].distance.is_none());
    }
}
