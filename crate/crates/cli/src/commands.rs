//! One function per subcommand; each returns the CSV body.

use std::path::Path;

use trapping_core::analysis::{
    calibrate_constant, cell_seed, fit_a, fit_grid, intersection_xc, probe_limit, sweep_xc_distance, ConstantSource,
    SweepOptions,
};
use trapping_core::closed_form::{
    checked_probability, decay_exponent, trapping_prob_exp_losses, trapping_prob_uninsured, DecayQuery,
    PROBABILITY_SLACK,
};
use trapping_core::insured::{build_solution_cached, build_solution_with_rates, evaluate_y, PiecewiseSolution, SolverSettings};
use trapping_core::model::{lambda_upper_boundary, lundberg_bound, lundberg_bound_uniform, net_profit_margin_uninsured};
use trapping_core::simulator::{estimate_curve, SimConfig};
use trapping_core::{CriticalLevel, Error, InsuranceParams, ModelParams, PovertyLine};

use crate::output::{num, opt_num, Table};
use crate::params::{linspace, Params};
use crate::CliError;

/// Run context shared by the commands.
pub struct Context<'a> {
    pub params: &'a Params,
    pub settings: SolverSettings,
    pub cache_dir: Option<&'a Path>,
}

impl Context<'_> {
    fn model(&self, lambda: f64, alpha: f64) -> Result<ModelParams, CliError> {
        let p = self.params;
        Ok(ModelParams::new(
            p.get("a")?,
            p.get("b")?,
            p.get("c")?,
            lambda,
            alpha,
            CriticalLevel::Capital(p.get("xstar")?),
        )?)
    }

    fn line(&self) -> Result<PovertyLine, CliError> {
        match self.params.raw("line").trim() {
            "variable" => Ok(PovertyLine::Variable),
            "fixed" => Ok(PovertyLine::Fixed),
            other => Err(CliError::Input(format!("line must be variable or fixed, got '{other}'"))),
        }
    }

    fn grid(&self, default_lo: f64, default_hi: f64) -> Result<Vec<f64>, CliError> {
        let lo = self.params.opt("x_min")?.unwrap_or(default_lo);
        let hi = self.params.opt("x_max")?.unwrap_or(default_hi);
        linspace(lo, hi, self.params.get("x_points")?)
    }

    fn sim_config(&self, seed: u64) -> Result<SimConfig, CliError> {
        let p = self.params;
        let mut cfg = SimConfig::new(p.get("paths")?, p.get("horizon")?, seed)?
            .with_shared_streams(p.flag("shared_streams")?)
            .with_poverty_line(self.line()?);
        if let Some(cap) = p.opt::<f64>("early_exit")? {
            cfg = cfg.with_early_exit(cap);
        }
        Ok(cfg)
    }

    fn solve(&self, m: &ModelParams, ins: &InsuranceParams) -> Result<PiecewiseSolution, CliError> {
        let rates = self.line()?.rates(m, ins)?;
        match self.cache_dir {
            Some(dir) => {
                let (sol, hit) = build_solution_cached(m, ins, &rates, &self.settings, dir)?;
                eprintln!(
                    "trapping: solution for kappa={} lambda={} {}",
                    ins.kappa,
                    m.lambda,
                    if hit { "loaded from cache" } else { "built and cached" }
                );
                Ok(sol)
            }
            None => Ok(build_solution_with_rates(m, ins, &rates, &self.settings)?),
        }
    }

    /// A given on the command line, or from the configured source with the
    /// seed of combination `index`.
    fn constant(&self, m: &ModelParams, ins: &InsuranceParams, sol: &PiecewiseSolution, index: usize) -> Result<f64, CliError> {
        if let Some(a) = self.params.opt("constant")? {
            return Ok(a);
        }
        let source = self.source(cell_seed(self.params.get("seed")?, index))?;
        Ok(calibrate_constant(m, ins, sol, &source, self.line()?)?)
    }

    fn source(&self, seed: u64) -> Result<ConstantSource, CliError> {
        let p = self.params;
        match p.raw("source").trim() {
            "limit" => Ok(ConstantSource::Limit),
            "simulated" => Ok(ConstantSource::Simulated {
                paths: p.get("paths")?,
                horizon: p.get("horizon")?,
                seed,
                points: p.get("fit_points")?,
            }),
            other => Err(CliError::Input(format!("source must be simulated or limit, got '{other}'"))),
        }
    }

    fn insurance(&self, kappa: f64) -> Result<InsuranceParams, CliError> {
        Ok(InsuranceParams::new(kappa, self.params.get("theta")?)?)
    }

    fn cover_combinations(&self) -> Result<Vec<(f64, f64)>, CliError> {
        let kappas = self.params.list_or("kappas", "kappa")?;
        let lambdas = self.params.list_or("lambdas", "lambda")?;
        Ok(kappas.iter().flat_map(|&k| lambdas.iter().map(move |&l| (k, l))).collect())
    }
}

fn require_admissible(m: &ModelParams) -> Result<(), CliError> {
    let margin = net_profit_margin_uninsured(m);
    if margin <= 0.0 {
        return Err(Error::ConstraintViolated(format!(
            "lambda/r = {} is not below alpha = {}; trapping is certain",
            m.rho(),
            m.alpha
        ))
        .into());
    }
    Ok(())
}

pub fn uninsured(ctx: &Context) -> Result<String, CliError> {
    let mut table = Table::new(&["alpha", "lambda", "r", "x", "f"])?;
    for alpha in ctx.params.list_or("alphas", "alpha")? {
        for lambda in ctx.params.list_or("lambdas", "lambda")? {
            let m = ctx.model(lambda, alpha)?;
            require_admissible(&m)?;
            for x in ctx.grid(m.x_star_base, 10.0)? {
                let f = trapping_prob_uninsured(x, &m)?;
                table.row([num(alpha), num(lambda), num(m.r()), num(x), num(f)])?;
            }
        }
    }
    table.finish()
}

pub fn compare_exp(ctx: &Context) -> Result<String, CliError> {
    let m = ctx.model(ctx.params.get("lambda")?, ctx.params.get("alpha")?)?;
    require_admissible(&m)?;
    let mus = ctx.params.list("mus")?.unwrap_or_default();
    let mut table = Table::new(&[
        "mu",
        "x",
        "f_proportional",
        "f_exponential",
        "log10_f_proportional",
        "log10_f_exponential",
        "ratio",
    ])?;
    for mu in mus {
        for x in ctx.grid(m.x_star_base, 10.0)? {
            let fp = trapping_prob_uninsured(x, &m)?;
            let fe = trapping_prob_exp_losses(x, mu, m.lambda, m.r(), m.x_star_base)?;
            table.row([num(mu), num(x), num(fp), num(fe), num(fp.log10()), num(fe.log10()), num(fe / fp)])?;
        }
    }
    table.finish()
}

pub fn constraint(ctx: &Context) -> Result<String, CliError> {
    let p = ctx.params;
    let kappas = match p.list("kappas")? {
        Some(k) => k,
        None => linspace(0.01, 1.0, 100)?,
    };
    let mut table = Table::new(&["alpha", "theta", "kappa", "bound", "lambda_max", "lambda_max_over_r"])?;
    for alpha in p.list_or("alphas", "alpha")? {
        let m = ctx.model(p.get("lambda")?, alpha)?;
        for theta in p.list_or("thetas", "theta")? {
            for &kappa in &kappas {
                let ins = InsuranceParams::new(kappa, theta)?;
                let bound = if alpha == 1.0 {
                    lundberg_bound_uniform(kappa)?
                } else {
                    lundberg_bound(alpha, kappa)?
                };
                let lambda_max = lambda_upper_boundary(&m, &ins)?;
                table.row([
                    num(alpha),
                    num(theta),
                    num(kappa),
                    num(bound),
                    num(lambda_max),
                    num(lambda_max / m.r()),
                ])?;
            }
        }
    }
    table.finish()
}

pub fn insured(ctx: &Context) -> Result<String, CliError> {
    let alpha = ctx.params.get("alpha")?;
    let mut table = Table::new(&["kappa", "lambda", "a_hat", "x", "interval", "y", "f", "status"])?;
    for (index, (kappa, lambda)) in ctx.cover_combinations()?.into_iter().enumerate() {
        let m = ctx.model(lambda, alpha)?;
        let ins = ctx.insurance(kappa)?;
        let sol = ctx.solve(&m, &ins)?;
        let a = ctx.constant(&m, &ins, &sol, index)?;
        let x_star = sol.rates.x_star_eff;
        let upper = x_star + sol.grid.upper();
        for x in ctx.grid(x_star, upper)? {
            let (interval, y, f, status) = insured_point(&sol, a, x)?;
            table.row([
                num(kappa),
                num(lambda),
                num(a),
                num(x),
                interval.map(|j| j.to_string()).unwrap_or_default(),
                opt_num(y),
                opt_num(f),
                status.to_string(),
            ])?;
        }
    }
    table.finish()
}

/// Interval index, y, the unclamped 1 + A·y and a status label.
fn insured_point(sol: &PiecewiseSolution, a: f64, x: f64) -> Result<(Option<usize>, Option<f64>, Option<f64>, &'static str), CliError> {
    let x_tilde = x - sol.rates.x_star_eff;
    if x_tilde < 0.0 {
        return Ok((None, None, Some(1.0), "below_line"));
    }
    let Some(j) = sol.grid.interval_of(x_tilde) else {
        return Ok((None, None, None, "beyond_range"));
    };
    let y = match evaluate_y(sol, x_tilde) {
        Ok(y) => y,
        Err(Error::OutOfBuiltRange { .. }) => return Ok((None, None, None, "beyond_range")),
        Err(e) => return Err(e.into()),
    };
    let f = 1.0 + a * y;
    let status = if (-PROBABILITY_SLACK..=1.0 + PROBABILITY_SLACK).contains(&f) {
        "ok"
    } else {
        "out_of_range"
    };
    Ok((Some(j), Some(y), Some(f), status))
}

pub fn simulate(ctx: &Context) -> Result<String, CliError> {
    let p = ctx.params;
    let m = ctx.model(p.get("lambda")?, p.get("alpha")?)?;
    let ins = if p.flag("insured")? {
        Some(ctx.insurance(p.get("kappa")?)?)
    } else {
        None
    };
    let x_star = match &ins {
        Some(ins) => ctx.line()?.rates(&m, ins)?.x_star_eff,
        None => m.x_star_base,
    };
    let cfg = ctx.sim_config(p.get("seed")?)?;
    let estimates = estimate_curve(&ctx.grid(x_star, 10.0)?, &m, ins.as_ref(), &cfg)?;
    let mut table = Table::new(&["x", "p_hat", "std_err", "n"])?;
    for e in estimates {
        table.row([num(e.x0), num(e.p_hat), num(e.std_err), e.n.to_string()])?;
    }
    table.finish()
}

pub fn fit(ctx: &Context) -> Result<String, CliError> {
    let p = ctx.params;
    let m = ctx.model(p.get("lambda")?, p.get("alpha")?)?;
    let ins = ctx.insurance(p.get("kappa")?)?;
    let sol = ctx.solve(&m, &ins)?;
    let cfg = ctx.sim_config(cell_seed(p.get("seed")?, 0))?;
    let estimates = estimate_curve(&fit_grid(&sol, p.get("fit_points")?), &m, Some(&ins), &cfg)?;
    let fitted = fit_a(&estimates, &sol)?;
    let probe = probe_limit(&sol)?;
    if let Some(w) = &probe.warning {
        eprintln!("trapping: limit probe: {w}");
    }
    let mut table = Table::new(&[
        "a_hat",
        "residual_norm",
        "n_points",
        "fit_lo",
        "fit_hi",
        "l_hat",
        "implied_a",
        "probe_warning",
    ])?;
    table.row([
        num(fitted.a_hat),
        num(fitted.residual_norm),
        fitted.n_points.to_string(),
        num(fitted.fit_range.0),
        num(fitted.fit_range.1),
        num(probe.l_hat),
        num(probe.implied_a),
        probe.warning.is_some().to_string(),
    ])?;
    table.finish()
}

pub fn xc(ctx: &Context) -> Result<String, CliError> {
    if ctx.params.flag("sweep")? {
        xc_sweep(ctx)
    } else {
        xc_curves(ctx)
    }
}

fn xc_curves(ctx: &Context) -> Result<String, CliError> {
    let line = ctx.line()?;
    let alpha = ctx.params.get("alpha")?;
    let mut table = Table::new(&["kappa", "lambda", "a_hat", "x_c", "x", "f_uninsured", "f_insured", "difference"])?;
    for (index, (kappa, lambda)) in ctx.cover_combinations()?.into_iter().enumerate() {
        let m = ctx.model(lambda, alpha)?;
        require_admissible(&m)?;
        let ins = ctx.insurance(kappa)?;
        let sol = ctx.solve(&m, &ins)?;
        let a = ctx.constant(&m, &ins, &sol, index)?;
        let upper = sol.rates.x_star_eff + sol.grid.upper();
        let x_c = intersection_xc(&m, &ins, &sol, a, (m.x_star_base, upper), line)?.x_c;
        for x in ctx.grid(m.x_star_base, upper)? {
            let fu = checked_probability(trapping_prob_uninsured(x, &m)?)?;
            let (_, _, fi, _) = insured_point(&sol, a, x)?;
            table.row([
                num(kappa),
                num(lambda),
                num(a),
                opt_num(x_c),
                num(x),
                num(fu),
                opt_num(fi),
                opt_num(fi.map(|fi| fu - fi)),
            ])?;
        }
    }
    table.finish()
}

fn xc_sweep(ctx: &Context) -> Result<String, CliError> {
    let p = ctx.params;
    let m = ctx.model(p.get("lambda")?, p.get("alpha")?)?;
    let kappas = p.list_or("kappas", "kappa")?;
    let lambdas = p.list_or("lambdas", "lambda")?;
    let mut table = Table::new(&["theta", "kappa", "lambda", "a_hat", "x_c", "distance", "status", "note"])?;
    for theta in p.list_or("thetas", "theta")? {
        let opts = SweepOptions {
            settings: ctx.settings,
            source: ctx.source(p.get("seed")?)?,
            line: ctx.line()?,
        };
        for cell in sweep_xc_distance(&kappas, &lambdas, theta, &m, &opts) {
            table.row([
                num(cell.theta),
                num(cell.kappa),
                num(cell.lambda),
                opt_num(cell.a_hat),
                opt_num(cell.x_c),
                opt_num(cell.distance),
                cell.status.label().to_string(),
                cell.note,
            ])?;
        }
    }
    table.finish()
}

pub fn decay(ctx: &Context) -> Result<String, CliError> {
    let p = ctx.params;
    let mut table = Table::new(&["alpha", "lambda", "kappa", "r", "gamma", "status"])?;
    for alpha in p.list_or("alphas", "alpha")? {
        for lambda in p.list_or("lambdas", "lambda")? {
            for kappa in p.list_or("kappas", "kappa")? {
                let m = ctx.model(lambda, alpha)?;
                let rates = PovertyLine::Variable.rates(&m, &ctx.insurance(kappa)?)?;
                let q = DecayQuery::new(alpha, lambda, rates.r_eff, kappa)?;
                let (gamma, status) = match decay_exponent(&q) {
                    Ok(g) => (Some(g), "ok"),
                    Err(Error::NoNegativeRoot) => {
                        eprintln!(
                            "trapping: no negative root of the decay equation for alpha={alpha} lambda={lambda} kappa={kappa}"
                        );
                        (None, "no_root")
                    }
                    Err(e) => return Err(e.into()),
                };
                table.row([num(alpha), num(lambda), num(kappa), num(rates.r_eff), opt_num(gamma), status.to_string()])?;
            }
        }
    }
    table.finish()
}
