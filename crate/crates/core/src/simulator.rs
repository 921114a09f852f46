//! Exact event-driven simulation of the capital process.
//!
//! Every path owns a ChaCha8 stream addressed by (seed, point, path), so the
//! draws do not depend on thread scheduling or on how many paths run.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{InsuranceParams, ModelParams, PovertyLine};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub n_paths: u64,
    pub horizon: f64,
    pub seed: u64,
    /// Paths whose capital exceeds this level are scored untrapped.
    pub early_exit_capital: Option<f64>,
    /// All grid points reuse the substreams of point 0 (common random numbers).
    pub shared_streams: bool,
    /// Critical capital convention for insured paths.
    pub poverty_line: PovertyLine,
}

impl SimConfig {
    pub fn new(n_paths: u64, horizon: f64, seed: u64) -> Result<Self> {
        if n_paths == 0 {
            return Err(Error::InvalidParameter("n_paths must be at least 1".into()));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidParameter(format!("horizon must be positive, got {horizon}")));
        }
        Ok(SimConfig {
            n_paths,
            horizon,
            seed,
            early_exit_capital: None,
            shared_streams: false,
            poverty_line: PovertyLine::Variable,
        })
    }

    pub fn with_early_exit(mut self, capital: f64) -> Self {
        self.early_exit_capital = Some(capital);
        self
    }

    pub fn with_shared_streams(mut self, shared: bool) -> Self {
        self.shared_streams = shared;
        self
    }

    pub fn with_poverty_line(mut self, line: PovertyLine) -> Self {
        self.poverty_line = line;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathOutcome {
    pub trapped: bool,
    pub trapping_time: Option<f64>,
    pub final_capital: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimEstimate {
    pub x0: f64,
    pub p_hat: f64,
    pub std_err: f64,
    pub n: u64,
}

impl SimEstimate {
    pub fn from_counts(x0: f64, trapped: u64, n: u64) -> Self {
        let p_hat = trapped as f64 / n as f64;
        SimEstimate {
            x0,
            p_hat,
            std_err: (p_hat * (1.0 - p_hat) / n as f64).sqrt(),
            n,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamIndex {
    pub point: u64,
    pub path: u64,
}

/// The random stream of one path.
pub fn path_rng(seed: u64, stream: StreamIndex) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    key[..8].copy_from_slice(&seed.to_le_bytes());
    key[8..16].copy_from_slice(&stream.point.to_le_bytes());
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream.path);
    rng
}

/// Z ~ Beta(α, 1) by inversion.
pub fn sample_remaining_proportion<R: Rng + ?Sized>(rng: &mut R, alpha: f64) -> f64 {
    let u: f64 = rng.random();
    u.powf(1.0 / alpha)
}

/// Regime-resolved dynamics of one simulation.
#[derive(Debug, Clone, Copy)]
struct Dynamics {
    r: f64,
    x_star: f64,
    lambda: f64,
    alpha: f64,
    /// Insured fraction 1 − κ; zero without cover.
    cover: f64,
}

impl Dynamics {
    fn new(m: &ModelParams, ins: Option<&InsuranceParams>, line: PovertyLine) -> Result<Self> {
        let (r, x_star, cover) = match ins {
            None => (m.r(), m.x_star_base, 0.0),
            Some(ins) => {
                let rates = line.rates(m, ins)?;
                (rates.r_eff, rates.x_star_eff, 1.0 - ins.kappa)
            }
        };
        Ok(Dynamics {
            r,
            x_star,
            lambda: m.lambda,
            alpha: m.alpha,
            cover,
        })
    }

    fn run<R: Rng + ?Sized>(&self, x0: f64, cfg: &SimConfig, rng: &mut R) -> PathOutcome {
        let mut x = x0;
        let mut t = 0.0;
        loop {
            if let Some(level) = cfg.early_exit_capital {
                if x > level {
                    return PathOutcome {
                        trapped: false,
                        trapping_time: None,
                        final_capital: x,
                    };
                }
            }
            let u: f64 = rng.random();
            let dt = -(1.0 - u).ln() / self.lambda;
            if t + dt > cfg.horizon {
                return PathOutcome {
                    trapped: false,
                    trapping_time: None,
                    final_capital: (x - self.x_star) * (self.r * (cfg.horizon - t)).exp() + self.x_star,
                };
            }
            t += dt;
            x = (x - self.x_star) * (self.r * dt).exp() + self.x_star;
            let z = sample_remaining_proportion(rng, self.alpha);
            x *= z + self.cover * (1.0 - z);
            if x < self.x_star {
                return PathOutcome {
                    trapped: true,
                    trapping_time: Some(t),
                    final_capital: x,
                };
            }
        }
    }
}

fn check_start(x0: f64, x_star: f64) -> Result<()> {
    if x0 >= x_star && x0.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain(format!("initial capital {x0} is below the critical capital {x_star}")))
    }
}

pub fn simulate_path(
    x0: f64,
    m: &ModelParams,
    ins: Option<&InsuranceParams>,
    cfg: &SimConfig,
    stream: StreamIndex,
) -> Result<PathOutcome> {
    let dynamics = Dynamics::new(m, ins, cfg.poverty_line)?;
    check_start(x0, dynamics.x_star)?;
    Ok(dynamics.run(x0, cfg, &mut path_rng(cfg.seed, stream)))
}

/// One estimate per grid point, from `cfg.n_paths` independent paths each.
pub fn estimate_curve(
    x_grid: &[f64],
    m: &ModelParams,
    ins: Option<&InsuranceParams>,
    cfg: &SimConfig,
) -> Result<Vec<SimEstimate>> {
    let dynamics = Dynamics::new(m, ins, cfg.poverty_line)?;
    for &x0 in x_grid {
        check_start(x0, dynamics.x_star)?;
    }
    let estimates = x_grid
        .iter()
        .enumerate()
        .map(|(i, &x0)| {
            let point = if cfg.shared_streams { 0 } else { i as u64 };
            let trapped: u64 = (0..cfg.n_paths)
                .into_par_iter()
                .map(|path| {
                    let mut rng = path_rng(cfg.seed, StreamIndex { point, path });
                    u64::from(dynamics.run(x0, cfg, &mut rng).trapped)
                })
                .sum();
            SimEstimate::from_counts(x0, trapped, cfg.n_paths)
        })
        .collect();
    Ok(estimates)
}
