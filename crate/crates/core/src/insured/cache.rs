//! Versioned on-disk cache of built solutions (JSON, shortest round-trip floats).

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::solver::{build_solution_with_rates, PiecewiseSolution, SolverSettings};
use crate::error::{Error, Result};
use crate::model::{DerivedRates, InsuranceParams, ModelParams};

pub const CACHE_FORMAT: &str = "trapping-solution/1";

#[derive(Serialize, Deserialize)]
struct CacheFile {
    format: String,
    solution: PiecewiseSolution,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    format: &'a str,
    model: &'a ModelParams,
    insurance: &'a InsuranceParams,
    rates: &'a DerivedRates,
    settings: &'a SolverSettings,
}

/// Hex digest identifying a build request.
pub fn cache_key(m: &ModelParams, ins: &InsuranceParams, rates: &DerivedRates, settings: &SolverSettings) -> String {
    let material = KeyMaterial {
        format: CACHE_FORMAT,
        model: m,
        insurance: ins,
        rates,
        settings,
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    Sha256::digest(&bytes)
        .iter()
        .take(16)
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn save_solution(sol: &PiecewiseSolution, path: &Path) -> Result<()> {
    let file = CacheFile {
        format: CACHE_FORMAT.to_string(),
        solution: sol.clone(),
    };
    let text = serde_json::to_string(&file).map_err(|e| Error::Cache(e.to_string()))?;
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, text).map_err(|e| Error::Cache(format!("{}: {e}", tmp.display())))?;
    fs::rename(&tmp, path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))
}

pub fn load_solution(path: &Path) -> Result<PiecewiseSolution> {
    let text = fs::read_to_string(path).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
    let file: CacheFile = serde_json::from_str(&text).map_err(|e| Error::Cache(format!("{}: {e}", path.display())))?;
    if file.format != CACHE_FORMAT {
        return Err(Error::Cache(format!(
            "{}: format {} is not {CACHE_FORMAT}",
            path.display(),
            file.format
        )));
    }
    Ok(file.solution)
}

pub fn cache_path(
    dir: &Path,
    m: &ModelParams,
    ins: &InsuranceParams,
    rates: &DerivedRates,
    settings: &SolverSettings,
) -> PathBuf {
    dir.join(format!("solution-{}.json", cache_key(m, ins, rates, settings)))
}

/// Loads a matching cached solution or builds and stores one. The flag is
/// true on a cache hit.
pub fn build_solution_cached(
    m: &ModelParams,
    ins: &InsuranceParams,
    rates: &DerivedRates,
    settings: &SolverSettings,
    dir: &Path,
) -> Result<(PiecewiseSolution, bool)> {
    let path = cache_path(dir, m, ins, rates, settings);
    if path.exists() {
        if let Ok(sol) = load_solution(&path) {
            if sol.model == *m && sol.insurance == *ins && sol.rates == *rates && sol.settings == *settings {
                return Ok((sol, true));
            }
        }
    }
    let sol = build_solution_with_rates(m, ins, rates, settings)?;
    fs::create_dir_all(dir).map_err(|e| Error::Cache(format!("{}: {e}", dir.display())))?;
    save_solution(&sol, &path)?;
    Ok((sol, false))
}
