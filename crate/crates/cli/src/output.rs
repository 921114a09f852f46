//! Metadata header and CSV body.

use trapping_core::analysis::{INTERSECTION_TOL, TOUCH_TOL};
use trapping_core::closed_form::PROBABILITY_SLACK;
use trapping_core::insured::{SolverSettings, IMAG_RESIDUE_TOL};

use crate::params::Params;
use crate::CliError;

/// Floats carry 17 significant digits so they round-trip exactly.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// Lines starting with `#`: version, command, every resolved parameter and
/// the numerical tolerances in force.
pub fn header(command: &str, params: &Params, settings: &SolverSettings) -> String {
    let mut out = format!("# trapping {}\n# command={command}\n", env!("CARGO_PKG_VERSION"));
    for (k, v) in params.entries() {
        out.push_str(&format!("# {k}={v}\n"));
    }
    let tolerances = [
        ("solver.max_nodes", settings.max_nodes.to_string()),
        ("solver.refine_tol", format!("{:e}", settings.refine_tol)),
        ("solver.quad_abs_tol", format!("{:e}", settings.quad_abs_tol)),
        ("solver.truncate_rel", format!("{:e}", settings.truncate_rel)),
        ("solver.grading_ratio", format!("{:e}", settings.grading_ratio)),
        ("solver.grading_levels", settings.grading_levels.to_string()),
        ("solver.kappa1_range", format!("{:e}", settings.kappa1_range)),
        ("tol.imaginary_residue", format!("{IMAG_RESIDUE_TOL:e}")),
        ("tol.intersection", format!("{INTERSECTION_TOL:e}")),
        ("tol.touch", format!("{TOUCH_TOL:e}")),
        ("tol.probability_slack", format!("{PROBABILITY_SLACK:e}")),
    ];
    for (k, v) in tolerances {
        out.push_str(&format!("# {k}={v}\n"));
    }
    out
}

/// CSV table accumulated in memory and rendered once.
pub struct Table {
    writer: csv::Writer<Vec<u8>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Result<Self, CliError> {
        let mut writer = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
        writer.write_record(columns).map_err(csv_error)?;
        Ok(Table { writer })
    }

    pub fn row<I, S>(&mut self, fields: I) -> Result<(), CliError>
    where
        I: IntoIterator<Item = S>,
        S: AsRef<[u8]>,
    {
        self.writer.write_record(fields).map_err(csv_error)
    }

    pub fn finish(self) -> Result<String, CliError> {
        let bytes = self.writer.into_inner().map_err(|e| CliError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| CliError::Io(e.to_string()))
    }
}

fn csv_error(e: csv::Error) -> CliError {
    CliError::Io(e.to_string())
}
