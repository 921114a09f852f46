//! Parameter resolution: built-in defaults, then the config file, then flags.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// Every recognised key with its default. An empty default means the
/// command derives the value (for example a list falls back to its scalar).
pub const DEFAULTS: &[(&str, &str)] = &[
    ("a", "0.1"),
    ("b", "1.4"),
    ("c", "0.4"),
    ("xstar", "1"),
    ("lambda", "1"),
    ("alpha", "1"),
    ("kappa", "0.3"),
    ("theta", "0.5"),
    ("alphas", ""),
    ("lambdas", ""),
    ("kappas", ""),
    ("thetas", ""),
    ("mus", "1,2"),
    ("x_min", ""),
    ("x_max", ""),
    ("x_points", "200"),
    ("seed", "1"),
    ("paths", "2000"),
    ("horizon", "500"),
    ("depth", "3"),
    ("nodes", "64"),
    ("line", "variable"),
    ("source", "simulated"),
    ("constant", ""),
    ("fit_points", "30"),
    ("insured", "false"),
    ("shared_streams", "false"),
    ("early_exit", ""),
    ("sweep", "false"),
];

#[derive(Debug, Clone)]
pub struct Params {
    values: BTreeMap<String, String>,
}

impl Params {
    /// Defaults overridden by `file` entries, then by `flags`.
    pub fn resolve(file: Option<&Path>, flags: &[(&str, Option<String>)]) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> =
            DEFAULTS.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect();
        if let Some(path) = file {
            let text = fs::read_to_string(path)
                .map_err(|e| CliError::Input(format!("cannot read config {}: {e}", path.display())))?;
            for (key, value) in parse_config(&text)? {
                if !values.contains_key(&key) {
                    return Err(CliError::Input(format!("unknown config key '{key}' in {}", path.display())));
                }
                values.insert(key, value);
            }
        }
        for (key, value) in flags {
            if let Some(v) = value {
                values.insert(key.to_string(), v.clone());
            }
        }
        Ok(Params { values })
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, &str)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError> {
        let raw = self.raw(key).trim();
        raw.parse()
            .map_err(|_| CliError::Input(format!("cannot parse {key} = '{raw}'")))
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        if self.raw(key).trim().is_empty() {
            Ok(None)
        } else {
            self.get(key).map(Some)
        }
    }

    pub fn flag(&self, key: &str) -> Result<bool, CliError> {
        match self.raw(key).trim() {
            "true" | "1" | "yes" => Ok(true),
            "false" | "0" | "no" | "" => Ok(false),
            other => Err(CliError::Input(format!("{key} must be true or false, got '{other}'"))),
        }
    }

    /// Comma-separated list, or `None` when empty.
    pub fn list(&self, key: &str) -> Result<Option<Vec<f64>>, CliError> {
        let raw = self.raw(key).trim();
        if raw.is_empty() {
            return Ok(None);
        }
        raw.split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| CliError::Input(format!("cannot parse '{s}' in {key}")))
            })
            .collect::<Result<Vec<_>, _>>()
            .map(Some)
    }

    /// The list under `plural`, or the scalar under `single`.
    pub fn list_or(&self, plural: &str, single: &str) -> Result<Vec<f64>, CliError> {
        match self.list(plural)? {
            Some(v) => Ok(v),
            None => Ok(vec![self.get(single)?]),
        }
    }
}

/// Parses `key = value` lines; `#` starts a comment.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Input(format!("config line {} is not key=value: '{line}'", no + 1)))?;
        out.push((key.trim().replace('-', "_"), value.trim().to_string()));
    }
    Ok(out)
}

/// `n` equally spaced points on [lo, hi].
pub fn linspace(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>, CliError> {
    if n < 2 || !(lo < hi) {
        return Err(CliError::Input(format!("grid needs lo < hi and at least 2 points (got [{lo}, {hi}], {n})")));
    }
    Ok((0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_file_override_defaults() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("run.conf");
        fs::write(&path, "# fig 4\nlambda = 0.5\nkappa=0.4 # trailing\nx-points = 11\n").unwrap();
        let p = Params::resolve(Some(&path), &[("kappa", Some("0.7".into())), ("theta", None)]).unwrap();
        assert_eq!(p.get::<f64>("lambda").unwrap(), 0.5);
        assert_eq!(p.get::<f64>("kappa").unwrap(), 0.7);
        assert_eq!(p.get::<f64>("theta").unwrap(), 0.5);
        assert_eq!(p.get::<usize>("x_points").unwrap(), 11);
    }

    #[test]
    fn unknown_keys_and_bad_lines_are_rejected() {
        assert!(parse_config("lambda 0.5").is_err());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.conf");
        fs::write(&path, "lamda = 0.5\n").unwrap();
        assert!(Params::resolve(Some(&path), &[]).is_err());
    }

    #[test]
    fn lists_fall_back_to_scalars() {
        let p = Params::resolve(None, &[("alphas", Some("2, 3,5".into()))]).unwrap();
        assert_eq!(p.list_or("alphas", "alpha").unwrap(), vec![2.0, 3.0, 5.0]);
        assert_eq!(p.list_or("lambdas", "lambda").unwrap(), vec![1.0]);
        assert!(p.flag("sweep").is_ok_and(|s| !s));
    }

    #[test]
    fn grid() {
        assert_eq!(linspace(1.0, 2.0, 3).unwrap(), vec![1.0, 1.5, 2.0]);
        assert!(linspace(1.0, 1.0, 3).is_err());
    }
}
