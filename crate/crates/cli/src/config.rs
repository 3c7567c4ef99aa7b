//! Optional TOML settings file. A value given on the command line wins over
//! the file, and the file wins over the built-in default.

use std::fs;
use std::path::Path;

use serde::Deserialize;

use crate::CliError;

#[derive(Debug, Clone, Default, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub threads: Option<usize>,
    pub gamma: Option<f64>,
    pub gamma_h: Option<f64>,
    pub seed: Option<u64>,
    pub m: Option<usize>,
    pub n: Option<usize>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub threshold: Option<f64>,
    pub feasibility_retries: Option<usize>,
    pub warm_start: Option<bool>,
    pub early_exit: Option<bool>,
    pub budget: Option<f64>,
    pub pairs: Option<usize>,
    pub cert_gamma_h: Option<f64>,
}

impl FileConfig {
    pub fn parse(text: &str) -> Result<Self, CliError> {
        toml::from_str(text).map_err(|e| CliError::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        match path {
            None => Ok(FileConfig::default()),
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| CliError::io(p, e))?;
                Self::parse(&text).map_err(|e| CliError::Config(format!("{}: {e}", p.display())))
            }
        }
    }
}

/// Flag, then file, then default.
pub fn resolve<T>(flag: Option<T>, file: Option<T>, default: T) -> T {
    flag.or(file).unwrap_or(default)
}
