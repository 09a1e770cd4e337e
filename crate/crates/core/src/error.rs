// Copyright 2026 The coherence-lab Contributors
// SPDX-License-Identifier: Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// A parameter is outside the domain where the model is defined.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge for {what}: estimated error {estimate:.3e} > tolerance {tolerance:.3e}")]
    Quadrature {
        what: String,
        estimate: f64,
        tolerance: f64,
    },

    #[error("unsupported: {0}")]
    Unsupported(String),

    /// Steady state does not exist (singular generator or undamped mode).
    #[error("no steady state: {0}")]
    NoSteadyState(String),

    #[error("root finder did not converge from seed {seed}: |d| = {residual:.3e} after {iterations} iterations")]
    RootFinding {
        seed: String,
        residual: f64,
        iterations: usize,
    },

    /// A discretisation grid cannot resolve the requested dynamics.
    #[error("grid resolution: {0}")]
    Resolution(String),

    #[error("Fock truncation: boundary population {population:.3e} exceeds {limit:.1e}")]
    Truncation { population: f64, limit: f64 },

    #[error("singular matrix: condition number {condition:.3e}")]
    Singular { condition: f64 },

    #[error("{}", config_message(.path, *.line, .key, .message))]
    Config {
        path: Option<PathBuf>,
        line: Option<usize>,
        key: Option<String>,
        message: String,
    },

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

fn config_message(
    path: &Option<PathBuf>,
    line: Option<usize>,
    key: &Option<String>,
    message: &str,
) -> String {
    let mut out = String::from("config");
    if let Some(p) = path {
        out.push_str(&format!(" {}", p.display()));
    }
    if let Some(l) = line {
        out.push_str(&format!(" line {l}"));
    }
    if let Some(k) = key {
        out.push_str(&format!(" key `{k}`"));
    }
    out.push_str(": ");
    out.push_str(message);
    out
}

impl Error {
    pub(crate) fn config(line: Option<usize>, key: Option<&str>, message: impl Into<String>) -> Self {
        Error::Config {
            path: None,
            line,
            key: key.map(str::to_owned),
            message: message.into(),
        }
    }

    pub(crate) fn domain(message: impl Into<String>) -> Self {
        Error::Domain(message.into())
    }
}
