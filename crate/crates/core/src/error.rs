use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the simulation engine and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    /// `operator` is 1-based, `element` is 0-based.
    #[error(
        "near-singular channel at operator {operator}, element {element}: \
         |h| = {magnitude:e} is below {threshold:e}"
    )]
    NearSingularChannel {
        operator: usize,
        element: usize,
        magnitude: f64,
        threshold: f64,
    },

    #[error(
        "insufficient pilots: {scheme} configuration of {n_elements} elements \
         needs at least {required} pilot instances, got {n_pilots}"
    )]
    InsufficientPilots {
        scheme: &'static str,
        n_elements: usize,
        n_pilots: usize,
        required: usize,
    },

    #[error("shape mismatch in {what}: expected {expected}, found {found}")]
    ShapeMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("joint pilot model is rank deficient (condition estimate {condition:e})")]
    SingularModel { condition: f64 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("CSV error on {}: {source}", path.display())]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
