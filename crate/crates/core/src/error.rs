use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("mesh topology: {0}")]
    Topology(String),

    #[error("invalid geometry: {0}")]
    Geometry(String),

    #[error("connectome is disconnected into {} components: {}", components.len(), format_components(components))]
    Disconnected { components: Vec<Vec<usize>> },

    #[error("invalid parameter `{name}`: {message}")]
    InvalidParameter { name: &'static str, message: String },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("unresolved atlas region names: {}", names.join(", "))]
    UnresolvedNames { names: Vec<String> },

    #[error("Braak stage {0} resolves to no region")]
    EmptyStage(String),

    #[error("unknown region id(s): {}", join_ids(ids))]
    UnknownRegions { ids: Vec<u32> },

    #[error(
        "region-id vocabularies differ; only in first: [{}], only in second: [{}]",
        join_ids(only_left),
        join_ids(only_right)
    )]
    VocabularyMismatch {
        only_left: Vec<u32>,
        only_right: Vec<u32>,
    },

    #[error("linear solver did not converge after {iterations} iterations (last relative residual {:.3e})", residuals.last().copied().unwrap_or(f64::NAN))]
    SolverDiverged {
        iterations: usize,
        residuals: Vec<f64>,
    },

    #[error("singular linear system: {0}")]
    Singular(String),

    #[error("non-finite value in state at step {step}")]
    NonFinite { step: usize },

    #[error("unknown {kind} `{name}`; available: {}", available.join(", "))]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: Vec<String>,
    },

    #[error("scheme `{scheme}` does not run on a {domain} domain")]
    WrongDomain {
        scheme: &'static str,
        domain: &'static str,
    },

    #[error("staging: {0}")]
    Staging(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(name: &'static str, message: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            message: message.into(),
        }
    }
}

fn format_components(components: &[Vec<usize>]) -> String {
    components
        .iter()
        .map(|c| {
            let ids: Vec<String> = c.iter().map(|i| i.to_string()).collect();
            format!("{{{}}}", ids.join(","))
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn join_ids(ids: &[u32]) -> String {
    ids.iter()
        .map(|i| i.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}
