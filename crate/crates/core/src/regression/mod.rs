//! Topical group-bias regressions.
//!
//! Cluster shares per politician are regressed on dummy-coded metadata
//! with OLS; two-sided p-values come from the Student-t distribution.

pub mod audit;
pub mod meta;
pub mod ols;
pub mod report;
pub mod stats;

use thiserror::Error;

pub use audit::{audit, compute_shares, AuditMode, AuditOptions, BiasReport, BiasRow, ShareTable, ShareVector};
pub use meta::{dummy_encode, DummyScheme, Gender, MetadataRow, Party, PolRole, PoliticianMeta};
pub use ols::{ols, OlsFit};
pub use stats::{t_cdf, two_sided_p};

#[derive(Debug, Error)]
pub enum RegressionError {
    #[error("degrees of freedom must be at least 1, got {0}")]
    InvalidDof(f64),
    #[error("alpha must lie in (0, 1], got {0}")]
    InvalidAlpha(f64),
    #[error("{n} observations cannot identify {p} coefficients")]
    NotEnoughObservations { n: usize, p: usize },
    #[error("design is rank deficient: column {column} is a linear combination of earlier columns")]
    RankDeficient { column: String },
    #[error("{what} has length {found}, expected {expected}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("clustered suggestion {0:?} belongs to no politician")]
    OrphanSuggestion(String),
    #[error("suggestion {suggestion:?} assigned to cluster {cluster} but k = {k}")]
    ClusterOutOfRange {
        suggestion: String,
        cluster: usize,
        k: usize,
    },
    #[error("no metadata for politician {0:?}")]
    MissingMeta(String),
    #[error("metadata file lacks column {0:?}")]
    MissingColumn(String),
    #[error("politician {politician:?}: unknown {attribute} value {value:?}")]
    UnknownCategory {
        politician: String,
        attribute: &'static str,
        value: String,
    },
    #[error("politician {politician:?}: implausible year of birth {year}")]
    ImplausibleYear { politician: String, year: i32 },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
