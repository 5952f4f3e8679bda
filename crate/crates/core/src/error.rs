// SPDX-License-Identifier: MIT OR Apache-2.0

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {message}")]
    Malformed { line: u64, message: String },

    #[error("no export records in years {from}..={to}")]
    EmptyRange { from: i32, to: i32 },

    #[error("year {0} not present in export table")]
    YearAbsent(i32),

    #[error("year {0} has zero total exports")]
    ZeroWorldTotal(i32),

    #[error("unknown country `{0}`")]
    UnknownCountry(String),

    #[error("unknown product `{0}`")]
    UnknownProduct(String),

    #[error("snapshots do not share the same product index")]
    ProductMismatch,

    #[error("recommendation list was built from a different snapshot")]
    SnapshotMismatch,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("need at least 3 countries for tier assignment, got {0}")]
    TooFewCountries(usize),

    #[error("fitness solver did not converge within {0} iterations")]
    NonConvergence(usize),

    #[error("country `{0}` gained no products between train and test years")]
    NoNewExports(String),

    #[error("no snapshot available for year {0}")]
    MissingSnapshot(i32),

    #[error("snapshot cache: {0}")]
    Cache(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by the input data rather than the caller's parameters.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Io { .. }
                | Error::Malformed { .. }
                | Error::EmptyRange { .. }
                | Error::YearAbsent(_)
                | Error::ZeroWorldTotal(_)
                | Error::UnknownCountry(_)
                | Error::UnknownProduct(_)
                | Error::ProductMismatch
                | Error::SnapshotMismatch
                | Error::TooFewCountries(_)
                | Error::NoNewExports(_)
                | Error::MissingSnapshot(_)
                | Error::Cache(_)
        )
    }
}
