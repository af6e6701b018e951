use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("I/O error: {0}")]
    Stream(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    /// A mapped column is absent from the input header.
    #[error("schema error: column '{0}' not found in header")]
    MissingColumn(String),

    /// Invalid configuration or parameter (cell size, band, window, polygon ...).
    #[error("config error: {0}")]
    Config(String),

    /// Input data that cannot be analysed as requested.
    #[error("data error: {0}")]
    Data(String),

    /// A contingency table has an expected count of zero somewhere.
    #[error("degenerate margin: {0}")]
    DegenerateMargin(String),

    #[error("point ({x:.3}, {y:.3}) lies outside the grid extent")]
    OutsideGrid { x: f64, y: f64 },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// `true` for errors caused by the analysed data rather than by usage or
    /// configuration. The CLI maps these to exit code 2.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Data(_) | Error::DegenerateMargin(_) | Error::OutsideGrid { .. } | Error::Csv(_) | Error::Json(_)
        )
    }
}
