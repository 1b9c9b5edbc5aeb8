//! Summary statistics, empirical CDFs and comparison with bench reference
//! tables.

mod ecdf;
mod reference;
mod stats;
mod table;

pub use ecdf::{ecdf, export_ecdf_csv, import_ecdf_csv, quantile, Ecdf};
pub use reference::{
    compare_to_reference, kind_name, Comparison, Field, FieldCheck, LimitCheck, Mode,
    QuantileLimit, Reference, ReferenceRow, ReferenceStats, Tolerance,
};
pub use stats::{summarize, SummaryStats};
pub use table::{SweepTable, TableRow};

use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty series")]
    EmptySeries,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("reference row is for {expected_db} dB, statistics are for {actual_db} dB")]
    RowMismatch { expected_db: f64, actual_db: f64 },
    #[error("malformed {what}: {detail}")]
    Parse { what: &'static str, detail: String },
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}
