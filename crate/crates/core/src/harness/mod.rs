//! Scenario files, direction sweeps, CDF pooling, FLOP normalization and
//! CSV / gnuplot output.

mod cdf;
pub mod check;
mod emit;
mod report;
mod scenario;
mod sweep;

use std::path::PathBuf;

use thiserror::Error;

use crate::optimize::OptimizeError;

pub use cdf::{empirical_cdf, run_cdf, CdfCurve, CdfResult, CdfSample};
pub use emit::{
    cdf_pooled_csv, cdf_samples_csv, cdf_by_combination_csv, parse_csv, plot_script, read_csv, rows_to_csv,
    write_cdf, write_csv, write_plot_script, write_sweep, CSV_HEADER,
};
pub use report::{flop_report, flop_report_from, EsMode, FlopReport, FlopRow};
pub use scenario::{load_scenario, parse_scenario, preset, ArraySpec, CdfSpec, Scenario, SweepSpec};
pub use sweep::{
    evaluate, parse_methods, run_directions, run_sweep, DirectionSetup, Evaluation, Method, Record, SweepConfig,
    SweepResult, SweepRow,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("{source_name}:{line}:{column}: {message}")]
    Parse {
        source_name: String,
        line: usize,
        column: usize,
        message: String,
    },
    #[error("invalid scenario: {}", .0.join("; "))]
    Validation(Vec<String>),
    #[error("unknown method `{0}` (expected one of fp-ss, fp-css, joint, mvdr-cm-hq, eff-mvdr, es-rx, es-tx)")]
    UnknownMethod(String),
    #[error(transparent)]
    Solver(#[from] OptimizeError),
    /// Solver failures or property violations reported as text.
    #[error("{0}")]
    Failed(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl HarnessError {
    /// Process exit status: 1 validation, 2 solver infeasibility, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Parse { .. } | HarnessError::Validation(_) | HarnessError::UnknownMethod(_) => 1,
            HarnessError::Solver(_) | HarnessError::Failed(_) => 2,
            HarnessError::Io { .. } | HarnessError::Csv { .. } => 3,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        HarnessError::Io {
            path: path.into(),
            source,
        }
    }
}
