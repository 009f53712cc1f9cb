//! Flexible multivariate marginal models for longitudinal data.
//!
//! Several responses measured on the same subjects over time are stacked
//! into one long response vector. A single design matrix then lets
//! covariate effects be shared across responses or differ by response
//! through a response-type indicator and its interactions. The model is
//! fitted by generalized estimating equations with a working correlation
//! over the whole subject cluster and robust (sandwich) standard errors.
//!
//! ```no_run
//! use flexgee::{build_problem, fit_gee, CorStruct, FamilySpec, GeeControls, ModelSpec};
//! # fn demo(data: &flexgee::LongitudinalDataset) -> Result<(), flexgee::Error> {
//! let spec = ModelSpec::shared(&["stress", "illness"], &["married", "employed"])
//!     .with_interactions_one_based(&[2])?;
//! let problem = build_problem(data, &spec)?;
//! let fit = fit_gee(&problem, &FamilySpec::logistic(), CorStruct::Exchangeable, &GeeControls::default())?;
//! println!("{:?}", fit.beta);
//! # Ok(()) }
//! ```

pub mod cli;
pub mod correlation;
pub mod dataset;
pub mod design;
pub mod engine;
pub mod family;
pub mod fitfile;
pub mod inference;
pub mod keyvalue;
pub mod normal;
pub mod sim;

pub use correlation::{CorStruct, CorrelationError, WorkingCorrelation};
pub use dataset::{
    ingest_long, preprocess_baseline, ColumnRoles, DatasetError, IngestOptions, LongitudinalDataset, MissingPolicy,
    PreprocessSpec,
};
pub use design::{build_per_response_problem, build_problem, DesignError, ModelSpec, StackedProblem};
pub use engine::{fit_gee, GeeControls, GeeError, GeeFit};
pub use family::{Dispersion, Family, FamilyError, FamilySpec, Link};
pub use fitfile::{read_fit, write_fit, FitFileError};
pub use inference::{
    derived_coefficient, efficiency_gain, per_response_coefficients, wald_statistics, CovarianceSource,
    DerivedCoefficient, InferenceError,
};
pub use keyvalue::{ConfigError, KeyValues};
pub use sim::{monte_carlo, McPlan, McSummary, ModelVariant, SimConfig, SimError};

use thiserror::Error;

/// Any error the library or the command line can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("family: {0}")]
    Family(#[from] FamilyError),
    #[error("design: {0}")]
    Design(#[from] DesignError),
    #[error("dataset: {0}")]
    Dataset(#[from] DatasetError),
    #[error("fit file: {0}")]
    FitFile(#[from] FitFileError),
    #[error("gee: {0}")]
    Gee(#[from] GeeError),
    #[error("correlation: {0}")]
    Correlation(#[from] CorrelationError),
    #[error("inference: {0}")]
    Inference(#[from] InferenceError),
    #[error("simulation: {0}")]
    Sim(#[from] SimError),
    #[error("fit did not converge: {0}")]
    NotConverged(String),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit status: 2 for bad specifications, 3 for bad data,
    /// 4 for numerical failures and non-convergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_)
            | Error::Config(_)
            | Error::Family(_)
            | Error::Design(_)
            | Error::Sim(_)
            | Error::Inference(InferenceError::UnknownLabel(_))
            | Error::Inference(InferenceError::UnknownResponse(_))
            | Error::Inference(InferenceError::IndexOutOfRange { .. }) => 2,
            Error::Dataset(_) | Error::FitFile(_) | Error::Io(_) | Error::Csv(_) => 3,
            Error::Gee(_) | Error::Correlation(_) | Error::Inference(_) | Error::NotConverged(_) => 4,
        }
    }
}
