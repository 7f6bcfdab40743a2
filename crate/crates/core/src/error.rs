use thiserror::Error;

use crate::calibration::CalibrationError;
use crate::reshape::ParamError;
use crate::stl::{EvalError, ParseError};
use crate::trace::DatasetError;
use crate::tuning::TuneError;

/// Crate-wide error, wrapping the per-module error types.
#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
    #[error(transparent)]
    Tune(#[from] TuneError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
