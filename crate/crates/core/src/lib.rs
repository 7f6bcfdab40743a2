//! Temporal-logic scoring of stepwise confidence traces.
//!
//! A chain-of-thought run yields one confidence per reasoning step. This crate
//! treats that sequence as a discrete-time signal, optionally reshapes it
//! ([`reshape`]), scores it against a signal temporal logic specification
//! ([`stl`]) and measures how well the resulting scores are calibrated
//! ([`calibration`]). [`tuning`] grid-searches the thresholds on a
//! validation split.
//!
//! ```
//! use stlcalib_core::reshape::{cms, Signal};
//! use stlcalib_core::stl::{score, stl1};
//!
//! let s = Signal::new(vec![0.9, 0.3, 0.8]).unwrap();
//! let smoothed = cms(&s, 0.1).unwrap();
//! let c = score(&stl1(0.2).unwrap(), &smoothed).unwrap();
//! assert!((c - 0.7).abs() < 1e-12);
//! ```

pub mod calibration;
pub mod error;
pub mod reshape;
pub mod stl;
pub mod trace;
pub mod tuning;

pub use calibration::{CalibrationReport, Prediction};
pub use error::{Error, Result};
pub use reshape::{ReshapeParams, Signal, Strategy};
pub use stl::{Formula, FormulaKind, Robustness};
pub use trace::{ConfidenceTrace, Dataset, Format, Source, Split, SynthConfig};
pub use tuning::{GridSpec, Method, ParamSet, TuneResult};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
