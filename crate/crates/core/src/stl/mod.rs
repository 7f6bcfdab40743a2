//! Signal temporal logic over confidence signals: formula AST, DSL parser,
//! robustness evaluation and the three preset specifications.

mod formula;
mod parser;
mod robustness;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use formula::{Bound, Formula, Interval, Predicate};
pub use parser::{parse_formula, ParseError, ParseErrorKind};
pub use robustness::{clamp_score, robustness, robustness_trace, score, EvalError, Robustness};

use crate::reshape::{check_nonneg, check_unit, ParamError};

/// Eventually confident: `F[1,END](sig > tau)`.
pub fn stl1(tau: f64) -> Result<Formula, ParamError> {
    stl1_in(tau, Interval::from(1))
}

/// Always stable or increasing: `G[2,END](delta >= -epsilon)`.
pub fn stl2(epsilon: f64) -> Result<Formula, ParamError> {
    stl2_in(epsilon, Interval::from(2))
}

/// Local smoothness: `G[2,END](|delta| <= delta)`.
pub fn stl3(delta: f64) -> Result<Formula, ParamError> {
    stl3_in(delta, Interval::from(2))
}

pub fn stl1_in(tau: f64, window: Interval) -> Result<Formula, ParamError> {
    check_unit("tau", tau)?;
    Ok(Formula::eventually(
        window,
        Formula::pred(Predicate::SigGt(tau)),
    ))
}

pub fn stl2_in(epsilon: f64, window: Interval) -> Result<Formula, ParamError> {
    check_nonneg("epsilon", epsilon)?;
    Ok(Formula::always(
        window,
        Formula::pred(Predicate::DeltaGe(-epsilon)),
    ))
}

pub fn stl3_in(delta: f64, window: Interval) -> Result<Formula, ParamError> {
    check_nonneg("delta", delta)?;
    Ok(Formula::always(
        window,
        Formula::pred(Predicate::AbsDeltaLe(delta)),
    ))
}

/// The preset specifications, by name.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FormulaKind {
    Stl1,
    Stl2,
    Stl3,
}

impl FormulaKind {
    pub const ALL: [FormulaKind; 3] = [FormulaKind::Stl1, FormulaKind::Stl2, FormulaKind::Stl3];

    pub fn as_str(self) -> &'static str {
        match self {
            FormulaKind::Stl1 => "stl1",
            FormulaKind::Stl2 => "stl2",
            FormulaKind::Stl3 => "stl3",
        }
    }

    /// Name of the threshold this preset reads.
    pub fn param(self) -> &'static str {
        match self {
            FormulaKind::Stl1 => "tau",
            FormulaKind::Stl2 => "epsilon",
            FormulaKind::Stl3 => "delta",
        }
    }

    /// Default window: `[1,END]` for signal predicates, `[2,END]` for deltas.
    pub fn default_window(self) -> Interval {
        match self {
            FormulaKind::Stl1 => Interval::from(1),
            FormulaKind::Stl2 | FormulaKind::Stl3 => Interval::from(2),
        }
    }

    pub fn build(self, threshold: f64, window: Option<Interval>) -> Result<Formula, ParamError> {
        let window = window.unwrap_or_else(|| self.default_window());
        match self {
            FormulaKind::Stl1 => stl1_in(threshold, window),
            FormulaKind::Stl2 => stl2_in(threshold, window),
            FormulaKind::Stl3 => stl3_in(threshold, window),
        }
    }
}

impl fmt::Display for FormulaKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FormulaKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        FormulaKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| format!("unknown formula {s:?} (expected stl1, stl2 or stl3)"))
    }
}
