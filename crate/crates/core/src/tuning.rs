//! Configuration evaluation and validation-set grid search.
//!
//! Threshold names are shared between reshaping and scoring: a configuration
//! is one [`ParamSet`], and both the strategy and the formula read the
//! parameters they consume from it (e.g. `stl1` with `gs` uses one `tau` for
//! both the guard and the formula threshold).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calibration::{
    self, apply_temperature, CalibrationError, CalibrationReport, Exclusion, HistogramBinning,
    Prediction,
};
use crate::reshape::{self, ParamError, ReshapeParams, Strategy};
use crate::stl::{self, Formula, FormulaKind, Interval};
use crate::trace::{ConfidenceTrace, Dataset, Split};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TuneError {
    #[error("the {0} split is empty")]
    EmptySplit(Split),
    #[error("invalid grid: {0}")]
    InvalidGrid(String),
    #[error("every grid point was skipped")]
    NoValidPoint,
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Calibration(#[from] CalibrationError),
}

/// How a trace becomes a single prediction.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Final-step confidence.
    OneStep,
    /// Mean step confidence.
    CotAverage,
    /// Final-step confidence after temperature scaling fitted on the validation split.
    Temperature,
    /// Final-step confidence after histogram binning fitted on the validation split.
    Histogram,
    /// Clamped robustness of `formula`.
    Stl { name: String, formula: Formula },
}

impl Method {
    pub fn preset(kind: FormulaKind, threshold: f64) -> Result<Self, ParamError> {
        Ok(Method::Stl {
            name: kind.as_str().to_string(),
            formula: kind.build(threshold, None)?,
        })
    }

    pub fn name(&self) -> &str {
        match self {
            Method::OneStep => "one-step",
            Method::CotAverage => "cot-average",
            Method::Temperature => "temperature",
            Method::Histogram => "histogram",
            Method::Stl { name, .. } => name,
        }
    }
}

fn reshape_split<'a>(
    data: &'a Dataset,
    split: Split,
    reshape: &ReshapeParams,
) -> Result<Vec<(&'a ConfidenceTrace, reshape::Signal)>, TuneError> {
    reshape.validate()?;
    let traces: Vec<&ConfidenceTrace> = data.in_split(split).collect();
    if traces.is_empty() {
        return Err(TuneError::EmptySplit(split));
    }
    traces
        .into_par_iter()
        .map(|t| Ok((t, reshape::apply(&t.steps, reshape)?)))
        .collect()
}

fn last_confidences(
    data: &Dataset,
    split: Split,
    reshape: &ReshapeParams,
) -> Result<Vec<Prediction>, TuneError> {
    Ok(reshape_split(data, split, reshape)?
        .into_iter()
        .map(|(t, s)| Prediction {
            trace_id: t.id.clone(),
            confidence: *s.samples().last().expect("non-empty"),
            correct: t.correct,
        })
        .collect())
}

/// Reshape every trace of `split`, turn it into a prediction with `method`,
/// and report calibration. Traces the method cannot score are excluded and
/// listed with a reason.
pub fn evaluate_method(
    data: &Dataset,
    split: Split,
    method: &Method,
    reshape: &ReshapeParams,
    bins: usize,
) -> Result<CalibrationReport, TuneError> {
    let mut fitted_temperature = None;
    let (preds, excluded) = match method {
        Method::OneStep | Method::CotAverage | Method::Stl { .. } => {
            let reshaped = reshape_split(data, split, reshape)?;
            let scored: Vec<Result<Prediction, Exclusion>> = reshaped
                .into_par_iter()
                .map(|(t, s)| predict(method, t, s))
                .collect();
            let mut preds = Vec::with_capacity(scored.len());
            let mut excluded = Vec::new();
            for r in scored {
                match r {
                    Ok(p) => preds.push(p),
                    Err(e) => excluded.push(e),
                }
            }
            (preds, excluded)
        }
        Method::Temperature => {
            let fit = last_confidences(data, Split::Validation, reshape)?;
            let t = calibration::fit_temperature(&fit)?;
            fitted_temperature = Some(t);
            let preds = last_confidences(data, split, reshape)?
                .into_iter()
                .map(|p| Prediction {
                    confidence: apply_temperature(p.confidence, t),
                    ..p
                })
                .collect();
            (preds, Vec::new())
        }
        Method::Histogram => {
            let fit = last_confidences(data, Split::Validation, reshape)?;
            let map = HistogramBinning::fit(&fit, bins)?;
            let preds = last_confidences(data, split, reshape)?
                .into_iter()
                .map(|p| Prediction {
                    confidence: map.apply(p.confidence),
                    ..p
                })
                .collect();
            (preds, Vec::new())
        }
    };
    let mut report = CalibrationReport::from_predictions(
        method.name(),
        reshape.strategy.as_str(),
        &preds,
        bins,
        excluded,
    )?;
    report.fitted_temperature = fitted_temperature;
    Ok(report)
}

fn predict(
    method: &Method,
    t: &ConfidenceTrace,
    s: reshape::Signal,
) -> Result<Prediction, Exclusion> {
    let reshaped = ConfidenceTrace {
        steps: s,
        ..t.clone()
    };
    match method {
        Method::OneStep => Ok(calibration::one_step(&reshaped)),
        Method::CotAverage => Ok(calibration::cot_average(&reshaped)),
        Method::Stl { formula, .. } => stl::score(formula, &reshaped.steps)
            .map(|confidence| Prediction {
                trace_id: t.id.clone(),
                confidence,
                correct: t.correct,
            })
            .map_err(|e| Exclusion {
                trace_id: t.id.clone(),
                reason: e.to_string(),
            }),
        Method::Temperature | Method::Histogram => unreachable!("fitted methods handled by caller"),
    }
}

/// Reshape, score with `formula`, and report calibration on `split`.
pub fn evaluate_config(
    data: &Dataset,
    split: Split,
    reshape: &ReshapeParams,
    name: &str,
    formula: &Formula,
    bins: usize,
) -> Result<CalibrationReport, TuneError> {
    let method = Method::Stl {
        name: name.to_string(),
        formula: formula.clone(),
    };
    evaluate_method(data, split, &method, reshape, bins)
}

// ---------------------------------------------------------------------------
// Grid search
// ---------------------------------------------------------------------------

/// One point of the search space. Only the parameters consumed by the
/// (formula, strategy) pair are set.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ParamSet {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Interval>,
}

impl ParamSet {
    pub fn get(&self, name: &str) -> Option<f64> {
        match name {
            "tau" => self.tau,
            "epsilon" => self.epsilon,
            "delta" => self.delta,
            "alpha" => self.alpha,
            _ => None,
        }
    }

    /// Strategy parameters, falling back to defaults for unset fields.
    pub fn reshape_params(&self, strategy: Strategy) -> ReshapeParams {
        let d = ReshapeParams::default();
        ReshapeParams {
            strategy,
            delta: self.delta.unwrap_or(d.delta),
            alpha: self.alpha.unwrap_or(d.alpha),
            tau: self.tau.unwrap_or(d.tau),
            epsilon: self.epsilon.unwrap_or(d.epsilon),
            recursive: false,
        }
    }

    pub fn formula(&self, kind: FormulaKind) -> Result<Formula, ParamError> {
        let threshold = self.get(kind.param()).ok_or(ParamError::OutOfRange {
            name: kind.param(),
            value: f64::NAN,
            range: "a value (parameter not set)",
        })?;
        kind.build(threshold, self.window)
    }
}

/// Search space: one ascending grid per threshold; grids a (formula,
/// strategy) pair does not consume are ignored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub tau_grid: Vec<f64>,
    pub epsilon_grid: Vec<f64>,
    pub delta_grid: Vec<f64>,
    pub alpha_grid: Vec<f64>,
    /// Optional window grid for the formula; `None` keeps the preset default.
    #[serde(default)]
    pub window_grid: Option<Vec<Interval>>,
    pub formula: FormulaKind,
    pub strategy: Strategy,
    pub bins: usize,
}

impl GridSpec {
    pub fn new(formula: FormulaKind, strategy: Strategy) -> Self {
        GridSpec {
            tau_grid: vec![0.5, 0.6, 0.7, 0.8, 0.9],
            epsilon_grid: vec![0.01, 0.05, 0.1, 0.2],
            delta_grid: vec![0.05, 0.1, 0.2, 0.3],
            alpha_grid: vec![0.3, 0.5, 0.7, 0.9],
            window_grid: None,
            formula,
            strategy,
            bins: 10,
        }
    }

    /// Consumed parameter names, in enumeration (field) order.
    pub fn consumed(&self) -> Vec<&'static str> {
        let strategy = ReshapeParams::new(self.strategy);
        let used = strategy.consumed();
        ["tau", "epsilon", "delta", "alpha"]
            .into_iter()
            .filter(|p| used.contains(p) || *p == self.formula.param())
            .collect()
    }

    fn grid(&self, name: &str) -> &[f64] {
        match name {
            "tau" => &self.tau_grid,
            "epsilon" => &self.epsilon_grid,
            "delta" => &self.delta_grid,
            _ => &self.alpha_grid,
        }
    }

    fn validate(&self) -> Result<(), TuneError> {
        if self.bins == 0 {
            return Err(CalibrationError::ZeroBins.into());
        }
        for name in self.consumed() {
            let g = self.grid(name);
            if g.is_empty() {
                return Err(TuneError::InvalidGrid(format!("{name} grid is empty")));
            }
            if g.iter().any(|v| !v.is_finite()) || g.windows(2).any(|w| w[0] >= w[1]) {
                return Err(TuneError::InvalidGrid(format!(
                    "{name} grid must be finite and strictly ascending"
                )));
            }
        }
        if matches!(&self.window_grid, Some(w) if w.is_empty()) {
            return Err(TuneError::InvalidGrid("window grid is empty".into()));
        }
        Ok(())
    }

    /// Cartesian product in lexicographic order: fields in declaration order,
    /// each grid ascending, the last field varying fastest.
    pub fn points(&self) -> Vec<ParamSet> {
        let mut points = vec![ParamSet::default()];
        for name in self.consumed() {
            points = points
                .into_iter()
                .flat_map(|p| {
                    self.grid(name).iter().map(move |&v| {
                        let mut q = p;
                        match name {
                            "tau" => q.tau = Some(v),
                            "epsilon" => q.epsilon = Some(v),
                            "delta" => q.delta = Some(v),
                            _ => q.alpha = Some(v),
                        }
                        q
                    })
                })
                .collect();
        }
        if let Some(windows) = &self.window_grid {
            points = points
                .into_iter()
                .flat_map(|p| {
                    windows.iter().map(move |&w| ParamSet {
                        window: Some(w),
                        ..p
                    })
                })
                .collect();
        }
        points
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub params: ParamSet,
    /// Validation ECE; `None` for skipped points.
    pub ece: Option<f64>,
    pub brier: Option<f64>,
    pub n: usize,
    pub excluded: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TuneResult {
    pub formula: FormulaKind,
    pub strategy: Strategy,
    pub bins: usize,
    pub best_params: ParamSet,
    pub best_ece: f64,
    pub evaluations: Vec<Evaluation>,
}

impl TuneResult {
    pub fn param_names(&self) -> Vec<&'static str> {
        let mut spec = GridSpec::new(self.formula, self.strategy);
        spec.window_grid = self.best_params.window.map(|w| vec![w]);
        let mut names = spec.consumed();
        if spec.window_grid.is_some() {
            names.push("window");
        }
        names
    }

    /// `param_names…,ece`, one row per evaluation; skipped points leave `ece` blank.
    pub fn evaluations_csv(&self) -> String {
        let names = self.param_names();
        let mut out = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<&str> = names.clone();
        header.push("ece");
        out.write_record(&header).expect("in-memory write");
        for e in &self.evaluations {
            let mut cells: Vec<String> = names
                .iter()
                .map(|&n| match n {
                    "window" => e.params.window.map(|w| w.to_string()).unwrap_or_default(),
                    _ => e.params.get(n).map(|v| v.to_string()).unwrap_or_default(),
                })
                .collect();
            cells.push(e.ece.map(|v| v.to_string()).unwrap_or_default());
            out.write_record(&cells).expect("in-memory write");
        }
        String::from_utf8(out.into_inner().expect("in-memory flush")).expect("UTF-8")
    }
}

/// Evaluate one grid point on the validation split.
pub fn evaluate_point(
    data: &Dataset,
    spec: &GridSpec,
    params: &ParamSet,
) -> Result<CalibrationReport, TuneError> {
    let reshape = params.reshape_params(spec.strategy);
    let formula = params.formula(spec.formula)?;
    evaluate_config(
        data,
        Split::Validation,
        &reshape,
        spec.formula.as_str(),
        &formula,
        spec.bins,
    )
}

/// Exhaustive search minimizing validation ECE. Ties go to the earliest point
/// in [`GridSpec::points`] order. Points with invalid parameters, or on which
/// no trace can be scored, are recorded as skipped.
pub fn grid_search(data: &Dataset, spec: &GridSpec) -> Result<TuneResult, TuneError> {
    spec.validate()?;
    if data.in_split(Split::Validation).next().is_none() {
        return Err(TuneError::EmptySplit(Split::Validation));
    }
    let evaluations: Vec<Evaluation> = spec
        .points()
        .into_par_iter()
        .map(|params| match evaluate_point(data, spec, &params) {
            Ok(r) => Evaluation {
                params,
                ece: r.ece,
                brier: r.brier,
                n: r.n,
                excluded: r.excluded.len(),
                skipped: r.ece.is_none().then(|| "no scorable traces".to_string()),
            },
            Err(e) => Evaluation {
                params,
                ece: None,
                brier: None,
                n: 0,
                excluded: 0,
                skipped: Some(e.to_string()),
            },
        })
        .collect();

    let mut best: Option<(usize, f64)> = None;
    for (i, e) in evaluations.iter().enumerate() {
        if let Some(v) = e.ece {
            if best.is_none_or(|(_, b)| v < b) {
                best = Some((i, v));
            }
        }
    }
    let (i, best_ece) = best.ok_or(TuneError::NoValidPoint)?;
    Ok(TuneResult {
        formula: spec.formula,
        strategy: spec.strategy,
        bins: spec.bins,
        best_params: evaluations[i].params,
        best_ece,
        evaluations,
    })
}
