//! Calibration metrics and the classical comparison baselines.
//!
//! Binning is equal-width over `[0, 1]`: bin `m` (1-based) holds confidences in
//! `[(m-1)/M, m/M)`, and the top bin is closed so that `1.0` lands in bin `M`.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::trace::ConfidenceTrace;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("no predictions to evaluate")]
    Empty,
    #[error("bin count must be at least 1")]
    ZeroBins,
    #[error("confidence {value} for {trace_id:?} is not a finite value in [0, 1]")]
    BadConfidence { trace_id: String, value: f64 },
    #[error("cannot fit temperature: validation set is all {}", if *all_correct { "correct" } else { "incorrect" })]
    Degenerate { all_correct: bool },
    #[error("temperature must be positive and finite, got {0}")]
    BadTemperature(f64),
}

/// One scored example: predicted confidence and final-answer correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub trace_id: String,
    pub confidence: f64,
    pub correct: bool,
}

impl Prediction {
    pub fn new(
        trace_id: impl Into<String>,
        confidence: f64,
        correct: bool,
    ) -> Result<Self, CalibrationError> {
        let trace_id = trace_id.into();
        if !(confidence.is_finite() && (0.0..=1.0).contains(&confidence)) {
            return Err(CalibrationError::BadConfidence {
                trace_id,
                value: confidence,
            });
        }
        Ok(Prediction {
            trace_id,
            confidence,
            correct,
        })
    }

    fn label(&self) -> f64 {
        if self.correct {
            1.0
        } else {
            0.0
        }
    }
}

/// Zero-based bin index of `confidence` among `bins` equal-width bins.
pub fn bin_index(confidence: f64, bins: usize) -> usize {
    ((confidence * bins as f64).floor() as usize).min(bins - 1)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    /// Mean confidence in the bin; `None` when empty.
    pub mean_confidence: Option<f64>,
    /// Fraction correct in the bin; `None` when empty.
    pub accuracy: Option<f64>,
}

/// Reliability table: one row per equal-width bin.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinTable {
    pub bins: Vec<Bin>,
}

impl BinTable {
    pub fn build(preds: &[Prediction], bins: usize) -> Result<Self, CalibrationError> {
        if bins == 0 {
            return Err(CalibrationError::ZeroBins);
        }
        let mut count = vec![0usize; bins];
        let mut conf_sum = vec![0.0f64; bins];
        let mut hits = vec![0usize; bins];
        for p in preds {
            let m = bin_index(p.confidence, bins);
            count[m] += 1;
            conf_sum[m] += p.confidence;
            hits[m] += usize::from(p.correct);
        }
        let rows = (0..bins)
            .map(|m| {
                let n = count[m];
                Bin {
                    lower: m as f64 / bins as f64,
                    upper: (m + 1) as f64 / bins as f64,
                    count: n,
                    mean_confidence: (n > 0).then(|| conf_sum[m] / n as f64),
                    accuracy: (n > 0).then(|| hits[m] as f64 / n as f64),
                }
            })
            .collect();
        Ok(BinTable { bins: rows })
    }

    pub fn total(&self) -> usize {
        self.bins.iter().map(|b| b.count).sum()
    }

    /// `bin_lo,bin_hi,count,conf,acc`; empty bins leave `conf`/`acc` blank.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,count,conf,acc\n");
        for b in &self.bins {
            let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                b.lower,
                b.upper,
                b.count,
                opt(b.mean_confidence),
                opt(b.accuracy)
            );
        }
        out
    }
}

/// Expected calibration error with `bins` equal-width bins.
pub fn ece(preds: &[Prediction], bins: usize) -> Result<(f64, BinTable), CalibrationError> {
    if preds.is_empty() {
        return Err(CalibrationError::Empty);
    }
    let table = BinTable::build(preds, bins)?;
    let n = preds.len() as f64;
    let value = table
        .bins
        .iter()
        .filter_map(|b| {
            let gap = (b.accuracy? - b.mean_confidence?).abs();
            Some(b.count as f64 / n * gap)
        })
        .sum();
    Ok((value, table))
}

/// Mean squared error between confidence and the 0/1 correctness label.
pub fn brier(preds: &[Prediction]) -> Result<f64, CalibrationError> {
    if preds.is_empty() {
        return Err(CalibrationError::Empty);
    }
    let sum: f64 = preds
        .iter()
        .map(|p| (p.confidence - p.label()).powi(2))
        .sum();
    Ok(sum / preds.len() as f64)
}

/// Final-step confidence.
pub fn one_step(trace: &ConfidenceTrace) -> Prediction {
    Prediction {
        trace_id: trace.id.clone(),
        confidence: *trace.steps.samples().last().expect("non-empty signal"),
        correct: trace.correct,
    }
}

/// Mean confidence over all steps.
pub fn cot_average(trace: &ConfidenceTrace) -> Prediction {
    let s = trace.steps.samples();
    let mean = s.iter().sum::<f64>() / s.len() as f64;
    Prediction {
        trace_id: trace.id.clone(),
        // rounding can push the mean of values <= 1 a hair above 1
        confidence: mean.min(1.0),
        correct: trace.correct,
    }
}

// ---------------------------------------------------------------------------
// Temperature scaling
// ---------------------------------------------------------------------------

/// Confidences are clamped to `[SQUASH, 1 - SQUASH]` before the logit.
pub const SQUASH: f64 = 1e-6;

pub const TEMPERATURE_MIN: f64 = 0.05;
pub const TEMPERATURE_MAX: f64 = 20.0;
/// Golden-section stopping width, in `ln T`.
pub const LOG_T_TOLERANCE: f64 = 1e-4;

pub fn squash(c: f64) -> f64 {
    c.clamp(SQUASH, 1.0 - SQUASH)
}

pub fn logit(c: f64) -> f64 {
    (c / (1.0 - c)).ln()
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// `σ(logit(c) / T)` on the squashed confidence.
pub fn apply_temperature(c: f64, temperature: f64) -> f64 {
    sigmoid(logit(squash(c)) / temperature)
}

/// Binary negative log-likelihood (summed) of the temperature-scaled predictions.
pub fn temperature_nll(val: &[Prediction], temperature: f64) -> f64 {
    val.iter()
        .map(|p| {
            let z = logit(squash(p.confidence)) / temperature;
            if p.correct {
                softplus(-z)
            } else {
                softplus(z)
            }
        })
        .sum()
}

/// Temperature minimizing validation NLL, by golden-section search on `ln T`
/// over `[ln 0.05, ln 20]`.
pub fn fit_temperature(val: &[Prediction]) -> Result<f64, CalibrationError> {
    if val.is_empty() {
        return Err(CalibrationError::Empty);
    }
    let correct = val.iter().filter(|p| p.correct).count();
    if correct == 0 || correct == val.len() {
        return Err(CalibrationError::Degenerate {
            all_correct: correct > 0,
        });
    }
    let objective = |u: f64| temperature_nll(val, u.exp());
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (TEMPERATURE_MIN.ln(), TEMPERATURE_MAX.ln());
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (objective(c), objective(d));
    while b - a > LOG_T_TOLERANCE {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }
    Ok(((a + b) / 2.0).exp())
}

// ---------------------------------------------------------------------------
// Histogram binning
// ---------------------------------------------------------------------------

/// Fitted histogram-binning map: each equal-width bin maps to its validation
/// accuracy; bins with no validation support fall back to the global accuracy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HistogramBinning {
    pub bin_accuracy: Vec<Option<f64>>,
    pub global_accuracy: f64,
}

impl HistogramBinning {
    pub fn fit(val: &[Prediction], bins: usize) -> Result<Self, CalibrationError> {
        if val.is_empty() {
            return Err(CalibrationError::Empty);
        }
        let table = BinTable::build(val, bins)?;
        let hits = val.iter().filter(|p| p.correct).count();
        Ok(HistogramBinning {
            bin_accuracy: table.bins.iter().map(|b| b.accuracy).collect(),
            global_accuracy: hits as f64 / val.len() as f64,
        })
    }

    pub fn bins(&self) -> usize {
        self.bin_accuracy.len()
    }

    pub fn apply(&self, c: f64) -> f64 {
        self.bin_accuracy[bin_index(c, self.bins())].unwrap_or(self.global_accuracy)
    }
}

// ---------------------------------------------------------------------------
// Reports
// ---------------------------------------------------------------------------

/// A trace left out of a report, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Exclusion {
    pub trace_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub method: String,
    pub strategy: String,
    /// Number of scored predictions.
    pub n: usize,
    /// `None` when nothing could be scored.
    pub ece: Option<f64>,
    pub brier: Option<f64>,
    pub bin_table: BinTable,
    #[serde(default)]
    pub excluded: Vec<Exclusion>,
    /// Temperature fitted on the validation split, for the temperature baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fitted_temperature: Option<f64>,
}

impl CalibrationReport {
    pub fn from_predictions(
        method: impl Into<String>,
        strategy: impl Into<String>,
        preds: &[Prediction],
        bins: usize,
        excluded: Vec<Exclusion>,
    ) -> Result<Self, CalibrationError> {
        let bin_table = BinTable::build(preds, bins)?;
        let (ece, brier) = if preds.is_empty() {
            (None, None)
        } else {
            (Some(ece(preds, bins)?.0), Some(brier(preds)?))
        };
        Ok(CalibrationReport {
            method: method.into(),
            strategy: strategy.into(),
            n: preds.len(),
            ece,
            brier,
            bin_table,
            excluded,
            fitted_temperature: None,
        })
    }
}

/// Aligned plain-text table, one row per report, six decimals.
pub fn render_table(reports: &[CalibrationReport]) -> String {
    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.strategy.clone(),
                r.n.to_string(),
                r.excluded.len().to_string(),
                fmt(r.ece),
                fmt(r.brier),
            ]
        })
        .collect();
    render_columns(
        &["method", "strategy", "n", "excluded", "ece", "brier"],
        &rows,
    )
}

/// Left-aligned columns separated by two spaces, with a dashed rule under
/// the header.
pub fn render_columns(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.len()).collect();
    for row in rows {
        for (w, cell) in width.iter_mut().zip(row) {
            *w = (*w).max(cell.chars().count());
        }
    }
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&width)
            .map(|(c, w)| format!("{c:<w$}"))
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header.iter().map(|h| h.to_string()).collect::<Vec<_>>());
    line(&width.iter().map(|w| "-".repeat(*w)).collect::<Vec<_>>());
    for row in rows {
        line(row);
    }
    out
}
