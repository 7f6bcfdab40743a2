//! Discrete-time quantitative (min/max) semantics.
//!
//! Time runs over `0..=T`: samples live at steps `1..=T`, step differences at
//! `2..=T`, and the root of a formula is evaluated at time 0. A temporal
//! operator evaluated at `t` aggregates its child over `[t + lo, t + hi]`
//! clipped to `T` (`END` resolves to `T`), skipping times where the child is
//! undefined. Every sub-formula is materialized once as a robustness trace and
//! windows are folded with a monotone deque, so evaluation is linear in `T`
//! per operator.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::formula::{Bound, Formula, Predicate};
use crate::reshape::Signal;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EvalError {
    #[error("no delta samples")]
    NoDeltaSamples,
    #[error("formula {formula} is undefined on a signal of length {len}: window is empty after clipping to the signal")]
    EmptyWindow { formula: String, len: usize },
}

/// Robustness value ρ; `satisfied` is `value >= 0`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Robustness {
    pub value: f64,
    pub satisfied: bool,
}

impl Robustness {
    pub fn new(value: f64) -> Self {
        Robustness {
            value,
            satisfied: value >= 0.0,
        }
    }
}

/// Robustness of `f` at every time `0..=T`; `None` where undefined.
pub fn robustness_trace(f: &Formula, s: &Signal) -> Vec<Option<f64>> {
    let x = s.samples();
    let horizon = x.len();
    match f {
        Formula::Pred(p) => {
            let mut out = vec![None; horizon + 1];
            match *p {
                Predicate::SigGt(k) | Predicate::SigGe(k) => {
                    for t in 1..=horizon {
                        out[t] = Some(x[t - 1] - k);
                    }
                }
                Predicate::DeltaGe(k) => {
                    for t in 2..=horizon {
                        out[t] = Some((x[t - 1] - x[t - 2]) - k);
                    }
                }
                Predicate::AbsDeltaLe(k) => {
                    for t in 2..=horizon {
                        out[t] = Some(k - (x[t - 1] - x[t - 2]).abs());
                    }
                }
            }
            out
        }
        Formula::Not(g) => robustness_trace(g, s)
            .into_iter()
            .map(|v| v.map(|r| -r))
            .collect(),
        Formula::And(a, b) => zip_with(robustness_trace(a, s), robustness_trace(b, s), f64::min),
        Formula::Or(a, b) => zip_with(robustness_trace(a, s), robustness_trace(b, s), f64::max),
        Formula::Always(i, g) => sliding(&robustness_trace(g, s), i.lo(), i.hi(), |cand, kept| {
            cand <= kept
        }),
        Formula::Eventually(i, g) => {
            sliding(&robustness_trace(g, s), i.lo(), i.hi(), |cand, kept| {
                cand >= kept
            })
        }
    }
}

fn zip_with(a: Vec<Option<f64>>, b: Vec<Option<f64>>, op: fn(f64, f64) -> f64) -> Vec<Option<f64>> {
    a.into_iter()
        .zip(b)
        .map(|(x, y)| Some(op(x?, y?)))
        .collect()
}

/// Windowed extremum over defined values. `dominates(cand, kept)` is true
/// when `cand` makes an older `kept` value irrelevant (`<=` for min, `>=`
/// for max).
fn sliding(
    child: &[Option<f64>],
    lo: u32,
    hi: Bound,
    dominates: impl Fn(f64, f64) -> bool,
) -> Vec<Option<f64>> {
    let last = child.len() - 1;
    let lo = lo as usize;
    let mut out = vec![None; child.len()];
    let mut window: VecDeque<(usize, f64)> = VecDeque::new();
    let mut next = 0usize;
    for (t, slot) in out.iter_mut().enumerate() {
        let start = t + lo;
        if start > last {
            break;
        }
        let end = match hi {
            Bound::End => last,
            Bound::Step(h) => (t + h as usize).min(last),
        };
        next = next.max(start);
        while next <= end {
            if let Some(v) = child[next] {
                while window.back().is_some_and(|&(_, kept)| dominates(v, kept)) {
                    window.pop_back();
                }
                window.push_back((next, v));
            }
            next += 1;
        }
        while window.front().is_some_and(|&(j, _)| j < start) {
            window.pop_front();
        }
        *slot = window.front().map(|&(_, v)| v);
    }
    out
}

/// Robustness of `f` on `s`, evaluated at time 0.
pub fn robustness(f: &Formula, s: &Signal) -> Result<Robustness, EvalError> {
    if s.len() < 2 && f.uses_delta() {
        return Err(EvalError::NoDeltaSamples);
    }
    robustness_trace(f, s)[0]
        .map(Robustness::new)
        .ok_or_else(|| EvalError::EmptyWindow {
            formula: f.to_string(),
            len: s.len(),
        })
}

/// `ReLU(ρ)`, additionally capped at 1 so the result is a confidence.
pub fn clamp_score(rho: f64) -> f64 {
    rho.clamp(0.0, 1.0)
}

/// Clamped confidence score `min(max(ρ, 0), 1)`.
pub fn score(f: &Formula, s: &Signal) -> Result<f64, EvalError> {
    robustness(f, s).map(|r| clamp_score(r.value))
}
