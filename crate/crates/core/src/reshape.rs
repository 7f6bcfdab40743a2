//! Uncertainty reshaping: causal signal-to-signal transforms applied to a
//! confidence trajectory before it is scored.
//!
//! Every strategy keeps the first sample as-is and, by default, conditions on
//! the *original* signal (`s[1..t]`), never on already-reshaped outputs. The
//! recursive variant (conditioning on the reshaped prefix) is available through
//! [`ReshapeParams::recursive`] but is off by default.
//!
//! | strategy | output for t ≥ 2 |
//! |----------|------------------|
//! | `cms` | `min(s[t], min(s[1..t-1]) + delta)` |
//! | `eds` | `alpha * s[t] + (1 - alpha) * sum(s[1..t-1]) / t` |
//! | `mps` | `(s[t-1] + s[t]) / 2` if `s[t-1] < tau` and `s[t] > s[t-1]`, else `s[t]` |
//! | `gs`  | `tau + epsilon` if `s[t-1] < tau` and `s[t] > tau + epsilon`, else `s[t]` |
//!
//! The `eds` divisor is `t` (not `t - 1`), so the smoothed value is biased low.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParamError {
    #[error("signal is empty")]
    EmptySignal,
    #[error("signal sample {index} is {value}, expected a finite value in [0, 1]")]
    SampleOutOfRange { index: usize, value: f64 },
    #[error("parameter {name} = {value} is outside {range}")]
    OutOfRange {
        name: &'static str,
        value: f64,
        range: &'static str,
    },
    #[error("gs requires tau + epsilon <= 1, got tau = {tau}, epsilon = {epsilon}")]
    GuardAboveOne { tau: f64, epsilon: f64 },
    #[error("unknown strategy {0:?} (expected one of cms, eds, mps, gs, identity)")]
    UnknownStrategy(String),
    #[error("interval [{lo},{hi}] has lo > hi")]
    BadInterval { lo: u32, hi: u32 },
}

/// A non-empty discrete-time confidence signal with samples in `[0, 1]`.
///
/// Indexing in the API is zero-based; sample `i` corresponds to step `t = i + 1`.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Signal(Vec<f64>);

impl Signal {
    pub fn new(samples: Vec<f64>) -> Result<Self, ParamError> {
        if samples.is_empty() {
            return Err(ParamError::EmptySignal);
        }
        if let Some((index, &value)) = samples
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
        {
            return Err(ParamError::SampleOutOfRange { index, value });
        }
        Ok(Signal(samples))
    }

    pub fn samples(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// Always false; kept for API symmetry with `len`.
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// Step-to-step differences `s[t] - s[t-1]`, one shorter than the signal.
    pub fn deltas(&self) -> Vec<f64> {
        self.0.windows(2).map(|w| w[1] - w[0]).collect()
    }

    fn from_reshaped(samples: Vec<f64>) -> Self {
        debug_assert!(samples.iter().all(|v| (0.0..=1.0).contains(v)));
        Signal(samples)
    }
}

impl<'de> Deserialize<'de> for Signal {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let samples = Vec::<f64>::deserialize(d)?;
        Signal::new(samples).map_err(serde::de::Error::custom)
    }
}

impl TryFrom<Vec<f64>> for Signal {
    type Error = ParamError;

    fn try_from(samples: Vec<f64>) -> Result<Self, Self::Error> {
        Signal::new(samples)
    }
}

impl AsRef<[f64]> for Signal {
    fn as_ref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    #[default]
    Identity,
    Cms,
    Eds,
    Mps,
    Gs,
}

impl Strategy {
    pub const ALL: [Strategy; 5] = [
        Strategy::Identity,
        Strategy::Cms,
        Strategy::Eds,
        Strategy::Mps,
        Strategy::Gs,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Identity => "identity",
            Strategy::Cms => "cms",
            Strategy::Eds => "eds",
            Strategy::Mps => "mps",
            Strategy::Gs => "gs",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = ParamError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.as_str().eq_ignore_ascii_case(s.trim()))
            .ok_or_else(|| ParamError::UnknownStrategy(s.to_string()))
    }
}

/// Strategy selection plus every strategy parameter. Only the fields the
/// selected strategy consumes are read or validated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReshapeParams {
    pub strategy: Strategy,
    /// CMS margin.
    pub delta: f64,
    /// EDS blend weight on the current sample.
    pub alpha: f64,
    /// MPS/GS threshold.
    pub tau: f64,
    /// GS tolerance above `tau`.
    pub epsilon: f64,
    /// Condition on the reshaped prefix instead of the original signal.
    #[serde(default)]
    pub recursive: bool,
}

impl Default for ReshapeParams {
    fn default() -> Self {
        ReshapeParams {
            strategy: Strategy::Identity,
            delta: 0.1,
            alpha: 0.5,
            tau: 0.5,
            epsilon: 0.05,
            recursive: false,
        }
    }
}

impl ReshapeParams {
    pub fn new(strategy: Strategy) -> Self {
        ReshapeParams {
            strategy,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ParamError> {
        match self.strategy {
            Strategy::Identity => Ok(()),
            Strategy::Cms => check_nonneg("delta", self.delta),
            Strategy::Eds => check_unit("alpha", self.alpha),
            Strategy::Mps => check_unit("tau", self.tau),
            Strategy::Gs => check_guard(self.tau, self.epsilon),
        }
    }

    /// Names of the parameters the selected strategy reads.
    pub fn consumed(&self) -> &'static [&'static str] {
        match self.strategy {
            Strategy::Identity => &[],
            Strategy::Cms => &["delta"],
            Strategy::Eds => &["alpha"],
            Strategy::Mps => &["tau"],
            Strategy::Gs => &["tau", "epsilon"],
        }
    }
}

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(ParamError::OutOfRange {
            name,
            value,
            range: "[0, 1]",
        })
    }
}

pub(crate) fn check_nonneg(name: &'static str, value: f64) -> Result<(), ParamError> {
    if value.is_finite() && value >= 0.0 {
        Ok(())
    } else {
        Err(ParamError::OutOfRange {
            name,
            value,
            range: "[0, inf)",
        })
    }
}

fn check_guard(tau: f64, epsilon: f64) -> Result<(), ParamError> {
    check_unit("tau", tau)?;
    check_nonneg("epsilon", epsilon)?;
    if tau + epsilon > 1.0 {
        return Err(ParamError::GuardAboveOne { tau, epsilon });
    }
    Ok(())
}

/// Causal minimum smoothing.
pub fn cms(s: &Signal, delta: f64) -> Result<Signal, ParamError> {
    check_nonneg("delta", delta)?;
    Ok(cms_impl(s.samples(), delta, false))
}

/// Exponential decay smoothing.
pub fn eds(s: &Signal, alpha: f64) -> Result<Signal, ParamError> {
    check_unit("alpha", alpha)?;
    Ok(eds_impl(s.samples(), alpha, false))
}

/// Monotonic penalty smoothing.
pub fn mps(s: &Signal, tau: f64) -> Result<Signal, ParamError> {
    check_unit("tau", tau)?;
    Ok(mps_impl(s.samples(), tau, false))
}

/// Guarded smoothing.
pub fn gs(s: &Signal, tau: f64, epsilon: f64) -> Result<Signal, ParamError> {
    check_guard(tau, epsilon)?;
    Ok(gs_impl(s.samples(), tau, epsilon, false))
}

/// Dispatch on `p.strategy`. `Identity` returns a copy of `s`.
pub fn apply(s: &Signal, p: &ReshapeParams) -> Result<Signal, ParamError> {
    p.validate()?;
    let x = s.samples();
    Ok(match p.strategy {
        Strategy::Identity => s.clone(),
        Strategy::Cms => cms_impl(x, p.delta, p.recursive),
        Strategy::Eds => eds_impl(x, p.alpha, p.recursive),
        Strategy::Mps => mps_impl(x, p.tau, p.recursive),
        Strategy::Gs => gs_impl(x, p.tau, p.epsilon, p.recursive),
    })
}

fn cms_impl(x: &[f64], delta: f64, recursive: bool) -> Signal {
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    let mut prefix_min = x[0];
    for &c in &x[1..] {
        let v = c.min(prefix_min + delta);
        out.push(v);
        prefix_min = prefix_min.min(if recursive { v } else { c });
    }
    Signal::from_reshaped(out)
}

fn eds_impl(x: &[f64], alpha: f64, recursive: bool) -> Signal {
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    let mut prefix_sum = x[0];
    for (i, &c) in x.iter().enumerate().skip(1) {
        let t = (i + 1) as f64;
        let v = alpha * c + (1.0 - alpha) * (prefix_sum / t);
        out.push(v);
        prefix_sum += if recursive { v } else { c };
    }
    Signal::from_reshaped(out)
}

fn mps_impl(x: &[f64], tau: f64, recursive: bool) -> Signal {
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    for i in 1..x.len() {
        let prev = if recursive { out[i - 1] } else { x[i - 1] };
        let c = x[i];
        out.push(if prev < tau && c > prev {
            (prev + c) / 2.0
        } else {
            c
        });
    }
    Signal::from_reshaped(out)
}

fn gs_impl(x: &[f64], tau: f64, epsilon: f64, recursive: bool) -> Signal {
    let cap = tau + epsilon;
    let mut out = Vec::with_capacity(x.len());
    out.push(x[0]);
    for i in 1..x.len() {
        let prev = if recursive { out[i - 1] } else { x[i - 1] };
        let c = x[i];
        out.push(if prev < tau && c > cap { cap } else { c });
    }
    Signal::from_reshaped(out)
}
