use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::reshape::ParamError;

/// Upper end of a temporal window: a step offset or the end of the trace.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Bound {
    Step(u32),
    End,
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Step(n) => write!(f, "{n}"),
            Bound::End => f.write_str("END"),
        }
    }
}

/// Integer step window `[lo, hi]`, relative to the time the operator is
/// evaluated at. `lo <= hi` always holds. Serializes as the string `[lo,hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct Interval {
    lo: u32,
    hi: Bound,
}

impl Interval {
    pub fn new(lo: u32, hi: Bound) -> Result<Self, ParamError> {
        if let Bound::Step(h) = hi {
            if lo > h {
                return Err(ParamError::BadInterval { lo, hi: h });
            }
        }
        Ok(Interval { lo, hi })
    }

    /// `[lo, END]`.
    pub fn from(lo: u32) -> Self {
        Interval { lo, hi: Bound::End }
    }

    pub fn lo(&self) -> u32 {
        self.lo
    }

    pub fn hi(&self) -> Bound {
        self.hi
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{},{}]", self.lo, self.hi)
    }
}

impl FromStr for Interval {
    type Err = String;

    /// Parses `[lo,hi]` where `hi` is an integer or `END`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || format!("expected an interval like [1,END] or [2,5], found {s:?}");
        let inner = s
            .trim()
            .strip_prefix('[')
            .and_then(|r| r.strip_suffix(']'))
            .ok_or_else(bad)?;
        let (lo, hi) = inner.split_once(',').ok_or_else(bad)?;
        let lo: u32 = lo.trim().parse().map_err(|_| bad())?;
        let hi = match hi.trim() {
            "END" => Bound::End,
            h => Bound::Step(h.parse().map_err(|_| bad())?),
        };
        Interval::new(lo, hi).map_err(|e| e.to_string())
    }
}

impl TryFrom<String> for Interval {
    type Error = String;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<Interval> for String {
    fn from(i: Interval) -> String {
        i.to_string()
    }
}

/// Atomic predicates over the confidence signal or its step differences.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Predicate {
    /// `sig > k`
    SigGt(f64),
    /// `sig >= k`
    SigGe(f64),
    /// `delta >= k`
    DeltaGe(f64),
    /// `|delta| <= k`
    AbsDeltaLe(f64),
}

impl Predicate {
    pub fn constant(&self) -> f64 {
        match *self {
            Predicate::SigGt(k)
            | Predicate::SigGe(k)
            | Predicate::DeltaGe(k)
            | Predicate::AbsDeltaLe(k) => k,
        }
    }

    pub fn uses_delta(&self) -> bool {
        matches!(self, Predicate::DeltaGe(_) | Predicate::AbsDeltaLe(_))
    }
}

impl fmt::Display for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Predicate::SigGt(k) => write!(f, "sig > {k}"),
            Predicate::SigGe(k) => write!(f, "sig >= {k}"),
            Predicate::DeltaGe(k) => write!(f, "delta >= {k}"),
            Predicate::AbsDeltaLe(k) => write!(f, "|delta| <= {k}"),
        }
    }
}

/// STL formula over a single confidence signal.
///
/// `Display` prints the concrete DSL syntax accepted by
/// [`parse_formula`](super::parse_formula), inserting parentheses only where
/// the flat left-associative `and`/`or` chain requires them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Formula {
    Pred(Predicate),
    Not(Box<Formula>),
    And(Box<Formula>, Box<Formula>),
    Or(Box<Formula>, Box<Formula>),
    Always(Interval, Box<Formula>),
    Eventually(Interval, Box<Formula>),
}

impl Formula {
    pub fn pred(p: Predicate) -> Self {
        Formula::Pred(p)
    }

    #[allow(clippy::should_implement_trait)]
    pub fn not(f: Formula) -> Self {
        Formula::Not(Box::new(f))
    }

    pub fn and(a: Formula, b: Formula) -> Self {
        Formula::And(Box::new(a), Box::new(b))
    }

    pub fn or(a: Formula, b: Formula) -> Self {
        Formula::Or(Box::new(a), Box::new(b))
    }

    pub fn always(i: Interval, f: Formula) -> Self {
        Formula::Always(i, Box::new(f))
    }

    pub fn eventually(i: Interval, f: Formula) -> Self {
        Formula::Eventually(i, Box::new(f))
    }

    pub fn uses_delta(&self) -> bool {
        match self {
            Formula::Pred(p) => p.uses_delta(),
            Formula::Not(f) | Formula::Always(_, f) | Formula::Eventually(_, f) => f.uses_delta(),
            Formula::And(a, b) | Formula::Or(a, b) => a.uses_delta() || b.uses_delta(),
        }
    }

    /// Operator nesting depth; a bare predicate has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Formula::Pred(_) => 0,
            Formula::Not(f) | Formula::Always(_, f) | Formula::Eventually(_, f) => 1 + f.depth(),
            Formula::And(a, b) | Formula::Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    fn is_binary(&self) -> bool {
        matches!(self, Formula::And(..) | Formula::Or(..))
    }

    fn fmt_term(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_binary() {
            write!(f, "({self})")
        } else {
            write!(f, "{self}")
        }
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Formula::Pred(p) => write!(f, "{p}"),
            Formula::Not(inner) => {
                f.write_str("not ")?;
                inner.fmt_term(f)
            }
            Formula::And(a, b) | Formula::Or(a, b) => {
                let op = if matches!(self, Formula::And(..)) {
                    "and"
                } else {
                    "or"
                };
                // left operand continues the chain; right operand must be a term
                write!(f, "{a} {op} ")?;
                b.fmt_term(f)
            }
            Formula::Always(i, inner) => write!(f, "G{i}({inner})"),
            Formula::Eventually(i, inner) => write!(f, "F{i}({inner})"),
        }
    }
}
