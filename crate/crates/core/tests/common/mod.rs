//! Test-only oracles and generators. Nothing here calls into the
//! implementation's evaluation paths.
#![allow(dead_code)]

use rand::Rng;
use stlcalib_core::stl::{Bound, Formula, Interval, Predicate};

/// Table of ρ(t) for every time 0..=T, built by direct enumeration of each
/// window. `x` is the raw sample vector; time t refers to `x[t - 1]`.
pub fn brute_table(f: &Formula, x: &[f64]) -> Vec<Option<f64>> {
    let horizon = x.len();
    let at = |t: usize| -> Option<f64> {
        if t >= 1 && t <= horizon {
            Some(x[t - 1])
        } else {
            None
        }
    };
    let delta = |t: usize| -> Option<f64> {
        if t >= 2 {
            Some(at(t)? - at(t - 1)?)
        } else {
            None
        }
    };
    let times = 0..=horizon;
    match f {
        Formula::Pred(p) => times
            .map(|t| match *p {
                Predicate::SigGt(k) | Predicate::SigGe(k) => at(t).map(|v| v - k),
                Predicate::DeltaGe(k) => delta(t).map(|d| d - k),
                Predicate::AbsDeltaLe(k) => delta(t).map(|d| k - d.abs()),
            })
            .collect(),
        Formula::Not(g) => brute_table(g, x).iter().map(|v| v.map(|r| -r)).collect(),
        Formula::And(a, b) | Formula::Or(a, b) => {
            let (ta, tb) = (brute_table(a, x), brute_table(b, x));
            let and = matches!(f, Formula::And(..));
            times
                .map(|t| match (ta[t], tb[t]) {
                    (Some(u), Some(v)) => Some(if and { u.min(v) } else { u.max(v) }),
                    _ => None,
                })
                .collect()
        }
        Formula::Always(i, g) | Formula::Eventually(i, g) => {
            let child = brute_table(g, x);
            let always = matches!(f, Formula::Always(..));
            times
                .map(|t| {
                    let lo = t + i.lo() as usize;
                    let hi = match i.hi() {
                        Bound::End => horizon,
                        Bound::Step(h) => (t + h as usize).min(horizon),
                    };
                    let mut acc: Option<f64> = None;
                    let mut u = lo;
                    while u <= hi {
                        if let Some(v) = child[u] {
                            acc = Some(match acc {
                                None => v,
                                Some(a) if always => a.min(v),
                                Some(a) => a.max(v),
                            });
                        }
                        u += 1;
                    }
                    acc
                })
                .collect()
        }
    }
}

pub fn brute_robustness(f: &Formula, x: &[f64]) -> Option<f64> {
    brute_table(f, x)[0]
}

/// Boolean semantics over the same time model.
pub fn qualitative(f: &Formula, x: &[f64], t: usize) -> Option<bool> {
    let horizon = x.len();
    let at = |t: usize| (t >= 1 && t <= horizon).then(|| x[t - 1]);
    let delta = |t: usize| {
        if t >= 2 {
            Some(at(t)? - at(t - 1)?)
        } else {
            None
        }
    };
    match f {
        Formula::Pred(p) => match *p {
            Predicate::SigGt(k) => at(t).map(|v| v > k),
            Predicate::SigGe(k) => at(t).map(|v| v >= k),
            Predicate::DeltaGe(k) => delta(t).map(|d| d >= k),
            Predicate::AbsDeltaLe(k) => delta(t).map(|d| d.abs() <= k),
        },
        Formula::Not(g) => qualitative(g, x, t).map(|b| !b),
        Formula::And(a, b) => {
            let (u, v) = (qualitative(a, x, t)?, qualitative(b, x, t)?);
            Some(u && v)
        }
        Formula::Or(a, b) => {
            let (u, v) = (qualitative(a, x, t)?, qualitative(b, x, t)?);
            Some(u || v)
        }
        Formula::Always(i, g) | Formula::Eventually(i, g) => {
            let lo = t + i.lo() as usize;
            let hi = match i.hi() {
                Bound::End => horizon,
                Bound::Step(h) => (t + h as usize).min(horizon),
            };
            let vals: Vec<bool> = (lo..=hi).filter_map(|u| qualitative(g, x, u)).collect();
            if vals.is_empty() {
                None
            } else if matches!(f, Formula::Always(..)) {
                Some(vals.iter().all(|&b| b))
            } else {
                Some(vals.iter().any(|&b| b))
            }
        }
    }
}

pub fn random_signal<R: Rng>(rng: &mut R, max_len: usize) -> Vec<f64> {
    let len = rng.random_range(1..=max_len);
    (0..len).map(|_| random_sample(rng)).collect()
}

/// Mix of continuous values, exact endpoints and repeated grid values so
/// ties and boundary cases show up.
pub fn random_sample<R: Rng>(rng: &mut R) -> f64 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        2..=4 => rng.random_range(0..=10) as f64 / 10.0,
        _ => rng.random::<f64>(),
    }
}

pub fn random_interval<R: Rng>(rng: &mut R) -> Interval {
    let lo = rng.random_range(0..=3);
    let hi = if rng.random_bool(0.4) {
        Bound::End
    } else {
        Bound::Step(lo + rng.random_range(0..=3))
    };
    Interval::new(lo, hi).unwrap()
}

pub fn random_predicate<R: Rng>(rng: &mut R) -> Predicate {
    let k = match rng.random_range(0..4) {
        0 => rng.random_range(0..=10) as f64 / 10.0,
        _ => rng.random_range(-1.0..1.0),
    };
    match rng.random_range(0..4) {
        0 => Predicate::SigGt(k),
        1 => Predicate::SigGe(k),
        2 => Predicate::DeltaGe(k),
        _ => Predicate::AbsDeltaLe(k.abs()),
    }
}

/// Random formula of operator depth at most `depth`.
pub fn random_formula<R: Rng>(rng: &mut R, depth: usize) -> Formula {
    if depth == 0 || rng.random_bool(0.2) {
        return Formula::pred(random_predicate(rng));
    }
    let sub = |rng: &mut R| random_formula(rng, depth - 1);
    match rng.random_range(0..6) {
        0 => Formula::not(sub(rng)),
        1 => Formula::and(sub(rng), sub(rng)),
        2 => Formula::or(sub(rng), sub(rng)),
        3 | 4 => Formula::eventually(random_interval(rng), sub(rng)),
        _ => Formula::always(random_interval(rng), sub(rng)),
    }
}

/// Random formula whose root is a temporal operator, so it is usually
/// defined at time 0.
pub fn random_rooted_formula<R: Rng>(rng: &mut R, depth: usize) -> Formula {
    let inner = random_formula(rng, depth.saturating_sub(1));
    let i = random_interval(rng);
    if rng.random_bool(0.5) {
        Formula::eventually(i, inner)
    } else {
        Formula::always(i, inner)
    }
}
