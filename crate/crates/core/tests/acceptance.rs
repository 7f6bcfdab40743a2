//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::collections::BTreeMap;
use std::panic::{self, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use stlcalib_core::calibration::{
    self, apply_temperature, brier, ece, HistogramBinning, Prediction,
};
use stlcalib_core::reshape::{self, cms, eds, gs, mps, Signal};
use stlcalib_core::stl::{self, parse_formula, robustness, robustness_trace, Formula};
use stlcalib_core::trace::{self, parse_dataset, split_dataset, Format, Profile};
use stlcalib_core::tuning::{evaluate_config, evaluate_method, grid_search, GridSpec, Method};
use stlcalib_core::{FormulaKind, ReshapeParams, Split, Strategy, SynthConfig};

use common::{brute_robustness, brute_table, qualitative, random_formula, random_signal};

const TABLE1_TOL: f64 = 1e-9;
const ORACLE_TOL: f64 = 1e-12;
const FIXTURE_TOL: f64 = 1e-12;
const METRIC_TOL: f64 = 1e-12;

const RANDOM_CASES: usize = 10_000;
const ROUND_TRIP_CASES: usize = 1_000;

const SYNTH_COUNT: usize = 2_000;
const SYNTH_ACCURACY: f64 = 0.3;
const SYNTH_SEED: u64 = 42;
const VAL_FRACTION: f64 = 0.2;
const SPLIT_SEED: u64 = 42;
const BINS: usize = 10;

type Outcome = Result<String, String>;

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Duration,
    run: fn() -> Outcome,
}

fn main() -> ExitCode {
    let criteria = [
        Criterion {
            id: 1,
            name: "table 1 one-step ECE fixture",
            budget: Duration::from_secs(1),
            run: table1_fixture,
        },
        Criterion {
            id: 2,
            name: "robustness matches brute-force evaluator",
            budget: Duration::from_secs(30),
            run: robustness_oracle,
        },
        Criterion {
            id: 3,
            name: "reshaping invariants",
            budget: Duration::from_secs(30),
            run: reshape_invariants,
        },
        Criterion {
            id: 4,
            name: "hand-derived transform fixtures",
            budget: Duration::from_secs(5),
            run: transform_fixtures,
        },
        Criterion {
            id: 5,
            name: "calibration metric properties",
            budget: Duration::from_secs(5),
            run: calibration_properties,
        },
        Criterion {
            id: 6,
            name: "tuned STL beats 1-step and CoT average on synthetic data",
            budget: Duration::from_secs(120),
            run: directional_synthetic,
        },
        Criterion {
            id: 7,
            name: "grid search exhaustive equivalence and determinism",
            budget: Duration::from_secs(60),
            run: grid_equivalence,
        },
        Criterion {
            id: 8,
            name: "formula DSL round trip and error positions",
            budget: Duration::from_secs(10),
            run: dsl_round_trip,
        },
    ];

    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(c.run))
            .unwrap_or_else(|p| Err(format!("panicked: {}", panic_message(&p))));
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(_) if elapsed > c.budget => {
                Err(format!("took {:.2?}, budget {:.2?}", elapsed, c.budget))
            }
            o => o,
        };
        let (tag, detail) = match &outcome {
            Ok(d) => ("PASS", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!(
            "{tag} criterion {}: {} [{:.2?}] {detail}",
            c.id, c.name, elapsed
        );
    }
    let _ = panic::take_hook();
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}

fn panic_message(p: &Box<dyn std::any::Any + Send>) -> String {
    p.downcast_ref::<&str>()
        .map(|s| s.to_string())
        .or_else(|| p.downcast_ref::<String>().cloned())
        .unwrap_or_else(|| "unknown".into())
}

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    ensure((got - want).abs() <= tol, || {
        format!("{what}: got {got}, want {want} (tol {tol:e})")
    })
}

fn sig(v: &[f64]) -> Signal {
    Signal::new(v.to_vec()).expect("valid signal")
}

// --- 1 ---------------------------------------------------------------------

const TABLE1_JSONL: &str = r#"{"id":"q1-logit","steps":[0.99],"correct":false,"source":"logit","split":"test"}
{"id":"q2-logit","steps":[0.98],"correct":true,"source":"logit","split":"test"}
{"id":"q1-self","steps":[0.98],"correct":false,"source":"self_eval","split":"test"}
{"id":"q2-self","steps":[0.95],"correct":true,"source":"self_eval","split":"test"}
{"id":"q1-internal","steps":[0.99],"correct":false,"source":"internal","split":"test"}
{"id":"q2-internal","steps":[0.97],"correct":true,"source":"internal","split":"test"}
"#;

fn table1_fixture() -> Outcome {
    let data = parse_dataset(TABLE1_JSONL.as_bytes(), Format::Jsonl).map_err(|e| e.to_string())?;
    let expected = [
        (trace::Source::Logit, 0.485),
        (trace::Source::SelfEval, 0.465),
        (trace::Source::Internal, 0.480),
    ];
    let mut checked = 0;
    for (source, want) in expected {
        let traces: Vec<_> = data
            .traces()
            .iter()
            .filter(|t| t.source == source)
            .cloned()
            .collect();
        let subset = trace::Dataset::new(traces, BTreeMap::new()).map_err(|e| e.to_string())?;
        for bins in [5, 10, 15, 20] {
            let r = evaluate_method(
                &subset,
                Split::Test,
                &Method::OneStep,
                &ReshapeParams::default(),
                bins,
            )
            .map_err(|e| e.to_string())?;
            let got = r.ece.ok_or("no ECE")?;
            close(got, want, TABLE1_TOL, &format!("{source} M={bins}"))?;
            checked += 1;
        }
    }
    Ok(format!("{checked} (source, M) pairs within {TABLE1_TOL:e}"))
}

// --- 2 ---------------------------------------------------------------------

fn robustness_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let (mut defined, mut positive, mut negative) = (0usize, 0usize, 0usize);
    for case in 0..RANDOM_CASES {
        let x = random_signal(&mut rng, 6);
        let f = if rng.random_bool(0.7) {
            common::random_rooted_formula(&mut rng, 3)
        } else {
            random_formula(&mut rng, 3)
        };
        let s = sig(&x);
        let got_table = robustness_trace(&f, &s);
        let want_table = brute_table(&f, &x);
        for (t, (g, w)) in got_table.iter().zip(&want_table).enumerate() {
            let ok = match (g, w) {
                (None, None) => true,
                (Some(a), Some(b)) => a == b || (a - b).abs() <= ORACLE_TOL,
                _ => false,
            };
            ensure(ok, || {
                format!("case {case}: {f} on {x:?} at t={t}: got {g:?}, want {w:?}")
            })?;
        }
        let want = brute_robustness(&f, &x);
        match (robustness(&f, &s), want) {
            (Ok(r), Some(w)) => {
                ensure(r.value == w || (r.value - w).abs() <= ORACLE_TOL, || {
                    format!("case {case}: {f} on {x:?}: root {} vs {w}", r.value)
                })?;
                defined += 1;
                let sat = qualitative(&f, &x, 0);
                if r.value > 0.0 {
                    positive += 1;
                    ensure(sat == Some(true), || {
                        format!("case {case}: {f} on {x:?}: rho {} > 0 but {sat:?}", r.value)
                    })?;
                } else if r.value < 0.0 {
                    negative += 1;
                    ensure(sat == Some(false), || {
                        format!("case {case}: {f} on {x:?}: rho {} < 0 but {sat:?}", r.value)
                    })?;
                }
            }
            (Err(_), None) => {}
            (got, want) => {
                return Err(format!(
                    "case {case}: {f} on {x:?}: definedness differs, got {got:?}, want {want:?}"
                ))
            }
        }
    }
    ensure(defined * 2 > RANDOM_CASES, || {
        format!("only {defined} of {RANDOM_CASES} cases were defined at the root")
    })?;
    Ok(format!(
        "{RANDOM_CASES} cases, {defined} defined ({positive} positive, {negative} negative, all sound)"
    ))
}

// --- 3 ---------------------------------------------------------------------

fn reshape_invariants() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    for strategy in [Strategy::Cms, Strategy::Eds, Strategy::Mps, Strategy::Gs] {
        for case in 0..RANDOM_CASES {
            let x = random_signal(&mut rng, 12);
            let tau: f64 = rng.random_range(0.0..=1.0);
            let p = ReshapeParams {
                strategy,
                delta: rng.random_range(0.0..=0.5),
                alpha: rng.random_range(0.0..=1.0),
                tau,
                epsilon: rng.random_range(0.0..=1.0 - tau),
                recursive: false,
            };
            let out = reshape::apply(&sig(&x), &p).map_err(|e| e.to_string())?;
            let y = out.samples();
            let ctx = || format!("{strategy} case {case}: {x:?} -> {y:?} ({p:?})");
            ensure(y.len() == x.len(), || format!("length: {}", ctx()))?;
            ensure(y.iter().all(|v| (0.0..=1.0).contains(v)), || {
                format!("range: {}", ctx())
            })?;
            ensure(y[0] == x[0], || format!("first sample: {}", ctx()))?;
            for t in 1..x.len() {
                let (prev, cur, got) = (x[t - 1], x[t], y[t]);
                match strategy {
                    Strategy::Cms => {
                        ensure(got <= cur, || format!("dominance at {t}: {}", ctx()))?;
                        let prefix_min = x[..t].iter().copied().fold(f64::INFINITY, f64::min);
                        ensure(got <= prefix_min + p.delta, || {
                            format!("margin at {t}: {}", ctx())
                        })?;
                    }
                    Strategy::Mps if got != cur => {
                        ensure(prev < p.tau && cur > prev, || {
                            format!("locality at {t}: {}", ctx())
                        })?;
                    }
                    Strategy::Gs if got != cur => {
                        ensure(prev < p.tau && cur > p.tau + p.epsilon, || {
                            format!("locality at {t}: {}", ctx())
                        })?;
                    }
                    _ => {}
                }
            }
            let cut = rng.random_range(1..=x.len());
            let prefix = reshape::apply(&sig(&x[..cut]), &p).map_err(|e| e.to_string())?;
            ensure(prefix.samples() == &y[..cut], || {
                format!("causality at cut {cut}: {}", ctx())
            })?;
        }
    }
    Ok(format!(
        "{RANDOM_CASES} signals for each of cms, eds, mps, gs"
    ))
}

// --- 4 ---------------------------------------------------------------------

fn transform_fixtures() -> Outcome {
    // Independent one-line oracles, written directly from the formulas.
    let cms_o = |x: &[f64], d: f64| -> Vec<f64> {
        (0..x.len())
            .map(|t| {
                if t == 0 {
                    x[0]
                } else {
                    x[t].min(x[..t].iter().cloned().fold(f64::MAX, f64::min) + d)
                }
            })
            .collect()
    };
    let eds_o = |x: &[f64], a: f64| -> Vec<f64> {
        (0..x.len())
            .map(|t| {
                if t == 0 {
                    x[0]
                } else {
                    a * x[t] + (1.0 - a) * x[..t].iter().sum::<f64>() / (t + 1) as f64
                }
            })
            .collect()
    };
    let mps_o = |x: &[f64], tau: f64| -> Vec<f64> {
        (0..x.len())
            .map(|t| {
                if t > 0 && x[t - 1] < tau && x[t] > x[t - 1] {
                    (x[t - 1] + x[t]) / 2.0
                } else {
                    x[t]
                }
            })
            .collect()
    };
    let gs_o = |x: &[f64], tau: f64, e: f64| -> Vec<f64> {
        (0..x.len())
            .map(|t| {
                if t > 0 && x[t - 1] < tau && x[t] > tau + e {
                    tau + e
                } else {
                    x[t]
                }
            })
            .collect()
    };

    let check = |name: &str, got: &[f64], oracle: &[f64], want: &[f64]| -> Result<(), String> {
        ensure(
            got.len() == want.len() && oracle.len() == want.len(),
            || format!("{name}: length mismatch"),
        )?;
        for i in 0..want.len() {
            close(
                oracle[i],
                want[i],
                FIXTURE_TOL,
                &format!("{name} oracle[{i}]"),
            )?;
            close(got[i], want[i], FIXTURE_TOL, &format!("{name} output[{i}]"))?;
        }
        Ok(())
    };

    let x = [0.9, 0.3, 0.8];
    check(
        "cms",
        cms(&sig(&x), 0.1).unwrap().samples(),
        &cms_o(&x, 0.1),
        &[0.9, 0.3, 0.4],
    )?;
    let x = [0.5, 0.7];
    check(
        "eds a",
        eds(&sig(&x), 0.5).unwrap().samples(),
        &eds_o(&x, 0.5),
        &[0.5, 0.475],
    )?;
    let x = [0.5, 0.7, 0.9];
    check(
        "eds b",
        eds(&sig(&x), 0.0).unwrap().samples(),
        &eds_o(&x, 0.0),
        &[0.5, 0.25, 0.4],
    )?;
    let x = [0.4, 0.8];
    check(
        "mps",
        mps(&sig(&x), 0.5).unwrap().samples(),
        &mps_o(&x, 0.5),
        &[0.4, 0.6],
    )?;
    let x = [0.4, 0.9];
    check(
        "gs",
        gs(&sig(&x), 0.5, 0.05).unwrap().samples(),
        &gs_o(&x, 0.5, 0.05),
        &[0.4, 0.55],
    )?;

    let p = ReshapeParams {
        delta: 0.1,
        ..ReshapeParams::new(Strategy::Cms)
    };
    let x = [0.9, 0.3, 0.8];
    check(
        "apply cms",
        reshape::apply(&sig(&x), &p).unwrap().samples(),
        &cms_o(&x, 0.1),
        &[0.9, 0.3, 0.4],
    )?;

    let rho = |f: Formula, x: &[f64]| robustness(&f, &sig(x)).unwrap().value;
    close(
        rho(stl::stl1(0.7).unwrap(), &[0.2, 0.6, 0.9]),
        0.2,
        FIXTURE_TOL,
        "stl1(0.7)",
    )?;
    close(
        rho(stl::stl2(0.1).unwrap(), &[0.5, 0.45, 0.6]),
        0.05,
        FIXTURE_TOL,
        "stl2(0.1)",
    )?;
    close(
        rho(stl::stl3(0.2).unwrap(), &[0.5, 0.9]),
        -0.2,
        FIXTURE_TOL,
        "stl3(0.2)",
    )?;
    let f = stl::stl2(0.5).unwrap();
    close(
        rho(f.clone(), &[0.0, 1.0]),
        1.5,
        FIXTURE_TOL,
        "stl2(0.5) rho",
    )?;
    close(
        stl::score(&f, &sig(&[0.0, 1.0])).unwrap(),
        1.0,
        0.0,
        "stl2(0.5) score",
    )?;

    Ok("cms, eds (2), mps, gs, apply and 4 robustness fixtures".into())
}

// --- 5 ---------------------------------------------------------------------

fn calibration_properties() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
    let random_preds = |rng: &mut ChaCha8Rng, n: usize| -> Vec<Prediction> {
        (0..n)
            .map(|i| {
                let c = common::random_sample(rng);
                Prediction::new(format!("p{i}"), c, rng.random_bool(c)).unwrap()
            })
            .collect()
    };
    for case in 0..1_000 {
        let n = rng.random_range(1..=60);
        let preds = random_preds(&mut rng, n);
        let acc = preds.iter().filter(|p| p.correct).count() as f64 / n as f64;
        let conf = preds.iter().map(|p| p.confidence).sum::<f64>() / n as f64;
        let (e1, _) = ece(&preds, 1).map_err(|e| e.to_string())?;
        close(
            e1,
            (acc - conf).abs(),
            METRIC_TOL,
            &format!("case {case} ECE(M=1)"),
        )?;

        let k = rng.random_range(1..=n);
        let (a, b) = preds.split_at(k);
        if !b.is_empty() {
            let whole = brier(&preds).unwrap();
            let parts = (a.len() as f64 * brier(a).unwrap() + b.len() as f64 * brier(b).unwrap())
                / n as f64;
            close(
                whole,
                parts,
                METRIC_TOL,
                &format!("case {case} Brier decomposition"),
            )?;
        }

        let bins = rng.random_range(1..=20);
        let map = HistogramBinning::fit(&preds, bins).map_err(|e| e.to_string())?;
        let refit: Vec<Prediction> = preds
            .iter()
            .map(|p| Prediction {
                confidence: map.apply(p.confidence),
                ..p.clone()
            })
            .collect();
        let refit_ece = match ece(&refit, bins) {
            Ok((v, _)) => v,
            Err(e) => return Err(e.to_string()),
        };
        close(
            refit_ece,
            0.0,
            METRIC_TOL,
            &format!("case {case} histogram refit (M={bins})"),
        )?;
    }

    for i in 0..=10_000 {
        let c = i as f64 / 10_000.0;
        let got = apply_temperature(c, 1.0);
        close(
            got,
            calibration::squash(c),
            METRIC_TOL,
            &format!("T=1 at c={c}"),
        )?;
    }
    Ok("1000 random prediction sets; T=1 identity on 10001 points".into())
}

// --- 6 ---------------------------------------------------------------------

fn synthetic_dataset() -> Result<trace::Dataset, String> {
    let cfg = SynthConfig {
        count: SYNTH_COUNT,
        min_steps: 3,
        max_steps: 8,
        accuracy: SYNTH_ACCURACY,
        correct_profile: Profile::Rising,
        incorrect_profile: Profile::Spiky,
        noise_sd: 0.05,
        seed: SYNTH_SEED,
        ..SynthConfig::default()
    };
    let data = trace::synthesize(&cfg).map_err(|e| e.to_string())?;
    split_dataset(&data, VAL_FRACTION, SPLIT_SEED).map_err(|e| e.to_string())
}

fn directional_synthetic() -> Outcome {
    let data = synthetic_dataset()?;
    let baseline = |m: Method| -> Result<f64, String> {
        evaluate_method(&data, Split::Test, &m, &ReshapeParams::default(), BINS)
            .map_err(|e| e.to_string())?
            .ece
            .ok_or_else(|| "baseline has no ECE".to_string())
    };
    let one_step = baseline(Method::OneStep)?;
    let cot = baseline(Method::CotAverage)?;

    let mut best: Option<(f64, FormulaKind, Strategy, f64)> = None;
    for kind in FormulaKind::ALL {
        for strategy in [Strategy::Cms, Strategy::Eds] {
            let mut spec = GridSpec::new(kind, strategy);
            spec.bins = BINS;
            let tuned = grid_search(&data, &spec).map_err(|e| e.to_string())?;
            let formula = tuned.best_params.formula(kind).map_err(|e| e.to_string())?;
            let reshape = tuned.best_params.reshape_params(strategy);
            let test = evaluate_config(&data, Split::Test, &reshape, kind.as_str(), &formula, BINS)
                .map_err(|e| e.to_string())?
                .ece
                .ok_or("tuned config has no test ECE")?;
            if best.is_none_or(|(v, ..)| tuned.best_ece < v) {
                best = Some((tuned.best_ece, kind, strategy, test));
            }
        }
    }
    let (val, kind, strategy, test) = best.ok_or("no configuration")?;
    let detail = format!(
        "best {kind}/{strategy} (val ECE {val:.4}): test ECE {test:.4} vs 1-step {one_step:.4}, CoT average {cot:.4}"
    );
    ensure(test < one_step && test < cot, || detail.clone())?;
    Ok(detail)
}

// --- 7 ---------------------------------------------------------------------

fn grid_equivalence() -> Outcome {
    let data = synthetic_dataset()?;
    let mut spec = GridSpec::new(FormulaKind::Stl1, Strategy::Eds);
    spec.bins = BINS;
    spec.tau_grid = vec![0.5, 0.6, 0.7, 0.8, 0.9];
    spec.alpha_grid = vec![0.3, 0.5, 0.7, 0.9];
    let points = spec.points();
    ensure(points.len() == 20, || {
        format!("expected 20 points, got {}", points.len())
    })?;

    let first = grid_search(&data, &spec).map_err(|e| e.to_string())?;
    let mut standalone_min = f64::INFINITY;
    for p in &points {
        let formula = p.formula(spec.formula).map_err(|e| e.to_string())?;
        let r = evaluate_config(
            &data,
            Split::Validation,
            &p.reshape_params(spec.strategy),
            spec.formula.as_str(),
            &formula,
            spec.bins,
        )
        .map_err(|e| e.to_string())?;
        if let Some(v) = r.ece {
            standalone_min = standalone_min.min(v);
        }
    }
    ensure(first.best_ece == standalone_min, || {
        format!(
            "best_ece {} != standalone minimum {standalone_min}",
            first.best_ece
        )
    })?;

    let second = grid_search(&data, &spec).map_err(|e| e.to_string())?;
    let a = serde_json::to_string(&first).map_err(|e| e.to_string())?;
    let b = serde_json::to_string(&second).map_err(|e| e.to_string())?;
    ensure(a == b, || "two runs serialized differently".into())?;
    ensure(first.evaluations_csv() == second.evaluations_csv(), || {
        "two runs produced different evaluation CSV".into()
    })?;
    Ok(format!(
        "20 points, best_ece {:.6} equals standalone minimum, reruns byte-identical",
        first.best_ece
    ))
}

// --- 8 ---------------------------------------------------------------------

fn dsl_round_trip() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0008);
    for case in 0..ROUND_TRIP_CASES {
        let depth = rng.random_range(0..=4);
        let f = random_formula(&mut rng, depth);
        let text = f.to_string();
        let back = parse_formula(&text).map_err(|e| format!("case {case}: {text:?}: {e}"))?;
        ensure(back == f, || {
            format!("case {case}: {text:?} parsed to {back}")
        })?;
    }

    let malformed: &[(&str, usize)] = &[
        ("", 1),
        ("sig >", 6),
        ("sig > 0.5 and", 14),
        ("G[2,END](delta >= -0.1", 23),
        ("F[3,1](sig > 0.5)", 3),
        ("sig > tau", 7),
        ("sig < 0.5", 5),
        ("F[1,END](sig > 0.5))", 20),
        ("G[1,END] sig > 0.5", 10),
        ("sig > 0.5 # 1", 11),
        ("|delta| >= 0.2", 9),
    ];
    for &(text, column) in malformed {
        match panic::catch_unwind(|| parse_formula(text)) {
            Err(_) => return Err(format!("{text:?} panicked")),
            Ok(Ok(f)) => return Err(format!("{text:?} parsed as {f}")),
            Ok(Err(e)) => ensure(e.column == column, || {
                format!(
                    "{text:?}: reported column {}, want {column} ({e})",
                    e.column
                )
            })?,
        }
    }

    let alphabet: Vec<char> = "GF[](),.-0123456789 sigdeltaENDnotandor|<>=x#"
        .chars()
        .collect();
    let mut errors = 0;
    for case in 0..ROUND_TRIP_CASES {
        let mut chars: Vec<char> = random_formula(&mut rng, 3).to_string().chars().collect();
        for _ in 0..rng.random_range(1..=3) {
            let at = rng.random_range(0..=chars.len());
            match rng.random_range(0..3) {
                0 if at < chars.len() => {
                    chars.remove(at);
                }
                1 if at < chars.len() => chars[at] = alphabet[rng.random_range(0..alphabet.len())],
                _ => chars.insert(at, alphabet[rng.random_range(0..alphabet.len())]),
            }
        }
        let text: String = chars.iter().collect();
        match panic::catch_unwind(|| parse_formula(&text)) {
            Err(_) => return Err(format!("mutant {case} {text:?} panicked")),
            Ok(Ok(_)) => {}
            Ok(Err(e)) => {
                errors += 1;
                let max = text.chars().count() + 1;
                ensure((1..=max).contains(&e.column), || {
                    format!(
                        "mutant {case} {text:?}: column {} outside 1..={max}",
                        e.column
                    )
                })?;
                ensure(
                    e.to_string()
                        .starts_with(&format!("at column {}:", e.column)),
                    || format!("mutant {case}: message lacks position: {e}"),
                )?;
            }
        }
    }
    Ok(format!(
        "{ROUND_TRIP_CASES} ASTs round-trip; {} fixed and {ROUND_TRIP_CASES} mutated inputs ({errors} rejected) without panics",
        malformed.len()
    ))
}
