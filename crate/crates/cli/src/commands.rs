use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use stlcalib_core::calibration::{render_columns, render_table, Exclusion};
use stlcalib_core::reshape;
use stlcalib_core::stl::{self, parse_formula, Formula};
use stlcalib_core::trace::{self, parse_dataset, split_dataset};
use stlcalib_core::tuning::{self, evaluate_config, evaluate_method};
use stlcalib_core::{
    CalibrationReport, ConfidenceTrace, Dataset, Format, FormulaKind, GridSpec, Method,
    ReshapeParams, Signal, Split, Strategy, SynthConfig, TuneResult, VERSION,
};

use crate::emit::{default_emit, to_json, write_dataset, Artifacts, Emit};
use crate::settings::Settings;

pub const DEFAULT_BINS: usize = 10;
pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_METHODS: [&str; 7] = [
    "one-step",
    "cot-average",
    "temperature",
    "histogram",
    "stl1",
    "stl2",
    "stl3",
];

/// Envelope shared by every JSON artifact.
#[derive(Serialize)]
struct Artifact<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    config: &'a Settings,
    #[serde(flatten)]
    body: T,
}

fn artifact<T: Serialize>(config: &Settings, body: T) -> Result<String> {
    to_json(&Artifact {
        tool: "stlcalib",
        version: VERSION,
        config,
        body,
    })
}

fn provenance(config: &Settings) -> Result<Value> {
    Ok(serde_json::json!({
        "tool": "stlcalib",
        "version": VERSION,
        "config": serde_json::to_value(config).map_err(crate::Internal::from)?,
    }))
}

// ---------------------------------------------------------------------------
// Resolution helpers
// ---------------------------------------------------------------------------

fn format_of(path: Option<&Path>) -> Option<Format> {
    match path?.extension()?.to_str()? {
        "csv" => Some(Format::Csv),
        "jsonl" | "ndjson" => Some(Format::Jsonl),
        _ => None,
    }
}

fn input_format(s: &Settings) -> Format {
    s.format
        .or_else(|| format_of(s.input.as_deref()))
        .unwrap_or(Format::Jsonl)
}

fn output_format(s: &Settings) -> Format {
    s.format
        .or_else(|| format_of(s.output.as_deref()))
        .unwrap_or_else(|| input_format(s))
}

fn load_dataset(s: &Settings) -> Result<Dataset> {
    let format = input_format(s);
    match &s.input {
        Some(path) => {
            let file =
                fs::File::open(path).with_context(|| format!("cannot open {}", path.display()))?;
            parse_dataset(io::BufReader::new(file), format)
                .with_context(|| format!("invalid dataset {}", path.display()))
        }
        None => {
            let mut buf = Vec::new();
            io::stdin().read_to_end(&mut buf)?;
            parse_dataset(buf.as_slice(), format).context("invalid dataset on standard input")
        }
    }
}

/// Apply `--val-fraction` when given; otherwise keep the dataset's own tags.
fn maybe_split(data: Dataset, s: &mut Settings) -> Result<Dataset> {
    match s.val_fraction {
        Some(f) => {
            let seed = *s.seed.get_or_insert(DEFAULT_SEED);
            Ok(split_dataset(&data, f, seed)?)
        }
        None => Ok(data),
    }
}

fn reshape_params(s: &mut Settings) -> Result<ReshapeParams> {
    let d = ReshapeParams::default();
    let p = ReshapeParams {
        strategy: *s.strategy.get_or_insert(d.strategy),
        delta: *s.delta.get_or_insert(d.delta),
        alpha: *s.alpha.get_or_insert(d.alpha),
        tau: *s.tau.get_or_insert(d.tau),
        epsilon: *s.epsilon.get_or_insert(d.epsilon),
        recursive: *s.recursive.get_or_insert(d.recursive),
    };
    p.validate()?;
    Ok(p)
}

fn threshold(kind: FormulaKind, p: &ReshapeParams) -> f64 {
    match kind {
        FormulaKind::Stl1 => p.tau,
        FormulaKind::Stl2 => p.epsilon,
        FormulaKind::Stl3 => p.delta,
    }
}

fn parse_text(text: &str) -> Result<Formula> {
    parse_formula(text).map_err(|e| anyhow!("invalid formula {text:?}: {e}"))
}

fn excluded_to_stderr(method: &str, excluded: &[Exclusion]) {
    for e in excluded {
        eprintln!("excluded [{method}] {}: {}", e.trace_id, e.reason);
    }
}

fn emit_list(s: &mut Settings) -> Vec<Emit> {
    let emit = s
        .emit
        .get_or_insert_with(|| default_emit(s.output.as_deref()))
        .clone();
    let mut seen = BTreeSet::new();
    emit.into_iter().filter(|e| seen.insert(*e)).collect()
}

fn fmt6(v: Option<f64>) -> String {
    v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"))
}

fn csv_string(header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(crate::Internal::from)?;
    for r in rows {
        w.write_record(r).map_err(crate::Internal::from)?;
    }
    let bytes = w.into_inner().map_err(|e| crate::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| crate::Internal(e.to_string()).into())
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

pub fn summary(d: &Dataset) -> String {
    let n = d.len();
    let noun = if n == 1 { "trace" } else { "traces" };
    if n == 0 {
        return format!("0 {noun}");
    }
    let lo = d
        .traces()
        .iter()
        .map(ConfidenceTrace::len)
        .min()
        .unwrap_or(0);
    let hi = d
        .traces()
        .iter()
        .map(ConfidenceTrace::len)
        .max()
        .unwrap_or(0);
    let sources: BTreeSet<_> = d.traces().iter().map(|t| t.source).collect();
    let sources: Vec<&str> = sources.into_iter().map(|s| s.as_str()).collect();
    format!("{n} {noun}, T∈[{lo},{hi}], sources: {}", sources.join(", "))
}

pub fn validate(s: Settings) -> Result<()> {
    let data = load_dataset(&s)?;
    println!("{}", summary(&data));
    Ok(())
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

pub fn synth(mut s: Settings) -> Result<()> {
    let d = SynthConfig::default();
    let cfg = SynthConfig {
        count: *s.count.get_or_insert(d.count),
        min_steps: *s.min_steps.get_or_insert(d.min_steps),
        max_steps: *s.max_steps.get_or_insert(d.max_steps),
        accuracy: *s.accuracy.get_or_insert(d.accuracy),
        correct_profile: *s.correct_profile.get_or_insert(d.correct_profile),
        incorrect_profile: *s.incorrect_profile.get_or_insert(d.incorrect_profile),
        noise_sd: *s.noise_sd.get_or_insert(d.noise_sd),
        seed: *s.seed.get_or_insert(DEFAULT_SEED),
        source: *s.source.get_or_insert(d.source),
    };
    let data = trace::synthesize(&cfg)?;
    let mut data = maybe_split(data, &mut s)?;
    data.metadata.insert("stlcalib".into(), provenance(&s)?);
    write_dataset(&data, s.output.as_deref(), output_format(&s))
}

// ---------------------------------------------------------------------------
// reshape
// ---------------------------------------------------------------------------

fn derived_metadata(input: &Dataset, config: &Settings) -> Result<BTreeMap<String, Value>> {
    let mut m = BTreeMap::new();
    m.insert("stlcalib".to_string(), provenance(config)?);
    if !input.metadata.is_empty() {
        m.insert(
            "input".to_string(),
            Value::Object(input.metadata.clone().into_iter().collect()),
        );
    }
    Ok(m)
}

pub fn reshape(mut s: Settings) -> Result<()> {
    let data = load_dataset(&s)?;
    let params = reshape_params(&mut s)?;
    let mut out = data.map_signals(|t| reshape::apply(&t.steps, &params))?;
    out.metadata = derived_metadata(&data, &s)?;
    write_dataset(&out, s.output.as_deref(), output_format(&s))
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

fn score_formula(s: &mut Settings, params: &ReshapeParams) -> Result<Formula> {
    match (&s.formula_text, s.formula) {
        (Some(_), Some(_)) => bail!("--formula and --formula-text are mutually exclusive"),
        (Some(_), None) if s.window.is_some() => {
            bail!("--window applies to preset formulas only; write the window into --formula-text")
        }
        (Some(text), None) => parse_text(text),
        (None, _) => {
            let kind = *s.formula.get_or_insert(FormulaKind::Stl1);
            Ok(kind.build(threshold(kind, params), s.window)?)
        }
    }
}

pub fn score(mut s: Settings) -> Result<()> {
    let data = load_dataset(&s)?;
    let params = reshape_params(&mut s)?;
    let formula = score_formula(&mut s, &params)?;

    let results: Vec<Result<(ConfidenceTrace, f64), Exclusion>> = data
        .traces()
        .par_iter()
        .map(|t| {
            let excluded = |reason: String| Exclusion {
                trace_id: t.id.clone(),
                reason,
            };
            let shaped = reshape::apply(&t.steps, &params).map_err(|e| excluded(e.to_string()))?;
            let rho = stl::robustness(&formula, &shaped).map_err(|e| excluded(e.to_string()))?;
            let c = stl::clamp_score(rho.value);
            let scored = ConfidenceTrace {
                steps: Signal::new(vec![c]).map_err(|e| excluded(e.to_string()))?,
                ..t.clone()
            };
            Ok((scored, rho.value))
        })
        .collect();

    let mut traces = Vec::with_capacity(results.len());
    let mut rho = serde_json::Map::new();
    let mut excluded = Vec::new();
    for r in results {
        match r {
            Ok((t, v)) => {
                rho.insert(t.id.clone(), Value::from(v));
                traces.push(t);
            }
            Err(e) => excluded.push(e),
        }
    }
    excluded_to_stderr(&formula.to_string(), &excluded);

    let mut metadata = derived_metadata(&data, &s)?;
    metadata.insert("formula".into(), Value::from(formula.to_string()));
    metadata.insert("robustness".into(), Value::Object(rho));
    metadata.insert(
        "excluded".into(),
        serde_json::to_value(&excluded).map_err(crate::Internal::from)?,
    );
    let out = Dataset::new(traces, metadata)?;
    write_dataset(&out, s.output.as_deref(), output_format(&s))
}

// ---------------------------------------------------------------------------
// calibrate
// ---------------------------------------------------------------------------

fn resolve_methods(s: &mut Settings, params: &ReshapeParams) -> Result<Vec<Method>> {
    let names = s.method.clone().unwrap_or_else(|| {
        let mut v: Vec<String> = DEFAULT_METHODS.iter().map(|m| m.to_string()).collect();
        if s.formula_text.is_some() {
            v.push("custom".into());
        }
        v
    });
    if names.is_empty() {
        bail!("no methods given");
    }
    let mut seen = BTreeSet::new();
    let mut methods = Vec::new();
    for name in &names {
        if !seen.insert(name.as_str()) {
            bail!("method {name:?} listed twice");
        }
        let m = match name.as_str() {
            "one-step" => Method::OneStep,
            "cot-average" => Method::CotAverage,
            "temperature" => Method::Temperature,
            "histogram" => Method::Histogram,
            "custom" => {
                let text = s
                    .formula_text
                    .as_deref()
                    .ok_or_else(|| anyhow!("method custom needs --formula-text"))?;
                Method::Stl {
                    name: "custom".into(),
                    formula: parse_text(text)?,
                }
            }
            other => match other.parse::<FormulaKind>() {
                Ok(kind) => Method::Stl {
                    name: kind.as_str().into(),
                    formula: kind.build(threshold(kind, params), s.window)?,
                },
                Err(_) => bail!(
                    "unknown method {other:?} (expected one of {}, custom)",
                    DEFAULT_METHODS.join(", ")
                ),
            },
        };
        methods.push(m);
    }
    s.method = Some(names);
    Ok(methods)
}

pub fn calibrate(mut s: Settings) -> Result<()> {
    let data = load_dataset(&s)?;
    let data = maybe_split(data, &mut s)?;
    let params = reshape_params(&mut s)?;
    let bins = *s.bins.get_or_insert(DEFAULT_BINS);
    let explicit = s.method.is_some();
    let mut methods = resolve_methods(&mut s, &params)?;
    let has_val = data.in_split(Split::Validation).next().is_some();
    if !explicit && !has_val {
        eprintln!("note: no validation traces; skipping temperature and histogram (use --val-fraction to split)");
        methods.retain(|m| !matches!(m, Method::Temperature | Method::Histogram));
        s.method = Some(methods.iter().map(|m| m.name().to_string()).collect());
    }
    let emit = emit_list(&mut s);

    let mut reports = Vec::with_capacity(methods.len());
    for m in &methods {
        let r = evaluate_method(&data, Split::Test, m, &params, bins)
            .with_context(|| format!("method {}", m.name()))?;
        excluded_to_stderr(m.name(), &r.excluded);
        reports.push(r);
    }

    #[derive(Serialize)]
    struct Body<'a> {
        reports: &'a [CalibrationReport],
    }
    let mut artifacts = Vec::new();
    for e in emit {
        let body = match e {
            Emit::Json => artifact(&s, Body { reports: &reports })?,
            Emit::Text => calibrate_text(&reports),
            Emit::Csv => calibrate_csv(&reports)?,
        };
        artifacts.push((e, body));
    }
    Artifacts(artifacts).write(s.output.as_deref())
}

fn calibrate_text(reports: &[CalibrationReport]) -> String {
    let mut out = render_table(reports);
    for r in reports {
        if let Some(t) = r.fitted_temperature {
            let _ = writeln!(out, "\n{}: fitted T = {t:.6}", r.method);
        }
    }
    out
}

fn calibrate_csv(reports: &[CalibrationReport]) -> Result<String> {
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    let rows: Vec<Vec<String>> = reports
        .iter()
        .flat_map(|r| {
            r.bin_table.bins.iter().map(move |b| {
                vec![
                    r.method.clone(),
                    r.strategy.clone(),
                    b.lower.to_string(),
                    b.upper.to_string(),
                    b.count.to_string(),
                    opt(b.mean_confidence),
                    opt(b.accuracy),
                ]
            })
        })
        .collect();
    csv_string(
        &[
            "method", "strategy", "bin_lo", "bin_hi", "count", "conf", "acc",
        ],
        &rows,
    )
}

// ---------------------------------------------------------------------------
// tune
// ---------------------------------------------------------------------------

pub fn tune(mut s: Settings) -> Result<()> {
    let data = load_dataset(&s)?;
    let data = maybe_split(data, &mut s)?;
    let kind = *s.formula.get_or_insert(FormulaKind::Stl1);
    let strategy = *s.strategy.get_or_insert(Strategy::Identity);
    let mut spec = GridSpec::new(kind, strategy);
    spec.bins = *s.bins.get_or_insert(DEFAULT_BINS);
    spec.tau_grid = s.tau_grid.get_or_insert(spec.tau_grid.clone()).clone();
    spec.epsilon_grid = s
        .epsilon_grid
        .get_or_insert(spec.epsilon_grid.clone())
        .clone();
    spec.delta_grid = s.delta_grid.get_or_insert(spec.delta_grid.clone()).clone();
    spec.alpha_grid = s.alpha_grid.get_or_insert(spec.alpha_grid.clone()).clone();
    spec.window_grid = s.window_grid.clone();
    let emit = emit_list(&mut s);

    let result = tuning::grid_search(&data, &spec)?;
    for e in result.evaluations.iter() {
        if let Some(reason) = &e.skipped {
            eprintln!("skipped {}: {reason}", describe_params(&result, e));
        }
    }
    let test = if data.in_split(Split::Test).next().is_some() {
        let formula = result.best_params.formula(kind)?;
        let r = evaluate_config(
            &data,
            Split::Test,
            &result.best_params.reshape_params(strategy),
            kind.as_str(),
            &formula,
            spec.bins,
        )?;
        excluded_to_stderr(kind.as_str(), &r.excluded);
        Some(r)
    } else {
        None
    };

    #[derive(Serialize)]
    struct Body<'a> {
        result: &'a TuneResult,
        #[serde(skip_serializing_if = "Option::is_none")]
        test: Option<&'a CalibrationReport>,
    }
    let mut artifacts = Vec::new();
    for e in emit {
        let body = match e {
            Emit::Json => artifact(
                &s,
                Body {
                    result: &result,
                    test: test.as_ref(),
                },
            )?,
            Emit::Text => tune_text(&result, test.as_ref()),
            Emit::Csv => result.evaluations_csv(),
        };
        artifacts.push((e, body));
    }
    Artifacts(artifacts).write(s.output.as_deref())
}

fn describe_params(result: &TuneResult, e: &tuning::Evaluation) -> String {
    result
        .param_names()
        .iter()
        .map(|&n| match n {
            "window" => format!(
                "window={}",
                e.params.window.map(|w| w.to_string()).unwrap_or_default()
            ),
            _ => format!(
                "{n}={}",
                e.params.get(n).map(|v| v.to_string()).unwrap_or_default()
            ),
        })
        .collect::<Vec<_>>()
        .join(" ")
}

fn tune_text(result: &TuneResult, test: Option<&CalibrationReport>) -> String {
    let best = result
        .evaluations
        .iter()
        .find(|e| e.params == result.best_params)
        .map(|e| describe_params(result, e))
        .unwrap_or_default();
    let mut out = String::new();
    let _ = writeln!(
        out,
        "formula {}, strategy {}, bins {}",
        result.formula, result.strategy, result.bins
    );
    let _ = writeln!(out, "best {best}: validation ece {:.6}", result.best_ece);
    if let Some(t) = test {
        let _ = writeln!(
            out,
            "test ece {}, brier {} (n {}, excluded {})",
            fmt6(t.ece),
            fmt6(t.brier),
            t.n,
            t.excluded.len()
        );
    }
    out.push('\n');
    let names = result.param_names();
    let mut header: Vec<&str> = names.clone();
    header.extend(["ece", "brier", "n", "excluded", "note"]);
    let rows: Vec<Vec<String>> = result
        .evaluations
        .iter()
        .map(|e| {
            let mut row: Vec<String> = names
                .iter()
                .map(|&n| match n {
                    "window" => e.params.window.map(|w| w.to_string()).unwrap_or_default(),
                    _ => e.params.get(n).map(|v| v.to_string()).unwrap_or_default(),
                })
                .collect();
            row.extend([
                fmt6(e.ece),
                fmt6(e.brier),
                e.n.to_string(),
                e.excluded.to_string(),
                e.skipped.clone().unwrap_or_default(),
            ]);
            row
        })
        .collect();
    out.push_str(&render_columns(&header, &rows));
    out
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
struct SavedArtifact {
    #[serde(default)]
    reports: Option<Vec<CalibrationReport>>,
    #[serde(default)]
    test: Option<CalibrationReport>,
}

#[derive(Serialize)]
struct ReportRow {
    method: String,
    strategy: String,
    ece: Vec<Option<f64>>,
    brier: Vec<Option<f64>>,
}

fn labels(paths: &[PathBuf]) -> Vec<String> {
    let stems: Vec<String> = paths
        .iter()
        .map(|p| {
            p.file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| p.display().to_string())
        })
        .collect();
    let unique: BTreeSet<&String> = stems.iter().collect();
    if unique.len() == stems.len() {
        stems
    } else {
        paths.iter().map(|p| p.display().to_string()).collect()
    }
}

pub fn report(mut s: Settings) -> Result<()> {
    let paths = s.reports.clone().unwrap_or_default();
    if paths.is_empty() {
        bail!("report needs at least one saved calibrate or tune JSON artifact");
    }
    let emit = emit_list(&mut s);
    let columns = labels(&paths);
    let mut rows: Vec<ReportRow> = Vec::new();
    for (j, path) in paths.iter().enumerate() {
        let text =
            fs::read_to_string(path).with_context(|| format!("cannot read {}", path.display()))?;
        let saved: SavedArtifact = serde_json::from_str(&text)
            .with_context(|| format!("{} is not a stlcalib JSON artifact", path.display()))?;
        let reports = match (saved.reports, saved.test) {
            (Some(r), _) => r,
            (None, Some(t)) => vec![t],
            (None, None) => bail!("{} holds no calibration reports", path.display()),
        };
        for r in reports {
            let i = match rows
                .iter()
                .position(|row| row.method == r.method && row.strategy == r.strategy)
            {
                Some(i) => i,
                None => {
                    rows.push(ReportRow {
                        method: r.method.clone(),
                        strategy: r.strategy.clone(),
                        ece: vec![None; paths.len()],
                        brier: vec![None; paths.len()],
                    });
                    rows.len() - 1
                }
            };
            rows[i].ece[j] = r.ece;
            rows[i].brier[j] = r.brier;
        }
    }

    #[derive(Serialize)]
    struct Body<'a> {
        columns: &'a [String],
        rows: &'a [ReportRow],
    }
    let mut artifacts = Vec::new();
    for e in emit {
        let body = match e {
            Emit::Json => artifact(
                &s,
                Body {
                    columns: &columns,
                    rows: &rows,
                },
            )?,
            Emit::Text => report_text(&columns, &rows),
            Emit::Csv => {
                let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
                let flat: Vec<Vec<String>> = rows
                    .iter()
                    .flat_map(|r| {
                        columns.iter().enumerate().map(move |(j, c)| {
                            vec![
                                r.method.clone(),
                                r.strategy.clone(),
                                c.clone(),
                                opt(r.ece[j]),
                                opt(r.brier[j]),
                            ]
                        })
                    })
                    .collect();
                csv_string(&["method", "strategy", "report", "ece", "brier"], &flat)?
            }
        };
        artifacts.push((e, body));
    }
    Artifacts(artifacts).write(s.output.as_deref())
}

fn report_text(columns: &[String], rows: &[ReportRow]) -> String {
    let mut header = vec!["method", "strategy"];
    header.extend(columns.iter().map(String::as_str));
    let table = |pick: fn(&ReportRow) -> &[Option<f64>]| {
        let body: Vec<Vec<String>> = rows
            .iter()
            .map(|r| {
                let mut row = vec![r.method.clone(), r.strategy.clone()];
                row.extend(pick(r).iter().map(|v| fmt6(*v)));
                row
            })
            .collect();
        render_columns(&header, &body)
    };
    format!("ECE\n{}\nBrier\n{}", table(|r| &r.ece), table(|r| &r.brier))
}
