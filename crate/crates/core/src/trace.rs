//! Trace and dataset model, file ingestion, deterministic splitting and the
//! synthetic trace generator.
//!
//! JSONL is the canonical format: one trace per line,
//! `{"id":"q1","steps":[0.9,0.3,0.8],"correct":false,"source":"logit","split":"test"}`
//! with `split` optional (default `test`). A dataset's metadata, when present,
//! is written as a first line of the form `{"metadata":{...}}`.
//!
//! CSV is a convenience import with header
//! `id,step_index,confidence,correct,source,split`, one step per row; rows for
//! one id are contiguous and `step_index` runs `1..=T`. Metadata goes on an
//! optional line `#metadata {...}` before the header.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{BufRead, BufReader, Read, Write};
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::reshape::Signal;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("confidence out of range at line {line}: record {id:?} step {step} is {value}")]
    OutOfRange {
        line: usize,
        id: String,
        step: usize,
        value: f64,
    },
    #[error("empty steps list at line {line} (record {id:?})")]
    EmptySteps { line: usize, id: String },
    #[error("duplicate id {id:?}{}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    DuplicateId { id: String, line: Option<usize> },
    #[error("val_fraction must lie in (0, 1), got {0}")]
    BadFraction(f64),
    #[error("split of {n} traces with val_fraction {val_fraction} leaves an empty {partition} partition")]
    EmptyPartition {
        n: usize,
        val_fraction: f64,
        partition: &'static str,
    },
    #[error("invalid synthesizer config: {0}")]
    Synth(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Logit,
    SelfEval,
    Internal,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Logit => "logit",
            Source::SelfEval => "self_eval",
            Source::Internal => "internal",
        }
    }
}

impl fmt::Display for Source {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Source {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "logit" => Ok(Source::Logit),
            "self_eval" => Ok(Source::SelfEval),
            "internal" => Ok(Source::Internal),
            _ => Err(format!("unknown source {s:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    #[default]
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Validation => "validation",
            Split::Test => "test",
        }
    }
}

impl fmt::Display for Split {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Split {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "validation" => Ok(Split::Validation),
            "test" => Ok(Split::Test),
            _ => Err(format!("unknown split {s:?}")),
        }
    }
}

/// One problem instance: per-step confidences plus final-answer correctness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceTrace {
    pub id: String,
    pub steps: Signal,
    pub correct: bool,
    pub source: Source,
    #[serde(default)]
    pub split: Split,
}

impl ConfidenceTrace {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// Ordered collection of traces with unique ids.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    traces: Vec<ConfidenceTrace>,
    pub metadata: BTreeMap<String, Value>,
}

impl Dataset {
    pub fn new(
        traces: Vec<ConfidenceTrace>,
        metadata: BTreeMap<String, Value>,
    ) -> Result<Self, DatasetError> {
        let mut seen = HashSet::with_capacity(traces.len());
        for t in &traces {
            if !seen.insert(t.id.as_str()) {
                return Err(DatasetError::DuplicateId {
                    id: t.id.clone(),
                    line: None,
                });
            }
        }
        Ok(Dataset { traces, metadata })
    }

    pub fn traces(&self) -> &[ConfidenceTrace] {
        &self.traces
    }

    pub fn into_traces(self) -> Vec<ConfidenceTrace> {
        self.traces
    }

    pub fn len(&self) -> usize {
        self.traces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.traces.is_empty()
    }

    pub fn in_split(&self, split: Split) -> impl Iterator<Item = &ConfidenceTrace> {
        self.traces.iter().filter(move |t| t.split == split)
    }

    /// Same traces with every step signal replaced by `f(trace)`.
    pub fn map_signals<E>(
        &self,
        mut f: impl FnMut(&ConfidenceTrace) -> Result<Signal, E>,
    ) -> Result<Dataset, E> {
        let traces = self
            .traces
            .iter()
            .map(|t| {
                Ok(ConfidenceTrace {
                    steps: f(t)?,
                    ..t.clone()
                })
            })
            .collect::<Result<_, E>>()?;
        Ok(Dataset {
            traces,
            metadata: self.metadata.clone(),
        })
    }

    pub fn write<W: Write>(&self, w: W, format: Format) -> Result<(), DatasetError> {
        match format {
            Format::Jsonl => self.write_jsonl(w),
            Format::Csv => self.write_csv(w),
        }
    }

    pub fn to_jsonl_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_jsonl(&mut buf)
            .expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("serde_json emits UTF-8")
    }

    fn write_jsonl<W: Write>(&self, mut w: W) -> Result<(), DatasetError> {
        if !self.metadata.is_empty() {
            serde_json::to_writer(
                &mut w,
                &MetadataLine {
                    metadata: &self.metadata,
                },
            )
            .map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        for t in &self.traces {
            serde_json::to_writer(&mut w, t).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    fn write_csv<W: Write>(&self, mut w: W) -> Result<(), DatasetError> {
        if !self.metadata.is_empty() {
            w.write_all(CSV_METADATA_PREFIX.as_bytes())?;
            serde_json::to_writer(&mut w, &self.metadata).map_err(std::io::Error::from)?;
            w.write_all(b"\n")?;
        }
        let mut out = csv::Writer::from_writer(w);
        let io = |e: csv::Error| match e.into_kind() {
            csv::ErrorKind::Io(e) => DatasetError::Io(e),
            kind => DatasetError::Io(std::io::Error::other(format!("{kind:?}"))),
        };
        out.write_record(CSV_HEADER).map_err(io)?;
        for t in &self.traces {
            for (i, c) in t.steps.samples().iter().enumerate() {
                out.write_record([
                    t.id.as_str(),
                    &(i + 1).to_string(),
                    &c.to_string(),
                    if t.correct { "true" } else { "false" },
                    t.source.as_str(),
                    t.split.as_str(),
                ])
                .map_err(io)?;
            }
        }
        out.flush()?;
        Ok(())
    }
}

#[derive(Serialize)]
struct MetadataLine<'a> {
    metadata: &'a BTreeMap<String, Value>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Jsonl,
    Csv,
}

impl FromStr for Format {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "jsonl" => Ok(Format::Jsonl),
            "csv" => Ok(Format::Csv),
            _ => Err(format!("unknown format {s:?} (expected jsonl or csv)")),
        }
    }
}

const CSV_HEADER: [&str; 6] = [
    "id",
    "step_index",
    "confidence",
    "correct",
    "source",
    "split",
];

#[derive(Deserialize)]
struct JsonRecord {
    id: String,
    steps: Vec<f64>,
    correct: bool,
    source: Source,
    #[serde(default)]
    split: Split,
}

/// Parse a dataset, validating every record. Records keep their input order.
pub fn parse_dataset<R: Read>(input: R, format: Format) -> Result<Dataset, DatasetError> {
    match format {
        Format::Jsonl => parse_jsonl(input),
        Format::Csv => parse_csv(input),
    }
}

fn build_trace(
    line: usize,
    id: String,
    steps: Vec<f64>,
    correct: bool,
    source: Source,
    split: Split,
) -> Result<ConfidenceTrace, DatasetError> {
    if steps.is_empty() {
        return Err(DatasetError::EmptySteps { line, id });
    }
    if let Some((i, &value)) = steps
        .iter()
        .enumerate()
        .find(|(_, v)| !(v.is_finite() && (0.0..=1.0).contains(*v)))
    {
        return Err(DatasetError::OutOfRange {
            line,
            id,
            step: i + 1,
            value,
        });
    }
    let steps = Signal::new(steps).expect("validated above");
    Ok(ConfidenceTrace {
        id,
        steps,
        correct,
        source,
        split,
    })
}

fn parse_jsonl<R: Read>(input: R) -> Result<Dataset, DatasetError> {
    let mut traces = Vec::new();
    let mut metadata = BTreeMap::new();
    let mut seen = HashSet::new();
    for (i, text) in BufReader::new(input).lines().enumerate() {
        let line = i + 1;
        let text = text.map_err(|e| match e.kind() {
            std::io::ErrorKind::InvalidData => DatasetError::Malformed {
                line,
                message: "input is not valid UTF-8".into(),
            },
            _ => DatasetError::Io(e),
        })?;
        if text.trim().is_empty() {
            continue;
        }
        let malformed = |e: serde_json::Error| DatasetError::Malformed {
            line,
            message: e.to_string(),
        };
        let value: Value = serde_json::from_str(&text).map_err(malformed)?;
        if traces.is_empty() && metadata.is_empty() {
            if let Some(Value::Object(m)) = value.get("metadata") {
                if value.get("id").is_none() {
                    metadata = m.clone().into_iter().collect();
                    continue;
                }
            }
        }
        let rec = JsonRecord::deserialize(value).map_err(malformed)?;
        if !seen.insert(rec.id.clone()) {
            return Err(DatasetError::DuplicateId {
                id: rec.id,
                line: Some(line),
            });
        }
        traces.push(build_trace(
            line,
            rec.id,
            rec.steps,
            rec.correct,
            rec.source,
            rec.split,
        )?);
    }
    Ok(Dataset { traces, metadata })
}

#[derive(Deserialize)]
struct CsvRow {
    id: String,
    step_index: usize,
    confidence: f64,
    correct: bool,
    source: Source,
    #[serde(default, deserialize_with = "empty_split")]
    split: Split,
}

fn empty_split<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Split, D::Error> {
    let s = String::deserialize(d)?;
    if s.is_empty() {
        Ok(Split::default())
    } else {
        s.parse().map_err(serde::de::Error::custom)
    }
}

struct Pending {
    line: usize,
    id: String,
    steps: Vec<f64>,
    correct: bool,
    source: Source,
    split: Split,
}

const CSV_METADATA_PREFIX: &str = "#metadata ";

fn parse_csv<R: Read>(input: R) -> Result<Dataset, DatasetError> {
    let mut input = BufReader::new(input);
    let mut first = String::new();
    input.read_line(&mut first).map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => DatasetError::Malformed {
            line: 1,
            message: "input is not valid UTF-8".into(),
        },
        _ => DatasetError::Io(e),
    })?;
    let (metadata, offset, first) = match first.strip_prefix(CSV_METADATA_PREFIX) {
        Some(json) => {
            let m: BTreeMap<String, Value> =
                serde_json::from_str(json.trim()).map_err(|e| DatasetError::Malformed {
                    line: 1,
                    message: format!("metadata line: {e}"),
                })?;
            (m, 1, String::new())
        }
        None => (BTreeMap::new(), 0, first),
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(first.as_bytes().chain(input));
    let header_err = |message: String| DatasetError::Malformed {
        line: 1 + offset,
        message,
    };
    let header = reader
        .headers()
        .map_err(|e| header_err(e.to_string()))?
        .clone();
    if header.iter().ne(CSV_HEADER) {
        return Err(header_err(format!(
            "expected header {}, found {}",
            CSV_HEADER.join(","),
            header.iter().collect::<Vec<_>>().join(",")
        )));
    }

    let mut traces = Vec::new();
    let mut seen = HashSet::new();
    let mut pending: Option<Pending> = None;
    let mut flush = |p: Pending, traces: &mut Vec<ConfidenceTrace>| -> Result<(), DatasetError> {
        if !seen.insert(p.id.clone()) {
            return Err(DatasetError::DuplicateId {
                id: p.id,
                line: Some(p.line),
            });
        }
        traces.push(build_trace(
            p.line, p.id, p.steps, p.correct, p.source, p.split,
        )?);
        Ok(())
    };
    for result in reader.records() {
        let record = result.map_err(|e| DatasetError::Malformed {
            line: e.position().map_or(0, |p| p.line() as usize) + offset,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line() as usize) + offset;
        let row: CsvRow =
            record
                .deserialize(Some(&header))
                .map_err(|e| DatasetError::Malformed {
                    line,
                    message: e.to_string(),
                })?;
        match pending.as_mut() {
            Some(p) if p.id == row.id => {
                if row.step_index != p.steps.len() + 1 {
                    return Err(DatasetError::Malformed {
                        line,
                        message: format!(
                            "record {:?}: step_index {} out of sequence (expected {})",
                            row.id,
                            row.step_index,
                            p.steps.len() + 1
                        ),
                    });
                }
                if row.correct != p.correct || row.source != p.source || row.split != p.split {
                    return Err(DatasetError::Malformed {
                        line,
                        message: format!(
                            "record {:?}: correct/source/split differ between rows",
                            row.id
                        ),
                    });
                }
                p.steps.push(row.confidence);
            }
            _ => {
                if let Some(done) = pending.take() {
                    flush(done, &mut traces)?;
                }
                if row.step_index != 1 {
                    return Err(DatasetError::Malformed {
                        line,
                        message: format!(
                            "record {:?}: first step_index is {}, expected 1",
                            row.id, row.step_index
                        ),
                    });
                }
                pending = Some(Pending {
                    line,
                    id: row.id,
                    steps: vec![row.confidence],
                    correct: row.correct,
                    source: row.source,
                    split: row.split,
                });
            }
        }
    }
    if let Some(done) = pending.take() {
        flush(done, &mut traces)?;
    }
    Ok(Dataset { traces, metadata })
}

// ---------------------------------------------------------------------------
// Splitting
// ---------------------------------------------------------------------------

fn split_key(seed: u64, id: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(id.as_bytes());
    h.finalize().into()
}

/// Retag every trace: `floor(val_fraction * n)` become validation, the rest
/// test. Membership depends only on `(seed, id)` ranks, so appending traces
/// does not reorder existing ones.
pub fn split_dataset(d: &Dataset, val_fraction: f64, seed: u64) -> Result<Dataset, DatasetError> {
    if !(val_fraction > 0.0 && val_fraction < 1.0) {
        return Err(DatasetError::BadFraction(val_fraction));
    }
    let n = d.len();
    let n_val = (val_fraction * n as f64).floor() as usize;
    if n_val == 0 || n_val == n {
        return Err(DatasetError::EmptyPartition {
            n,
            val_fraction,
            partition: if n_val == 0 { "validation" } else { "test" },
        });
    }
    let mut order: Vec<(usize, [u8; 32])> = d
        .traces
        .iter()
        .enumerate()
        .map(|(i, t)| (i, split_key(seed, &t.id)))
        .collect();
    order.sort_by(|a, b| {
        a.1.cmp(&b.1)
            .then_with(|| d.traces[a.0].id.cmp(&d.traces[b.0].id))
    });
    let mut tags = vec![Split::Test; n];
    for &(i, _) in &order[..n_val] {
        tags[i] = Split::Validation;
    }
    let traces = d
        .traces
        .iter()
        .zip(tags)
        .map(|(t, split)| ConfidenceTrace { split, ..t.clone() })
        .collect();
    Ok(Dataset {
        traces,
        metadata: d.metadata.clone(),
    })
}

// ---------------------------------------------------------------------------
// Synthetic traces
// ---------------------------------------------------------------------------

/// Noise-free trajectory shapes used by the synthesizer.
///
/// `rising` ramps linearly 0.3 → 0.9, `flat_high` is constant 0.9, `spiky`
/// alternates 0.3, 0.9, 0.3, … and `collapsing` ramps 0.9 → 0.3. A single-step
/// ramp takes its start value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    Rising,
    FlatHigh,
    Spiky,
    Collapsing,
}

impl Profile {
    pub const LOW: f64 = 0.3;
    pub const HIGH: f64 = 0.9;

    /// Base level at zero-based step `i` of a `len`-step trace.
    pub fn level(self, i: usize, len: usize) -> f64 {
        let frac = if len > 1 {
            i as f64 / (len - 1) as f64
        } else {
            0.0
        };
        match self {
            Profile::Rising => Self::LOW + (Self::HIGH - Self::LOW) * frac,
            Profile::FlatHigh => Self::HIGH,
            Profile::Spiky => {
                if i.is_multiple_of(2) {
                    Self::LOW
                } else {
                    Self::HIGH
                }
            }
            Profile::Collapsing => Self::HIGH - (Self::HIGH - Self::LOW) * frac,
        }
    }
}

impl FromStr for Profile {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "rising" => Ok(Profile::Rising),
            "flat_high" => Ok(Profile::FlatHigh),
            "spiky" => Ok(Profile::Spiky),
            "collapsing" => Ok(Profile::Collapsing),
            _ => Err(format!(
                "unknown profile {s:?} (expected rising, flat_high, spiky or collapsing)"
            )),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub count: usize,
    pub min_steps: usize,
    pub max_steps: usize,
    /// Fraction of traces labelled correct; the exact count is `round(accuracy * count)`.
    pub accuracy: f64,
    pub correct_profile: Profile,
    pub incorrect_profile: Profile,
    pub noise_sd: f64,
    pub seed: u64,
    #[serde(default = "default_source")]
    pub source: Source,
}

fn default_source() -> Source {
    Source::Logit
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            count: 100,
            min_steps: 3,
            max_steps: 8,
            accuracy: 0.5,
            correct_profile: Profile::Rising,
            incorrect_profile: Profile::Spiky,
            noise_sd: 0.05,
            seed: 0,
            source: Source::Logit,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<(), DatasetError> {
        let bad = |m: &str| Err(DatasetError::Synth(m.to_string()));
        if self.count == 0 {
            return bad("count must be positive");
        }
        if self.min_steps == 0 {
            return bad("min_steps must be positive");
        }
        if self.min_steps > self.max_steps {
            return bad("min_steps exceeds max_steps");
        }
        if !(0.0..=1.0).contains(&self.accuracy) {
            return bad("accuracy must lie in [0, 1]");
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return bad("noise_sd must be finite and non-negative");
        }
        Ok(())
    }
}

/// Generate a seeded synthetic dataset; every trace is tagged `test`.
pub fn synthesize(cfg: &SynthConfig) -> Result<Dataset, DatasetError> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_correct = (cfg.accuracy * cfg.count as f64).round() as usize;
    let mut labels: Vec<bool> = (0..cfg.count).map(|i| i < n_correct).collect();
    labels.shuffle(&mut rng);
    let noise = (cfg.noise_sd > 0.0).then(|| Normal::new(0.0, cfg.noise_sd).expect("validated sd"));
    let width = cfg.count.to_string().len();

    let traces = labels
        .into_iter()
        .enumerate()
        .map(|(i, correct)| {
            let len = rng.random_range(cfg.min_steps..=cfg.max_steps);
            let profile = if correct {
                cfg.correct_profile
            } else {
                cfg.incorrect_profile
            };
            let steps = (0..len)
                .map(|t| {
                    let base = profile.level(t, len);
                    let jitter = noise.map_or(0.0, |d| d.sample(&mut rng));
                    (base + jitter).clamp(0.0, 1.0)
                })
                .collect();
            ConfidenceTrace {
                id: format!("syn-{i:0width$}"),
                steps: Signal::new(steps).expect("clamped to [0, 1]"),
                correct,
                source: cfg.source,
                split: Split::Test,
            }
        })
        .collect();

    let mut metadata = BTreeMap::new();
    metadata.insert(
        "synth".to_string(),
        serde_json::to_value(cfg).expect("config serializes"),
    );
    Ok(Dataset { traces, metadata })
}
