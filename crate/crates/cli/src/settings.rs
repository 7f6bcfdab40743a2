//! Run settings: one flat key space shared by flags, config files and the
//! config block embedded in every artifact.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use stlcalib_core::stl::Interval;
use stlcalib_core::trace::Profile;
use stlcalib_core::{Format, FormulaKind, Source, Strategy};

use crate::emit::Emit;

/// Every key a run can carry. Unset keys are omitted when serialized.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", deny_unknown_fields)]
pub struct Settings {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub input: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reports: Option<Vec<PathBuf>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub format: Option<Format>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub emit: Option<Vec<Emit>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub strategy: Option<Strategy>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub recursive: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula: Option<FormulaKind>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub formula_text: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window: Option<Interval>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub count: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub accuracy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub correct_profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub incorrect_profile: Option<Profile>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sd: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub source: Option<Source>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha_grid: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub window_grid: Option<Vec<Interval>>,
}

impl Settings {
    /// Load a config file: flat TOML, or a JSON artifact whose `config` block
    /// is reused (a plain JSON object of keys also works).
    pub fn load(path: &Path) -> Result<Settings> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("cannot read config file {}", path.display()))?;
        let is_json = path.extension().is_some_and(|e| e == "json");
        let parsed = if is_json {
            let mut v: Value = serde_json::from_str(&text)
                .with_context(|| format!("config file {} is not valid JSON", path.display()))?;
            if let Some(c) = v.get_mut("config") {
                v = c.take();
            }
            serde_json::from_value(v).map_err(anyhow::Error::from)
        } else {
            toml::from_str(&text).map_err(anyhow::Error::from)
        };
        parsed.with_context(|| format!("invalid config file {}", path.display()))
    }

    /// Names of the keys that are set, in kebab-case.
    pub fn keys(&self) -> BTreeSet<String> {
        match serde_json::to_value(self) {
            Ok(Value::Object(m)) => m.keys().cloned().collect(),
            _ => BTreeSet::new(),
        }
    }

    /// Reject keys the command does not read, and a mismatched `command`.
    pub fn check_applies_to(&self, command: &str, allowed: &[&str]) -> Result<()> {
        if let Some(c) = &self.command {
            if c != command {
                bail!("config is for command `{c}`, not `{command}`");
            }
        }
        for key in self.keys() {
            if key != "command" && !allowed.contains(&key.replace('-', "_").as_str()) {
                bail!("config key `{key}` does not apply to `{command}`");
            }
        }
        Ok(())
    }
}

macro_rules! flag_group {
    ($(#[$gm:meta])* $name:ident { $( $(#[$m:meta])* $field:ident : $ty:ty ),* $(,)? }) => {
        $(#[$gm])*
        #[derive(Debug, Clone, Default, clap::Args)]
        pub struct $name {
            $( $(#[$m])* pub $field: Option<$ty>, )*
        }

        impl $name {
            pub const KEYS: &'static [&'static str] = &[$(stringify!($field)),*];

            pub fn apply(&self, s: &mut Settings) {
                $( if let Some(v) = &self.$field { s.$field = Some(v.clone()); } )*
            }
        }
    };
}

flag_group!(InputArgs {
    /// Dataset to read; standard input when omitted.
    #[arg(long, short)]
    input: PathBuf,
});

flag_group!(FormatArgs {
    /// Dataset format; inferred from the file extension, else jsonl.
    #[arg(long)]
    format: Format,
});

flag_group!(OutputArgs {
    /// Output path; standard output when omitted.
    #[arg(long, short)]
    output: PathBuf,
});

flag_group!(EmitArgs {
    /// Artifact formats, comma separated (json, text, csv). Default: text on
    /// standard output, json and text with --output.
    #[arg(long, value_delimiter = ',')]
    emit: Vec<Emit>,
});

flag_group!(StrategyArgs {
    /// Reshaping strategy: identity, cms, eds, mps or gs.
    #[arg(long)]
    strategy: Strategy,
});

flag_group!(ThresholdArgs {
    /// CMS margin and stl3 change bound.
    #[arg(long, allow_negative_numbers = true)]
    delta: f64,
    /// EDS weight on the current step.
    #[arg(long, allow_negative_numbers = true)]
    alpha: f64,
    /// MPS/GS trigger level and stl1 threshold.
    #[arg(long, allow_negative_numbers = true)]
    tau: f64,
    /// GS guard width and stl2 tolerance.
    #[arg(long, allow_negative_numbers = true)]
    epsilon: f64,
    /// Condition reshaping on the already reshaped prefix.
    #[arg(long, num_args = 0..=1, default_missing_value = "true")]
    recursive: bool,
});

flag_group!(KindArgs {
    /// Preset specification: stl1, stl2 or stl3.
    #[arg(long)]
    formula: FormulaKind,
});

flag_group!(TextArgs {
    /// Custom specification in the formula language.
    #[arg(long)]
    formula_text: String,
});

flag_group!(WindowArgs {
    /// Window for the preset specifications, e.g. [1,END].
    #[arg(long)]
    window: Interval,
});

flag_group!(MethodArgs {
    /// Methods, comma separated: one-step, cot-average, temperature,
    /// histogram, stl1, stl2, stl3, custom.
    #[arg(long, value_delimiter = ',')]
    method: Vec<String>,
});

flag_group!(BinsArgs {
    /// Number of equal-width calibration bins.
    #[arg(long)]
    bins: usize,
});

flag_group!(SplitArgs {
    /// Re-split into validation and test with this validation fraction.
    #[arg(long)]
    val_fraction: f64,
    /// Seed for splitting and synthesis.
    #[arg(long)]
    seed: u64,
});

flag_group!(SynthArgs {
    /// Number of traces.
    #[arg(long)]
    count: usize,
    /// Shortest trace length.
    #[arg(long)]
    min_steps: usize,
    /// Longest trace length.
    #[arg(long)]
    max_steps: usize,
    /// Fraction of traces labelled correct.
    #[arg(long)]
    accuracy: f64,
    /// Profile for correct traces: rising, flat_high, spiky or collapsing.
    #[arg(long)]
    correct_profile: Profile,
    /// Profile for incorrect traces.
    #[arg(long)]
    incorrect_profile: Profile,
    /// Standard deviation of the Gaussian step noise.
    #[arg(long)]
    noise_sd: f64,
    /// Source tag: logit, self_eval or internal.
    #[arg(long)]
    source: Source,
});

flag_group!(GridArgs {
    /// Tau values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    tau_grid: Vec<f64>,
    /// Epsilon values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    epsilon_grid: Vec<f64>,
    /// Delta values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    delta_grid: Vec<f64>,
    /// Alpha values, comma separated.
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    alpha_grid: Vec<f64>,
    /// Windows separated by semicolons, e.g. "[1,END];[2,END]".
    #[arg(long, value_delimiter = ';')]
    window_grid: Vec<Interval>,
});
