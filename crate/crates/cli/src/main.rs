//! `stlcalib`: score chain-of-thought confidence traces with signal temporal
//! logic and measure calibration.

mod commands;
mod emit;
mod settings;

use std::fmt;
use std::panic;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use settings::{
    BinsArgs, EmitArgs, FormatArgs, GridArgs, InputArgs, KindArgs, MethodArgs, OutputArgs,
    Settings, SplitArgs, StrategyArgs, SynthArgs, TextArgs, ThresholdArgs, WindowArgs,
};

/// An invariant failure inside the tool rather than a problem with the input.
#[derive(Debug)]
pub struct Internal(pub String);

impl fmt::Display for Internal {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "internal error: {}", self.0)
    }
}

impl std::error::Error for Internal {}

impl From<serde_json::Error> for Internal {
    fn from(e: serde_json::Error) -> Self {
        Internal(e.to_string())
    }
}

impl From<csv::Error> for Internal {
    fn from(e: csv::Error) -> Self {
        Internal(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "stlcalib",
    version,
    about = "Temporal-logic scoring and calibration of stepwise confidence traces"
)]
struct Cli {
    /// Config file: flat TOML keys named like the long flags, or a JSON
    /// artifact whose embedded config is replayed. Flags override it.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check a dataset and print a one-line summary.
    Validate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Generate a seeded synthetic dataset.
    Synth {
        #[command(flatten)]
        synth: SynthArgs,
        #[command(flatten)]
        split: SplitArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        format: FormatArgs,
    },
    /// Apply one reshaping strategy to every trace.
    Reshape {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
    },
    /// Replace every trace by its single clamped robustness score.
    Score {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        kind: KindArgs,
        #[command(flatten)]
        text: TextArgs,
        #[command(flatten)]
        window: WindowArgs,
    },
    /// Report ECE and Brier on the test split for each method.
    Calibrate {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        emit: EmitArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        thresholds: ThresholdArgs,
        #[command(flatten)]
        text: TextArgs,
        #[command(flatten)]
        window: WindowArgs,
        #[command(flatten)]
        method: MethodArgs,
        #[command(flatten)]
        bins: BinsArgs,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Grid-search thresholds on the validation split.
    Tune {
        #[command(flatten)]
        input: InputArgs,
        #[command(flatten)]
        format: FormatArgs,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        emit: EmitArgs,
        #[command(flatten)]
        strategy: StrategyArgs,
        #[command(flatten)]
        kind: KindArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[command(flatten)]
        bins: BinsArgs,
        #[command(flatten)]
        split: SplitArgs,
    },
    /// Compare saved calibrate or tune JSON artifacts side by side.
    Report {
        /// JSON artifacts; one column each.
        reports: Vec<PathBuf>,
        #[command(flatten)]
        output: OutputArgs,
        #[command(flatten)]
        emit: EmitArgs,
    },
}

/// Flag values of one invocation plus the keys its command reads.
struct Invocation {
    name: &'static str,
    keys: Vec<&'static str>,
    flags: Settings,
}

macro_rules! collect {
    ($name:literal; $($group:expr),* $(,)?) => {{
        let mut flags = Settings::default();
        let mut keys: Vec<&'static str> = Vec::new();
        $( $group.apply(&mut flags); keys.extend_from_slice(type_keys($group)); )*
        Invocation { name: $name, keys, flags }
    }};
}

trait Keys {
    const KEYS: &'static [&'static str];
}

macro_rules! impl_keys {
    ($($t:ty),*) => { $( impl Keys for $t { const KEYS: &'static [&'static str] = <$t>::KEYS; } )* };
}

impl_keys!(
    BinsArgs,
    EmitArgs,
    FormatArgs,
    GridArgs,
    InputArgs,
    KindArgs,
    MethodArgs,
    OutputArgs,
    SplitArgs,
    StrategyArgs,
    SynthArgs,
    TextArgs,
    ThresholdArgs,
    WindowArgs
);

fn type_keys<T: Keys>(_: &T) -> &'static [&'static str] {
    T::KEYS
}

impl Command {
    fn invocation(&self) -> Invocation {
        match self {
            Command::Validate { input, format } => collect!("validate"; input, format),
            Command::Synth {
                synth,
                split,
                output,
                format,
            } => collect!("synth"; synth, split, output, format),
            Command::Reshape {
                input,
                format,
                output,
                strategy,
                thresholds,
            } => collect!("reshape"; input, format, output, strategy, thresholds),
            Command::Score {
                input,
                format,
                output,
                strategy,
                thresholds,
                kind,
                text,
                window,
            } => collect!("score"; input, format, output, strategy, thresholds, kind, text, window),
            Command::Calibrate {
                input,
                format,
                output,
                emit,
                strategy,
                thresholds,
                text,
                window,
                method,
                bins,
                split,
            } => collect!(
                "calibrate";
                input, format, output, emit, strategy, thresholds, text, window, method, bins, split
            ),
            Command::Tune {
                input,
                format,
                output,
                emit,
                strategy,
                kind,
                grid,
                bins,
                split,
            } => collect!("tune"; input, format, output, emit, strategy, kind, grid, bins, split),
            Command::Report {
                reports,
                output,
                emit,
            } => {
                let mut inv = collect!("report"; output, emit);
                inv.keys.push("reports");
                if !reports.is_empty() {
                    inv.flags.reports = Some(reports.clone());
                }
                inv
            }
        }
    }
}

/// Flags override the config file key by key.
fn merge(file: Settings, flags: Settings) -> Result<Settings> {
    let mut merged = serde_json::to_value(file).map_err(Internal::from)?;
    let flags = serde_json::to_value(flags).map_err(Internal::from)?;
    if let (Some(m), serde_json::Value::Object(f)) = (merged.as_object_mut(), flags) {
        m.extend(f);
    }
    Ok(serde_json::from_value(merged).map_err(Internal::from)?)
}

fn configure_threads() -> Result<()> {
    let Ok(v) = std::env::var("STLCALIB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .with_context(|| format!("STLCALIB_THREADS must be a positive integer, got {v:?}"))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Internal(e.to_string()))?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_threads()?;
    let inv = cli.command.invocation();
    let file = match &cli.config {
        Some(path) => Settings::load(path)?,
        None => Settings::default(),
    };
    file.check_applies_to(inv.name, &inv.keys)?;
    let mut s = merge(file, inv.flags)?;
    s.command = Some(inv.name.to_string());
    match inv.name {
        "validate" => commands::validate(s),
        "synth" => commands::synth(s),
        "reshape" => commands::reshape(s),
        "score" => commands::score(s),
        "calibrate" => commands::calibrate(s),
        "tune" => commands::tune(s),
        "report" => commands::report(s),
        other => Err(Internal(format!("unhandled command {other}")).into()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match panic::catch_unwind(|| run(cli)) {
        Ok(Ok(())) => ExitCode::SUCCESS,
        Ok(Err(e)) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Ok(Err(e)) => {
            eprintln!("error: {e:#}");
            if e.chain().any(|c| c.is::<Internal>()) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
        Err(_) => ExitCode::from(2),
    }
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    use std::io::ErrorKind::BrokenPipe;
    e.chain().any(|c| {
        if let Some(io) = c.downcast_ref::<std::io::Error>() {
            io.kind() == BrokenPipe
        } else if let Some(stlcalib_core::trace::DatasetError::Io(io)) = c.downcast_ref() {
            io.kind() == BrokenPipe
        } else if let Some(j) = c.downcast_ref::<serde_json::Error>() {
            j.io_error_kind() == Some(BrokenPipe)
        } else {
            false
        }
    })
}
