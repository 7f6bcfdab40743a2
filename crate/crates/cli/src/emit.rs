//! Writing artifacts to files or standard output.

use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use stlcalib_core::{Dataset, Format};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Json,
    Text,
    Csv,
}

impl Emit {
    pub fn extension(self) -> &'static str {
        match self {
            Emit::Json => "json",
            Emit::Text => "txt",
            Emit::Csv => "csv",
        }
    }
}

impl fmt::Display for Emit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Emit::Json => "json",
            Emit::Text => "text",
            Emit::Csv => "csv",
        })
    }
}

impl FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "json" => Ok(Emit::Json),
            "text" => Ok(Emit::Text),
            "csv" => Ok(Emit::Csv),
            _ => Err(format!(
                "unknown emit format {s:?} (expected json, text or csv)"
            )),
        }
    }
}

/// Default artifact set: text for a terminal, json and text for files.
pub fn default_emit(output: Option<&Path>) -> Vec<Emit> {
    match output {
        Some(_) => vec![Emit::Json, Emit::Text],
        None => vec![Emit::Text],
    }
}

/// Path for one emitted format: `output` with its extension replaced.
pub fn artifact_path(output: &Path, emit: Emit) -> PathBuf {
    output.with_extension(emit.extension())
}

/// Rendered artifacts, one body per requested format.
pub struct Artifacts(pub Vec<(Emit, String)>);

impl Artifacts {
    pub fn write(&self, output: Option<&Path>) -> Result<()> {
        match output {
            Some(path) => {
                for (emit, body) in &self.0 {
                    let p = artifact_path(path, *emit);
                    fs::write(&p, body).with_context(|| format!("cannot write {}", p.display()))?;
                }
            }
            None => {
                let mut out = io::stdout().lock();
                for (i, (_, body)) in self.0.iter().enumerate() {
                    if i > 0 {
                        out.write_all(b"\n")?;
                    }
                    out.write_all(body.as_bytes())?;
                }
                out.flush()?;
            }
        }
        Ok(())
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value).map_err(crate::Internal::from)?;
    s.push('\n');
    Ok(s)
}

pub fn write_dataset(d: &Dataset, output: Option<&Path>, format: Format) -> Result<()> {
    match output {
        Some(path) => {
            let file = fs::File::create(path)
                .with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = io::BufWriter::new(file);
            d.write(&mut w, format)?;
            w.flush()?;
        }
        None => {
            let mut out = io::stdout().lock();
            d.write(&mut out, format)?;
            out.flush()?;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extension_is_replaced() {
        assert_eq!(
            artifact_path(Path::new("out/run.json"), Emit::Text),
            Path::new("out/run.txt")
        );
        assert_eq!(
            artifact_path(Path::new("run"), Emit::Csv),
            Path::new("run.csv")
        );
    }
}
