use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DVector;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

/// Provenance embedded in every report.
#[derive(Debug, Clone, Serialize)]
pub struct Meta {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config_sha256: String,
    pub seed: u64,
    pub interior_samples: usize,
    pub boundary_samples: usize,
    pub safety: f64,
}

impl Meta {
    pub fn new(command: &str, config_text: &str, cfg: &RunConfig) -> Self {
        Meta {
            tool: "totalstab",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: hex::encode(Sha256::digest(config_text.as_bytes())),
            seed: cfg.seed,
            interior_samples: cfg.sampling.interior,
            boundary_samples: cfg.sampling.boundary,
            safety: cfg.safety,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Report<T: Serialize> {
    pub meta: Meta,
    pub pass: bool,
    #[serde(flatten)]
    pub body: T,
}

/// Writes pretty JSON to `<out>/<name>.json` and returns the text.
pub fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<String, CliError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    write(out.join(format!("{name}.json")), &text)?;
    Ok(text)
}

pub fn write_states_csv(out: &Path, name: &str, states: &[DVector<f64>]) -> Result<(), CliError> {
    let n = states.first().map_or(0, |x| x.len());
    let mut text = String::from("k");
    for i in 1..=n {
        text.push_str(&format!(",x{i}"));
    }
    text.push('\n');
    for (k, x) in states.iter().enumerate() {
        text.push_str(&k.to_string());
        for v in x.iter() {
            text.push_str(&format!(",{v:e}"));
        }
        text.push('\n');
    }
    write(out.join(format!("{name}.csv")), &text)
}

pub fn write_profile_csv(out: &Path, name: &str, rows: &[(f64, f64)]) -> Result<(), CliError> {
    let mut text = String::from("r,V\n");
    for (r, v) in rows {
        text.push_str(&format!("{r:e},{v:e}\n"));
    }
    write(out.join(format!("{name}.csv")), &text)
}

fn write(path: PathBuf, text: &str) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|source| CliError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(&path, text).map_err(|source| CliError::Io {
        path: path.display().to_string(),
        source,
    })
}
