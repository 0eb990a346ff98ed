use std::fs;
use std::io::Write;
use std::path::Path;

use anyhow::{Context, Result};
use clap::ValueEnum;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Json,
    Csv,
    Text,
}

/// Lowercase hex SHA-256 of the config's JSON form.
pub fn config_hash<C: Serialize>(config: &C) -> String {
    let bytes = serde_json::to_vec(config).expect("configs serialize");
    hex::encode(Sha256::digest(&bytes))
}

/// Common wrapper for JSON reports.
#[derive(Serialize)]
pub struct Envelope<'a, C: Serialize, R: Serialize> {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config_hash: String,
    pub config: &'a C,
    pub verified: bool,
    pub result: &'a R,
}

pub fn envelope<'a, C: Serialize, R: Serialize>(
    command: &'static str,
    config: &'a C,
    verified: bool,
    result: &'a R,
) -> Result<String> {
    let env = Envelope {
        tool: "crio",
        version: crio_core::VERSION,
        command,
        config_hash: config_hash(config),
        config,
        verified,
        result,
    };
    let mut s = serde_json::to_string_pretty(&env)?;
    s.push('\n');
    Ok(s)
}

/// `# key=value` lines prefixed to CSV and text output.
pub fn header<C: Serialize>(command: &str, config: &C) -> String {
    format!(
        "# crio {} {command}\n# config_hash={}\n",
        crio_core::VERSION,
        config_hash(config)
    )
}

/// Writes to `out`, or stdout when absent.
pub fn emit(body: &str, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => fs::write(path, body).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(body.as_bytes()).context("writing stdout")?;
            stdout.flush().context("writing stdout")
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hash_is_stable_and_sensitive() {
        let a = config_hash(&serde_json::json!({"n": 1}));
        assert_eq!(a, config_hash(&serde_json::json!({"n": 1})));
        assert_ne!(a, config_hash(&serde_json::json!({"n": 2})));
        assert_eq!(a.len(), 64);
    }
}
