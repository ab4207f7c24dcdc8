//! `key = value` configuration files. Keys are flag names without the
//! leading dashes; `#` starts a comment.

use std::fs;
use std::path::Path;

use clap::Command;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub entries: Vec<(String, String)>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut entries = Vec::new();
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {}: expected key = value", n + 1))?;
            let key = k.trim().replace('_', "-");
            if key.is_empty() {
                return Err(format!("config line {}: empty key", n + 1));
            }
            entries.push((key, v.trim().to_string()));
        }
        Ok(Self { entries })
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
        Self::parse(&text)
    }

    /// Flag tokens for `sub`. Unknown keys are rejected; boolean flags take
    /// `true` or `false`.
    pub fn to_args(&self, sub: &Command) -> Result<Vec<String>, String> {
        let mut out = Vec::new();
        for (key, value) in &self.entries {
            let arg = sub
                .get_arguments()
                .find(|a| a.get_long() == Some(key.as_str()))
                .filter(|a| a.get_id() != "config")
                .ok_or_else(|| format!("unknown config key {key:?} for {}", sub.get_name()))?;
            if arg.get_action().takes_values() {
                out.push(format!("--{key}"));
                out.push(value.clone());
            } else {
                match value.as_str() {
                    "true" => out.push(format!("--{key}")),
                    "false" => {}
                    other => return Err(format!("config key {key:?} expects true or false, got {other:?}")),
                }
            }
        }
        Ok(out)
    }
}
