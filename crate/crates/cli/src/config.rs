//! Key=value run configuration: defaults, then the config file, then
//! `--set` pairs, then dedicated flags.

use std::collections::BTreeMap;
use std::path::Path;
use std::str::FromStr;

use crate::CliError;

/// A recognised configuration key and its default.
#[derive(Debug, Clone, Copy)]
pub struct KeySpec {
    pub name: &'static str,
    pub default: &'static str,
}

const fn key(name: &'static str, default: &'static str) -> KeySpec {
    KeySpec { name, default }
}

pub const SIMULATE_KEYS: &[KeySpec] = &[
    key("seed", "0"),
    key("scheme", "plain"),
    key("n", "40"),
    key("l", "40"),
    key("k", "0"),
    key("salt_bits", "64"),
    key("backend", "permutation"),
    key("exchange_ms", "30"),
    key("backoff_ms", "10"),
    key("background_rate", "0"),
    key("duration_s", "60"),
    key("m", "40"),
    key("structure", "random"),
    key("codebook", ""),
    key("message_bits", "40000"),
    key("topology", "single"),
    key("cells", "1"),
    key("hop_latency", "1"),
];

pub const SWEEP_EXTRA_KEYS: &[KeySpec] = &[key("param", ""), key("values", "")];

pub const FIGURE_KEYS: &[KeySpec] = &[key("seed", "0")];

pub const PREIMAGE_KEYS: &[KeySpec] = &[
    key("seed", "0"),
    key("n", "16"),
    key("l", "16"),
    key("k", "4"),
    key("m", "4"),
    key("salt_bits", "64"),
    key("backend", "hash"),
    key("trials", "10000"),
];

pub const REPETITION_KEYS: &[KeySpec] = &[
    key("seed", "0"),
    key("n", "8"),
    key("k", "4"),
    key("repeats", "8"),
    key("trials", "10000"),
];

pub const MINDIST_KEYS: &[KeySpec] = &[
    key("seed", "0"),
    key("scheme", "k-errors"),
    key("n", "10"),
    key("k", "2"),
    key("m", "2"),
    key("d", ""),
    key("trials", "10000"),
];

/// Fully resolved parameters of one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    values: BTreeMap<String, String>,
}

/// Parses `key=value` lines; blank lines and `#` comments are skipped.
pub fn parse_pairs(text: &str) -> Result<Vec<(String, String)>, CliError> {
    let mut out = Vec::new();
    for (no, raw) in text.lines().enumerate() {
        let line = raw.split_once('#').map_or(raw, |(l, _)| l).trim();
        if line.is_empty() {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("line {}: expected key=value, got `{line}`", no + 1)))?;
        out.push((k.trim().to_string(), v.trim().to_string()));
    }
    Ok(out)
}

impl RunConfig {
    /// Layers the sources over the defaults in `specs`. Every unknown key
    /// from any source is reported in one error.
    pub fn resolve(
        specs: &[KeySpec],
        file: Option<&Path>,
        sets: &[String],
        flags: &[(&str, Option<String>)],
    ) -> Result<Self, CliError> {
        let mut values: BTreeMap<String, String> =
            specs.iter().map(|s| (s.name.to_string(), s.default.to_string())).collect();
        let mut layered = Vec::new();
        if let Some(path) = file {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            layered.extend(parse_pairs(&text)?);
        }
        for s in sets {
            layered.extend(parse_pairs(s)?);
        }
        for (k, v) in flags {
            if let Some(v) = v {
                layered.push((k.to_string(), v.clone()));
            }
        }
        let mut unknown: Vec<String> = Vec::new();
        for (k, v) in layered {
            match values.get_mut(&k) {
                Some(slot) => *slot = v,
                None if !unknown.contains(&k) => unknown.push(k),
                None => {}
            }
        }
        if !unknown.is_empty() {
            return Err(CliError::Config(format!("unknown config keys: {}", unknown.join(", "))));
        }
        Ok(Self { values })
    }

    pub fn raw(&self, key: &str) -> &str {
        self.values.get(key).map(String::as_str).unwrap_or("")
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.raw(key);
        raw.parse()
            .map_err(|e| CliError::Config(format!("{key} = `{raw}`: {e}")))
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        match self.values.get_mut(key) {
            Some(slot) => {
                *slot = value.to_string();
                Ok(())
            }
            None => Err(CliError::Config(format!("unknown config keys: {key}"))),
        }
    }

    pub fn values(&self) -> &BTreeMap<String, String> {
        &self.values
    }

    /// `key=value` pairs in key order, space separated.
    pub fn summary(&self) -> String {
        self.values
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect::<Vec<_>>()
            .join(" ")
    }
}
