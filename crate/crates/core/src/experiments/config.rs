//! `key = value` run configuration files.
//!
//! UTF-8 text, one assignment per line; `#` starts a comment, blank lines are
//! ignored. Keys are the long flag names without the leading dashes.

use std::collections::BTreeMap;

pub const KEYS: [&str; 15] = [
    "scenario", "N", "M", "n", "eps", "seed", "trials", "steps", "out", "exact", "threads", "input", "target",
    "depth", "kmax",
];

pub fn parse_config(text: &str) -> Result<BTreeMap<String, String>, String> {
    let mut out = BTreeMap::new();
    for (number, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| format!("config line {}: expected `key = value`, found {raw:?}", number + 1))?;
        let (key, value) = (key.trim(), value.trim());
        if !KEYS.contains(&key) {
            return Err(format!("config line {}: unknown key {key:?}", number + 1));
        }
        if value.is_empty() {
            return Err(format!("config line {}: empty value for {key:?}", number + 1));
        }
        if out.insert(key.to_string(), value.to_string()).is_some() {
            return Err(format!("config line {}: duplicate key {key:?}", number + 1));
        }
    }
    Ok(out)
}
