//! Flat key/value configuration.
//!
//! Two input forms are accepted: lines of `key = value` (with `#` comments),
//! or a single flat JSON object. Values are kept as text and parsed on
//! lookup; every lookup marks the key consumed so leftovers can be reported.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use crate::error::{Error, Result};
use crate::model::SystemParams;

const PARAM_KEYS: [&str; 13] = [
    "omega_m", "delta_m", "delta", "kappa", "gamma_m1", "gamma_m2", "g", "drive_e", "mod_omega",
    "mod_eps", "n_ph", "n_m1", "n_m2",
];

#[derive(Debug, Clone, Default)]
pub struct ConfigMap {
    values: BTreeMap<String, String>,
    used: BTreeSet<String>,
}

impl ConfigMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_lines(text)
        }
    }

    fn parse_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::Config(format!("JSON: {e}")))?;
        let obj = value
            .as_object()
            .ok_or_else(|| Error::Config("JSON config must be an object".into()))?;
        let mut map = Self::new();
        for (k, v) in obj {
            let text = match v {
                serde_json::Value::Number(n) => n.to_string(),
                serde_json::Value::Bool(b) => b.to_string(),
                serde_json::Value::String(s) => s.clone(),
                _ => {
                    return Err(Error::Config(format!(
                        "{k}: nested values are not supported in a flat config"
                    )))
                }
            };
            map.insert(k, &text)?;
        }
        Ok(map)
    }

    fn parse_lines(text: &str) -> Result<Self> {
        let mut map = Self::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            map.insert(k.trim(), v.trim().trim_matches('"'))?;
        }
        Ok(map)
    }

    /// Insert or override one entry, e.g. from `--set key=value`.
    pub fn insert(&mut self, key: &str, value: &str) -> Result<()> {
        if key.is_empty() {
            return Err(Error::Config("empty key".into()));
        }
        self.values.insert(key.to_string(), value.to_string());
        Ok(())
    }

    /// Parse a `key=value` assignment.
    pub fn insert_assignment(&mut self, assignment: &str) -> Result<()> {
        let (k, v) = assignment
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("`{assignment}`: expected key=value")))?;
        self.insert(k.trim(), v.trim())
    }

    pub fn contains(&self, key: &str) -> bool {
        self.values.contains_key(key)
    }

    pub fn get_str(&mut self, key: &str) -> Option<String> {
        let v = self.values.get(key)?.clone();
        self.used.insert(key.to_string());
        Some(v)
    }

    pub fn get_f64(&mut self, key: &str) -> Result<Option<f64>> {
        match self.get_str(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .map(Some)
                .ok_or_else(|| Error::Config(format!("{key}: `{s}` is not a finite number"))),
        }
    }

    pub fn get_usize(&mut self, key: &str) -> Result<Option<usize>> {
        match self.get_str(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<usize>()
                .map(Some)
                .map_err(|_| Error::Config(format!("{key}: `{s}` is not a non-negative integer"))),
        }
    }

    pub fn get_bool(&mut self, key: &str) -> Result<Option<bool>> {
        match self.get_str(key) {
            None => Ok(None),
            Some(s) => match s.as_str() {
                "true" | "1" | "yes" => Ok(Some(true)),
                "false" | "0" | "no" => Ok(Some(false)),
                _ => Err(Error::Config(format!("{key}: `{s}` is not a boolean"))),
            },
        }
    }

    /// Comma-separated list of numbers.
    pub fn get_f64_list(&mut self, key: &str) -> Result<Option<Vec<f64>>> {
        match self.get_str(key) {
            None => Ok(None),
            Some(s) => s
                .trim_matches(|c| c == '[' || c == ']')
                .split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| Error::Config(format!("{key}: bad list entry `{x}`")))
                })
                .collect::<Result<Vec<_>>>()
                .map(Some),
        }
    }

    /// Device parameters: defaults overridden by any matching keys.
    pub fn system_params(&mut self) -> Result<SystemParams> {
        let mut p = SystemParams::default();
        for key in PARAM_KEYS {
            if let Some(v) = self.get_f64(key)? {
                p.set(key, v)?;
            }
        }
        p.validate()?;
        Ok(p)
    }

    /// Keys that were supplied but never looked up.
    pub fn unused(&self) -> Vec<String> {
        self.values
            .keys()
            .filter(|k| !self.used.contains(*k))
            .cloned()
            .collect()
    }

    /// Fails with the list of unrecognized keys, if any.
    pub fn finish(&self) -> Result<()> {
        let left = self.unused();
        if left.is_empty() {
            Ok(())
        } else {
            Err(Error::Config(format!("unknown keys: {}", left.join(", "))))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_and_json_agree() {
        let mut a = ConfigMap::parse("# device\nkappa = 0.2\ndrive_e=1.5  # weaker\n").unwrap();
        let mut b = ConfigMap::parse(r#"{"kappa": 0.2, "drive_e": 1.5}"#).unwrap();
        assert_eq!(a.system_params().unwrap(), b.system_params().unwrap());
        assert_eq!(a.system_params().unwrap().kappa, 0.2);
    }

    #[test]
    fn empty_config_gives_defaults() {
        let mut c = ConfigMap::parse("").unwrap();
        assert_eq!(c.system_params().unwrap(), SystemParams::default());
        c.finish().unwrap();
    }

    #[test]
    fn unknown_keys_reported() {
        let mut c = ConfigMap::parse("kappa = 0.2\nkapa = 0.3\n").unwrap();
        c.system_params().unwrap();
        assert_eq!(c.unused(), vec!["kapa".to_string()]);
        assert!(matches!(c.finish(), Err(Error::Config(_))));
    }

    #[test]
    fn malformed_input_rejected() {
        assert!(ConfigMap::parse("kappa 0.2").is_err());
        assert!(ConfigMap::parse(r#"{"a": {"b": 1}}"#).is_err());
        assert!(ConfigMap::parse("[1, 2]").is_err());
        let mut c = ConfigMap::parse("kappa = fast").unwrap();
        assert!(c.system_params().is_err());
        let mut c = ConfigMap::parse("kappa = -1").unwrap();
        assert!(matches!(c.system_params(), Err(Error::InvalidParams(_))));
    }

    #[test]
    fn assignments_override() {
        let mut c = ConfigMap::parse("mod_eps = 0.5").unwrap();
        c.insert_assignment("mod_eps=0").unwrap();
        c.insert_assignment("sweep = 0, 0.05,0.1").unwrap();
        assert_eq!(c.system_params().unwrap().mod_eps, 0.0);
        assert_eq!(c.get_f64_list("sweep").unwrap().unwrap(), vec![0.0, 0.05, 0.1]);
        assert!(c.insert_assignment("novalue").is_err());
    }

    #[test]
    fn typed_lookups() {
        let mut c = ConfigMap::parse("n = 7\nflag = yes\nbad = 1.5").unwrap();
        assert_eq!(c.get_usize("n").unwrap(), Some(7));
        assert_eq!(c.get_bool("flag").unwrap(), Some(true));
        assert!(c.get_usize("bad").is_err());
        assert_eq!(c.get_f64("missing").unwrap(), None);
    }
}
