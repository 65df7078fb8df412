use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::Path;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Keys accepted in a config file.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "sigma",
    "thresholds",
    "steps",
    "lr",
    "temperature",
    "dim",
    "lambda1",
    "alpha",
    "lambda2",
    "lambda3",
    "margin",
    "count-min",
    "count-max",
    "links",
    "uniform",
    "k-min",
    "k-max",
    "dims",
    "step",
    "seeds",
];

/// `key = value` settings read from an optional file. Flags given on the
/// command line win over these, and these win over built-in defaults.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

impl Settings {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Argument(format!("config line {}: expected key = value", i + 1)))?;
            let key = k.trim().replace('_', "-");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(Error::Argument(format!("config line {}: unknown key {key:?}", i + 1)));
            }
            values.insert(key, v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Argument(format!("cannot read config {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Flag value if given, else the config value, else `default`.
    pub fn pick<T>(&self, flag: Option<T>, key: &str, default: T) -> Result<T>
    where
        T: FromStr,
        T::Err: Display,
    {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(s) => s.parse().map_err(|e| Error::Argument(format!("config key {key:?} = {s:?}: {e}"))),
            None => Ok(default),
        }
    }

    /// Comma-separated list variant of [`Settings::pick`].
    pub fn pick_list(&self, flag: Option<Vec<f64>>, key: &str, default: Vec<f64>) -> Result<Vec<f64>> {
        if let Some(v) = flag {
            return Ok(v);
        }
        match self.values.get(key) {
            Some(s) => s
                .split(',')
                .map(|x| x.trim().parse::<f64>().map_err(|e| Error::Argument(format!("config key {key:?}: {e}"))))
                .collect(),
            None => Ok(default),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn precedence_flag_config_default() {
        let s = Settings::parse("lr = 0.5\n# comment\nsteps=3 # trailing\n").unwrap();
        assert_eq!(s.pick(Some(1.0), "lr", 9.0).unwrap(), 1.0);
        assert_eq!(s.pick(None, "lr", 9.0).unwrap(), 0.5);
        assert_eq!(s.pick::<usize>(None, "steps", 9).unwrap(), 3);
        assert_eq!(s.pick(None, "sigma", 0.255).unwrap(), 0.255);
    }

    #[test]
    fn rejects_unknown_and_malformed() {
        assert!(Settings::parse("bogus = 1").is_err());
        assert!(Settings::parse("lr 1").is_err());
        let s = Settings::parse("lr = abc").unwrap();
        assert!(s.pick(None, "lr", 1.0).is_err());
    }

    #[test]
    fn lists() {
        let s = Settings::parse("thresholds = 0.5, 0.75,0.95").unwrap();
        assert_eq!(s.pick_list(None, "thresholds", vec![]).unwrap(), vec![0.5, 0.75, 0.95]);
    }
}
