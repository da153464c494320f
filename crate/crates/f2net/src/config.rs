//! Flat `key = value` configuration files, with `F2NET_SEED` overriding the
//! configured seed.

use indexmap::IndexMap;
use std::path::Path;

use crate::error::{F2NetError, Result};

/// Parsed key/value pairs in file order. Blank lines and `#` comments are
/// ignored; later duplicates win.
#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: IndexMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Config> {
        let mut entries = IndexMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line.split_once('=').ok_or_else(|| {
                F2NetError::Config(format!("line {}: expected `key = value`", lineno + 1))
            })?;
            let key = key.trim();
            if key.is_empty() {
                return Err(F2NetError::Config(format!("line {}: empty key", lineno + 1)));
            }
            entries.insert(key.to_string(), value.trim().to_string());
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Config> {
        Config::parse(&std::fs::read_to_string(path)?)
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|s| s.as_str())
    }

    pub fn set(&mut self, key: &str, value: &str) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize> {
        self.parse_or(key, default)
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64> {
        self.parse_or(key, default)
    }

    pub fn str_or<'a>(&'a self, key: &str, default: &'a str) -> &'a str {
        self.get(key).unwrap_or(default)
    }

    fn parse_or<T: std::str::FromStr>(&self, key: &str, default: T) -> Result<T> {
        match self.get(key) {
            None => Ok(default),
            Some(raw) => raw
                .parse()
                .map_err(|_| F2NetError::Config(format!("bad value `{raw}` for `{key}`"))),
        }
    }

    /// The configured seed, unless `F2NET_SEED` is set in the environment.
    pub fn seed(&self, default: u64) -> Result<u64> {
        if let Ok(raw) = std::env::var("F2NET_SEED") {
            return raw
                .parse()
                .map_err(|_| F2NetError::Config(format!("bad F2NET_SEED `{raw}`")));
        }
        self.parse_or("seed", default)
    }

    /// Canonical `key = value` rendering, used for config digests.
    pub fn canonical(&self) -> String {
        let mut keys: Vec<&String> = self.entries.keys().collect();
        keys.sort();
        let mut out = String::new();
        for k in keys {
            out.push_str(k);
            out.push_str(" = ");
            out.push_str(&self.entries[k]);
            out.push('\n');
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_pairs_with_comments() {
        let cfg = Config::parse("# header\nlr = 2.5e-4\n\nepochs= 30\nmode =csa\n").unwrap();
        assert_eq!(cfg.f64_or("lr", 0.0).unwrap(), 2.5e-4);
        assert_eq!(cfg.usize_or("epochs", 0).unwrap(), 30);
        assert_eq!(cfg.str_or("mode", "x"), "csa");
        assert_eq!(cfg.usize_or("absent", 7).unwrap(), 7);
    }

    #[test]
    fn rejects_malformed_lines_and_values() {
        assert!(Config::parse("just words\n").is_err());
        assert!(Config::parse("= 3\n").is_err());
        let cfg = Config::parse("epochs = many\n").unwrap();
        assert!(cfg.usize_or("epochs", 1).is_err());
    }

    #[test]
    fn env_var_overrides_config_seed() {
        let cfg = Config::parse("seed = 11\n").unwrap();
        std::env::remove_var("F2NET_SEED");
        assert_eq!(cfg.seed(0).unwrap(), 11);
        std::env::set_var("F2NET_SEED", "42");
        assert_eq!(cfg.seed(0).unwrap(), 42);
        std::env::remove_var("F2NET_SEED");
    }

    #[test]
    fn canonical_form_is_order_independent() {
        let a = Config::parse("a = 1\nb = 2\n").unwrap();
        let b = Config::parse("b = 2\na = 1\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
    }
}
