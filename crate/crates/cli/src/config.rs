//! Flat key=value configuration with [section] headers, canonicalized to
//! sorted `section.key=value` lines. The 64-bit FNV-1a hash of the
//! canonical form is embedded in every output so results can be traced
//! back to their exact inputs.

use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error: {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError {
        message: msg.into(),
    })
}

#[derive(Debug, Clone, Default)]
pub struct RunConfig {
    entries: BTreeMap<String, String>,
}

impl RunConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut entries = BTreeMap::new();
        let mut section = String::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            if line.starts_with('[') {
                if !line.ends_with(']') || line.len() < 3 {
                    return err(format!("line {}: malformed section header", lineno + 1));
                }
                section = line[1..line.len() - 1].trim().to_string();
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                return err(format!("line {}: expected key=value", lineno + 1));
            };
            let key = key.trim();
            if key.is_empty() {
                return err(format!("line {}: empty key", lineno + 1));
            }
            let full = if section.is_empty() {
                key.to_string()
            } else {
                format!("{section}.{key}")
            };
            if entries
                .insert(full.clone(), value.trim().to_string())
                .is_some()
            {
                return err(format!("line {}: duplicate key {full}", lineno + 1));
            }
        }
        Ok(Self { entries })
    }

    pub fn set(&mut self, key: &str, value: impl ToString) {
        self.entries.insert(key.to_string(), value.to_string());
    }

    /// Canonical form: sorted `key=value` lines.
    pub fn canonical(&self) -> String {
        let mut s = String::new();
        for (k, v) in &self.entries {
            s.push_str(k);
            s.push('=');
            s.push_str(v);
            s.push('\n');
        }
        s
    }

    pub fn hash(&self) -> u64 {
        fnv1a(self.canonical().as_bytes())
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(String::as_str)
    }

    pub fn f64(&self, key: &str) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => err(format!("missing key {key}")),
            Some(v) => v
                .parse()
                .map_err(|_| ConfigError {
                    message: format!("key {key}: not a number: {v}"),
                }),
        }
    }

    pub fn f64_or(&self, key: &str, default: f64) -> Result<f64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.f64(key),
        }
    }

    pub fn usize(&self, key: &str) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => err(format!("missing key {key}")),
            Some(v) => v.parse().map_err(|_| ConfigError {
                message: format!("key {key}: not an integer: {v}"),
            }),
        }
    }

    pub fn usize_or(&self, key: &str, default: usize) -> Result<usize, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(_) => self.usize(key),
        }
    }

    pub fn u64_or(&self, key: &str, default: u64) -> Result<u64, ConfigError> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|_| ConfigError {
                message: format!("key {key}: not an integer: {v}"),
            }),
        }
    }

    /// Comma-separated list of numbers; must be nonempty.
    pub fn f64_list(&self, key: &str) -> Result<Vec<f64>, ConfigError> {
        let Some(v) = self.get(key) else {
            return err(format!("missing key {key}"));
        };
        let vals: Result<Vec<f64>, _> = v
            .split(',')
            .map(|s| s.trim().parse::<f64>())
            .collect();
        match vals {
            Ok(vals) if !vals.is_empty() && !v.trim().is_empty() => Ok(vals),
            _ => err(format!("key {key}: expected comma-separated numbers, got: {v}")),
        }
    }
}

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv1a_known_vectors() {
        // classic FNV-1a test vectors
        assert_eq!(fnv1a(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a(b"foobar"), 0x85944171f73967e8);
    }

    #[test]
    fn parse_sections_and_keys() {
        let cfg = RunConfig::parse("top = 1\n[sim]\nn_paths = 100\nseed=7\n").unwrap();
        assert_eq!(cfg.get("top"), Some("1"));
        assert_eq!(cfg.usize("sim.n_paths").unwrap(), 100);
        assert_eq!(cfg.u64_or("sim.seed", 0).unwrap(), 7);
    }

    #[test]
    fn canonical_is_order_independent() {
        let a = RunConfig::parse("[s]\nx=1\ny=2\n").unwrap();
        let b = RunConfig::parse("[s]\ny = 2\nx =1\n").unwrap();
        assert_eq!(a.canonical(), b.canonical());
        assert_eq!(a.hash(), b.hash());
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let e = RunConfig::parse("ok = 1\nnot a pair\n").unwrap_err();
        assert!(e.message.contains("line 2"), "{}", e.message);
        let e = RunConfig::parse("[unclosed\n").unwrap_err();
        assert!(e.message.contains("line 1"), "{}", e.message);
        let e = RunConfig::parse("a=1\na=2\n").unwrap_err();
        assert!(e.message.contains("duplicate"), "{}", e.message);
    }

    #[test]
    fn list_parsing() {
        let cfg = RunConfig::parse("ts = -6, -2.5, 1.5\nempty =\n").unwrap();
        assert_eq!(cfg.f64_list("ts").unwrap(), vec![-6.0, -2.5, 1.5]);
        assert!(cfg.f64_list("empty").is_err());
        assert!(cfg.f64_list("absent").is_err());
    }
}
