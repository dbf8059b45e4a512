//! Flat dotted key-value configs: one `key = value` per line, `#` comments.

use std::collections::BTreeMap;

use delcon::dist::TypeDistribution;

#[derive(Debug, Clone, Default)]
pub struct Config {
    map: BTreeMap<String, String>,
}

impl Config {
    pub fn parse(text: &str) -> Result<Self, String> {
        let mut map = BTreeMap::new();
        for (k, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("line {}: expected 'key = value', got '{line}'", k + 1))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(format!("line {}: empty key", k + 1));
            }
            map.insert(key.to_string(), value.trim().to_string());
        }
        if map.is_empty() {
            return Err("config is empty".into());
        }
        Ok(Config { map })
    }

    pub fn set(&mut self, key: &str, value: String) {
        self.map.insert(key.to_string(), value);
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.map.get(key).map(String::as_str)
    }

    pub fn require(&self, key: &str) -> Result<&str, String> {
        self.get(key).ok_or_else(|| format!("missing required key '{key}'"))
    }

    pub fn get_f64(&self, key: &str, default: f64) -> Result<f64, String> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("key '{key}': bad number '{v}' ({e})")),
        }
    }

    pub fn get_usize(&self, key: &str, default: usize) -> Result<usize, String> {
        match self.get(key) {
            None => Ok(default),
            Some(v) => v.parse().map_err(|e| format!("key '{key}': bad integer '{v}' ({e})")),
        }
    }
}

/// Distribution specs: `uniform`, `power:K`, `texp:LAMBDA`, `csv:PATH`.
pub fn parse_dist(spec: &str, grid_resolution: usize) -> Result<TypeDistribution, String> {
    let (name, arg) = match spec.split_once(':') {
        Some((n, a)) => (n.trim(), Some(a.trim())),
        None => (spec.trim(), None),
    };
    match (name, arg) {
        ("uniform", None) => Ok(TypeDistribution::uniform(grid_resolution)),
        ("power", Some(a)) => {
            let k: f64 = a.parse().map_err(|e| format!("power exponent '{a}': {e}"))?;
            TypeDistribution::power(k, grid_resolution).map_err(|e| e.to_string())
        }
        ("texp", Some(a)) => {
            let l: f64 = a.parse().map_err(|e| format!("texp rate '{a}': {e}"))?;
            TypeDistribution::truncated_exponential(l, grid_resolution).map_err(|e| e.to_string())
        }
        ("csv", Some(path)) => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| format!("distribution file '{path}': {e}"))?;
            TypeDistribution::from_csv(&text, grid_resolution).map_err(|e| e.to_string())
        }
        _ => Err(format!(
            "unknown distribution '{spec}' (expected uniform, power:K, texp:LAMBDA, csv:PATH)"
        )),
    }
}

/// 12-significant-digit numeric format shared by all emitted CSVs.
pub fn sig(x: f64) -> String {
    format!("{x:.11e}")
}
