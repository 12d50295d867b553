//! Key-value config files: `key = value` lines, `#` comments. Flags override
//! config entries; config entries fill in missing flags.

use std::collections::HashMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct Config {
    entries: HashMap<String, String>,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| format!("cannot read config {}: {e}", path.display()))?;
        let mut entries = HashMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| format!("config line {} is not `key = value`: {raw:?}", lineno + 1))?;
            entries.insert(normalize(key.trim()), value.trim().to_string());
        }
        Ok(Config { entries })
    }

    fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(&normalize(key)).map(String::as_str)
    }

    /// Parsed config value; `Err` carries a message for exit code 2.
    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, String> {
        match self.raw(key) {
            None => Ok(None),
            Some(s) => s
                .parse::<T>()
                .map(Some)
                .map_err(|_| format!("config value for {key} is not valid: {s:?}")),
        }
    }
}

/// Keys are case-insensitive and dash/underscore-insensitive.
fn normalize(key: &str) -> String {
    key.to_ascii_lowercase().replace('_', "-")
}
