//! Flat `key = value` experiment configuration.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Clone, Debug)]
struct Entry {
    value: String,
    /// 1-based line in the config file; 0 for command-line overrides.
    line: usize,
}

#[derive(Clone, Debug, Default)]
pub struct Config {
    entries: BTreeMap<String, Entry>,
}

fn config_err(line: usize, msg: impl std::fmt::Display) -> CliError {
    if line == 0 {
        CliError::Config(format!("command line: {msg}"))
    } else {
        CliError::Config(format!("line {line}: {msg}"))
    }
}

impl Config {
    /// Parses `key = value` lines. Blank lines and lines starting with `#`
    /// are ignored; duplicate keys are errors.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let mut entries = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            let Some((key, value)) = s.split_once('=') else {
                return Err(config_err(
                    line,
                    format!("expected `key = value`, got `{s}`"),
                ));
            };
            let key = key.trim();
            if key.is_empty() || !key.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                return Err(config_err(line, format!("invalid key `{key}`")));
            }
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = entries.insert(key.to_string(), entry) {
                return Err(config_err(
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
        }
        Ok(Config { entries })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text).map_err(|e| match e {
            CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    /// Sets `key` as if given on the command line.
    pub fn set(&mut self, key: &str, value: String) {
        self.entries
            .insert(key.to_string(), Entry { value, line: 0 });
    }

    /// Rejects keys outside `allowed`.
    pub fn check_keys(&self, allowed: &[&str]) -> Result<(), CliError> {
        for (key, e) in &self.entries {
            if !allowed.contains(&key.as_str()) {
                let mut known: Vec<&str> = allowed.to_vec();
                known.sort_unstable();
                return Err(config_err(
                    e.line,
                    format!("unknown key `{key}` (allowed: {})", known.join(", ")),
                ));
            }
        }
        Ok(())
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.contains_key(key)
    }

    pub fn raw(&self, key: &str) -> Option<&str> {
        self.entries.get(key).map(|e| e.value.as_str())
    }

    pub fn opt<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(e) => e.value.parse().map(Some).map_err(|_| {
                config_err(e.line, format!("key `{key}`: cannot parse `{}`", e.value))
            }),
        }
    }

    pub fn get<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError> {
        Ok(self.opt(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str, why: &str) -> Result<T, CliError> {
        self.opt(key)?
            .ok_or_else(|| CliError::Config(format!("missing required key `{key}` ({why})")))
    }

    pub fn flag(&self, key: &str, default: bool) -> Result<bool, CliError> {
        match self.entries.get(key) {
            None => Ok(default),
            Some(e) => match e.value.as_str() {
                "true" | "yes" | "1" => Ok(true),
                "false" | "no" | "0" => Ok(false),
                v => Err(config_err(
                    e.line,
                    format!("key `{key}`: expected true or false, got `{v}`"),
                )),
            },
        }
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Option<Vec<T>>, CliError> {
        let Some(e) = self.entries.get(key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim().parse().map_err(|_| {
                    config_err(
                        e.line,
                        format!("key `{key}`: cannot parse list item `{}`", s.trim()),
                    )
                })
            })
            .collect::<Result<Vec<T>, _>>()
            .map(Some)
    }

    /// One of `choices`; `default` when absent.
    pub fn choice<'a>(
        &self,
        key: &str,
        choices: &[&'a str],
        default: Option<&'a str>,
    ) -> Result<&'a str, CliError> {
        match self.entries.get(key) {
            None => default.ok_or_else(|| {
                CliError::Config(format!(
                    "missing required key `{key}` (one of {})",
                    choices.join(", ")
                ))
            }),
            Some(e) => choices
                .iter()
                .copied()
                .find(|c| *c == e.value)
                .ok_or_else(|| {
                    config_err(
                        e.line,
                        format!(
                            "key `{key}`: `{}` is not one of {}",
                            e.value,
                            choices.join(", ")
                        ),
                    )
                }),
        }
    }

    /// SHA-256 over the subcommand and the sorted entries, leaving out keys
    /// that do not affect results.
    pub fn hash(&self, command: &str, ignored: &[&str]) -> String {
        let mut canon = format!("command={command}\n");
        for (k, e) in &self.entries {
            if !ignored.contains(&k.as_str()) {
                let _ = writeln!(canon, "{k}={}", e.value);
            }
        }
        let digest = Sha256::digest(canon.as_bytes());
        digest.iter().fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn msg(e: CliError) -> String {
        match e {
            CliError::Config(m) => m,
            CliError::Runtime(m) => panic!("expected a config error, got runtime: {m}"),
        }
    }

    #[test]
    fn parses_comments_and_whitespace() {
        let c = Config::parse("# header\n\n r = 0.5 \nns=1, 2,3\nexact = true\n").unwrap();
        assert_eq!(c.get::<f64>("r", 0.0).unwrap(), 0.5);
        assert_eq!(c.list::<usize>("ns").unwrap().unwrap(), vec![1, 2, 3]);
        assert!(c.flag("exact", false).unwrap());
        assert!(!c.flag("other", false).unwrap());
        assert!(c.flag("other", true).unwrap());
    }

    #[test]
    fn errors_carry_line_numbers() {
        assert!(msg(Config::parse("a = 1\nbroken\n").unwrap_err()).starts_with("line 2:"));
        assert!(msg(Config::parse("a = 1\na = 2\n").unwrap_err()).contains("duplicate key `a`"));
        let c = Config::parse("# x\nr = abc\n").unwrap();
        assert!(msg(c.opt::<f64>("r").unwrap_err()).starts_with("line 2: key `r`"));
        let c = Config::parse("r = 1\n\nbogus = 2\n").unwrap();
        let m = msg(c.check_keys(&["r"]).unwrap_err());
        assert!(m.starts_with("line 3: unknown key `bogus`"), "{m}");
    }

    #[test]
    fn missing_keys_are_named() {
        let c = Config::parse("").unwrap();
        assert!(msg(c.require::<f64>("r", "fast mode").unwrap_err()).contains("`r`"));
        assert!(msg(c.choice("field", &["a", "b"], None).unwrap_err()).contains("`field`"));
    }

    #[test]
    fn hash_ignores_order_and_listed_keys() {
        let a = Config::parse("x = 1\ny = 2\nout = a\n").unwrap();
        let b = Config::parse("y = 2\nx = 1\nout = b\n").unwrap();
        assert_eq!(a.hash("m", &["out"]), b.hash("m", &["out"]));
        assert_ne!(a.hash("m", &[]), b.hash("m", &[]));
        assert_ne!(a.hash("m", &["out"]), a.hash("n", &["out"]));
        assert_eq!(a.hash("m", &[]).len(), 64);
    }
}
