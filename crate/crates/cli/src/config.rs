//! `key = value` run configuration. Command-line flags mirror the keys and
//! take precedence; `RELPROBE_SEED` overrides a seed from the file.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::CliError;

pub const SEED_ENV: &str = "RELPROBE_SEED";

#[derive(Debug, Default)]
pub struct Settings {
    values: BTreeMap<String, String>,
}

pub fn parse_config(text: &str, origin: &str, allowed: &[&str]) -> Result<BTreeMap<String, String>, CliError> {
    let mut out = BTreeMap::new();
    for (n, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let at = || format!("{origin}:{}", n + 1);
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CliError::Usage(format!("{}: expected key = value", at())))?;
        let key = key.trim().replace('-', "_");
        if !allowed.contains(&key.as_str()) {
            return Err(CliError::Usage(format!(
                "{}: unknown key `{key}` (allowed: {})",
                at(),
                allowed.join(", ")
            )));
        }
        if out.insert(key.clone(), value.trim().to_string()).is_some() {
            return Err(CliError::Usage(format!("{}: duplicate key `{key}`", at())));
        }
    }
    Ok(out)
}

impl Settings {
    /// Reads `path` if given, then applies the seed environment variable
    /// when `seed` is an allowed key.
    pub fn load(path: Option<&Path>, allowed: &[&str]) -> Result<Self, CliError> {
        let mut values = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("cannot read config {}: {e}", p.display())))?;
                parse_config(&text, &p.display().to_string(), allowed)?
            }
            None => BTreeMap::new(),
        };
        if allowed.contains(&"seed") {
            if let Ok(seed) = std::env::var(SEED_ENV) {
                values.insert("seed".into(), seed);
            }
        }
        Ok(Self { values })
    }

    /// Command-line value for `key`, replacing anything from the file.
    pub fn flag(&mut self, key: &str, value: Option<impl Display>) -> &mut Self {
        if let Some(v) = value {
            self.values.insert(key.into(), v.to_string());
        }
        self
    }

    /// Boolean switch; only an explicit `--flag` overrides the file.
    pub fn switch(&mut self, key: &str, on: bool) -> &mut Self {
        if on {
            self.values.insert(key.into(), "true".into());
        }
        self
    }

    pub fn str(&self, key: &str) -> Option<&str> {
        self.values.get(key).map(String::as_str).filter(|s| !s.is_empty())
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>, CliError>
    where
        T::Err: Display,
    {
        self.str(key)
            .map(|v| v.parse::<T>().map_err(|e| CliError::Usage(format!("bad value for `{key}`: {e}"))))
            .transpose()
    }

    pub fn or<T: FromStr>(&self, key: &str, default: T) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        Ok(self.get(key)?.unwrap_or(default))
    }

    pub fn require<T: FromStr>(&self, key: &str) -> Result<T, CliError>
    where
        T::Err: Display,
    {
        self.get(key)?
            .ok_or_else(|| CliError::Usage(format!("missing `{key}` (flag --{} or config key)", key.replace('_', "-"))))
    }

    pub fn path(&self, key: &str) -> Result<PathBuf, CliError> {
        self.require::<PathBuf>(key)
    }

    pub fn bool(&self, key: &str) -> Result<bool, CliError> {
        match self.str(key) {
            None => Ok(false),
            Some("true" | "yes" | "1" | "on") => Ok(true),
            Some("false" | "no" | "0" | "off") => Ok(false),
            Some(other) => Err(CliError::Usage(format!("bad value for `{key}`: `{other}` is not a boolean"))),
        }
    }

    /// Comma-separated list; empty when unset.
    pub fn list<T: FromStr>(&self, key: &str) -> Result<Vec<T>, CliError>
    where
        T::Err: Display,
    {
        self.str(key)
            .map(|v| {
                v.split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(|s| s.parse::<T>().map_err(|e| CliError::Usage(format!("bad item `{s}` in `{key}`: {e}"))))
                    .collect()
            })
            .unwrap_or_else(|| Ok(Vec::new()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_comments_and_dashes() {
        let m = parse_config("# run\nseed = 4\nn-train=10 # inline\n\n", "run.cfg", &["seed", "n_train"]).unwrap();
        assert_eq!(m["seed"], "4");
        assert_eq!(m["n_train"], "10");
    }

    #[test]
    fn rejects_unknown_and_duplicate_keys() {
        let e = parse_config("colour = red\n", "run.cfg", &["seed"]).unwrap_err();
        assert!(matches!(e, CliError::Usage(ref m) if m.contains("run.cfg:1") && m.contains("colour")));
        assert!(parse_config("seed=1\nseed=2\n", "c", &["seed"]).is_err());
        assert!(parse_config("just words\n", "c", &["seed"]).is_err());
    }

    #[test]
    fn flags_override_file() {
        let mut s = Settings {
            values: parse_config("epochs = 3\nmasking = true\n", "c", &["epochs", "masking"]).unwrap(),
        };
        s.flag("epochs", Some(9)).flag("lr", None::<f64>).switch("masking", false);
        assert_eq!(s.require::<usize>("epochs").unwrap(), 9);
        assert!(s.bool("masking").unwrap());
        assert_eq!(s.get::<f64>("lr").unwrap(), None);
        assert!(s.require::<f64>("lr").is_err());
    }

    #[test]
    fn lists() {
        let mut s = Settings::default();
        s.flag("grid", Some("0, 0.1,1"));
        assert_eq!(s.list::<f64>("grid").unwrap(), vec![0.0, 0.1, 1.0]);
        assert!(s.list::<String>("missing").unwrap().is_empty());
    }
}
