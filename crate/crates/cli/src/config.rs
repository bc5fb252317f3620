//! Flat `key = value` config files. Values act as defaults; command-line
//! flags always win.

use anyhow::{bail, Context, Result};
use std::collections::BTreeMap;
use std::path::Path;

#[derive(Debug, Default, Clone)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        let mut values = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let Some((key, value)) = line.split_once('=') else {
                bail!(
                    "config {} line {}: expected key = value",
                    path.display(),
                    lineno + 1
                );
            };
            values.insert(key.trim().to_string(), value.trim().to_string());
        }
        Ok(ConfigFile { values })
    }

    pub fn get<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        match self.values.get(key) {
            None => Ok(None),
            Some(raw) => match raw.parse() {
                Ok(v) => Ok(Some(v)),
                Err(e) => bail!("config key {key} = {raw:?}: {e}"),
            },
        }
    }
}

/// flag value > config value > built-in default.
pub fn resolve<T: std::str::FromStr + Copy>(
    flag: Option<T>,
    config: &ConfigFile,
    key: &str,
    default: T,
) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(flag.or(config.get(key)?).unwrap_or(default))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    #[test]
    fn parses_and_resolves_with_flag_priority() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "# comment\nepochs = 42\nscale=0.5").unwrap();
        let cfg = ConfigFile::load(Some(file.path())).unwrap();
        assert_eq!(resolve(None, &cfg, "epochs", 7usize).unwrap(), 42);
        assert_eq!(resolve(Some(3usize), &cfg, "epochs", 7).unwrap(), 3);
        assert_eq!(resolve(None, &cfg, "missing", 7usize).unwrap(), 7);
        assert_eq!(resolve(None, &cfg, "scale", 1.0f64).unwrap(), 0.5);
    }

    #[test]
    fn bad_lines_and_values_error() {
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "nonsense").unwrap();
        assert!(ConfigFile::load(Some(file.path())).is_err());
        let mut file = tempfile::NamedTempFile::new().unwrap();
        writeln!(file, "epochs = banana").unwrap();
        let cfg = ConfigFile::load(Some(file.path())).unwrap();
        assert!(cfg.get::<usize>("epochs").is_err());
    }
}
