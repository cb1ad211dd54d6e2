use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{io_err, Error, Result};

/// A value with the line it came from.
#[derive(Clone, Debug, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// Flat `key = value` text grouped under `[section]` headers.
///
/// Blank lines and lines starting with `#` are ignored; keys before the first header belong to
/// the section `""`.
#[derive(Clone, Debug, Default)]
pub struct ConfigFile {
    pub path: PathBuf,
    pub text: String,
    sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl ConfigFile {
    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        Self::parse(path, &text)
    }

    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let err = |line: usize, msg: String| Error::Config {
            path: path.to_path_buf(),
            line,
            msg,
        };
        let mut sections: BTreeMap<String, BTreeMap<String, Entry>> = BTreeMap::new();
        let mut current = String::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let s = raw.trim();
            if s.is_empty() || s.starts_with('#') {
                continue;
            }
            if let Some(rest) = s.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| err(line, format!("unterminated section header `{s}`")))?;
                let name = name.trim();
                if name.is_empty() || !name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_') {
                    return Err(err(line, format!("bad section name `{name}`")));
                }
                current = name.to_string();
                sections.entry(current.clone()).or_default();
                continue;
            }
            let (k, v) = s
                .split_once('=')
                .ok_or_else(|| err(line, format!("expected `key = value`, got `{s}`")))?;
            let (k, v) = (k.trim(), v.trim());
            if k.is_empty() {
                return Err(err(line, "empty key".into()));
            }
            let sec = sections.entry(current.clone()).or_default();
            if sec.contains_key(k) {
                return Err(err(line, format!("duplicate key `{k}` in [{current}]")));
            }
            sec.insert(
                k.to_string(),
                Entry {
                    value: v.to_string(),
                    line,
                },
            );
        }
        Ok(Self {
            path: path.to_path_buf(),
            text: text.to_string(),
            sections,
        })
    }

    pub fn has_section(&self, section: &str) -> bool {
        self.sections.contains_key(section)
    }

    pub fn entry(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }

    /// Error pointing at a key's line, or at the end of the file when the key is absent.
    pub fn error(&self, section: &str, key: &str, msg: impl Into<String>) -> Error {
        let line = self
            .entry(section, key)
            .map_or_else(|| self.text.lines().count().max(1), |e| e.line);
        Error::Config {
            path: self.path.clone(),
            line,
            msg: format!("[{section}] {key}: {}", msg.into()),
        }
    }

    pub fn get<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>> {
        match self.entry(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| self.error(section, key, format!("cannot parse `{}`", e.value))),
        }
    }

    pub fn require<T: FromStr>(&self, section: &str, key: &str) -> Result<T> {
        self.get(section, key)?
            .ok_or_else(|| self.error(section, key, "missing"))
    }

    pub fn or<T: FromStr>(&self, section: &str, key: &str, default: T) -> Result<T> {
        Ok(self.get(section, key)?.unwrap_or(default))
    }

    /// Comma-separated list.
    pub fn list<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<Vec<T>>> {
        let Some(e) = self.entry(section, key) else {
            return Ok(None);
        };
        e.value
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| self.error(section, key, format!("cannot parse `{}`", s.trim())))
            })
            .collect::<Result<Vec<T>>>()
            .map(Some)
    }

    /// Rejects keys outside `allowed` so typos surface as config errors.
    pub fn check_keys(&self, section: &str, allowed: &[&str]) -> Result<()> {
        if let Some(s) = self.sections.get(section) {
            for k in s.keys() {
                if !allowed.contains(&k.as_str()) {
                    return Err(self.error(section, k, "unknown key"));
                }
            }
        }
        Ok(())
    }

    pub fn section_names(&self) -> impl Iterator<Item = &str> {
        self.sections.keys().map(String::as_str)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_sections() {
        let c = ConfigFile::parse(
            Path::new("x.cfg"),
            "# c\n[grid]\nd = 2\nn= 64\n\n[params]\np = 1.5\n",
        )
        .unwrap();
        assert_eq!(c.require::<usize>("grid", "d").unwrap(), 2);
        assert_eq!(c.require::<f64>("params", "p").unwrap(), 1.5);
        assert!(c.get::<f64>("params", "q").unwrap().is_none());
    }

    #[test]
    fn errors_carry_lines() {
        let e = ConfigFile::parse(Path::new("x.cfg"), "[grid]\nd = 2\nnonsense\n").unwrap_err();
        assert!(matches!(e, Error::Config { line: 3, .. }), "{e}");
        let c = ConfigFile::parse(Path::new("x.cfg"), "[grid]\nd = two\n").unwrap();
        let e = c.require::<usize>("grid", "d").unwrap_err();
        assert!(e.to_string().starts_with("x.cfg:2:"), "{e}");
    }
}
