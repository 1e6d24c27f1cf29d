//! Sectioned `key = value` configuration text.
//!
//! ```text
//! # comment
//! [system]
//! mu_per_hour = 60
//!
//! [scenario.nyc]
//! lambda_per_hour = 1420.6   # trailing comments are allowed
//! ```
//!
//! Keys of `[system]` are defaults inherited by every `[scenario.<name>]`.

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: key `{key}` repeated in section [{section}]")]
    DuplicateKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: unknown key `{key}` in section [{section}]")]
    UnknownKey {
        line: usize,
        section: String,
        key: String,
    },
    #[error("line {line}: key `{key}` has invalid value `{value}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    #[error("section [{section}]: missing key `{key}`")]
    Missing { section: String, key: String },
    #[error("section [{section}]: {message}")]
    Conflict { section: String, message: String },
    #[error("no [scenario.<name>] sections")]
    NoScenarios,
    #[error("reading config: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Section {
    /// `system` or the `<name>` of `[scenario.<name>]`.
    pub name: String,
    pub line: usize,
    pub entries: Vec<Entry>,
}

impl Section {
    pub fn get(&self, key: &str) -> Option<&Entry> {
        self.entries.iter().find(|e| e.key == key)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ConfigFile {
    pub system: Section,
    /// In file order.
    pub scenarios: Vec<Section>,
}

/// Line number recorded for entries set from the command line.
pub const OVERRIDE_LINE: usize = 0;

impl ConfigFile {
    /// Sets `key` in `[system]` and drops it, together with the keys in
    /// `exclusive`, from every section so the override is what resolves.
    pub fn set_override(&mut self, key: &str, value: &str, exclusive: &[&str]) {
        for sec in std::iter::once(&mut self.system).chain(self.scenarios.iter_mut()) {
            sec.entries
                .retain(|e| e.key != key && !exclusive.contains(&e.key.as_str()));
        }
        self.system.entries.push(Entry {
            key: key.into(),
            value: value.into(),
            line: OVERRIDE_LINE,
        });
    }
}

fn syntax(line: usize, message: impl Into<String>) -> ConfigError {
    ConfigError::Syntax {
        line,
        message: message.into(),
    }
}

pub fn parse_config(text: &str) -> Result<ConfigFile, ConfigError> {
    let mut file = ConfigFile {
        system: Section {
            name: "system".into(),
            ..Section::default()
        },
        scenarios: Vec::new(),
    };
    // None: before any header; Some(None): [system]; Some(Some(i)): scenario i.
    let mut current: Option<Option<usize>> = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(header) = content.strip_prefix('[') {
            let name = header
                .strip_suffix(']')
                .ok_or_else(|| syntax(line, "section header is missing `]`"))?
                .trim();
            if name == "system" {
                if file.system.line != 0 {
                    return Err(syntax(line, "[system] appears twice"));
                }
                file.system.line = line;
                current = Some(None);
            } else if let Some(s) = name.strip_prefix("scenario.") {
                let valid = !s.is_empty()
                    && s.chars()
                        .all(|ch| ch.is_ascii_alphanumeric() || ch == '_' || ch == '-');
                if !valid {
                    return Err(syntax(line, format!("invalid scenario name `{s}`")));
                }
                if file.scenarios.iter().any(|x| x.name == s) {
                    return Err(syntax(line, format!("scenario `{s}` appears twice")));
                }
                file.scenarios.push(Section {
                    name: s.to_string(),
                    line,
                    entries: Vec::new(),
                });
                current = Some(Some(file.scenarios.len() - 1));
            } else {
                return Err(syntax(
                    line,
                    format!("unknown section [{name}]; expected [system] or [scenario.<name>]"),
                ));
            }
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| syntax(line, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty()
            || !key
                .chars()
                .all(|ch| ch.is_ascii_alphanumeric() || ch == '_')
        {
            return Err(syntax(line, format!("invalid key `{key}`")));
        }
        let section = match current {
            None => return Err(syntax(line, "key outside any section")),
            Some(None) => &mut file.system,
            Some(Some(i)) => &mut file.scenarios[i],
        };
        if section.get(key).is_some() {
            return Err(ConfigError::DuplicateKey {
                line,
                section: section.name.clone(),
                key: key.into(),
            });
        }
        section.entries.push(Entry {
            key: key.into(),
            value: value.into(),
            line,
        });
    }
    Ok(file)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_comments() {
        let text = "# top\n[system]\nmu_per_hour = 60\n\n[scenario.a]\nlambda_per_hour = 2 # two\n[scenario.b-2]\nepsilon=0.01\n";
        let cfg = parse_config(text).unwrap();
        assert_eq!(cfg.system.get("mu_per_hour").unwrap().value, "60");
        assert_eq!(cfg.scenarios.len(), 2);
        let a = cfg.scenarios[0].get("lambda_per_hour").unwrap();
        assert_eq!((a.value.as_str(), a.line), ("2", 6));
        assert_eq!(cfg.scenarios[1].name, "b-2");
    }

    #[test]
    fn overrides_win_over_sections() {
        let mut cfg = parse_config("[system]\na = 1\n[scenario.x]\na = 2\nb = 3\n").unwrap();
        cfg.set_override("a", "9", &["b"]);
        assert!(cfg.scenarios[0].get("a").is_none() && cfg.scenarios[0].get("b").is_none());
        assert_eq!(cfg.system.get("a").unwrap().value, "9");
        assert_eq!(cfg.system.get("a").unwrap().line, OVERRIDE_LINE);
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("x = 1", 1),
            ("[system]\nnot a pair", 2),
            ("[system\n", 1),
            ("[other]\n", 1),
            ("[scenario.]\n", 1),
            ("[system]\n[scenario.a]\nk = 1\n\nk = 2", 5),
        ];
        for (text, line) in cases {
            let err = parse_config(text).unwrap_err();
            let got = match err {
                ConfigError::Syntax { line, .. } | ConfigError::DuplicateKey { line, .. } => line,
                other => panic!("{other:?}"),
            };
            assert_eq!(got, line, "{text:?}");
        }
    }
}
