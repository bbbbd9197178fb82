//! Scenario files.
//!
//! Two equivalent formats with the same keys: `key = value` lines (`#`
//! starts a comment) or a flat JSON object. News parameters may be given
//! once, or separately for the fake and the real news item with the
//! prefixes `fake.` and `real.`; an unprefixed news key is shared by both.
//!
//! ```text
//! epsilon = 0.1
//! w = 1
//! b = 0.5
//! lambda = 0.1
//! degree_model.kind = constant
//! degree_model.mean = 28
//! fake.alpha_fake = 0.85
//! fake.alpha_real = 0.6375
//! fake.eta = 0.08
//! real.alpha_fake = 0.3
//! real.alpha_real = 0.09
//! real.eta = 0.05
//! c = 0.02
//! ```

use std::collections::BTreeMap;
use std::path::Path;

use serde_json::Value;

use crate::error::{Error, Result};
use crate::model::{DegreeModel, ModelParams, ScenarioPair, WarningPolicy};

/// Keys describing one news item; these accept the `fake.` / `real.` prefix.
pub const NEWS_KEYS: &[&str] = &[
    "lambda",
    "alpha_fake",
    "alpha_real",
    "eta",
    "eta_c",
    "degree_model.kind",
    "degree_model.mean",
    "degree_model.n",
    "degree_model.p",
    "degree_model.histogram",
];

/// Keys shared by the whole scenario.
pub const POLICY_KEYS: &[&str] = &["w", "b", "epsilon", "c"];

const PREFIXES: &[&str] = &["fake.", "real."];

#[derive(Debug, Clone, PartialEq)]
struct Entry {
    value: String,
    /// Line in the source, 0 for command-line overrides.
    line: usize,
}

/// Raw key-value pairs of a scenario, before validation.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScenarioSource {
    origin: String,
    entries: BTreeMap<String, Entry>,
}

fn is_documented(key: &str) -> bool {
    let bare = PREFIXES
        .iter()
        .find_map(|p| key.strip_prefix(p))
        .filter(|k| NEWS_KEYS.contains(k));
    bare.is_some() || NEWS_KEYS.contains(&key) || POLICY_KEYS.contains(&key)
}

impl ScenarioSource {
    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let origin = path.display().to_string();
        if text.trim_start().starts_with('{') {
            Self::parse_json(&text, &origin)
        } else {
            Self::parse_key_value(&text, &origin)
        }
    }

    pub fn parse_key_value(text: &str, origin: &str) -> Result<Self> {
        let mut src = ScenarioSource {
            origin: origin.to_string(),
            entries: BTreeMap::new(),
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, value) = content.split_once('=').ok_or_else(|| {
                src.parse_error(line, format!("expected `key = value`, got `{content}`"))
            })?;
            src.insert(key.trim(), value.trim().to_string(), line)?;
        }
        Ok(src)
    }

    pub fn parse_json(text: &str, origin: &str) -> Result<Self> {
        let mut src = ScenarioSource {
            origin: origin.to_string(),
            entries: BTreeMap::new(),
        };
        let value: Value =
            serde_json::from_str(text).map_err(|e| src.parse_error(e.line(), e.to_string()))?;
        let Value::Object(map) = value else {
            return Err(src.parse_error(1, "top level must be a JSON object".into()));
        };
        for (key, v) in map {
            let value = match v {
                Value::String(s) => s,
                Value::Number(n) => n.to_string(),
                Value::Array(items) => items
                    .iter()
                    .map(|x| x.to_string())
                    .collect::<Vec<_>>()
                    .join(","),
                other => {
                    return Err(src.parse_error(0, format!("`{key}`: unsupported value {other}")))
                }
            };
            src.insert(&key, value, 0)?;
        }
        Ok(src)
    }

    fn parse_error(&self, line: usize, message: String) -> Error {
        Error::Parse {
            path: self.origin.clone(),
            line,
            message,
        }
    }

    fn insert(&mut self, key: &str, value: String, line: usize) -> Result<()> {
        if !is_documented(key) {
            return Err(self.parse_error(line, format!("unknown key `{key}`")));
        }
        if line > 0 {
            if let Some(prev) = self.entries.get(key) {
                return Err(
                    self.parse_error(line, format!("`{key}` already set on line {}", prev.line))
                );
            }
        }
        self.entries.insert(key.to_string(), Entry { value, line });
        Ok(())
    }

    /// Applies a `key=value` override; the key must be documented.
    pub fn apply_override(&mut self, spec: &str) -> Result<()> {
        let (key, value) = spec
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override `{spec}` is not key=value")))?;
        let key = key.trim();
        if !is_documented(key) {
            return Err(Error::Config(format!("unknown override key `{key}`")));
        }
        self.entries.insert(
            key.to_string(),
            Entry {
                value: value.trim().to_string(),
                line: 0,
            },
        );
        Ok(())
    }

    fn lookup(&self, prefix: Option<&str>, key: &str) -> Option<&Entry> {
        prefix
            .and_then(|p| self.entries.get(&format!("{p}{key}")))
            .or_else(|| self.entries.get(key))
    }

    fn number(&self, prefix: Option<&str>, key: &str) -> Result<Option<f64>> {
        let Some(e) = self.lookup(prefix, key) else {
            return Ok(None);
        };
        e.value.parse::<f64>().map(Some).map_err(|_| {
            self.parse_error(e.line, format!("`{key}`: `{}` is not a number", e.value))
        })
    }

    fn required(&self, prefix: Option<&str>, key: &str) -> Result<f64> {
        self.number(prefix, key)?.ok_or_else(|| {
            Error::Config(format!(
                "{}: missing `{}{key}`",
                self.origin,
                prefix.unwrap_or("")
            ))
        })
    }

    fn integer(&self, prefix: Option<&str>, key: &str) -> Result<u32> {
        let v = self.required(prefix, key)?;
        if v.fract() != 0.0 || !(0.0..=f64::from(u32::MAX)).contains(&v) {
            let line = self.lookup(prefix, key).map_or(0, |e| e.line);
            return Err(self.parse_error(line, format!("`{key}`: {v} is not a count")));
        }
        Ok(v as u32)
    }

    fn degree_model(&self, prefix: Option<&str>) -> Result<DegreeModel> {
        let kind = self
            .lookup(prefix, "degree_model.kind")
            .map_or("constant", |e| e.value.as_str());
        match kind {
            "constant" => Ok(DegreeModel::constant(
                self.integer(prefix, "degree_model.mean")?,
            )),
            "binomial" => DegreeModel::binomial(
                self.integer(prefix, "degree_model.n")?,
                self.required(prefix, "degree_model.p")?,
            ),
            "empirical" => {
                let e = self
                    .lookup(prefix, "degree_model.histogram")
                    .ok_or_else(|| {
                        Error::Config(format!("{}: missing `degree_model.histogram`", self.origin))
                    })?;
                let counts = e
                    .value
                    .trim_matches(|c| c == '[' || c == ']')
                    .split(',')
                    .map(|t| t.trim().parse::<u64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| {
                        self.parse_error(e.line, "histogram must be comma-separated counts".into())
                    })?;
                DegreeModel::empirical(counts)
            }
            other => {
                let line = self
                    .lookup(prefix, "degree_model.kind")
                    .map_or(0, |e| e.line);
                Err(self.parse_error(
                    line,
                    format!("degree_model.kind `{other}` is not constant, binomial or empirical"),
                ))
            }
        }
    }

    fn news(&self, prefix: Option<&str>) -> Result<ModelParams> {
        let params = ModelParams::new(
            self.required(prefix, "lambda")?,
            self.required(prefix, "alpha_fake")?,
            self.required(prefix, "alpha_real")?,
            self.required(prefix, "eta")?,
            self.degree_model(prefix)?,
        )?;
        match self.number(prefix, "eta_c")? {
            Some(eta_c) => params.with_reluctance(eta_c),
            None => Ok(params),
        }
    }

    fn has_prefix(&self, prefix: &str) -> bool {
        self.entries.keys().any(|k| k.starts_with(prefix))
    }

    pub fn build(&self) -> Result<Scenario> {
        let policy = WarningPolicy::new(
            self.required(None, "w")?,
            self.number(None, "b")?.unwrap_or(1.0),
            self.required(None, "epsilon")?,
        )?;
        let fake_news = if self.has_prefix("fake.") {
            Some(self.news(Some("fake."))?)
        } else {
            None
        };
        let real_news = if self.has_prefix("real.") {
            Some(self.news(Some("real."))?)
        } else {
            None
        };
        let single = if fake_news.is_none() && real_news.is_none() {
            Some(self.news(None)?)
        } else {
            None
        };
        Ok(Scenario {
            single,
            fake_news,
            real_news,
            policy,
            c: self.number(None, "c")?,
        })
    }
}

/// A validated scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    /// Parameters when the file describes a single news item.
    pub single: Option<ModelParams>,
    pub fake_news: Option<ModelParams>,
    pub real_news: Option<ModelParams>,
    pub policy: WarningPolicy,
    pub c: Option<f64>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>, overrides: &[String]) -> Result<Self> {
        let mut src = ScenarioSource::read(path)?;
        for o in overrides {
            src.apply_override(o)?;
        }
        src.build()
    }

    /// The news item to simulate or solve: the single one, else the fake one.
    pub fn primary(&self) -> Result<&ModelParams> {
        self.single
            .as_ref()
            .or(self.fake_news.as_ref())
            .or(self.real_news.as_ref())
            .ok_or_else(|| Error::Config("scenario has no news parameters".into()))
    }

    pub fn pair(&self) -> Option<ScenarioPair> {
        Some(ScenarioPair::new(
            self.fake_news.clone()?,
            self.real_news.clone()?,
            self.policy,
        ))
    }

    pub fn require_pair(&self) -> Result<ScenarioPair> {
        self.pair().ok_or_else(|| {
            Error::Config("scenario needs both `fake.` and `real.` news parameters".into())
        })
    }
}
