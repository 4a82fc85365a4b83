//! Problem configs: flat `key = value` text with dotted keys or `[section]`
//! headers, or the same keys as nested JSON.
//!
//! ```text
//! # binomial example
//! market.crr.s0 = 1000
//! market.crr.u = 0.1
//! market.crr.d = -0.2
//! market.crr.p = 1/4
//! market.crr.n = 3
//! claim.call.strike = 600
//! loss.family = power
//! loss.gamma = 1/2
//! loss.alpha = 5
//! budget.x0 = 150
//! ```

use std::collections::BTreeMap;
use std::fmt;

use shortfall_core::bs::BsMarket;
use shortfall_core::crr::CrrMarket;
use shortfall_core::trinomial::TrinomialMarket;
use shortfall_core::{ClaimSpec, Error, LossFamily, LossSpec, Scalar};

const KEYS: &[&str] = &[
    "market.bs.s",
    "market.bs.mu",
    "market.bs.sigma",
    "market.bs.T",
    "market.crr.s0",
    "market.crr.u",
    "market.crr.d",
    "market.crr.p",
    "market.crr.n",
    "market.tri.s",
    "market.tri.a",
    "market.tri.b",
    "market.tri.c",
    "market.tri.p1",
    "market.tri.p2",
    "market.tri.p3",
    "claim.call.strike",
    "claim.table",
    "loss.family",
    "loss.gamma",
    "loss.lambda",
    "loss.alpha",
    "budget.x0",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub field: Option<String>,
    pub message: String,
}

impl ConfigError {
    fn at(line: Option<usize>, field: Option<&str>, message: impl Into<String>) -> Self {
        Self {
            line,
            field: field.map(str::to_string),
            message: message.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "config error")?;
        if let Some(line) = self.line {
            write!(f, " at line {line}")?;
        }
        if let Some(field) = &self.field {
            write!(f, " in `{field}`")?;
        }
        write!(f, ": {}", self.message)
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RawValue {
    Scalar(String),
    List(Vec<String>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub value: RawValue,
    pub line: Option<usize>,
}

/// Parsed but untyped config, keyed by full dotted name.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RawConfig {
    pub entries: BTreeMap<String, Entry>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    Bs,
    Crr,
    Tri,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Bs => "bs",
            ModelKind::Crr => "crr",
            ModelKind::Tri => "tri",
        }
    }
}

impl RawConfig {
    /// Parses either format; JSON is recognized by a leading `{`.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        if text.trim_start().starts_with('{') {
            Self::parse_json(text)
        } else {
            Self::parse_text(text)
        }
    }

    pub fn parse_text(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RawConfig::default();
        let mut section = String::new();
        for (index, raw) in text.lines().enumerate() {
            let line = index + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if body.starts_with('[') && !body.contains('=') {
                let name = body
                    .strip_prefix('[')
                    .and_then(|b| b.strip_suffix(']'))
                    .map(str::trim)
                    .filter(|n| valid_key(n))
                    .ok_or_else(|| ConfigError::at(Some(line), None, format!("malformed section header `{body}`")))?;
                section = name.to_string();
                continue;
            }
            let (key, value) = body
                .split_once('=')
                .ok_or_else(|| ConfigError::at(Some(line), None, format!("expected `key = value`, found `{body}`")))?;
            let key = key.trim();
            if !valid_key(key) {
                return Err(ConfigError::at(Some(line), None, format!("invalid key `{key}`")));
            }
            // Inside a section, keys are relative unless they are already full names.
            let key = match format!("{section}.{key}") {
                _ if section.is_empty() => key.to_string(),
                full if !KEYS.contains(&full.as_str()) && KEYS.contains(&key) => key.to_string(),
                full => full,
            };
            let value = parse_text_value(value.trim()).map_err(|m| ConfigError::at(Some(line), Some(&key), m))?;
            cfg.insert(key, value, Some(line))?;
        }
        Ok(cfg)
    }

    pub fn parse_json(text: &str) -> Result<Self, ConfigError> {
        let root: serde_json::Value = serde_json::from_str(text)
            .map_err(|e| ConfigError::at(Some(e.line()), None, format!("invalid JSON: {e}")))?;
        let mut cfg = RawConfig::default();
        cfg.flatten_json("", &root)?;
        Ok(cfg)
    }

    fn flatten_json(&mut self, prefix: &str, value: &serde_json::Value) -> Result<(), ConfigError> {
        use serde_json::Value as J;
        let scalar = |v: &J| match v {
            J::Number(n) => Some(n.to_string()),
            J::String(s) => Some(s.clone()),
            _ => None,
        };
        match value {
            J::Object(map) => {
                for (k, v) in map {
                    let key = if prefix.is_empty() {
                        k.clone()
                    } else {
                        format!("{prefix}.{k}")
                    };
                    self.flatten_json(&key, v)?;
                }
                Ok(())
            }
            J::Array(items) => {
                let list = items
                    .iter()
                    .map(|v| scalar(v).ok_or_else(|| ConfigError::at(None, Some(prefix), "list items must be numbers or strings")))
                    .collect::<Result<Vec<_>, _>>()?;
                self.insert(prefix.to_string(), RawValue::List(list), None)
            }
            other => {
                let text = scalar(other)
                    .ok_or_else(|| ConfigError::at(None, Some(prefix), format!("unsupported JSON value `{other}`")))?;
                self.insert(prefix.to_string(), RawValue::Scalar(text), None)
            }
        }
    }

    fn insert(&mut self, key: String, value: RawValue, line: Option<usize>) -> Result<(), ConfigError> {
        if !KEYS.contains(&key.as_str()) {
            return Err(ConfigError::at(line, Some(&key), "unknown key"));
        }
        if let Some(prev) = self.entries.get(&key) {
            let msg = match prev.line {
                Some(l) => format!("duplicate key, first set at line {l}"),
                None => "duplicate key".to_string(),
            };
            return Err(ConfigError::at(line, Some(&key), msg));
        }
        self.entries.insert(key, Entry { value, line });
        Ok(())
    }

    /// The single market fragment present.
    pub fn model(&self) -> Result<ModelKind, ConfigError> {
        let present: Vec<ModelKind> = [ModelKind::Bs, ModelKind::Crr, ModelKind::Tri]
            .into_iter()
            .filter(|m| {
                let prefix = format!("market.{}.", m.name());
                self.entries.keys().any(|k| k.starts_with(&prefix))
            })
            .collect();
        match present.as_slice() {
            [one] => Ok(*one),
            [] => Err(ConfigError::at(None, Some("market"), "no market section (expected market.bs, market.crr or market.tri)")),
            _ => Err(ConfigError::at(
                None,
                Some("market"),
                format!(
                    "exactly one market section allowed, found {}",
                    present.iter().map(|m| format!("market.{}", m.name())).collect::<Vec<_>>().join(", ")
                ),
            )),
        }
    }

    fn entry(&self, key: &str) -> Result<&Entry, ConfigError> {
        self.entries
            .get(key)
            .ok_or_else(|| ConfigError::at(None, Some(key), "missing required key"))
    }

    fn text(&self, key: &str) -> Result<Option<(&str, Option<usize>)>, ConfigError> {
        match self.entries.get(key) {
            None => Ok(None),
            Some(Entry {
                value: RawValue::Scalar(s),
                line,
            }) => Ok(Some((s.as_str(), *line))),
            Some(Entry { line, .. }) => Err(ConfigError::at(*line, Some(key), "expected a single value, found a list")),
        }
    }

    fn number<T: Scalar>(&self, key: &str) -> Result<T, ConfigError> {
        let entry = self.entry(key)?;
        match &entry.value {
            RawValue::Scalar(s) => parse_number(s).ok_or_else(|| ConfigError::at(entry.line, Some(key), format!("`{s}` is not a number"))),
            RawValue::List(_) => Err(ConfigError::at(entry.line, Some(key), "expected a number, found a list")),
        }
    }

    fn optional_number<T: Scalar>(&self, key: &str) -> Result<Option<T>, ConfigError> {
        if self.entries.contains_key(key) {
            self.number(key).map(Some)
        } else {
            Ok(None)
        }
    }

    fn line_of(&self, key: &str) -> Option<usize> {
        self.entries.get(key).and_then(|e| e.line)
    }

    fn fragment_error(&self, key: &str, err: Error) -> ConfigError {
        ConfigError::at(self.line_of(key), Some(key), err.to_string())
    }

    pub fn loss<T: Scalar>(&self) -> Result<LossSpec<T>, ConfigError> {
        let family = self.text("loss.family")?;
        let alpha = self.optional_number::<T>("loss.alpha")?.unwrap_or_else(T::zero);
        let gamma = self.optional_number::<T>("loss.gamma")?;
        let lambda = self.optional_number::<T>("loss.lambda")?;
        let family = match family.map(|(f, line)| (f.to_ascii_lowercase(), line)) {
            None => match lambda {
                Some(lambda) => LossFamily::Scaled {
                    lambda,
                    gamma: gamma.unwrap_or_else(T::one),
                },
                None => LossFamily::Power {
                    gamma: gamma.unwrap_or_else(T::one),
                },
            },
            Some((f, _)) if f == "power" || f == "identity" => {
                if lambda.is_some() {
                    return Err(ConfigError::at(self.line_of("loss.lambda"), Some("loss.lambda"), "the power family takes no scale"));
                }
                LossFamily::Power {
                    gamma: gamma.unwrap_or_else(T::one),
                }
            }
            Some((f, _)) if f == "scaled" => LossFamily::Scaled {
                lambda: lambda.ok_or_else(|| ConfigError::at(None, Some("loss.lambda"), "the scaled family needs a scale"))?,
                gamma: gamma.unwrap_or_else(T::one),
            },
            Some((f, line)) => {
                return Err(ConfigError::at(line, Some("loss.family"), format!("unknown family `{f}` (expected power or scaled)")));
            }
        };
        LossSpec::new(family, alpha).map_err(|e| self.fragment_error("loss.family", e))
    }

    pub fn claim<T: Scalar>(&self) -> Result<ClaimSpec<T>, ConfigError> {
        let strike = self.entries.contains_key("claim.call.strike");
        let table = self.entries.contains_key("claim.table");
        match (strike, table) {
            (true, true) => Err(ConfigError::at(self.line_of("claim.table"), Some("claim"), "give either claim.call.strike or claim.table, not both")),
            (false, false) => Err(ConfigError::at(None, Some("claim"), "missing claim (claim.call.strike or claim.table)")),
            (true, false) => {
                ClaimSpec::call(self.number("claim.call.strike")?).map_err(|e| self.fragment_error("claim.call.strike", e))
            }
            (false, true) => {
                let entry = self.entry("claim.table")?;
                let RawValue::List(items) = &entry.value else {
                    return Err(ConfigError::at(entry.line, Some("claim.table"), "expected a list `[h1, h2, ...]`"));
                };
                let values = items
                    .iter()
                    .enumerate()
                    .map(|(i, s)| {
                        parse_number(s).ok_or_else(|| {
                            ConfigError::at(entry.line, Some("claim.table"), format!("entry {} (`{s}`) is not a number", i + 1))
                        })
                    })
                    .collect::<Result<Vec<T>, _>>()?;
                ClaimSpec::table(values).map_err(|e| self.fragment_error("claim.table", e))
            }
        }
    }

    pub fn budget<T: Scalar>(&self) -> Result<T, ConfigError> {
        let x0: T = self.number("budget.x0")?;
        if x0 < T::zero() {
            return Err(ConfigError::at(self.line_of("budget.x0"), Some("budget.x0"), format!("budget must be nonnegative, got {x0}")));
        }
        Ok(x0)
    }

    fn reject_foreign(&self, model: ModelKind) -> Result<(), ConfigError> {
        if let Some(key) = self
            .entries
            .keys()
            .find(|k| k.starts_with("market.") && !k.starts_with(&format!("market.{}.", model.name())))
        {
            return Err(ConfigError::at(self.line_of(key), Some(key), format!("does not belong to the {} market", model.name())));
        }
        Ok(())
    }

    pub fn bs_market(&self) -> Result<BsMarket, ConfigError> {
        self.reject_foreign(ModelKind::Bs)?;
        BsMarket::new(
            self.number("market.bs.s")?,
            self.number("market.bs.mu")?,
            self.number("market.bs.sigma")?,
            self.number("market.bs.T")?,
        )
        .map_err(|e| self.fragment_error("market.bs", e))
    }

    pub fn crr_market<T: Scalar>(&self) -> Result<CrrMarket<T>, ConfigError> {
        self.reject_foreign(ModelKind::Crr)?;
        let s0 = self.number("market.crr.s0")?;
        let up = self.number("market.crr.u")?;
        let down = self.number("market.crr.d")?;
        let p = self.number("market.crr.p")?;
        let n: f64 = self.number("market.crr.n")?;
        if n < 0.0 || n.fract() != 0.0 || n > 1e6 {
            return Err(ConfigError::at(self.line_of("market.crr.n"), Some("market.crr.n"), format!("period count must be a nonnegative integer, got {n}")));
        }
        CrrMarket::new(s0, up, down, p, n as usize).map_err(|e| self.fragment_error("market.crr", e))
    }

    pub fn tri_market<T: Scalar>(&self) -> Result<TrinomialMarket<T>, ConfigError> {
        self.reject_foreign(ModelKind::Tri)?;
        TrinomialMarket::new(
            self.number("market.tri.s")?,
            self.number("market.tri.a")?,
            self.number("market.tri.b")?,
            self.number("market.tri.c")?,
            [self.number("market.tri.p1")?, self.number("market.tri.p2")?, self.number("market.tri.p3")?],
        )
        .map_err(|e| self.fragment_error("market.tri", e))
    }
}

fn valid_key(key: &str) -> bool {
    !key.is_empty()
        && key.split('.').all(|part| !part.is_empty() && part.chars().all(|c| c.is_ascii_alphanumeric() || c == '_'))
}

fn unquote(s: &str) -> &str {
    s.strip_prefix('"').and_then(|s| s.strip_suffix('"')).unwrap_or(s)
}

fn parse_text_value(value: &str) -> Result<RawValue, String> {
    if value.is_empty() {
        return Err("missing value".into());
    }
    if let Some(inner) = value.strip_prefix('[') {
        let inner = inner.strip_suffix(']').ok_or("list is missing its closing `]`")?;
        let items: Vec<String> = inner
            .split(',')
            .map(|s| unquote(s.trim()).to_string())
            .filter(|s| !s.is_empty())
            .collect();
        return Ok(RawValue::List(items));
    }
    Ok(RawValue::Scalar(unquote(value).to_string()))
}

fn parse_number<T: Scalar>(text: &str) -> Option<T> {
    T::parse_decimal(text.trim())
}

/// Typed problem for one model.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec<M, T> {
    pub market: M,
    pub claim: ClaimSpec<T>,
    pub loss: LossSpec<T>,
    pub x0: T,
}

impl RawConfig {
    pub fn bs_problem(&self) -> Result<ProblemSpec<BsMarket, f64>, ConfigError> {
        let claim = self.claim::<f64>()?;
        if claim.strike().is_none() {
            return Err(ConfigError::at(self.line_of("claim.table"), Some("claim.table"), "the Black-Scholes model takes a call claim (claim.call.strike)"));
        }
        Ok(ProblemSpec {
            market: self.bs_market()?,
            claim,
            loss: self.loss()?,
            x0: self.budget()?,
        })
    }

    pub fn crr_problem<T: Scalar>(&self) -> Result<ProblemSpec<CrrMarket<T>, T>, ConfigError> {
        let market = self.crr_market::<T>()?;
        let claim = self.claim::<T>()?;
        if market.periods <= 30 {
            claim
                .check_outcomes(market.path_count())
                .map_err(|e| self.fragment_error("claim.table", e))?;
        }
        Ok(ProblemSpec {
            market,
            claim,
            loss: self.loss()?,
            x0: self.budget()?,
        })
    }

    pub fn tri_problem<T: Scalar>(&self) -> Result<ProblemSpec<TrinomialMarket<T>, T>, ConfigError> {
        let market = self.tri_market::<T>()?;
        let claim = self.claim::<T>()?;
        claim.check_outcomes(3).map_err(|e| self.fragment_error("claim.table", e))?;
        Ok(ProblemSpec {
            market,
            claim,
            loss: self.loss()?,
            x0: self.budget()?,
        })
    }
}
