//! `key = value` configuration with environment and flag overrides.

use std::collections::BTreeMap;
use std::path::Path;

use crate::dynamics::{EquationMode, Scheme, SimConfig};
use crate::error::{Error, Result};
use crate::experiments::InitialCondition;

/// Prefix of environment variables that override configuration keys.
pub const ENV_PREFIX: &str = "GMNSE_";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Real,
    Count,
    List,
    Flag,
    Text,
    Scheme,
}

impl Kind {
    fn expected(self) -> &'static str {
        match self {
            Kind::Real => "a real number",
            Kind::Count => "a nonnegative integer",
            Kind::List => "a comma-separated list of positive integers",
            Kind::Flag => "true or false",
            Kind::Text => "a string",
            Kind::Scheme => "explicit-corrector or exponential-euler",
        }
    }
}

const KEYS: &[(&str, Kind)] = &[
    ("nu", Kind::Real),
    ("N", Kind::Real),
    ("delta", Kind::Real),
    ("lambda", Kind::Real),
    ("noise_n", Kind::Count),
    ("noise_r", Kind::Real),
    ("galerkin_m", Kind::Count),
    ("dt", Kind::Real),
    ("T", Kind::Real),
    ("seed", Kind::Count),
    ("grid", Kind::Count),
    ("scheme", Kind::Scheme),
    ("replicas", Kind::Count),
    ("n_values", Kind::List),
    ("init_kmax", Kind::Real),
    ("init_decay", Kind::Real),
    ("init_amplitude", Kind::Real),
    ("init_seed", Kind::Count),
    ("init_file", Kind::Text),
    ("halvings", Kind::Count),
    ("pairs", Kind::Count),
    ("p", Kind::Real),
    ("gamma", Kind::Real),
    ("alpha", Kind::Real),
    ("b", Kind::Real),
    ("control_amplitude", Kind::Real),
    ("dt_check", Kind::Flag),
];

/// Names of every accepted key.
pub fn known_keys() -> impl Iterator<Item = &'static str> {
    KEYS.iter().map(|(k, _)| *k)
}

/// A typed configuration value.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Real(f64),
    Count(u64),
    List(Vec<u32>),
    Flag(bool),
    Text(String),
    Scheme(Scheme),
}

impl std::fmt::Display for Value {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Value::Real(x) => write!(f, "{x:?}"),
            Value::Count(n) => write!(f, "{n}"),
            Value::List(v) => {
                let items: Vec<String> = v.iter().map(|n| n.to_string()).collect();
                write!(f, "{}", items.join(","))
            }
            Value::Flag(b) => write!(f, "{b}"),
            Value::Text(s) => write!(f, "{s}"),
            Value::Scheme(s) => write!(f, "{}", s.id()),
        }
    }
}

fn parse_value(key: &str, kind: Kind, raw: &str) -> Result<Value> {
    let mismatch = || Error::TypeMismatch {
        key: key.to_string(),
        expected: kind.expected(),
        value: raw.to_string(),
    };
    Ok(match kind {
        Kind::Real => {
            let x: f64 = raw.parse().map_err(|_| mismatch())?;
            if !x.is_finite() {
                return Err(mismatch());
            }
            Value::Real(x)
        }
        Kind::Count => Value::Count(raw.parse().map_err(|_| mismatch())?),
        Kind::List => {
            let inner = raw.trim_start_matches('[').trim_end_matches(']');
            let items = inner
                .split(',')
                .map(|s| s.trim().parse::<u32>().ok().filter(|&n| n > 0))
                .collect::<Option<Vec<u32>>>()
                .ok_or_else(mismatch)?;
            Value::List(items)
        }
        Kind::Flag => Value::Flag(raw.parse().map_err(|_| mismatch())?),
        Kind::Text => Value::Text(raw.to_string()),
        Kind::Scheme => Value::Scheme(Scheme::from_id(raw).ok_or_else(mismatch)?),
    })
}

/// Resolved key/value settings. Later sources override earlier ones via
/// [`Settings::merge`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Settings {
    values: BTreeMap<String, Value>,
}

impl Settings {
    /// Parses `key = value` lines; `#` starts a comment.
    pub fn parse(text: &str) -> Result<Settings> {
        let mut s = Settings::default();
        for (i, line) in text.lines().enumerate() {
            let content = line.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (key, raw) = content.split_once('=').ok_or_else(|| Error::Syntax {
                line: i + 1,
                text: line.to_string(),
            })?;
            s.set_from(key.trim(), raw.trim(), &format!("line {}", i + 1))?;
        }
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Settings> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| Error::Io { path: Some(path.to_path_buf()), source })?;
        Settings::parse(&text)
    }

    /// Settings from `GMNSE_<KEY>` variables; the key match ignores case.
    pub fn from_env_vars(vars: impl IntoIterator<Item = (String, String)>) -> Result<Settings> {
        let mut s = Settings::default();
        for (name, raw) in vars {
            let Some(suffix) = name.strip_prefix(ENV_PREFIX) else { continue };
            let key = known_keys()
                .find(|k| k.eq_ignore_ascii_case(suffix))
                .ok_or_else(|| Error::UnknownKey {
                    key: suffix.to_string(),
                    origin: format!("environment variable {name}"),
                })?;
            s.set_from(key, raw.trim(), &format!("environment variable {name}"))?;
        }
        Ok(s)
    }

    pub fn from_env() -> Result<Settings> {
        Settings::from_env_vars(std::env::vars())
    }

    /// Sets one key from its textual value.
    pub fn set(&mut self, key: &str, raw: &str) -> Result<()> {
        self.set_from(key, raw, "override")
    }

    fn set_from(&mut self, key: &str, raw: &str, origin: &str) -> Result<()> {
        let kind = KEYS
            .iter()
            .find(|(k, _)| *k == key)
            .map(|(_, kind)| *kind)
            .ok_or_else(|| Error::UnknownKey { key: key.to_string(), origin: origin.to_string() })?;
        self.values.insert(key.to_string(), parse_value(key, kind, raw)?);
        Ok(())
    }

    /// Overlays `other`, whose values win.
    pub fn merge(&mut self, other: &Settings) {
        for (k, v) in &other.values {
            self.values.insert(k.clone(), v.clone());
        }
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, key: &str) -> Option<&Value> {
        self.values.get(key)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.values.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn real(&self, key: &str) -> Option<f64> {
        match self.values.get(key)? {
            Value::Real(x) => Some(*x),
            Value::Count(n) => Some(*n as f64),
            _ => None,
        }
    }

    pub fn count(&self, key: &str) -> Option<u64> {
        match self.values.get(key)? {
            Value::Count(n) => Some(*n),
            _ => None,
        }
    }

    pub fn list(&self, key: &str) -> Option<Vec<u32>> {
        match self.values.get(key)? {
            Value::List(v) => Some(v.clone()),
            _ => None,
        }
    }

    pub fn flag(&self, key: &str) -> Option<bool> {
        match self.values.get(key)? {
            Value::Flag(b) => Some(*b),
            _ => None,
        }
    }

    pub fn text(&self, key: &str) -> Option<&str> {
        match self.values.get(key)? {
            Value::Text(s) => Some(s),
            _ => None,
        }
    }

    fn small_count(&self, key: &str) -> Result<Option<u32>> {
        self.count(key)
            .map(|n| {
                u32::try_from(n).map_err(|_| Error::InvalidParameter(format!("{key} = {n} is too large")))
            })
            .transpose()
    }

    /// Applies the simulation keys to `cfg` and validates the result for `mode`.
    pub fn apply_sim(&self, cfg: &mut SimConfig, mode: EquationMode) -> Result<()> {
        if let Some(x) = self.real("nu") {
            cfg.nu = x;
        }
        if let Some(x) = self.real("N") {
            cfg.cutoff.threshold = x;
        }
        if let Some(x) = self.real("delta") {
            cfg.cutoff.delta = x;
        }
        if let Some(x) = self.real("lambda") {
            cfg.cutoff.lambda = x;
        }
        if let Some(n) = self.small_count("noise_n")? {
            cfg.noise_n = n;
        }
        if let Some(x) = self.real("noise_r") {
            cfg.noise_r = x;
        }
        if let Some(m) = self.small_count("galerkin_m")? {
            cfg.galerkin_m = m;
        }
        if let Some(x) = self.real("dt") {
            cfg.dt = x;
        }
        if let Some(x) = self.real("T") {
            cfg.t_final = x;
        }
        if let Some(s) = self.count("seed") {
            cfg.seed = s;
        }
        if let Some(g) = self.count("grid") {
            cfg.grid = Some(g as usize);
        }
        if let Some(Value::Scheme(s)) = self.values.get("scheme") {
            cfg.scheme = *s;
        }
        cfg.validate(mode)
    }

    /// Applies the `init_*` keys to a random initial condition.
    pub fn apply_initial(&self, ic: &mut InitialCondition) {
        if let Some(x) = self.real("init_kmax") {
            ic.kmax = x;
        }
        if let Some(x) = self.real("init_decay") {
            ic.decay = x;
        }
        if let Some(x) = self.real("init_amplitude") {
            ic.amplitude = x;
        }
        if let Some(s) = self.count("init_seed") {
            ic.seed = s;
        }
    }
}
