//! Scenario files.
//!
//! A scenario is a JSON document with a `schema_version` field. Unknown keys
//! are rejected everywhere, and every error names the offending key.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

pub const SCHEMA_VERSION: u32 = 1;

/// A config problem, reported with exit status 2.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemaError {
    pub key: String,
    pub message: String,
}

impl SchemaError {
    pub fn new(key: impl Into<String>, message: impl Into<String>) -> Self {
        Self { key: key.into(), message: message.into() }
    }
}

impl fmt::Display for SchemaError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.key.is_empty() {
            write!(f, "invalid config: {}", self.message)
        } else {
            write!(f, "invalid config at `{}`: {}", self.key, self.message)
        }
    }
}

impl std::error::Error for SchemaError {}

/// A temperature: a non-negative number or the string `"inf"`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Temperature(pub f64);

impl Serialize for Temperature {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if self.0.is_infinite() {
            s.serialize_str("inf")
        } else {
            s.serialize_f64(self.0)
        }
    }
}

impl<'de> Deserialize<'de> for Temperature {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        struct V;
        impl Visitor<'_> for V {
            type Value = Temperature;
            fn expecting(&self, f: &mut fmt::Formatter) -> fmt::Result {
                f.write_str("a non-negative number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> Result<Temperature, E> {
                Ok(Temperature(v))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> Result<Temperature, E> {
                Ok(Temperature(v as f64))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> Result<Temperature, E> {
                Ok(Temperature(v as f64))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> Result<Temperature, E> {
                match v {
                    "inf" | "infinity" => Ok(Temperature(f64::INFINITY)),
                    other => Err(E::invalid_value(de::Unexpected::Str(other), &self)),
                }
            }
        }
        d.deserialize_any(V)
    }
}

impl Default for Temperature {
    fn default() -> Self {
        Temperature(0.0)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LeadConfig {
    #[serde(default)]
    pub temperature: Temperature,
    pub mu: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TightBindingConfig {
    pub sites: usize,
    pub gamma_left: f64,
    pub gamma_right: f64,
    pub left: LeadConfig,
    pub right: LeadConfig,
}

fn one() -> f64 {
    1.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct XYConfig {
    pub sites: usize,
    #[serde(default = "one")]
    pub coupling: f64,
    pub anisotropy: f64,
    pub field: f64,
    pub delta_h: f64,
    pub gamma_left: f64,
    pub gamma_right: f64,
    #[serde(default)]
    pub temperature_left: Temperature,
    #[serde(default)]
    pub temperature_right: Temperature,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReservoirConfig {
    /// Matrix CSV with the `n × n` particle block of `Γ_ν`.
    pub gamma: PathBuf,
    #[serde(default)]
    pub temperature: Temperature,
    pub mu: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MatricesConfig {
    /// Matrix CSV with the hopping block `h`.
    pub h: PathBuf,
    /// Matrix CSV with the pairing block `Δ`; zero when absent.
    #[serde(default)]
    pub delta: Option<PathBuf>,
    pub reservoirs: Vec<ReservoirConfig>,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelConfig {
    TightBinding(TightBindingConfig),
    Xy(XYConfig),
    Matrices(MatricesConfig),
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialConfig {
    #[default]
    Vacuum,
    Filled,
    InfiniteTemperature,
    Thermal {
        temperature: Temperature,
        #[serde(default)]
        mu: f64,
    },
}

/// Either explicit `values` or `points` evenly spaced values between
/// `start` and `stop`.
#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeGrid {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum Spacing {
    #[default]
    Linear,
    Log,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Axis {
    pub parameter: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub start: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stop: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub points: Option<usize>,
    #[serde(default)]
    pub spacing: Spacing,
}

fn max_points() -> usize {
    10_000
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ScanConfig {
    pub x: Axis,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y: Option<Axis>,
    #[serde(default = "max_points")]
    pub max_points: usize,
}

#[derive(Clone, Copy, Debug, Default, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum NoiseKind {
    /// `N_∞` from the asymptotic memory kernel.
    #[default]
    Exact,
    /// Each reservoir either completely filled (`μ > 0`) or empty.
    InfiniteBias,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct SteadyConfig {
    #[serde(default)]
    pub noise: NoiseKind,
    /// Bond `(bond − 1, bond)` through which currents are measured;
    /// defaults to the middle of the chain.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bond: Option<usize>,
}

fn default_modes() -> usize {
    400
}

fn default_bandwidth() -> f64 {
    20.0
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default = "default_modes")]
    pub modes: usize,
    #[serde(default = "default_bandwidth")]
    pub bandwidth: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { modes: default_modes(), bandwidth: default_bandwidth() }
    }
}

fn d_rel() -> f64 {
    1e-8
}
fn d_abs() -> f64 {
    1e-10
}
fn d_steady() -> f64 {
    1e-10
}
fn d_zero() -> f64 {
    1e-10
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "d_rel")]
    pub ode_rel: f64,
    #[serde(default = "d_abs")]
    pub ode_abs: f64,
    /// Bound on the residual of the stationarity equation.
    #[serde(default = "d_steady")]
    pub steady: f64,
    /// Rates below this magnitude count as zero.
    #[serde(default = "d_zero")]
    pub zero_rate: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self { ode_rel: d_rel(), ode_abs: d_abs(), steady: d_steady(), zero_rate: d_zero() }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub model: ModelConfig,
    #[serde(default)]
    pub initial_state: InitialConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub times: Option<TimeGrid>,
    #[serde(default)]
    pub tolerances: Tolerances,
    #[serde(default)]
    pub steady: SteadyConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scan: Option<ScanConfig>,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// Parses and validates a scenario. Relative matrix paths are resolved
/// against `base`.
pub fn parse(text: &str, base: &Path) -> Result<Config, SchemaError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let mut cfg: Config = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        if path == "model" {
            if let Some(inner) = model_error(text) {
                return inner;
            }
        }
        let key = if path == "." { String::new() } else { path };
        SchemaError::new(key, e.into_inner().to_string())
    })?;
    if cfg.schema_version != SCHEMA_VERSION {
        return Err(SchemaError::new(
            "schema_version",
            format!("unsupported version {} (this build reads {SCHEMA_VERSION})", cfg.schema_version),
        ));
    }
    if let ModelConfig::Matrices(m) = &mut cfg.model {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut m.h);
        if let Some(d) = m.delta.as_mut() {
            fix(d);
        }
        for r in &mut m.reservoirs {
            fix(&mut r.gamma);
        }
    }
    validate(&cfg)?;
    Ok(cfg)
}

/// serde buffers internally tagged enums, which hides the path of an error
/// inside `model`. Deserializing the selected variant on its own recovers it.
fn model_error(text: &str) -> Option<SchemaError> {
    fn located<T: serde::de::DeserializeOwned>(v: serde_json::Value) -> Option<SchemaError> {
        serde_path_to_error::deserialize::<_, T>(v).err().map(|e| {
            let path = e.path().to_string();
            let key = if path == "." { "model".to_string() } else { format!("model.{path}") };
            SchemaError::new(key, e.into_inner().to_string())
        })
    }
    let doc: serde_json::Value = serde_json::from_str(text).ok()?;
    let mut model = doc.get("model")?.as_object()?.clone();
    let kind = model.remove("kind")?;
    let v = serde_json::Value::Object(model);
    match kind.as_str()? {
        "tight_binding" => located::<TightBindingConfig>(v),
        "xy" => located::<XYConfig>(v),
        "matrices" => located::<MatricesConfig>(v),
        _ => None,
    }
}

fn finite(key: &str, v: f64) -> Result<(), SchemaError> {
    if v.is_finite() {
        Ok(())
    } else {
        Err(SchemaError::new(key, "must be finite"))
    }
}

fn non_negative(key: &str, v: f64) -> Result<(), SchemaError> {
    finite(key, v)?;
    if v < 0.0 {
        return Err(SchemaError::new(key, format!("must be >= 0, got {v}")));
    }
    Ok(())
}

fn temperature(key: &str, t: Temperature) -> Result<(), SchemaError> {
    if t.0.is_nan() || t.0 < 0.0 {
        return Err(SchemaError::new(key, format!("must be >= 0 or \"inf\", got {}", t.0)));
    }
    Ok(())
}

fn sites(key: &str, n: usize) -> Result<(), SchemaError> {
    if n < 2 {
        return Err(SchemaError::new(key, format!("a chain needs at least 2 sites, got {n}")));
    }
    Ok(())
}

fn positive(key: &str, v: f64) -> Result<(), SchemaError> {
    finite(key, v)?;
    if v <= 0.0 {
        return Err(SchemaError::new(key, format!("must be > 0, got {v}")));
    }
    Ok(())
}

fn validate(cfg: &Config) -> Result<(), SchemaError> {
    match &cfg.model {
        ModelConfig::TightBinding(tb) => {
            sites("model.sites", tb.sites)?;
            non_negative("model.gamma_left", tb.gamma_left)?;
            non_negative("model.gamma_right", tb.gamma_right)?;
            temperature("model.left.temperature", tb.left.temperature)?;
            temperature("model.right.temperature", tb.right.temperature)?;
            finite("model.left.mu", tb.left.mu)?;
            finite("model.right.mu", tb.right.mu)?;
        }
        ModelConfig::Xy(xy) => {
            sites("model.sites", xy.sites)?;
            finite("model.coupling", xy.coupling)?;
            finite("model.field", xy.field)?;
            finite("model.delta_h", xy.delta_h)?;
            if !(0.0..=1.0).contains(&xy.anisotropy) {
                return Err(SchemaError::new("model.anisotropy", format!("must lie in [0, 1], got {}", xy.anisotropy)));
            }
            non_negative("model.gamma_left", xy.gamma_left)?;
            non_negative("model.gamma_right", xy.gamma_right)?;
            temperature("model.temperature_left", xy.temperature_left)?;
            temperature("model.temperature_right", xy.temperature_right)?;
        }
        ModelConfig::Matrices(m) => {
            if m.reservoirs.is_empty() {
                return Err(SchemaError::new("model.reservoirs", "at least one reservoir is required"));
            }
            for (i, r) in m.reservoirs.iter().enumerate() {
                temperature(&format!("model.reservoirs[{i}].temperature"), r.temperature)?;
                finite(&format!("model.reservoirs[{i}].mu"), r.mu)?;
            }
        }
    }
    if let InitialConfig::Thermal { temperature: t, mu } = cfg.initial_state {
        temperature("initial_state.temperature", t)?;
        finite("initial_state.mu", mu)?;
    }
    if let Some(g) = &cfg.times {
        time_values(g)?;
    }
    let tol = &cfg.tolerances;
    positive("tolerances.ode_rel", tol.ode_rel)?;
    positive("tolerances.ode_abs", tol.ode_abs)?;
    positive("tolerances.steady", tol.steady)?;
    positive("tolerances.zero_rate", tol.zero_rate)?;
    if let Some(s) = &cfg.scan {
        let nx = axis_values("scan.x", &s.x)?.len();
        let ny = match &s.y {
            Some(y) => axis_values("scan.y", y)?.len(),
            None => 1,
        };
        if nx * ny > s.max_points {
            return Err(SchemaError::new("scan.max_points", format!("grid has {} points, cap is {}", nx * ny, s.max_points)));
        }
    }
    if cfg.oracle.modes == 0 {
        return Err(SchemaError::new("oracle.modes", "must be positive"));
    }
    positive("oracle.bandwidth", cfg.oracle.bandwidth)?;
    Ok(())
}

fn spaced(key: &str, start: Option<f64>, stop: Option<f64>, points: Option<usize>, spacing: Spacing) -> Result<Vec<f64>, SchemaError> {
    let start = start.ok_or_else(|| SchemaError::new(format!("{key}.start"), "missing (or give `values`)"))?;
    let stop = stop.ok_or_else(|| SchemaError::new(format!("{key}.stop"), "missing (or give `values`)"))?;
    let points = points.ok_or_else(|| SchemaError::new(format!("{key}.points"), "missing (or give `values`)"))?;
    finite(&format!("{key}.start"), start)?;
    finite(&format!("{key}.stop"), stop)?;
    if points == 0 {
        return Err(SchemaError::new(format!("{key}.points"), "must be positive"));
    }
    if points == 1 {
        return Ok(vec![start]);
    }
    let k = (points - 1) as f64;
    match spacing {
        Spacing::Linear => Ok((0..points).map(|i| start + (stop - start) * i as f64 / k).collect()),
        Spacing::Log => {
            if !(start > 0.0 && stop > 0.0) {
                return Err(SchemaError::new(format!("{key}.spacing"), "log spacing needs positive start and stop"));
            }
            Ok((0..points).map(|i| start * (stop / start).powf(i as f64 / k)).collect())
        }
    }
}

/// The time grid: finite, non-negative and increasing.
pub fn time_values(g: &TimeGrid) -> Result<Vec<f64>, SchemaError> {
    let v = match &g.values {
        Some(v) => {
            if g.start.is_some() || g.stop.is_some() || g.points.is_some() {
                return Err(SchemaError::new("times.values", "give either `values` or `start`/`stop`/`points`"));
            }
            v.clone()
        }
        None => spaced("times", Some(g.start.unwrap_or(0.0)), g.stop, g.points, Spacing::Linear)?,
    };
    if v.is_empty() {
        return Err(SchemaError::new("times.values", "empty time grid"));
    }
    for (i, &t) in v.iter().enumerate() {
        if !t.is_finite() || t < 0.0 {
            return Err(SchemaError::new(format!("times.values[{i}]"), format!("times must be finite and >= 0, got {t}")));
        }
        if i > 0 && t <= v[i - 1] {
            return Err(SchemaError::new(format!("times.values[{i}]"), "times must be strictly increasing"));
        }
    }
    Ok(v)
}

pub fn axis_values(key: &str, a: &Axis) -> Result<Vec<f64>, SchemaError> {
    let v = match &a.values {
        Some(v) => {
            if a.start.is_some() || a.stop.is_some() || a.points.is_some() {
                return Err(SchemaError::new(format!("{key}.values"), "give either `values` or `start`/`stop`/`points`"));
            }
            v.clone()
        }
        None => spaced(key, a.start, a.stop, a.points, a.spacing)?,
    };
    if v.is_empty() {
        return Err(SchemaError::new(format!("{key}.values"), "empty axis"));
    }
    for (i, x) in v.iter().enumerate() {
        finite(&format!("{key}.values[{i}]"), *x)?;
    }
    Ok(v)
}
