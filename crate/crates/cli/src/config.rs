//! Run configuration: a JSON document in network-table units (per km², per km,
//! dB), merged with command-line overrides and converted to SI once.

use std::path::{Path, PathBuf};

use riscov_core::params::{db_to_linear, per_km2_to_per_m2, per_km_to_per_m, ParamError};
use riscov_core::{gamma_from_budget, AngleMode, Estimator, LinkBudget, NetworkParams, SimConfig, Variant};
use riscov_core::AnalyticOptions;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("invalid configuration: {0}")]
    Parse(String),
    #[error("invalid override `{0}`: expected key=value")]
    Override(String),
    #[error("override `{key}` conflicts with a non-object value at `{at}`")]
    OverridePath { key: String, at: String },
    #[error("invalid parameters: {}", .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("; "))]
    Params(Vec<ParamError>),
    #[error("invalid value for {key}: {reason}")]
    Invalid { key: String, reason: String },
    #[error("unknown sweep parameter `{0}`")]
    UnknownSweepParam(String),
    #[error("a sweep needs an output path (output.path or --out)")]
    MissingSweepOutput,
}

fn invalid(key: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { key: key.to_string(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VariantChoice {
    Paper,
    Consistent,
    #[default]
    Both,
}

impl VariantChoice {
    pub fn variants(self) -> &'static [Variant] {
        match self {
            VariantChoice::Paper => &[Variant::Paper],
            VariantChoice::Consistent => &[Variant::Consistent],
            VariantChoice::Both => &Variant::ALL,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    #[default]
    Csv,
    Jsonl,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimSection {
    /// 0 leaves Monte Carlo out of sweeps; `simulate` and `compare` then use [`DEFAULT_TRIALS`].
    pub trials: u64,
    pub seed: u64,
    pub estimator: Estimator,
    pub angle_mode: AngleMode,
    pub epsilon_trunc: f64,
    pub workers: usize,
    pub pin_typical_angle: bool,
}

pub const DEFAULT_TRIALS: u64 = 100_000;

impl Default for SimSection {
    fn default() -> Self {
        let d = SimConfig::default();
        Self {
            trials: 0,
            seed: d.seed,
            estimator: d.estimator,
            angle_mode: d.angle_mode,
            epsilon_trunc: d.epsilon_trunc,
            workers: d.workers,
            pin_typical_angle: d.pin_typical_angle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalyticSection {
    pub variant: VariantChoice,
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub epsilon_int: f64,
}

impl Default for AnalyticSection {
    fn default() -> Self {
        let d = AnalyticOptions::default();
        Self { variant: VariantChoice::Both, rel_tol: d.rel_tol, abs_tol: d.abs_tol, epsilon_int: d.epsilon_int }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub param: String,
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub param2: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values2: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputSection {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<PathBuf>,
    pub format: OutputFormat,
}

/// The configuration document, with every default filled in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Document {
    pub bs_per_km2: f64,
    pub road_km_per_km2: f64,
    pub ris_per_km: f64,
    pub vehicle_per_km: f64,
    pub handset_per_km2: f64,
    pub alpha_road: f64,
    pub alpha_urban: f64,
    pub eta_road_m: f64,
    pub eta_urban_m: f64,
    pub tau_db: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gamma_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub link_budget: Option<LinkBudget>,
    pub n_ris_elements: u32,
    pub sim: SimSection,
    pub analytic: AnalyticSection,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSection>,
    pub output: OutputSection,
}

pub const DEFAULT_GAMMA_DB: f64 = 97.0;

impl Default for Document {
    fn default() -> Self {
        Self {
            bs_per_km2: 40.0,
            road_km_per_km2: 2.0,
            ris_per_km: 4.0,
            vehicle_per_km: 25.0,
            handset_per_km2: 200.0,
            alpha_road: 2.4,
            alpha_urban: 3.7,
            eta_road_m: 48.0,
            eta_urban_m: 36.0,
            tau_db: 0.0,
            gamma_db: None,
            link_budget: None,
            n_ris_elements: 64,
            sim: SimSection::default(),
            analytic: AnalyticSection::default(),
            sweep: None,
            output: OutputSection::default(),
        }
    }
}

/// Sweepable model keys; values are always given in document units.
pub const SWEEP_KEYS: [(&str, &str); 12] = [
    ("bs_per_km2", "lambda_bs"),
    ("road_km_per_km2", "lambda_l"),
    ("ris_per_km", "mu"),
    ("vehicle_per_km", "nu"),
    ("handset_per_km2", "lambda_2"),
    ("alpha_road", "alpha_1"),
    ("alpha_urban", "alpha_2"),
    ("eta_road_m", "eta_1"),
    ("eta_urban_m", "eta_2"),
    ("tau_db", "tau"),
    ("gamma_db", "gamma"),
    ("n_ris_elements", "n_r"),
];

fn sweep_key(name: &str) -> Option<&'static str> {
    SWEEP_KEYS.iter().find(|(doc, field)| *doc == name || *field == name).map(|(doc, _)| *doc)
}

impl Document {
    /// Set one model key (document or parameter-field name) to `value` in document units.
    pub fn set_model_value(&mut self, name: &str, value: f64) -> Result<(), ConfigError> {
        let key = sweep_key(name).ok_or_else(|| ConfigError::UnknownSweepParam(name.to_string()))?;
        match key {
            "bs_per_km2" => self.bs_per_km2 = value,
            "road_km_per_km2" => self.road_km_per_km2 = value,
            "ris_per_km" => self.ris_per_km = value,
            "vehicle_per_km" => self.vehicle_per_km = value,
            "handset_per_km2" => self.handset_per_km2 = value,
            "alpha_road" => self.alpha_road = value,
            "alpha_urban" => self.alpha_urban = value,
            "eta_road_m" => self.eta_road_m = value,
            "eta_urban_m" => self.eta_urban_m = value,
            "tau_db" => self.tau_db = value,
            "gamma_db" => {
                self.gamma_db = Some(value);
                self.link_budget = None;
            }
            "n_ris_elements" => {
                if !(value >= 1.0 && value.fract() == 0.0 && value <= u32::MAX as f64) {
                    return Err(invalid(name, format!("element count must be a positive integer (got {value})")));
                }
                self.n_ris_elements = value as u32;
            }
            _ => unreachable!("sweep key table and setter disagree"),
        }
        Ok(())
    }

    /// Model parameters in SI units.
    pub fn network_params(&self) -> Result<NetworkParams, ConfigError> {
        for (key, v) in [("tau_db", self.tau_db), ("gamma_db", self.gamma_db.unwrap_or(0.0))] {
            if !v.is_finite() {
                return Err(invalid(key, format!("must be finite (got {v})")));
            }
        }
        let gamma = match (self.gamma_db, &self.link_budget) {
            (Some(db), _) => db_to_linear(db),
            (None, Some(b)) => gamma_from_budget(b).map_err(|e| ConfigError::Params(vec![e]))?,
            (None, None) => db_to_linear(DEFAULT_GAMMA_DB),
        };
        NetworkParams {
            lambda_bs: per_km2_to_per_m2(self.bs_per_km2),
            lambda_l: per_km_to_per_m(self.road_km_per_km2),
            mu: per_km_to_per_m(self.ris_per_km),
            nu: per_km_to_per_m(self.vehicle_per_km),
            lambda_2: per_km2_to_per_m2(self.handset_per_km2),
            alpha_1: self.alpha_road,
            alpha_2: self.alpha_urban,
            eta_1: self.eta_road_m,
            eta_2: self.eta_urban_m,
            tau: db_to_linear(self.tau_db),
            gamma,
            n_r: self.n_ris_elements,
        }
        .validated()
        .map_err(ConfigError::Params)
    }
}

/// A validated run: the normalized document plus everything derived from it.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSpec {
    pub document: Document,
    pub params: NetworkParams,
    pub sim: SimConfig,
    pub analytic: AnalyticOptions,
    pub variants: VariantChoice,
    pub sweep: Option<SweepSection>,
    pub output: OutputSection,
}

impl RunSpec {
    pub fn from_document(document: Document) -> Result<Self, ConfigError> {
        let params = document.network_params()?;
        let s = document.sim;
        if !(s.epsilon_trunc > 0.0 && s.epsilon_trunc < 1.0) {
            return Err(invalid("sim.epsilon_trunc", "must lie in (0, 1)"));
        }
        let sim = SimConfig {
            trials: s.trials,
            seed: s.seed,
            estimator: s.estimator,
            epsilon_trunc: s.epsilon_trunc,
            angle_mode: s.angle_mode,
            workers: s.workers,
            pin_typical_angle: s.pin_typical_angle,
        };
        let a = document.analytic;
        if !(a.rel_tol > 0.0 && a.abs_tol > 0.0) {
            return Err(invalid("analytic", "tolerances must be positive"));
        }
        if !(a.epsilon_int > 0.0 && a.epsilon_int < 1.0) {
            return Err(invalid("analytic.epsilon_int", "must lie in (0, 1)"));
        }
        let analytic = AnalyticOptions {
            variant: Variant::Consistent,
            rel_tol: a.rel_tol,
            abs_tol: a.abs_tol,
            epsilon_int: a.epsilon_int,
        };
        if let Some(sweep) = &document.sweep {
            validate_sweep(&document, sweep)?;
            if document.output.path.is_none() {
                return Err(ConfigError::MissingSweepOutput);
            }
        }
        Ok(Self {
            params,
            sim,
            analytic,
            variants: a.variant,
            sweep: document.sweep.clone(),
            output: document.output.clone(),
            document,
        })
    }

    /// Simulation settings with the command default applied when no trial count was given.
    pub fn sim_or_default(&self) -> SimConfig {
        let mut sim = self.sim;
        if sim.trials == 0 {
            sim.trials = DEFAULT_TRIALS;
        }
        sim
    }

    /// Analytic options for one variant.
    pub fn analytic_for(&self, variant: Variant) -> AnalyticOptions {
        AnalyticOptions { variant, ..self.analytic }
    }
}

fn validate_sweep(document: &Document, sweep: &SweepSection) -> Result<(), ConfigError> {
    let axes = [(Some(&sweep.param), Some(&sweep.values)), (sweep.param2.as_ref(), sweep.values2.as_ref())];
    for (i, (name, values)) in axes.into_iter().enumerate() {
        let Some(name) = name else {
            continue;
        };
        let values = match values {
            Some(v) if !v.is_empty() => v,
            // An empty second axis is the same as no second axis.
            _ if i == 1 => continue,
            _ => return Err(invalid("sweep.values", "must be non-empty")),
        };
        for &v in values {
            let mut probe = document.clone();
            probe.set_model_value(name, v)?;
            probe.network_params().map_err(|e| invalid(&format!("sweep {name} = {v}"), e.to_string()))?;
        }
    }
    if sweep.param2.is_none() && sweep.values2.as_ref().is_some_and(|v| !v.is_empty()) {
        return Err(invalid("sweep.values2", "given without sweep.param2"));
    }
    Ok(())
}

/// Result of loading a configuration, with any non-fatal warnings.
#[derive(Debug, Clone, PartialEq)]
pub struct Loaded {
    pub spec: RunSpec,
    pub warnings: Vec<String>,
}

/// Parse `key=value` into a dotted path and a JSON value (bare words become strings).
pub fn parse_override(s: &str) -> Result<(String, Value), ConfigError> {
    let (key, raw) = s.split_once('=').ok_or_else(|| ConfigError::Override(s.to_string()))?;
    let key = key.trim();
    if key.is_empty() {
        return Err(ConfigError::Override(s.to_string()));
    }
    let raw = raw.trim();
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    Ok((key.to_string(), value))
}

fn apply_override(root: &mut Value, key: &str, value: Value) -> Result<(), ConfigError> {
    let mut node = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (depth, part) in parts.iter().enumerate() {
        let obj = node.as_object_mut().ok_or_else(|| ConfigError::OverridePath {
            key: key.to_string(),
            at: parts[..depth].join("."),
        })?;
        if depth + 1 == parts.len() {
            obj.insert(part.to_string(), value);
            return Ok(());
        }
        node = obj.entry(part.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    Ok(())
}

/// Build a run from a JSON text plus ordered `key=value` overrides.
pub fn load_str(text: &str, overrides: &[(String, Value)]) -> Result<Loaded, ConfigError> {
    let mut root: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
    if !root.is_object() {
        return Err(ConfigError::Parse("top level must be a JSON object".into()));
    }
    for (key, value) in overrides {
        apply_override(&mut root, key, value.clone())?;
    }
    let mut document: Document = serde_json::from_value(root).map_err(|e| ConfigError::Parse(e.to_string()))?;
    let mut warnings = Vec::new();
    if document.gamma_db.is_some() && document.link_budget.is_some() {
        warnings.push("both gamma_db and link_budget given; using gamma_db and ignoring link_budget".to_string());
        document.link_budget = None;
    }
    if document.gamma_db.is_none() && document.link_budget.is_none() {
        document.gamma_db = Some(DEFAULT_GAMMA_DB);
    }
    if let Some(sweep) = &mut document.sweep {
        if sweep.values2.as_ref().is_some_and(|v| v.is_empty()) {
            sweep.param2 = None;
            sweep.values2 = None;
        }
    }
    Ok(Loaded { spec: RunSpec::from_document(document)?, warnings })
}

/// Load a configuration file (or the defaults when `path` is `None`) and apply overrides.
pub fn load_config(path: Option<&Path>, overrides: &[(String, Value)]) -> Result<Loaded, ConfigError> {
    let text = match path {
        Some(p) => std::fs::read_to_string(p).map_err(|source| ConfigError::Read { path: p.to_path_buf(), source })?,
        None => "{}".to_string(),
    };
    load_str(&text, overrides)
}

/// Serialize a run back to a document that loads to the same spec.
pub fn write_config(spec: &RunSpec) -> String {
    serde_json::to_string_pretty(&spec.document).expect("document serializes")
}
