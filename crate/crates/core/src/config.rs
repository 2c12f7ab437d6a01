//! Experiment configuration.
//!
//! A configuration is a single TOML document with flat, namespaced keys:
//!
//! ```toml
//! model = "model_i"          # or "model_ii"
//! engine = "ledger"          # "ledger", "mc" or "exact"
//! time.dt = 1e-3
//! time.t_end = "t_N"         # a number, "t_P" or "t_N"
//! reservoir.eta = 10.0
//! reservoir.q0 = 6.0
//! drive.omega = 0.5
//! initial.theta = 0.0
//! ledger.truncation = 2
//! mc.n_r = 10000
//! ```
//!
//! Every key has a default except `model`. Overrides use the same dotted
//! paths (`time.dt=5e-4`).

use std::f64::consts::PI;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ledger::{ClassSum, DeltaSampling, MemoryWindow, StepSettings, TimeGrid};
use crate::models::{build_model_i, build_model_ii, InitialStateSpec, ModelLabel, ModelSpec};
use crate::qcore::Scheme;
use crate::reservoir::{CouplingKind, CouplingProfile, LorentzianParams, RateProfile, SignRegions};

/// Window scanned when resolving symbolic end times.
const REGION_SCAN_T_MAX: f64 = 50.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("invalid configuration: {}", .0.join("; "))]
    Validation(Vec<String>),
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EngineKind {
    #[default]
    Ledger,
    Mc,
    Exact,
}

impl EngineKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            EngineKind::Ledger => "ledger",
            EngineKind::Mc => "mc",
            EngineKind::Exact => "exact",
        }
    }
}

impl fmt::Display for EngineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// End of the simulated window.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TimeSpec {
    Absolute(f64),
    Symbolic(SymbolicTime),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SymbolicTime {
    #[serde(rename = "t_P")]
    TP,
    #[serde(rename = "t_N")]
    TN,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReservoirKind {
    #[default]
    Lorentzian,
    Constant,
}

// Raw document ---------------------------------------------------------------

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    preset: Option<String>,
    model: Option<ModelLabel>,
    engine: Option<EngineKind>,
    #[serde(default)]
    time: RawTime,
    #[serde(default)]
    reservoir: RawReservoir,
    #[serde(default)]
    drive: RawDrive,
    #[serde(default)]
    coupling: RawCoupling,
    #[serde(default)]
    initial: RawInitial,
    #[serde(default)]
    ledger: RawLedger,
    #[serde(default)]
    mc: RawMc,
    #[serde(default)]
    memory: RawMemory,
    #[serde(default)]
    output: RawOutput,
    #[serde(default)]
    sweep: RawSweep,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTime {
    dt: Option<f64>,
    t_end: Option<TimeSpec>,
    scheme: Option<Scheme>,
    delta_sampling: Option<DeltaSampling>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawReservoir {
    kind: Option<ReservoirKind>,
    eta: Option<f64>,
    q0: Option<f64>,
    omega: Option<f64>,
    rate: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDrive {
    omega: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCoupling {
    kind: Option<CouplingKind>,
    lambda0: Option<f64>,
    beta: Option<f64>,
    t_switch: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawInitial {
    theta: Option<f64>,
    phi: Option<f64>,
    xi: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLedger {
    truncation: Option<i64>,
    class_sum: Option<ClassSum>,
    overflow_threshold: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMc {
    n_r: Option<i64>,
    seed: Option<u64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawMemory {
    tau: Option<f64>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawOutput {
    stride: Option<i64>,
    path: Option<PathBuf>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSweep {
    theta_points: Option<i64>,
    phi_points: Option<i64>,
    xi_points: Option<i64>,
    n_r: Option<Vec<i64>>,
    seeds: Option<i64>,
    models: Option<Vec<String>>,
}

// Resolved configuration ------------------------------------------------------

/// Reservoir description as configured.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReservoirConfig {
    pub kind: ReservoirKind,
    pub lorentzian: LorentzianParams,
    /// Used when `kind = constant`.
    pub rate: f64,
}

impl ReservoirConfig {
    pub fn profile(&self) -> RateProfile {
        match self.kind {
            ReservoirKind::Lorentzian => RateProfile::Lorentzian(self.lorentzian),
            ReservoirKind::Constant => RateProfile::Constant(self.rate),
        }
    }
}

/// Parameters used only by the sweep presets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub theta_points: usize,
    pub phi_points: usize,
    pub xi_points: usize,
    pub n_r: Vec<usize>,
    pub seeds: usize,
    pub models: Vec<String>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig {
            theta_points: 41,
            phi_points: 41,
            xi_points: 65,
            n_r: vec![1_000, 10_000, 100_000],
            seeds: 1,
            models: vec!["model_i".into(), "model_ii_i".into(), "model_ii_ii".into()],
        }
    }
}

/// A validated experiment description.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub preset: Option<String>,
    pub model: ModelLabel,
    pub engine: EngineKind,
    pub omega: f64,
    pub coupling: CouplingProfile,
    pub reservoir: ReservoirConfig,
    pub initial: InitialStateSpec,
    pub dt: f64,
    pub t_end_spec: TimeSpec,
    /// `t_end_spec` resolved to an absolute time.
    pub t_end: f64,
    pub scheme: Scheme,
    pub delta_sampling: DeltaSampling,
    pub truncation: usize,
    pub class_sum: ClassSum,
    pub overflow_threshold: f64,
    pub n_r: usize,
    pub seed: u64,
    pub memory_tau: Option<f64>,
    pub output_stride: usize,
    pub output_path: Option<PathBuf>,
    pub sweep: SweepConfig,
    /// Zero crossings of the decay rate on `[0, 50]`.
    pub regions: SignRegions,
}

impl SimConfig {
    pub fn model_spec(&self) -> ModelSpec {
        let rate = self.reservoir.profile();
        match self.model {
            ModelLabel::ModelI => build_model_i(self.omega, rate),
            ModelLabel::ModelIi => build_model_ii(self.coupling, rate),
        }
    }

    pub fn grid(&self) -> TimeGrid {
        TimeGrid::covering(self.dt, self.t_end)
    }

    pub fn memory(&self) -> MemoryWindow {
        match self.memory_tau {
            Some(tau) => MemoryWindow::Finite(tau),
            None => MemoryWindow::Infinite,
        }
    }

    pub fn step_settings(&self) -> StepSettings {
        StepSettings {
            dt: self.dt,
            scheme: self.scheme,
            sampling: self.delta_sampling,
            memory: self.memory(),
            class_sum: self.class_sum,
        }
    }

    pub fn t_p(&self) -> Option<f64> {
        self.regions.t_p()
    }

    pub fn t_n(&self) -> Option<f64> {
        self.regions.t_n()
    }

    /// Re-resolves derived fields after programmatic edits (`t_end`,
    /// sign regions, automatic switch time).
    pub fn revalidate(&self) -> Result<SimConfig, ConfigError> {
        let mut doc = toml::Table::new();
        self.write_into(&mut doc);
        from_table(doc)
    }

    /// Serializes back into the document format.
    pub fn to_table(&self) -> toml::Table {
        let mut doc = toml::Table::new();
        self.write_into(&mut doc);
        doc
    }

    fn write_into(&self, doc: &mut toml::Table) {
        use toml::Value as V;
        let mut set = |path: &str, v: V| {
            insert_path(doc, path, v).expect("valid path");
        };
        if let Some(p) = &self.preset {
            set("preset", V::String(p.clone()));
        }
        set("model", V::String(self.model.as_str().into()));
        set("engine", V::String(self.engine.as_str().into()));
        set("time.dt", V::Float(self.dt));
        set(
            "time.t_end",
            match self.t_end_spec {
                TimeSpec::Absolute(t) => V::Float(t),
                TimeSpec::Symbolic(SymbolicTime::TP) => V::String("t_P".into()),
                TimeSpec::Symbolic(SymbolicTime::TN) => V::String("t_N".into()),
            },
        );
        set("time.scheme", V::String(enum_str(&self.scheme)));
        set("time.delta_sampling", V::String(enum_str(&self.delta_sampling)));
        set("reservoir.kind", V::String(enum_str(&self.reservoir.kind)));
        set("reservoir.eta", V::Float(self.reservoir.lorentzian.eta));
        set("reservoir.q0", V::Float(self.reservoir.lorentzian.q0));
        set("reservoir.omega", V::Float(self.reservoir.lorentzian.omega));
        set("reservoir.rate", V::Float(self.reservoir.rate));
        set("drive.omega", V::Float(self.omega));
        set("coupling.kind", V::String(enum_str(&self.coupling.kind)));
        set("coupling.lambda0", V::Float(self.coupling.lambda0));
        set("coupling.beta", V::Float(self.coupling.beta));
        set("coupling.t_switch", V::Float(self.coupling.t_switch));
        match self.initial {
            InitialStateSpec::Bloch { theta, phi } => {
                set("initial.theta", V::Float(theta));
                set("initial.phi", V::Float(phi));
            }
            InitialStateSpec::Xi { xi } => set("initial.xi", V::Float(xi)),
        }
        set("ledger.truncation", V::Integer(self.truncation as i64));
        set("ledger.class_sum", V::String(enum_str(&self.class_sum)));
        set("ledger.overflow_threshold", V::Float(self.overflow_threshold));
        set("mc.n_r", V::Integer(self.n_r as i64));
        set("mc.seed", V::Integer(self.seed as i64));
        if let Some(tau) = self.memory_tau {
            set("memory.tau", V::Float(tau));
        }
        set("output.stride", V::Integer(self.output_stride as i64));
        if let Some(p) = &self.output_path {
            set("output.path", V::String(p.display().to_string()));
        }
        set("sweep.theta_points", V::Integer(self.sweep.theta_points as i64));
        set("sweep.phi_points", V::Integer(self.sweep.phi_points as i64));
        set("sweep.xi_points", V::Integer(self.sweep.xi_points as i64));
        set(
            "sweep.n_r",
            V::Array(self.sweep.n_r.iter().map(|&n| V::Integer(n as i64)).collect()),
        );
        set("sweep.seeds", V::Integer(self.sweep.seeds as i64));
        set(
            "sweep.models",
            V::Array(self.sweep.models.iter().map(|m| V::String(m.clone())).collect()),
        );
    }
}

fn enum_str<T: Serialize>(v: &T) -> String {
    match serde_json::to_value(v) {
        Ok(serde_json::Value::String(s)) => s,
        other => panic!("expected a unit enum, got {other:?}"),
    }
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<SimConfig, ConfigError> {
    let table = parse_table(text)?;
    from_table(table)
}

/// Parses a document into its raw key-value table.
pub fn parse_table(text: &str) -> Result<toml::Table, ConfigError> {
    text.parse::<toml::Table>().map_err(|e| ConfigError::Parse {
        path: String::new(),
        message: e.message().to_string(),
    })
}

/// Validates a raw table.
pub fn from_table(table: toml::Table) -> Result<SimConfig, ConfigError> {
    let raw: RawConfig = serde_path_to_error::deserialize(toml::Value::Table(table))
        .map_err(|e| ConfigError::Parse {
            path: e.path().to_string(),
            message: e.into_inner().to_string(),
        })?;
    resolve(raw)
}

/// Sets `path` (dotted) to the TOML-parsed `value`. Unparseable values are
/// taken as strings, so `model=model_ii` works without quotes.
pub fn apply_override(doc: &mut toml::Table, path: &str, value: &str) -> Result<(), ConfigError> {
    let parsed = format!("v = {value}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(value.to_string()));
    insert_path(doc, path, parsed)
}

/// Applies `key=value` overrides to `doc`.
pub fn apply_overrides<'a>(
    doc: &mut toml::Table,
    overrides: impl IntoIterator<Item = &'a str>,
) -> Result<(), ConfigError> {
    for item in overrides {
        let (k, v) = item.split_once('=').ok_or_else(|| ConfigError::Parse {
            path: item.to_string(),
            message: "override must have the form key=value".into(),
        })?;
        apply_override(doc, k.trim(), v.trim())?;
    }
    Ok(())
}

fn insert_path(doc: &mut toml::Table, path: &str, value: toml::Value) -> Result<(), ConfigError> {
    let parts: Vec<&str> = path.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError::Parse { path: path.into(), message: "empty key segment".into() });
    }
    let mut table = doc;
    for part in &parts[..parts.len() - 1] {
        let entry = table
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = match entry {
            toml::Value::Table(t) => t,
            _ => {
                return Err(ConfigError::Parse {
                    path: path.into(),
                    message: format!("`{part}` is not a table"),
                })
            }
        };
    }
    table.insert(parts[parts.len() - 1].to_string(), value);
    Ok(())
}

fn positive_count(v: Option<i64>, default: usize, name: &str, errors: &mut Vec<String>) -> usize {
    match v {
        None => default,
        Some(n) if n >= 1 => n as usize,
        Some(n) => {
            errors.push(format!("{name} must be at least 1 (got {n})"));
            default
        }
    }
}

fn resolve(raw: RawConfig) -> Result<SimConfig, ConfigError> {
    let mut errors = Vec::new();

    let model = match raw.model {
        Some(m) => m,
        None => return Err(ConfigError::Validation(vec!["model is required".into()])),
    };
    let engine = raw.engine.unwrap_or_default();

    let dt = raw.time.dt.unwrap_or(1e-3);
    if !(dt > 0.0 && dt.is_finite()) {
        errors.push(format!("time.dt must be positive (got {dt})"));
    }

    let lorentzian = LorentzianParams {
        eta: raw.reservoir.eta.unwrap_or(10.0),
        q0: raw.reservoir.q0.unwrap_or(6.0),
        gamma: 1.0,
        omega: raw.reservoir.omega.unwrap_or(0.0),
    };
    let reservoir = ReservoirConfig {
        kind: raw.reservoir.kind.unwrap_or_default(),
        lorentzian,
        rate: raw.reservoir.rate.unwrap_or(0.0),
    };
    if reservoir.kind == ReservoirKind::Lorentzian && !(lorentzian.eta > 0.0) {
        errors.push(format!("reservoir.eta must be positive (got {})", lorentzian.eta));
    }
    let regions = if errors.is_empty() {
        reservoir.profile().sign_regions(REGION_SCAN_T_MAX, dt.min(1e-3))
    } else {
        SignRegions::default()
    };

    let omega = raw.drive.omega.unwrap_or(0.5);

    let kind = raw.coupling.kind.unwrap_or_default();
    let lambda0 = raw.coupling.lambda0.unwrap_or(0.5);
    let beta = raw.coupling.beta.unwrap_or(100.0);
    if lambda0 < 0.0 {
        errors.push(format!("coupling.lambda0 must be non-negative (got {lambda0})"));
    }
    if kind == CouplingKind::SigmoidSwitchoff && !(beta > 0.0) {
        errors.push(format!("coupling.beta must be positive (got {beta})"));
    }
    let t_switch = match (kind, raw.coupling.t_switch) {
        (_, Some(t)) => t,
        (CouplingKind::SigmoidSwitchoff, None) => match regions.t_p() {
            Some(t) => t,
            None => {
                if model == ModelLabel::ModelIi {
                    errors.push("coupling.t_switch is required: the decay rate never changes sign".into());
                }
                0.0
            }
        },
        (CouplingKind::Constant, None) => 0.0,
    };
    let coupling = CouplingProfile { kind, lambda0, beta, t_switch };

    let initial = match model {
        ModelLabel::ModelI => {
            if raw.initial.xi.is_some() {
                errors.push("initial.xi applies to model_ii only".into());
            }
            InitialStateSpec::Bloch {
                theta: raw.initial.theta.unwrap_or(0.0),
                phi: raw.initial.phi.unwrap_or(0.0),
            }
        }
        ModelLabel::ModelIi => {
            if raw.initial.theta.is_some() || raw.initial.phi.is_some() {
                errors.push("initial.theta/initial.phi apply to model_i only".into());
            }
            let xi = raw.initial.xi.unwrap_or(0.0);
            if !(0.0..=PI / 2.0).contains(&xi) {
                errors.push(format!("initial.xi must lie in [0, π/2] (got {xi})"));
            }
            InitialStateSpec::Xi { xi }
        }
    };

    let t_end_spec = raw.time.t_end.unwrap_or(TimeSpec::Symbolic(SymbolicTime::TN));
    let t_end = match t_end_spec {
        TimeSpec::Absolute(t) => {
            if !(t > 0.0 && t.is_finite()) {
                errors.push(format!("time.t_end must be positive (got {t})"));
            }
            t
        }
        TimeSpec::Symbolic(which) => {
            let (name, v) = match which {
                SymbolicTime::TP => ("t_P", regions.t_p()),
                SymbolicTime::TN => ("t_N", regions.t_n()),
            };
            match v {
                Some(t) => t,
                None => {
                    if errors.is_empty() {
                        errors.push(format!("time.t_end = \"{name}\" cannot be resolved: the decay rate has no such zero"));
                    }
                    0.0
                }
            }
        }
    };

    let truncation = positive_count(raw.ledger.truncation, 2, "ledger.truncation", &mut errors);
    let overflow_threshold = raw.ledger.overflow_threshold.unwrap_or(0.05);
    if !(overflow_threshold > 0.0) {
        errors.push(format!("ledger.overflow_threshold must be positive (got {overflow_threshold})"));
    }
    let n_r = positive_count(raw.mc.n_r, 10_000, "mc.n_r", &mut errors);
    let seed = raw.mc.seed.unwrap_or(0);
    if let Some(tau) = raw.memory.tau {
        if !(tau > 0.0) {
            errors.push(format!("memory.tau must be positive (got {tau})"));
        }
    }
    let output_stride = positive_count(raw.output.stride, 1, "output.stride", &mut errors);

    let defaults = SweepConfig::default();
    let sweep = SweepConfig {
        theta_points: positive_count(raw.sweep.theta_points, defaults.theta_points, "sweep.theta_points", &mut errors),
        phi_points: positive_count(raw.sweep.phi_points, defaults.phi_points, "sweep.phi_points", &mut errors),
        xi_points: positive_count(raw.sweep.xi_points, defaults.xi_points, "sweep.xi_points", &mut errors),
        n_r: match raw.sweep.n_r {
            None => defaults.n_r,
            Some(v) => {
                if v.is_empty() || v.iter().any(|&n| n < 1) {
                    errors.push("sweep.n_r must be a non-empty list of positive counts".into());
                }
                v.into_iter().map(|n| n.max(1) as usize).collect()
            }
        },
        seeds: positive_count(raw.sweep.seeds, defaults.seeds, "sweep.seeds", &mut errors),
        models: raw.sweep.models.unwrap_or(defaults.models),
    };

    if !errors.is_empty() {
        return Err(ConfigError::Validation(errors));
    }
    Ok(SimConfig {
        preset: raw.preset,
        model,
        engine,
        omega,
        coupling,
        reservoir,
        initial,
        dt,
        t_end_spec,
        t_end,
        scheme: raw.time.scheme.unwrap_or_default(),
        delta_sampling: raw.time.delta_sampling.unwrap_or_default(),
        truncation,
        class_sum: raw.ledger.class_sum.unwrap_or_default(),
        overflow_threshold,
        n_r,
        seed,
        memory_tau: raw.memory.tau,
        output_stride,
        output_path: raw.output.path,
        sweep,
        regions,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_for_model_i() {
        let c = parse_config("model = \"model_i\"").unwrap();
        assert_eq!(c.model, ModelLabel::ModelI);
        assert_eq!(c.engine, EngineKind::Ledger);
        assert_eq!(c.omega, 0.5);
        assert_eq!(c.reservoir.lorentzian.eta, 10.0);
        assert_eq!(c.reservoir.lorentzian.q0, 6.0);
        assert_eq!(c.dt, 1e-3);
        assert_eq!(c.truncation, 2);
        assert_eq!(c.t_end_spec, TimeSpec::Symbolic(SymbolicTime::TN));
        assert!((c.t_end - 0.9977).abs() < 1e-3, "{}", c.t_end);
        assert_eq!(c.initial, InitialStateSpec::Bloch { theta: 0.0, phi: 0.0 });
    }

    #[test]
    fn negative_dt_is_rejected() {
        let err = parse_config("model = \"model_i\"\ntime.dt = -1").unwrap_err();
        match err {
            ConfigError::Validation(v) => assert!(v.iter().any(|e| e.contains("time.dt"))),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn symbolic_end_times() {
        let c = parse_config("model = \"model_i\"\ntime.t_end = \"t_N\"").unwrap();
        assert_eq!(Some(c.t_end), c.regions.t_n());
        assert!((0.99..1.0).contains(&c.t_end));
        let c = parse_config("model = \"model_i\"\ntime.t_end = \"t_P\"").unwrap();
        assert!((0.60..0.61).contains(&c.t_end));
        let c = parse_config("model = \"model_i\"\ntime.t_end = 0.25").unwrap();
        assert_eq!(c.t_end, 0.25);
    }

    #[test]
    fn unresolvable_symbolic_time() {
        let err = parse_config("model = \"model_i\"\nreservoir.q0 = 0.0").unwrap_err();
        assert!(matches!(err, ConfigError::Validation(_)));
    }

    #[test]
    fn parse_error_reports_field_path() {
        let err = parse_config("model = \"model_i\"\ntime.dt = \"fast\"").unwrap_err();
        match err {
            ConfigError::Parse { path, .. } => assert_eq!(path, "time.dt"),
            other => panic!("{other:?}"),
        }
        let err = parse_config("model = \"model_i\"\ntime.bogus = 1").unwrap_err();
        assert!(matches!(err, ConfigError::Parse { .. }));
        assert!(matches!(parse_config("model = "), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn missing_model_is_a_validation_error() {
        assert!(matches!(parse_config(""), Err(ConfigError::Validation(_))));
    }

    #[test]
    fn switch_time_defaults_to_first_zero() {
        let c = parse_config("model = \"model_ii\"\ncoupling.kind = \"sigmoid_switchoff\"").unwrap();
        assert_eq!(Some(c.coupling.t_switch), c.t_p());
        assert_eq!(c.coupling.beta, 100.0);
    }

    #[test]
    fn overrides_and_roundtrip() {
        let mut doc = parse_table("model = \"model_i\"").unwrap();
        apply_overrides(&mut doc, ["time.dt=5e-4", "model=model_ii", "initial.xi=0.3", "memory.tau=0.1"])
            .unwrap();
        let c = from_table(doc).unwrap();
        assert_eq!(c.dt, 5e-4);
        assert_eq!(c.model, ModelLabel::ModelIi);
        assert_eq!(c.initial, InitialStateSpec::Xi { xi: 0.3 });
        assert_eq!(c.memory_tau, Some(0.1));
        assert_eq!(c.revalidate().unwrap(), c);
        let mut doc = parse_table("model = \"model_i\"").unwrap();
        assert!(apply_overrides(&mut doc, ["oops"]).is_err());
    }

    #[test]
    fn kind_mismatch_is_rejected() {
        assert!(parse_config("model = \"model_i\"\ninitial.xi = 0.2").is_err());
        assert!(parse_config("model = \"model_ii\"\ninitial.theta = 0.2").is_err());
    }
}
