//! Run-configuration schema and name resolution.
//!
//! A run is described by one JSON document. Named definitions (functions,
//! certificates, transforms, models, signals) live in top-level maps and are
//! referenced by name from the command task section; `include` merges the
//! named sections of other documents, which is how certificates emitted by
//! `compose` and `equiv` feed back into `verify` without manual editing.
//!
//! Gain functions are expression trees tagged by `"op"`:
//!
//! ```text
//! {"op": "identity"}                      s
//! {"op": "power", "p": 2.0}               s^p             (p > 0)
//! {"op": "linear", "k": 3.0}              k*s             (k > 0)
//! {"op": "exp_minus_one"}                 exp(s) - 1
//! {"op": "log_one_plus"}                  log(1 + s)
//! {"op": "compose", "outer": F, "inner": F}
//! {"op": "max", "a": F, "b": F}           pointwise max
//! {"op": "min", "a": F, "b": F}           pointwise min
//! {"op": "sum", "a": F, "b": F}           pointwise sum
//! {"op": "post_scale", "k": 2.0, "f": F}  k * f(s)
//! {"op": "pre_scale", "k": 2.0, "f": F}   f(k * s)
//! {"op": "residual", "f": F}              s - f(s)
//! {"op": "inverse", "f": F}               f^{-1}(s) by bisection
//! {"op": "table", "abscissas": [...], "values": [...]}
//! {"op": "ref", "name": "other"}          named function reference
//! ```
//!
//! Anywhere a function is expected, a bare string is shorthand for a
//! reference to a named function.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::path::{Path, PathBuf};

use gaincert_core::certificates::transform_cert;
use gaincert_core::transforms::{build_lower, build_upper, DiagonalRole};
use gaincert_core::{
    Certificate, CombineMode, CoordinateTransform, GainError, InputSignal, ScalarGainFn,
    SystemModel, TransformedCertificate,
};
use serde::{Deserialize, Serialize};

/// The one schema version this build reads and writes.
pub const CONFIG_VERSION: u32 = 1;

/// A configuration problem; always maps to exit status 2.
#[derive(Debug, Clone)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl std::error::Error for ConfigError {}

impl From<GainError> for ConfigError {
    fn from(e: GainError) -> Self {
        ConfigError(e.to_string())
    }
}

fn err<T>(msg: impl Into<String>) -> Result<T, ConfigError> {
    Err(ConfigError(msg.into()))
}

/// Either a reference to a named function or an inline expression.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FnNode {
    Name(String),
    Expr(Box<FnExpr>),
}

/// Gain-function expression grammar (see module docs).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum FnExpr {
    Identity,
    Power { p: f64 },
    Linear { k: f64 },
    ExpMinusOne,
    LogOnePlus,
    Compose { outer: FnNode, inner: FnNode },
    Max { a: FnNode, b: FnNode },
    Min { a: FnNode, b: FnNode },
    Sum { a: FnNode, b: FnNode },
    PostScale { k: f64, f: FnNode },
    PreScale { k: f64, f: FnNode },
    Residual { f: FnNode },
    Inverse { f: FnNode },
    Table { abscissas: Vec<f64>, values: Vec<f64> },
    Ref { name: String },
}

/// Combine-mode names used in certificate definitions.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "snake_case")]
pub enum ModeSpec {
    Max,
    Sum,
}

impl From<ModeSpec> for CombineMode {
    fn from(m: ModeSpec) -> Self {
        match m {
            ModeSpec::Max => CombineMode::Max,
            ModeSpec::Sum => CombineMode::Sum,
        }
    }
}

impl From<CombineMode> for ModeSpec {
    fn from(m: CombineMode) -> Self {
        match m {
            CombineMode::Max => ModeSpec::Max,
            CombineMode::Sum => ModeSpec::Sum,
        }
    }
}

/// Certificate definitions, tagged by `"kind"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum CertSpec {
    AlphaIntegrable { alpha: FnNode, beta: FnNode },
    L2 { beta: FnNode },
    Iss { mode: ModeSpec, alpha: FnNode, beta: FnNode, sigma: FnNode },
    Iiss { mode: ModeSpec, alpha: FnNode, beta: FnNode, sigma: FnNode, gamma: FnNode },
    LinearL2 { mode: ModeSpec, beta: FnNode, gain_sq: f64 },
    NonlinearL2 { mode: ModeSpec, beta: FnNode, gamma: FnNode },
}

/// Coordinate-transform definitions, tagged by `"type"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum TransformSpec {
    /// Copies coordinates unchanged.
    Identity { dim: usize },
    /// The built-in scalar exponential-well change of coordinates.
    Example2,
    /// Diagonal family `z_i -> sign(z_i) axis(|z_i| / sqrt(dim))`.
    Lower { axis: FnNode, dim: usize },
    /// Diagonal family `z_i -> sign(z_i) axis(sqrt(dim) |z_i|)`.
    Upper { axis: FnNode, dim: usize },
}

/// System-model definitions, tagged by `"type"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum ModelSpec {
    /// One of the named example systems.
    Builtin { name: String },
    /// `dx/dt = -a x + b w` in one dimension.
    Linear1d { a: f64, b: f64 },
    /// Driver's state feeds the receiver's input; exogenous input drives
    /// the driver. State `[x_receiver, x_driver]`.
    Cascade { receiver: String, driver: String },
    /// Mutual state feedback, no exogenous input.
    FeedbackNoInput { first: String, second: String },
    /// Mutual state feedback plus one exogenous channel per subsystem.
    FeedbackWithInputs { first: String, second: String },
}

/// Input-signal definitions, tagged by `"type"`.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum SignalSpec {
    Zero,
    Constant { values: Vec<f64> },
    /// Right-continuous steps: `values[0]` before the first switch, then
    /// `values[i]` from `switch_times[i-1]` on.
    PiecewiseConstant { switch_times: Vec<f64>, values: Vec<Vec<f64>> },
}

/// Numeric settings shared by the command tasks; every field has a default.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Settings {
    /// Integrator step.
    pub dt: f64,
    /// Simulation horizon.
    pub t_end: f64,
    /// Base seed for random batches.
    pub seed: u64,
    /// Number of Monte Carlo draws.
    pub trajectories: usize,
    /// Relative verification tolerance.
    pub tolerance: f64,
    /// Uniform range for initial-state coordinates.
    pub x0_range: [f64; 2],
    /// Uniform range for input values.
    pub amplitude: [f64; 2],
    /// Switch count for sampled piecewise-constant inputs.
    pub switches: usize,
}

impl Default for Settings {
    fn default() -> Self {
        Settings {
            dt: 1e-2,
            t_end: 10.0,
            seed: 0,
            trajectories: 200,
            tolerance: 1e-6,
            x0_range: [-1.0, 1.0],
            amplitude: [-1.0, 1.0],
            switches: 4,
        }
    }
}

/// Emitted documents omit the settings block when nothing was customized.
fn settings_are_default(s: &Settings) -> bool {
    *s == Settings::default()
}

/// `simulate` task: integrate one trajectory and write it out.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateTask {
    pub model: String,
    pub x0: Vec<f64>,
    #[serde(default)]
    pub signal: Option<String>,
}

/// `verify` task: check a certificate against one trajectory (when `x0` is
/// given) or against a seeded random batch (otherwise). Optional transforms
/// map trajectories into the certificate's coordinates first.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyTask {
    pub certificate: String,
    pub model: String,
    #[serde(default)]
    pub x0: Option<Vec<f64>>,
    #[serde(default)]
    pub signal: Option<String>,
    #[serde(default)]
    pub state_transform: Option<String>,
    #[serde(default)]
    pub input_transform: Option<String>,
}

/// Overrides for the feedback small-gain weights.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallGainSpec {
    #[serde(default)]
    pub rho1: Option<FnNode>,
    #[serde(default)]
    pub rho2: Option<FnNode>,
    #[serde(default)]
    pub eps1: Option<f64>,
    #[serde(default)]
    pub eps2: Option<f64>,
}

/// Sector constants for interconnection channels; `None` leaves a constant
/// to be measured by sampling.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SectorSpec {
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub c1: Option<f64>,
    #[serde(default)]
    pub c2: Option<f64>,
    #[serde(default)]
    pub c_s1: Option<f64>,
    #[serde(default)]
    pub c_s2: Option<f64>,
    #[serde(default)]
    pub c_t1: Option<f64>,
    #[serde(default)]
    pub c_t2: Option<f64>,
    #[serde(default)]
    pub samples: Option<usize>,
}

/// `compose` task: combine two certificates across an interconnection.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ComposeTask {
    /// One of: `cascade_nl2`, `feedback_nl2_no_input`, `feedback_nl2_max`,
    /// `feedback_nl2_sum`, `feedback_iss_via_linear`, `cascade_iiss_via_nl2`,
    /// `cascade_iiss_direct`, `feedback_iiss_no_input`,
    /// `feedback_iiss_with_input`, `feedback_iiss_direct`.
    pub op: String,
    pub first: String,
    pub second: String,
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default)]
    pub n1: Option<usize>,
    #[serde(default)]
    pub n2: Option<usize>,
    #[serde(default)]
    pub m2: Option<usize>,
    #[serde(default)]
    pub k1: Option<f64>,
    #[serde(default)]
    pub k2: Option<f64>,
    #[serde(default)]
    pub rho1: Option<FnNode>,
    #[serde(default)]
    pub rho2: Option<FnNode>,
    #[serde(default)]
    pub rho: Option<FnNode>,
    #[serde(default)]
    pub small_gain: Option<SmallGainSpec>,
    #[serde(default)]
    pub sector: Option<SectorSpec>,
    #[serde(default)]
    pub output_name: Option<String>,
}

/// `smallgain` task: check that `Id - gamma1 o gamma2` is class K-infinity.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SmallgainTask {
    pub gamma1: FnNode,
    pub gamma2: FnNode,
}

/// `equiv` task: rebuild a certificate as another property, possibly in new
/// coordinates.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EquivTask {
    /// One of: `alpha_integrable_to_l2`, `l2_to_alpha_integrable`,
    /// `iss_to_linear_l2`, `linear_l2_to_iss`, `iiss_to_nonlinear_l2`,
    /// `nonlinear_l2_to_iiss`, `max_to_sum`, `sum_to_max`, `transform_cert`.
    pub op: String,
    pub certificate: String,
    #[serde(default)]
    pub gain: Option<f64>,
    #[serde(default)]
    pub lambda: Option<f64>,
    #[serde(default)]
    pub state_dim: Option<usize>,
    #[serde(default)]
    pub input_dim: Option<usize>,
    #[serde(default)]
    pub state_transform: Option<String>,
    #[serde(default)]
    pub input_transform: Option<String>,
    #[serde(default)]
    pub output_name: Option<String>,
}

/// `falsify` task: search for a witness against a claimed linear-gain
/// estimate on the bilinear benchmark.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FalsifyTask {
    pub beta_hat: FnNode,
    pub gamma_bar: f64,
}

/// One parsed configuration document (see module docs for the grammar).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigDoc {
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub include: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub functions: BTreeMap<String, FnExpr>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub certificates: BTreeMap<String, CertSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub transforms: BTreeMap<String, TransformSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub models: BTreeMap<String, ModelSpec>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub signals: BTreeMap<String, SignalSpec>,
    #[serde(default, skip_serializing_if = "settings_are_default")]
    pub settings: Settings,
    /// Derivation trace carried by emitted certificate documents.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub derivation: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulate: Option<SimulateTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub verify: Option<VerifyTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub compose: Option<ComposeTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub smallgain: Option<SmallgainTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub equiv: Option<EquivTask>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub falsify: Option<FalsifyTask>,
}

impl ConfigDoc {
    /// Parses a document from JSON text.
    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let doc: ConfigDoc =
            serde_json::from_str(text).map_err(|e| ConfigError(format!("config parse: {e}")))?;
        if doc.version != CONFIG_VERSION {
            return err(format!(
                "unsupported config version {}, this build reads version {CONFIG_VERSION}",
                doc.version
            ));
        }
        Ok(doc)
    }

    /// Loads a document and merges its `include` files (paths resolved
    /// relative to the including file; cycles and duplicate names rejected).
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let mut visited = BTreeSet::new();
        Self::load_inner(path, &mut visited)
    }

    fn load_inner(path: &Path, visited: &mut BTreeSet<PathBuf>) -> Result<Self, ConfigError> {
        let canonical = path
            .canonicalize()
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        if !visited.insert(canonical.clone()) {
            return err(format!("include cycle through {}", path.display()));
        }
        let text = std::fs::read_to_string(&canonical)
            .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
        let mut doc = Self::from_json(&text)?;
        let base = canonical.parent().map(Path::to_path_buf).unwrap_or_default();
        let includes = std::mem::take(&mut doc.include);
        for inc in includes {
            let inc_path = base.join(&inc);
            let merged = Self::load_inner(&inc_path, visited)?;
            doc.merge_named(merged, &inc)?;
        }
        Ok(doc)
    }

    /// Merges the named sections of another document into this one.
    /// Duplicate names are configuration errors.
    fn merge_named(&mut self, other: ConfigDoc, origin: &str) -> Result<(), ConfigError> {
        fn merge<T>(
            into: &mut BTreeMap<String, T>,
            from: BTreeMap<String, T>,
            section: &str,
            origin: &str,
        ) -> Result<(), ConfigError> {
            for (name, item) in from {
                if into.contains_key(&name) {
                    return err(format!(
                        "include {origin}: {section} name {name:?} is already defined"
                    ));
                }
                into.insert(name, item);
            }
            Ok(())
        }
        merge(&mut self.functions, other.functions, "function", origin)?;
        merge(&mut self.certificates, other.certificates, "certificate", origin)?;
        merge(&mut self.transforms, other.transforms, "transform", origin)?;
        merge(&mut self.models, other.models, "model", origin)?;
        merge(&mut self.signals, other.signals, "signal", origin)?;
        Ok(())
    }

    /// Validates settings ranges once per run.
    pub fn check_settings(&self) -> Result<(), ConfigError> {
        let s = &self.settings;
        if !(s.dt > 0.0) || !s.dt.is_finite() {
            return err(format!("settings.dt must be positive and finite, got {}", s.dt));
        }
        if !(s.t_end > 0.0) || !s.t_end.is_finite() {
            return err(format!("settings.t_end must be positive and finite, got {}", s.t_end));
        }
        if !(s.tolerance >= 0.0) {
            return err(format!("settings.tolerance must be nonnegative, got {}", s.tolerance));
        }
        if !(s.x0_range[0] <= s.x0_range[1]) {
            return err("settings.x0_range must be ordered (lo <= hi)");
        }
        if !(s.amplitude[0] <= s.amplitude[1]) {
            return err("settings.amplitude must be ordered (lo <= hi)");
        }
        Ok(())
    }
}

/// Resolved named objects, ready for command execution.
pub struct Registry {
    pub functions: BTreeMap<String, ScalarGainFn>,
    pub certificates: BTreeMap<String, Certificate>,
    pub transforms: BTreeMap<String, CoordinateTransform>,
    pub models: BTreeMap<String, SystemModel>,
    pub signals: BTreeMap<String, InputSignal>,
}

impl Registry {
    /// Resolves every named definition in a document. Name references are
    /// checked for existence and cycles; constants are validated so that
    /// construction cannot panic downstream.
    pub fn build(doc: &ConfigDoc) -> Result<Self, ConfigError> {
        let mut reg = Registry {
            functions: BTreeMap::new(),
            certificates: BTreeMap::new(),
            transforms: BTreeMap::new(),
            models: BTreeMap::new(),
            signals: BTreeMap::new(),
        };
        for name in doc.functions.keys() {
            let mut stack = Vec::new();
            let f = resolve_named_fn(doc, name, &mut stack)?;
            reg.functions.insert(name.clone(), f);
        }
        for (name, spec) in &doc.certificates {
            let cert = resolve_cert(doc, spec)
                .map_err(|e| ConfigError(format!("certificate {name:?}: {e}")))?;
            reg.certificates.insert(name.clone(), cert);
        }
        for (name, spec) in &doc.transforms {
            let t = resolve_transform(doc, spec)
                .map_err(|e| ConfigError(format!("transform {name:?}: {e}")))?;
            reg.transforms.insert(name.clone(), t);
        }
        for name in doc.models.keys() {
            let mut stack = Vec::new();
            let m = resolve_named_model(doc, name, &mut stack)?;
            reg.models.insert(name.clone(), m);
        }
        for (name, spec) in &doc.signals {
            reg.signals.insert(name.clone(), resolve_signal(spec));
        }
        Ok(reg)
    }

    pub fn function(&self, name: &str) -> Result<&ScalarGainFn, ConfigError> {
        self.functions
            .get(name)
            .ok_or_else(|| ConfigError(format!("unresolved function name {name:?}")))
    }

    pub fn certificate(&self, name: &str) -> Result<&Certificate, ConfigError> {
        self.certificates
            .get(name)
            .ok_or_else(|| ConfigError(format!("unresolved certificate name {name:?}")))
    }

    pub fn transform(&self, name: &str) -> Result<&CoordinateTransform, ConfigError> {
        self.transforms
            .get(name)
            .ok_or_else(|| ConfigError(format!("unresolved transform name {name:?}")))
    }

    pub fn model(&self, name: &str) -> Result<&SystemModel, ConfigError> {
        self.models
            .get(name)
            .ok_or_else(|| ConfigError(format!("unresolved model name {name:?}")))
    }

    pub fn signal(&self, name: &str) -> Result<&InputSignal, ConfigError> {
        self.signals
            .get(name)
            .ok_or_else(|| ConfigError(format!("unresolved signal name {name:?}")))
    }
}

fn check_positive(label: &str, v: f64) -> Result<(), ConfigError> {
    if !v.is_finite() || v <= 0.0 {
        return err(format!("{label} must be finite and positive, got {v}"));
    }
    Ok(())
}

fn resolve_named_fn(
    doc: &ConfigDoc,
    name: &str,
    stack: &mut Vec<String>,
) -> Result<ScalarGainFn, ConfigError> {
    if stack.iter().any(|s| s == name) {
        return err(format!("function reference cycle: {} -> {name}", stack.join(" -> ")));
    }
    let expr = doc
        .functions
        .get(name)
        .ok_or_else(|| ConfigError(format!("unresolved function name {name:?}")))?;
    stack.push(name.to_string());
    let f = resolve_expr(doc, expr, stack)?;
    stack.pop();
    Ok(f)
}

/// Resolves a function node (name shorthand or inline expression).
pub fn resolve_fn(doc: &ConfigDoc, node: &FnNode) -> Result<ScalarGainFn, ConfigError> {
    let mut stack = Vec::new();
    resolve_node(doc, node, &mut stack)
}

fn resolve_node(
    doc: &ConfigDoc,
    node: &FnNode,
    stack: &mut Vec<String>,
) -> Result<ScalarGainFn, ConfigError> {
    match node {
        FnNode::Name(name) => resolve_named_fn(doc, name, stack),
        FnNode::Expr(expr) => resolve_expr(doc, expr, stack),
    }
}

fn resolve_expr(
    doc: &ConfigDoc,
    expr: &FnExpr,
    stack: &mut Vec<String>,
) -> Result<ScalarGainFn, ConfigError> {
    Ok(match expr {
        FnExpr::Identity => ScalarGainFn::identity(),
        FnExpr::Power { p } => {
            check_positive("power exponent", *p)?;
            ScalarGainFn::power(*p)
        }
        FnExpr::Linear { k } => {
            check_positive("linear slope", *k)?;
            ScalarGainFn::linear(*k)
        }
        FnExpr::ExpMinusOne => ScalarGainFn::exp_minus_one(),
        FnExpr::LogOnePlus => ScalarGainFn::log_one_plus(),
        FnExpr::Compose { outer, inner } => ScalarGainFn::compose(
            resolve_node(doc, outer, stack)?,
            resolve_node(doc, inner, stack)?,
        ),
        FnExpr::Max { a, b } => ScalarGainFn::pointwise_max(
            resolve_node(doc, a, stack)?,
            resolve_node(doc, b, stack)?,
        ),
        FnExpr::Min { a, b } => ScalarGainFn::pointwise_min(
            resolve_node(doc, a, stack)?,
            resolve_node(doc, b, stack)?,
        ),
        FnExpr::Sum { a, b } => ScalarGainFn::sum(
            resolve_node(doc, a, stack)?,
            resolve_node(doc, b, stack)?,
        ),
        FnExpr::PostScale { k, f } => {
            check_positive("post_scale factor", *k)?;
            ScalarGainFn::post_scale(*k, resolve_node(doc, f, stack)?)
        }
        FnExpr::PreScale { k, f } => {
            check_positive("pre_scale factor", *k)?;
            ScalarGainFn::pre_scale(*k, resolve_node(doc, f, stack)?)
        }
        FnExpr::Residual { f } => ScalarGainFn::residual(resolve_node(doc, f, stack)?),
        FnExpr::Inverse { f } => ScalarGainFn::numeric_inverse(resolve_node(doc, f, stack)?),
        FnExpr::Table { abscissas, values } => {
            ScalarGainFn::from_monotone_table(abscissas.clone(), values.clone())?
        }
        FnExpr::Ref { name } => resolve_named_fn(doc, name, stack)?,
    })
}

fn resolve_cert(doc: &ConfigDoc, spec: &CertSpec) -> Result<Certificate, ConfigError> {
    Ok(match spec {
        CertSpec::AlphaIntegrable { alpha, beta } => Certificate::alpha_integrable(
            resolve_fn(doc, alpha)?,
            resolve_fn(doc, beta)?,
        ),
        CertSpec::L2 { beta } => Certificate::l2(resolve_fn(doc, beta)?),
        CertSpec::Iss { mode, alpha, beta, sigma } => Certificate::iss(
            (*mode).into(),
            resolve_fn(doc, alpha)?,
            resolve_fn(doc, beta)?,
            resolve_fn(doc, sigma)?,
        ),
        CertSpec::Iiss { mode, alpha, beta, sigma, gamma } => Certificate::iiss(
            (*mode).into(),
            resolve_fn(doc, alpha)?,
            resolve_fn(doc, beta)?,
            resolve_fn(doc, sigma)?,
            resolve_fn(doc, gamma)?,
        ),
        CertSpec::LinearL2 { mode, beta, gain_sq } => {
            Certificate::linear_l2((*mode).into(), resolve_fn(doc, beta)?, *gain_sq)?
        }
        CertSpec::NonlinearL2 { mode, beta, gamma } => Certificate::nonlinear_l2(
            (*mode).into(),
            resolve_fn(doc, beta)?,
            resolve_fn(doc, gamma)?,
        ),
    })
}

fn resolve_transform(
    doc: &ConfigDoc,
    spec: &TransformSpec,
) -> Result<CoordinateTransform, ConfigError> {
    Ok(match spec {
        TransformSpec::Identity { dim } => CoordinateTransform::identity(*dim),
        TransformSpec::Example2 => CoordinateTransform::example2(),
        TransformSpec::Lower { axis, dim } => build_lower(&resolve_fn(doc, axis)?, *dim)?,
        TransformSpec::Upper { axis, dim } => build_upper(&resolve_fn(doc, axis)?, *dim)?,
    })
}

fn resolve_named_model(
    doc: &ConfigDoc,
    name: &str,
    stack: &mut Vec<String>,
) -> Result<SystemModel, ConfigError> {
    if stack.iter().any(|s| s == name) {
        return err(format!("model reference cycle: {} -> {name}", stack.join(" -> ")));
    }
    let spec = doc
        .models
        .get(name)
        .ok_or_else(|| ConfigError(format!("unresolved model name {name:?}")))?;
    stack.push(name.to_string());
    let model = match spec {
        ModelSpec::Builtin { name: builtin } => SystemModel::builtin(builtin).ok_or_else(|| {
            ConfigError(format!(
                "unknown builtin model {builtin:?}; available: {}",
                SystemModel::builtin_names().join(", ")
            ))
        })?,
        ModelSpec::Linear1d { a, b } => SystemModel::linear1d(*a, *b),
        ModelSpec::Cascade { receiver, driver } => {
            let r = resolve_named_model(doc, receiver, stack)?;
            let d = resolve_named_model(doc, driver, stack)?;
            SystemModel::cascade(&r, &d)?
        }
        ModelSpec::FeedbackNoInput { first, second } => {
            let a = resolve_named_model(doc, first, stack)?;
            let b = resolve_named_model(doc, second, stack)?;
            SystemModel::feedback_no_input(&a, &b)?
        }
        ModelSpec::FeedbackWithInputs { first, second } => {
            let a = resolve_named_model(doc, first, stack)?;
            let b = resolve_named_model(doc, second, stack)?;
            SystemModel::feedback_with_inputs(&a, &b)?
        }
    };
    stack.pop();
    Ok(model)
}

fn resolve_signal(spec: &SignalSpec) -> InputSignal {
    match spec {
        SignalSpec::Zero => InputSignal::Zero,
        SignalSpec::Constant { values } => InputSignal::Constant(values.clone()),
        SignalSpec::PiecewiseConstant { switch_times, values } => {
            InputSignal::PiecewiseConstant {
                switch_times: switch_times.clone(),
                values: values.clone(),
            }
        }
    }
}

/// Serializes a gain function back into the expression grammar. The output
/// contains no name references, so it stands alone in emitted documents.
pub fn fn_to_expr(f: &ScalarGainFn) -> FnExpr {
    fn node(f: &ScalarGainFn) -> FnNode {
        FnNode::Expr(Box::new(fn_to_expr(f)))
    }
    match f {
        ScalarGainFn::Identity => FnExpr::Identity,
        ScalarGainFn::Power(p) => FnExpr::Power { p: *p },
        ScalarGainFn::Linear(k) => FnExpr::Linear { k: *k },
        ScalarGainFn::ExpMinusOne => FnExpr::ExpMinusOne,
        ScalarGainFn::LogOnePlus => FnExpr::LogOnePlus,
        ScalarGainFn::Compose(outer, inner) => FnExpr::Compose {
            outer: node(outer),
            inner: node(inner),
        },
        ScalarGainFn::Max(a, b) => FnExpr::Max { a: node(a), b: node(b) },
        ScalarGainFn::Min(a, b) => FnExpr::Min { a: node(a), b: node(b) },
        ScalarGainFn::Sum(a, b) => FnExpr::Sum { a: node(a), b: node(b) },
        ScalarGainFn::PostScale(k, f) => FnExpr::PostScale { k: *k, f: node(f) },
        ScalarGainFn::PreScale(k, f) => FnExpr::PreScale { k: *k, f: node(f) },
        ScalarGainFn::Residual(f) => FnExpr::Residual { f: node(f) },
        ScalarGainFn::Inverse(f) => FnExpr::Inverse { f: node(f) },
        ScalarGainFn::Table(t) => FnExpr::Table {
            abscissas: t.abscissas().to_vec(),
            values: t.values().to_vec(),
        },
    }
}

/// Serializes a certificate into the definition grammar.
pub fn cert_to_spec(cert: &Certificate) -> CertSpec {
    use gaincert_core::CertKind;
    let beta = FnNode::Expr(Box::new(fn_to_expr(cert.beta())));
    match cert.kind() {
        CertKind::AlphaIntegrable => CertSpec::AlphaIntegrable {
            alpha: FnNode::Expr(Box::new(fn_to_expr(cert.alpha().expect("kind carries alpha")))),
            beta,
        },
        CertKind::L2 => CertSpec::L2 { beta },
        CertKind::Iss => CertSpec::Iss {
            mode: cert.mode().into(),
            alpha: FnNode::Expr(Box::new(fn_to_expr(cert.alpha().expect("kind carries alpha")))),
            beta,
            sigma: FnNode::Expr(Box::new(fn_to_expr(cert.sigma().expect("kind carries sigma")))),
        },
        CertKind::Iiss => CertSpec::Iiss {
            mode: cert.mode().into(),
            alpha: FnNode::Expr(Box::new(fn_to_expr(cert.alpha().expect("kind carries alpha")))),
            beta,
            sigma: FnNode::Expr(Box::new(fn_to_expr(cert.sigma().expect("kind carries sigma")))),
            gamma: FnNode::Expr(Box::new(fn_to_expr(cert.gamma().expect("kind carries gamma")))),
        },
        CertKind::LinearL2 => CertSpec::LinearL2 {
            mode: cert.mode().into(),
            beta,
            gain_sq: cert.gain_sq().expect("kind carries gain_sq"),
        },
        CertKind::NonlinearL2 => CertSpec::NonlinearL2 {
            mode: cert.mode().into(),
            beta,
            gamma: FnNode::Expr(Box::new(fn_to_expr(cert.gamma().expect("kind carries gamma")))),
        },
    }
}

/// Serializes a coordinate transform into the definition grammar. Only
/// diagonal families and the named builtin generics round-trip; transforms
/// backed by arbitrary closures cannot be written to a document.
pub fn transform_to_spec(t: &CoordinateTransform) -> Result<TransformSpec, ConfigError> {
    match t {
        CoordinateTransform::Diagonal { role, axis, dim } => {
            let axis = FnNode::Expr(Box::new(fn_to_expr(axis)));
            Ok(match role {
                DiagonalRole::Lower => TransformSpec::Lower { axis, dim: *dim },
                DiagonalRole::Upper => TransformSpec::Upper { axis, dim: *dim },
            })
        }
        CoordinateTransform::Generic { name, dim, .. } => match name.as_str() {
            "identity" => Ok(TransformSpec::Identity { dim: *dim }),
            "example2" => Ok(TransformSpec::Example2),
            other => err(format!(
                "transform {other:?} is closure-backed and cannot be serialized"
            )),
        },
    }
}

/// Builds the document emitted by `compose`: the certificate definition plus
/// the derivation trace, mergeable into later runs via `include`.
pub fn composed_doc(name: &str, cert: &Certificate, derivation: &[String]) -> ConfigDoc {
    let mut doc = ConfigDoc {
        version: CONFIG_VERSION,
        ..ConfigDoc::default()
    };
    doc.certificates.insert(name.to_string(), cert_to_spec(cert));
    doc.derivation = derivation.to_vec();
    doc
}

/// Builds the document emitted by `equiv` for a transformed certificate:
/// the certificate plus its coordinate transforms (named `<name>_state` and
/// `<name>_input`).
pub fn transformed_doc(
    name: &str,
    tc: &TransformedCertificate,
    derivation: &[String],
) -> Result<ConfigDoc, ConfigError> {
    let mut doc = composed_doc(name, &tc.certificate, derivation);
    doc.transforms.insert(
        format!("{name}_state"),
        transform_to_spec(&tc.state_transform)?,
    );
    if let Some(input) = &tc.input_transform {
        doc.transforms
            .insert(format!("{name}_input"), transform_to_spec(input)?);
    }
    Ok(doc)
}

/// Re-exported for the `transform_cert` equivalence op.
pub fn apply_transform_cert(
    cert: &Certificate,
    state: CoordinateTransform,
    input: Option<CoordinateTransform>,
) -> Result<TransformedCertificate, GainError> {
    transform_cert(cert, state, input, &gaincert_core::RadiusGrid::default())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn function_grammar_round_trips() {
        let text = r#"{
            "version": 1,
            "functions": {
                "beta": {"op": "power", "p": 2.0},
                "gamma": {"op": "post_scale", "k": 0.5, "f": {"op": "compose",
                    "outer": {"op": "power", "p": 2.0},
                    "inner": {"op": "exp_minus_one"}}},
                "alias": {"op": "ref", "name": "beta"}
            }
        }"#;
        let doc = ConfigDoc::from_json(text).unwrap();
        let reg = Registry::build(&doc).unwrap();
        let gamma = reg.function("gamma").unwrap();
        let v = gamma.eval(1.0).unwrap();
        let expected = 0.5 * (1.0f64.exp() - 1.0).powi(2);
        assert!((v - expected).abs() <= 1e-12 * expected);
        let alias = reg.function("alias").unwrap();
        assert_eq!(alias.eval(3.0).unwrap(), 9.0);

        let back = fn_to_expr(gamma);
        let json = serde_json::to_string(&back).unwrap();
        let reparsed: FnExpr = serde_json::from_str(&json).unwrap();
        let mut stack = Vec::new();
        let again = resolve_expr(&doc, &reparsed, &mut stack).unwrap();
        assert_eq!(again.eval(1.0).unwrap(), v);
    }

    #[test]
    fn reference_cycles_are_rejected() {
        let text = r#"{
            "version": 1,
            "functions": {
                "a": {"op": "ref", "name": "b"},
                "b": {"op": "post_scale", "k": 2.0, "f": "a"}
            }
        }"#;
        let doc = ConfigDoc::from_json(text).unwrap();
        let e = match Registry::build(&doc) {
            Ok(_) => panic!("cycle was accepted"),
            Err(e) => e,
        };
        assert!(e.0.contains("cycle"), "unexpected message: {}", e.0);
    }

    #[test]
    fn bad_constants_are_config_errors_not_panics() {
        let text = r#"{
            "version": 1,
            "functions": {"f": {"op": "linear", "k": -2.0}}
        }"#;
        let doc = ConfigDoc::from_json(text).unwrap();
        assert!(Registry::build(&doc).is_err());
    }

    #[test]
    fn unknown_fields_and_versions_are_rejected() {
        assert!(ConfigDoc::from_json(r#"{"version": 2}"#).is_err());
        assert!(ConfigDoc::from_json(r#"{"version": 1, "nonsense": 3}"#).is_err());
    }

    #[test]
    fn certificate_round_trip_preserves_bound_values() {
        let text = r#"{
            "version": 1,
            "certificates": {
                "c": {"kind": "nonlinear_l2", "mode": "max",
                      "beta": {"op": "sum", "a": {"op": "power", "p": 2.0},
                               "b": {"op": "post_scale", "k": 0.5, "f": {"op": "power", "p": 4.0}}},
                      "gamma": {"op": "post_scale", "k": 0.5, "f": {"op": "compose",
                                "outer": {"op": "power", "p": 2.0},
                                "inner": {"op": "exp_minus_one"}}}}
            }
        }"#;
        let doc = ConfigDoc::from_json(text).unwrap();
        let reg = Registry::build(&doc).unwrap();
        let cert = reg.certificate("c").unwrap();

        let spec = cert_to_spec(cert);
        let json = serde_json::to_string(&spec).unwrap();
        let reparsed: CertSpec = serde_json::from_str(&json).unwrap();
        let empty = ConfigDoc { version: 1, ..ConfigDoc::default() };
        let again = resolve_cert(&empty, &reparsed).unwrap();
        for s in [0.0, 0.3, 1.0, 2.5] {
            assert_eq!(again.bound(s, s), cert.bound(s, s));
        }
    }

    #[test]
    fn model_composition_resolves_dimensions() {
        let text = r#"{
            "version": 1,
            "models": {
                "a": {"type": "linear1d", "a": 1.0, "b": 0.5},
                "b": {"type": "builtin", "name": "ex3_bilinear"},
                "chain": {"type": "cascade", "receiver": "a", "driver": "b"}
            }
        }"#;
        let doc = ConfigDoc::from_json(text).unwrap();
        let reg = Registry::build(&doc).unwrap();
        let chain = reg.model("chain").unwrap();
        assert_eq!(chain.state_dim(), 2);
        assert_eq!(chain.input_dim(), 1);
    }
}
