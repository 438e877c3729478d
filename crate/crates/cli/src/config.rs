//! Experiment configuration: one TOML document, leaves overridable by dotted
//! path from the command line.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use spsp::dynamics::Selection;
use spsp::geometry::ConvexSet;
use spsp::oracles::ErrorLaw;
use spsp::problems::{BuiltinSpec, LyapunovKind};
use spsp::Vector;

/// A configuration problem, reported with the offending field path.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

fn invalid(path: &str, reason: impl fmt::Display) -> ConfigError {
    ConfigError(format!("{path}: {reason}"))
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub problem: BuiltinSpec,
    #[serde(default)]
    pub feasible: SetConfig,
    #[serde(default)]
    pub lyapunov: LyapunovConfig,
    #[serde(default)]
    pub oracle: OracleConfig,
    #[serde(default)]
    pub certificate: CertificateConfig,
    #[serde(default)]
    pub budget: BudgetConfig,
    #[serde(default)]
    pub robust: RobustConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub lemma_b: LemmaBConfig,
    #[serde(default)]
    pub sampling: SamplingConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

/// Feasible set `Ξ`.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SetConfig {
    #[default]
    WholeSpace,
    Box {
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    Ball {
        center: Vec<f64>,
        radius: f64,
    },
    Halfspace {
        normal: Vec<f64>,
        offset: f64,
    },
}

impl SetConfig {
    pub fn build(&self, dim: usize) -> Result<ConvexSet, ConfigError> {
        let vector = |field: &str, v: &[f64]| {
            if v.len() == dim {
                Ok(Vector::from_column_slice(v))
            } else {
                Err(invalid(
                    &format!("feasible.{field}"),
                    format!("has length {}, the problem has dimension {dim}", v.len()),
                ))
            }
        };
        let set = match self {
            SetConfig::WholeSpace => Ok(ConvexSet::whole_space(dim)),
            SetConfig::Box { lo, hi } => ConvexSet::boxed(vector("lo", lo)?, vector("hi", hi)?),
            SetConfig::Ball { center, radius } => ConvexSet::ball(vector("center", center)?, *radius),
            SetConfig::Halfspace { normal, offset } => ConvexSet::halfspace(vector("normal", normal)?, *offset),
        };
        set.map_err(|e| invalid("feasible", e))
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LyapunovConfig {
    #[serde(default = "squared_distance")]
    pub kind: LyapunovKind,
}

fn squared_distance() -> LyapunovKind {
    LyapunovKind::SquaredDistance
}

impl Default for LyapunovConfig {
    fn default() -> Self {
        LyapunovConfig {
            kind: squared_distance(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OracleKind {
    #[default]
    Gradient,
    Subgradient,
    FiniteDifference,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OracleConfig {
    #[serde(default)]
    pub kind: OracleKind,
    /// Subgradients sampled per query.
    #[serde(default = "default_samples_per_query")]
    pub samples_per_query: usize,
    /// Finite-difference step.
    #[serde(default = "default_mu")]
    pub mu: f64,
    /// Multiplies every direction.
    #[serde(default = "one")]
    pub scale: f64,
    #[serde(default)]
    pub error: Option<ErrorConfig>,
}

fn default_samples_per_query() -> usize {
    3
}

fn default_mu() -> f64 {
    1e-6
}

fn one() -> f64 {
    1.0
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            kind: OracleKind::default(),
            samples_per_query: default_samples_per_query(),
            mu: default_mu(),
            scale: one(),
            error: None,
        }
    }
}

/// Deterministic error `‖η(y)‖ ≤ a + r·dist(y, 𝒜)`.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorConfig {
    #[serde(default)]
    pub a: f64,
    #[serde(default)]
    pub r: f64,
    #[serde(default = "worst_case")]
    pub law: ErrorLaw,
}

fn worst_case() -> ErrorLaw {
    ErrorLaw::WorstCaseAligned
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CertificateKind {
    #[default]
    StronglyConvex,
    LinearObjective,
    Convex,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CertificateConfig {
    #[serde(default)]
    pub kind: CertificateKind,
    /// Defaults to the problem's strong-convexity constant, or the norm-cone
    /// slope for `linear-objective`.
    #[serde(default)]
    pub c: Option<f64>,
    /// Defaults to `oracle.error.a`.
    #[serde(default)]
    pub a: Option<f64>,
    /// Defaults to `oracle.error.r`.
    #[serde(default)]
    pub r: Option<f64>,
    /// Band radius for the linear and convex certificates.
    #[serde(default)]
    pub sigma: Option<f64>,
    /// Claims the certificate's `φ` on a different band.
    #[serde(default)]
    pub band: Option<BandConfig>,
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandConfig {
    pub sigma: f64,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default)]
    pub b: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetKindConfig {
    Growth,
    #[default]
    Bounded,
    Lipschitz,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BudgetConfig {
    #[serde(default)]
    pub kind: BudgetKindConfig,
    /// Descent-lemma weight; `½` for the squared distance.
    #[serde(default = "half")]
    pub w: f64,
    /// Growth constant `β`; defaults to the oracle's.
    #[serde(default)]
    pub beta: Option<f64>,
    /// Direction bound `B`; defaults to the oracle's.
    #[serde(default)]
    pub bound: Option<f64>,
    /// Direction Lipschitz constant `L`; defaults to the oracle's.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    /// `max ‖s‖²` on the attractor; sampled when absent.
    #[serde(default)]
    pub s_star: Option<f64>,
    /// Containment level of `φ`; computed when absent.
    #[serde(default)]
    pub c: Option<f64>,
    #[serde(default = "default_b_o")]
    pub b_o: f64,
    /// Defaults to the certificate's `σ`.
    #[serde(default)]
    pub sigma_o: Option<f64>,
    /// Defaults to the certificate's `ε`.
    #[serde(default)]
    pub epsilon_o: Option<f64>,
    #[serde(default = "half")]
    pub rho_o: f64,
    /// Check P1-P3 at `alpha_max`.
    #[serde(default = "yes")]
    pub check: bool,
}

fn half() -> f64 {
    0.5
}

fn default_b_o() -> f64 {
    0.1
}

fn yes() -> bool {
    true
}

impl Default for BudgetConfig {
    fn default() -> Self {
        BudgetConfig {
            kind: BudgetKindConfig::default(),
            w: half(),
            beta: None,
            bound: None,
            lipschitz: None,
            s_star: None,
            c: None,
            b_o: default_b_o(),
            sigma_o: None,
            epsilon_o: None,
            rho_o: half(),
            check: yes(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RobustConfig {
    #[serde(default = "one")]
    pub sigma_hat: f64,
    #[serde(default)]
    pub epsilon_hat: f64,
    /// Lipschitz constant of `∇V`; defaults to the Lyapunov function's.
    #[serde(default)]
    pub lipschitz: Option<f64>,
    /// Containment level of the unperturbed `φ`; computed when absent.
    #[serde(default)]
    pub c: Option<f64>,
    /// Injected `a` as a multiple of `a_max`.
    #[serde(default = "half")]
    pub a_fraction: f64,
    /// Injected `r` as a multiple of `r_max`.
    #[serde(default = "half")]
    pub r_fraction: f64,
    #[serde(default = "worst_case")]
    pub law: ErrorLaw,
}

impl Default for RobustConfig {
    fn default() -> Self {
        RobustConfig {
            sigma_hat: one(),
            epsilon_hat: 0.0,
            lipschitz: None,
            c: None,
            a_fraction: half(),
            r_fraction: half(),
            law: worst_case(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DynamicsConfig {
    #[serde(default)]
    pub alpha: Option<f64>,
    #[serde(default)]
    pub alpha_grid: Option<Vec<f64>>,
    /// Step sizes as fractions of the configured budget's `alpha_max`.
    #[serde(default)]
    pub budget_fractions: Option<Vec<f64>>,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub selection: Selection,
    /// Start of `simulate`; defaults to the attractor shifted by one along
    /// every axis.
    #[serde(default)]
    pub y0: Option<Vec<f64>>,
    #[serde(default = "one")]
    pub sigma: f64,
    #[serde(default = "default_rho_a")]
    pub rho_a: f64,
    #[serde(default = "half")]
    pub rho_s: f64,
}

fn default_horizon() -> usize {
    1000
}

fn default_trials() -> usize {
    64
}

fn default_rho_a() -> f64 {
    0.1
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        DynamicsConfig {
            alpha: None,
            alpha_grid: None,
            budget_fractions: None,
            horizon: default_horizon(),
            trials: default_trials(),
            selection: Selection::default(),
            y0: None,
            sigma: one(),
            rho_a: default_rho_a(),
            rho_s: half(),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PhiSource {
    /// `φ = V`.
    #[default]
    Lyapunov,
    /// The configured certificate's `φ`.
    Certificate,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LemmaBConfig {
    #[serde(default)]
    pub phi: PhiSource,
    #[serde(default)]
    pub epsilon: f64,
    #[serde(default = "half")]
    pub rho: f64,
    #[serde(default = "two")]
    pub sigma: f64,
    #[serde(default = "default_resolution")]
    pub resolution: f64,
    /// `K_φ` for the underestimation step sizes; skipped when absent.
    #[serde(default)]
    pub k_phi: Option<f64>,
    /// Defaults to `sigma`.
    #[serde(default)]
    pub sigma_hat: Option<f64>,
    /// Radii in the shell-minimum profile.
    #[serde(default = "default_profile_points")]
    pub profile_points: usize,
}

fn two() -> f64 {
    2.0
}

fn default_resolution() -> f64 {
    0.01
}

fn default_profile_points() -> usize {
    50
}

impl Default for LemmaBConfig {
    fn default() -> Self {
        LemmaBConfig {
            phi: PhiSource::default(),
            epsilon: 0.0,
            rho: half(),
            sigma: two(),
            resolution: default_resolution(),
            k_phi: None,
            sigma_hat: None,
            profile_points: default_profile_points(),
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SamplingConfig {
    #[serde(default = "default_samples")]
    pub samples: usize,
    #[serde(default = "default_inner_samples")]
    pub inner_samples: usize,
    #[serde(default)]
    pub seed: u64,
    /// Sampling radius standing in for an infinite `σ`.
    #[serde(default)]
    pub truncation: Option<f64>,
}

fn default_samples() -> usize {
    10_000
}

fn default_inner_samples() -> usize {
    2_500
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            samples: default_samples(),
            inner_samples: default_inner_samples(),
            seed: 0,
            truncation: None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    Json,
    Csv,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputConfig {
    #[serde(default)]
    pub directory: Option<PathBuf>,
    #[serde(default = "all_formats")]
    pub formats: Vec<Format>,
}

fn all_formats() -> Vec<Format> {
    vec![Format::Json, Format::Csv]
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            directory: None,
            formats: all_formats(),
        }
    }
}

/// Reads `path`, applies `key=value` overrides and validates the result.
pub fn load(path: &Path, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError(format!("{}: {e}", path.display())))?;
    parse(&text, overrides).map_err(|e| ConfigError(format!("{}: {}", path.display(), e.0)))
}

pub fn parse(text: &str, overrides: &[String]) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = if overrides.is_empty() {
        // keeps spans, so errors carry line and column
        let de = toml::Deserializer::parse(text).map_err(|e| ConfigError(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(path_error)?
    } else {
        let mut table: toml::Table = toml::from_str(text).map_err(|e| ConfigError(e.to_string()))?;
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        serde_path_to_error::deserialize(toml::Value::Table(table)).map_err(path_error)?
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn path_error(e: serde_path_to_error::Error<toml::de::Error>) -> ConfigError {
    let path = e.path().to_string();
    let inner = e.into_inner();
    let mut msg = inner.to_string();
    // without spans the message repeats the key on its own line
    if let Some(i) = msg.find("\nin `") {
        msg.truncate(i);
    }
    if path == "." {
        ConfigError(msg.trim_end().to_string())
    } else {
        ConfigError(format!("{path}: {}", msg.trim_end()))
    }
}

/// `a.b.c=value`, where `value` is read as a TOML value and falls back to a
/// bare string.
fn apply_override(table: &mut toml::Table, spec: &str) -> Result<(), ConfigError> {
    let (key, raw) = spec
        .split_once('=')
        .ok_or_else(|| ConfigError(format!("override `{spec}`: expected key=value")))?;
    let key = key.trim();
    let raw = raw.trim();
    let value = toml::from_str::<toml::Table>(&format!("v = {raw}"))
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()));
    let parts: Vec<&str> = key.split('.').collect();
    if parts.iter().any(|p| p.is_empty()) {
        return Err(ConfigError(format!("override `{spec}`: empty path segment")));
    }
    let (last, parents) = parts.split_last().expect("split yields at least one part");
    let mut node = table;
    for (i, p) in parents.iter().enumerate() {
        let entry = node
            .entry(p.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| ConfigError(format!("override `{spec}`: `{}` is not a table", parts[..=i].join("."))))?;
    }
    node.insert(last.to_string(), value);
    Ok(())
}

fn positive(path: &str, v: f64) -> Result<(), ConfigError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite and positive, got {v}")))
    }
}

fn nonnegative(path: &str, v: f64) -> Result<(), ConfigError> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(invalid(path, format!("must be finite and >= 0, got {v}")))
    }
}

fn validate(cfg: &ExperimentConfig) -> Result<(), ConfigError> {
    cfg.problem.build().map_err(|e| invalid("problem", e))?;

    let o = &cfg.oracle;
    if o.samples_per_query == 0 {
        return Err(invalid("oracle.samples_per_query", "must be at least 1"));
    }
    positive("oracle.mu", o.mu)?;
    positive("oracle.scale", o.scale)?;
    if let Some(err) = &o.error {
        nonnegative("oracle.error.a", err.a)?;
        nonnegative("oracle.error.r", err.r)?;
    }

    let c = &cfg.certificate;
    if let Some(v) = c.c {
        positive("certificate.c", v)?;
    }
    if let Some(v) = c.a {
        nonnegative("certificate.a", v)?;
    }
    if let Some(v) = c.r {
        nonnegative("certificate.r", v)?;
    }
    if let Some(v) = c.sigma {
        positive("certificate.sigma", v)?;
    }
    if let Some(b) = &c.band {
        nonnegative("certificate.band.epsilon", b.epsilon)?;
        nonnegative("certificate.band.b", b.b)?;
        if !(b.sigma > b.epsilon) {
            return Err(invalid("certificate.band.sigma", "must exceed epsilon"));
        }
    }

    let b = &cfg.budget;
    positive("budget.w", b.w)?;
    positive("budget.b_o", b.b_o)?;
    positive("budget.rho_o", b.rho_o)?;
    for (path, v) in [
        ("budget.beta", b.beta),
        ("budget.bound", b.bound),
        ("budget.lipschitz", b.lipschitz),
        ("budget.c", b.c),
        ("budget.sigma_o", b.sigma_o),
    ] {
        if let Some(v) = v {
            positive(path, v)?;
        }
    }
    for (path, v) in [("budget.s_star", b.s_star), ("budget.epsilon_o", b.epsilon_o)] {
        if let Some(v) = v {
            nonnegative(path, v)?;
        }
    }

    let r = &cfg.robust;
    positive("robust.sigma_hat", r.sigma_hat)?;
    nonnegative("robust.epsilon_hat", r.epsilon_hat)?;
    if r.epsilon_hat >= r.sigma_hat {
        return Err(invalid("robust.epsilon_hat", "must be below sigma_hat"));
    }
    nonnegative("robust.a_fraction", r.a_fraction)?;
    nonnegative("robust.r_fraction", r.r_fraction)?;
    for (path, v) in [("robust.lipschitz", r.lipschitz), ("robust.c", r.c)] {
        if let Some(v) = v {
            positive(path, v)?;
        }
    }

    let d = &cfg.dynamics;
    if let Some(a) = d.alpha {
        positive("dynamics.alpha", a)?;
    }
    for (path, grid) in [
        ("dynamics.alpha_grid", &d.alpha_grid),
        ("dynamics.budget_fractions", &d.budget_fractions),
    ] {
        if let Some(g) = grid {
            if g.is_empty() {
                return Err(invalid(path, "must not be empty"));
            }
            for (i, a) in g.iter().enumerate() {
                positive(&format!("{path}[{i}]"), *a)?;
            }
        }
    }
    if d.horizon == 0 {
        return Err(invalid("dynamics.horizon", "must be at least 1"));
    }
    if d.trials == 0 {
        return Err(invalid("dynamics.trials", "must be at least 1"));
    }
    positive("dynamics.rho_a", d.rho_a)?;
    positive("dynamics.rho_s", d.rho_s)?;
    positive("dynamics.sigma", d.sigma)?;
    if d.sigma <= d.rho_a {
        return Err(invalid("dynamics.sigma", "must exceed rho_a"));
    }

    let l = &cfg.lemma_b;
    nonnegative("lemma_b.epsilon", l.epsilon)?;
    positive("lemma_b.rho", l.rho)?;
    positive("lemma_b.resolution", l.resolution)?;
    if !(l.sigma > l.epsilon + l.rho && l.sigma.is_finite()) {
        return Err(invalid("lemma_b.sigma", "must be finite and exceed epsilon + rho"));
    }
    if let Some(k) = l.k_phi {
        positive("lemma_b.k_phi", k)?;
    }
    if let Some(s) = l.sigma_hat {
        positive("lemma_b.sigma_hat", s)?;
    }

    let s = &cfg.sampling;
    if s.samples == 0 {
        return Err(invalid("sampling.samples", "must be at least 1"));
    }
    if let Some(t) = s.truncation {
        positive("sampling.truncation", t)?;
    }
    if cfg.output.formats.is_empty() {
        return Err(invalid("output.formats", "must name at least one format"));
    }
    Ok(())
}
