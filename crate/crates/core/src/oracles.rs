//! Search-direction maps `Ψ(y)` and the deterministic error wrapper
//! `ŝ = s + η(y)` with `‖η(y)‖ ≤ a + r·dist(y, 𝒜)`.
//!
//! Oracles may carry state (a weight-schedule counter), so concurrent users
//! clone one instance per worker via [`DirectionOracle::boxed_clone`].

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{random_unit, ConvexSet};
use crate::par::chunk_rng;
use crate::problems::{Field, LyapunovField};
use crate::Vector;

/// Optional regularity constants of an oracle on its declared region.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct OracleMeta {
    /// `‖s‖ ≤ B`.
    pub bound: Option<f64>,
    /// `‖s(y₁) − s(y₂)‖ ≤ L‖y₁ − y₂‖`.
    pub lipschitz: Option<f64>,
    /// `‖s‖² ≤ β ∇V(y)ᵀs`.
    pub growth_beta: Option<f64>,
}

pub trait DirectionOracle: Send + Sync {
    /// A finite sample of `Ψ(y)`, deterministic in `(y, seed)` and the
    /// oracle's own state.
    fn query(&mut self, y: &Vector, seed: u64) -> Result<Vec<Vector>>;
    fn boxed_clone(&self) -> Box<dyn DirectionOracle>;
    fn meta(&self) -> OracleMeta {
        OracleMeta::default()
    }
    fn name(&self) -> String;
}

impl Clone for Box<dyn DirectionOracle> {
    fn clone(&self) -> Self {
        self.boxed_clone()
    }
}

/// `Ψ(y) = {∇f(y)}`.
#[derive(Clone, Debug)]
pub struct GradientOracle {
    field: Field,
    meta: OracleMeta,
}

pub fn gradient_oracle(field: Field) -> GradientOracle {
    let meta = OracleMeta {
        lipschitz: field.meta().lipschitz_grad,
        ..OracleMeta::default()
    };
    GradientOracle { field, meta }
}

impl GradientOracle {
    pub fn with_meta(mut self, meta: OracleMeta) -> Self {
        self.meta = meta;
        self
    }
}

impl DirectionOracle for GradientOracle {
    fn query(&mut self, y: &Vector, _seed: u64) -> Result<Vec<Vector>> {
        Ok(vec![self.field.gradient(y)?])
    }

    fn boxed_clone(&self) -> Box<dyn DirectionOracle> {
        Box::new(self.clone())
    }

    fn meta(&self) -> OracleMeta {
        self.meta
    }

    fn name(&self) -> String {
        format!("gradient({})", self.field.name())
    }
}

/// `Ψ(y) = ∂f(y)`, sampled.
#[derive(Clone, Debug)]
pub struct SubgradientOracle {
    field: Field,
    samples: usize,
    meta: OracleMeta,
}

pub fn subgradient_oracle(field: Field, samples_per_query: usize) -> SubgradientOracle {
    SubgradientOracle {
        field,
        samples: samples_per_query,
        meta: OracleMeta::default(),
    }
}

impl SubgradientOracle {
    pub fn with_meta(mut self, meta: OracleMeta) -> Self {
        self.meta = meta;
        self
    }
}

impl DirectionOracle for SubgradientOracle {
    fn query(&mut self, y: &Vector, seed: u64) -> Result<Vec<Vector>> {
        self.field.subgradients(y, seed, self.samples)
    }

    fn boxed_clone(&self) -> Box<dyn DirectionOracle> {
        Box::new(self.clone())
    }

    fn meta(&self) -> OracleMeta {
        self.meta
    }

    fn name(&self) -> String {
        format!("subgradient({})", self.field.name())
    }
}

/// `Ψ(y(t)) = {H(t)∇f(y(t))}` with `t` the number of earlier queries,
/// cycling through the schedule.
#[derive(Clone, Debug)]
pub struct WeightedGradientOracle {
    field: Field,
    schedule: Vec<DMatrix<f64>>,
    counter: usize,
    lambda_min: f64,
    lambda_max: f64,
}

/// Checks every weight is symmetric positive definite.
pub fn weighted_gradient_oracle(field: Field, schedule: Vec<DMatrix<f64>>) -> Result<WeightedGradientOracle> {
    if schedule.is_empty() {
        return Err(Error::param("weights", "schedule is empty"));
    }
    let n = field.dim();
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max: f64 = 0.0;
    for (t, h) in schedule.iter().enumerate() {
        if h.nrows() != n || h.ncols() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: h.nrows(),
            });
        }
        if (h - h.transpose()).amax() > 1e-12 * (1.0 + h.amax()) {
            return Err(Error::param(format!("weights[{t}]"), "must be symmetric"));
        }
        let eig = h.clone().symmetric_eigen().eigenvalues;
        if !(eig.min() > 0.0) {
            return Err(Error::param(
                format!("weights[{t}]"),
                format!("must be positive definite (min eigenvalue {})", eig.min()),
            ));
        }
        lambda_min = lambda_min.min(eig.min());
        lambda_max = lambda_max.max(eig.max());
    }
    Ok(WeightedGradientOracle {
        field,
        schedule,
        counter: 0,
        lambda_min,
        lambda_max,
    })
}

impl WeightedGradientOracle {
    /// Smallest eigenvalue over the whole schedule.
    pub fn lambda_min(&self) -> f64 {
        self.lambda_min
    }

    pub fn lambda_max(&self) -> f64 {
        self.lambda_max
    }

    pub fn counter(&self) -> usize {
        self.counter
    }
}

impl DirectionOracle for WeightedGradientOracle {
    fn query(&mut self, y: &Vector, _seed: u64) -> Result<Vec<Vector>> {
        let h = &self.schedule[self.counter % self.schedule.len()];
        self.counter += 1;
        Ok(vec![h * self.field.gradient(y)?])
    }

    fn boxed_clone(&self) -> Box<dyn DirectionOracle> {
        Box::new(self.clone())
    }

    fn meta(&self) -> OracleMeta {
        OracleMeta {
            lipschitz: self.field.meta().lipschitz_grad.map(|l| l * self.lambda_max),
            ..OracleMeta::default()
        }
    }

    fn name(&self) -> String {
        format!("weighted-gradient({})", self.field.name())
    }
}

/// Forward differences `(f(y + μeᵢ) − f(y))/μ` along the coordinate axes.
#[derive(Clone, Debug)]
pub struct FiniteDifferenceOracle {
    field: Field,
    mu: f64,
}

pub fn finite_difference_oracle(field: Field, mu: f64) -> Result<FiniteDifferenceOracle> {
    if !(mu > 0.0 && mu.is_finite()) {
        return Err(Error::param("mu", format!("must be positive, got {mu}")));
    }
    Ok(FiniteDifferenceOracle { field, mu })
}

impl FiniteDifferenceOracle {
    /// Absolute error bound `√n·μ·L` when the gradient Lipschitz constant is known.
    pub fn error_bound(&self) -> Option<f64> {
        self.field
            .meta()
            .lipschitz_grad
            .map(|l| (self.field.dim() as f64).sqrt() * self.mu * l)
    }
}

impl DirectionOracle for FiniteDifferenceOracle {
    fn query(&mut self, y: &Vector, _seed: u64) -> Result<Vec<Vector>> {
        let f0 = self.field.value(y);
        let mut s = Vector::zeros(y.len());
        let mut probe = y.clone();
        for i in 0..y.len() {
            probe[i] += self.mu;
            s[i] = (self.field.value(&probe) - f0) / self.mu;
            probe[i] = y[i];
        }
        Ok(vec![s])
    }

    fn boxed_clone(&self) -> Box<dyn DirectionOracle> {
        Box::new(self.clone())
    }

    fn name(&self) -> String {
        format!("finite-difference({}, mu={})", self.field.name(), self.mu)
    }
}

/// `Ψ(y) = {k·s : s ∈ base(y)}`; a negative factor gives an ascent oracle.
#[derive(Clone)]
pub struct ScaledOracle {
    base: Box<dyn DirectionOracle>,
    factor: f64,
}

pub fn scaled(base: Box<dyn DirectionOracle>, factor: f64) -> ScaledOracle {
    ScaledOracle { base, factor }
}

impl DirectionOracle for ScaledOracle {
    fn query(&mut self, y: &Vector, seed: u64) -> Result<Vec<Vector>> {
        Ok(self.base.query(y, seed)?.into_iter().map(|s| s * self.factor).collect())
    }

    fn boxed_clone(&self) -> Box<dyn DirectionOracle> {
        Box::new(self.clone())
    }

    fn name(&self) -> String {
        format!("{}*{}", self.factor, self.base.name())
    }
}

/// How the error direction is chosen; its norm is governed by `a + r·dist`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ErrorLaw {
    /// `η = −m ∇V/‖∇V‖`, or `−m s/‖s‖` without a registered `V`.
    WorstCaseAligned,
    /// Uniform direction, norm uniform in `[0, m]`.
    RandomUnit,
    /// The given vector, shortened to norm `m` if longer.
    FixedVector(Vec<f64>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ErrorModel {
    pub a: f64,
    pub r: f64,
    pub law: ErrorLaw,
}

impl ErrorModel {
    pub fn new(a: f64, r: f64, law: ErrorLaw) -> Result<Self> {
        if !(a >= 0.0 && a.is_finite()) {
            return Err(Error::param("a", format!("must be finite and >= 0, got {a}")));
        }
        if !(r >= 0.0 && r.is_finite()) {
            return Err(Error::param("r", format!("must be finite and >= 0, got {r}")));
        }
        if let ErrorLaw::FixedVector(v) = &law {
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::param("law", "fixed vector must be finite"));
            }
        }
        Ok(ErrorModel { a, r, law })
    }

    pub fn worst_case(a: f64, r: f64) -> Result<Self> {
        Self::new(a, r, ErrorLaw::WorstCaseAligned)
    }

    /// Relative error from an inexact weight `H + H̃`: `a = 0`, `r = ‖H̃‖·L`.
    pub fn quantization(perturbation_norm: f64, lipschitz_grad: f64) -> Result<Self> {
        Self::worst_case(0.0, perturbation_norm * lipschitz_grad)
    }

    pub fn magnitude(&self, dist: f64) -> f64 {
        self.a + self.r * dist
    }
}

/// `Ψ̂(y) = {s + η(y) : s ∈ Ψ(y)}`.
#[derive(Clone)]
pub struct PerturbedOracle {
    base: Box<dyn DirectionOracle>,
    model: ErrorModel,
    attractor: ConvexSet,
    lyapunov: Option<LyapunovField>,
}

pub fn perturb(base: Box<dyn DirectionOracle>, model: ErrorModel, attractor: ConvexSet) -> PerturbedOracle {
    PerturbedOracle {
        base,
        model,
        attractor,
        lyapunov: None,
    }
}

impl PerturbedOracle {
    /// Registers `V` so the worst-case law opposes `∇V`.
    pub fn against(mut self, v: LyapunovField) -> Self {
        self.lyapunov = Some(v);
        self
    }

    pub fn model(&self) -> &ErrorModel {
        &self.model
    }
}

impl DirectionOracle for PerturbedOracle {
    fn query(&mut self, y: &Vector, seed: u64) -> Result<Vec<Vector>> {
        let base = self.base.query(y, seed)?;
        let m = self.model.magnitude(self.attractor.distance(y)?);
        if m == 0.0 {
            return Ok(base);
        }
        let n = y.len();
        let grad_v = match (&self.model.law, &self.lyapunov) {
            (ErrorLaw::WorstCaseAligned, Some(v)) => Some(v.gradient(y)?),
            _ => None,
        };
        let mut rng = chunk_rng(seed ^ 0xE7A0_5EED, 1);
        let mut out = Vec::with_capacity(base.len());
        for s in base {
            let eta = match &self.model.law {
                ErrorLaw::WorstCaseAligned => {
                    let dir = match &grad_v {
                        Some(g) if g.norm() > 0.0 => -g / g.norm(),
                        _ if s.norm() > 0.0 => -&s / s.norm(),
                        _ => Vector::from_fn(n, |i, _| if i == 0 { 1.0 } else { 0.0 }),
                    };
                    dir * m
                }
                ErrorLaw::RandomUnit => random_unit(n, &mut rng) * (m * rng.random::<f64>()),
                ErrorLaw::FixedVector(v) => {
                    if v.len() != n {
                        return Err(Error::DimensionMismatch {
                            expected: n,
                            found: v.len(),
                        });
                    }
                    let v = Vector::from_column_slice(v);
                    let norm = v.norm();
                    if norm > m {
                        v * (m / norm)
                    } else {
                        v
                    }
                }
            };
            out.push(s + eta);
        }
        Ok(out)
    }

    fn boxed_clone(&self) -> Box<dyn DirectionOracle> {
        Box::new(self.clone())
    }

    fn meta(&self) -> OracleMeta {
        let base = self.base.meta();
        OracleMeta {
            bound: None,
            lipschitz: None,
            growth_beta: base.growth_beta.filter(|_| self.model.a == 0.0 && self.model.r == 0.0),
        }
    }

    fn name(&self) -> String {
        format!(
            "perturbed({}, a={}, r={})",
            self.base.name(),
            self.model.a,
            self.model.r
        )
    }
}
