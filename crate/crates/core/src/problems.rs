//! Objective functions, their minimizer sets, and Lyapunov functions built
//! from them.

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{random_unit, ConvexSet};
use crate::par::chunk_rng;
use crate::Vector;

/// Points whose distance to a nonsmooth locus is below this are treated as on it.
const KINK_TOLERANCE: f64 = 1e-12;
/// Relative tolerance deciding which max-affine pieces are active.
pub const TIE_TOLERANCE: f64 = 1e-9;

/// Analytic facts about a field; `None` means unknown.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize)]
pub struct FieldMeta {
    pub lipschitz_grad: Option<f64>,
    pub strong_convexity: Option<f64>,
    pub minimum_value: Option<f64>,
    pub convex: bool,
}

/// A real-valued function on ℝⁿ with first-order information.
pub trait ScalarField: Debug + Send + Sync {
    fn dim(&self) -> usize;
    fn value(&self, y: &Vector) -> f64;
    /// Errors with [`Error::NotDifferentiable`] on the nonsmooth locus.
    fn gradient(&self, y: &Vector) -> Result<Vector>;
    /// A finite sample of the subdifferential. Where the field is
    /// differentiable this is exactly `{gradient(y)}`.
    fn subgradients(&self, y: &Vector, _seed: u64, _count: usize) -> Result<Vec<Vector>> {
        Ok(vec![self.gradient(y)?])
    }
    fn meta(&self) -> FieldMeta;
    fn name(&self) -> &str;
}

pub type Field = Arc<dyn ScalarField>;

fn check_dim(y: &Vector, dim: usize) -> Result<()> {
    if y.len() == dim {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            expected: dim,
            found: y.len(),
        })
    }
}

/// `½ (y − x*)ᵀ H (y − x*)` with symmetric positive definite `H`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    name: String,
    hessian: DMatrix<f64>,
    center: Vector,
    min_eig: f64,
    max_eig: f64,
}

impl Quadratic {
    pub fn new(name: impl Into<String>, hessian: DMatrix<f64>, center: Vector) -> Result<Self> {
        if !hessian.is_square() || hessian.nrows() != center.len() {
            return Err(Error::DimensionMismatch {
                expected: center.len(),
                found: hessian.nrows(),
            });
        }
        if (&hessian - hessian.transpose()).amax() > 1e-12 * (1.0 + hessian.amax()) {
            return Err(Error::param("hessian", "must be symmetric"));
        }
        let eig = hessian.clone().symmetric_eigen().eigenvalues;
        let min_eig = eig.min();
        let max_eig = eig.max();
        if !(min_eig > 0.0) {
            return Err(Error::param(
                "hessian",
                format!("must be positive definite (min eigenvalue {min_eig})"),
            ));
        }
        Ok(Quadratic {
            name: name.into(),
            hessian,
            center,
            min_eig,
            max_eig,
        })
    }

    pub fn hessian(&self) -> &DMatrix<f64> {
        &self.hessian
    }

    pub fn center(&self) -> &Vector {
        &self.center
    }
}

impl ScalarField for Quadratic {
    fn dim(&self) -> usize {
        self.center.len()
    }

    fn value(&self, y: &Vector) -> f64 {
        let u = y - &self.center;
        0.5 * u.dot(&(&self.hessian * &u))
    }

    fn gradient(&self, y: &Vector) -> Result<Vector> {
        check_dim(y, self.dim())?;
        Ok(&self.hessian * (y - &self.center))
    }

    fn meta(&self) -> FieldMeta {
        FieldMeta {
            lipschitz_grad: Some(self.max_eig),
            strong_convexity: Some(self.min_eig),
            minimum_value: Some(0.0),
            convex: true,
        }
    }

    fn name(&self) -> &str {
        &self.name
    }
}

/// `c · dist(y, X*)` for a ball or box `X*`.
#[derive(Clone, Debug)]
pub struct NormCone {
    c: f64,
    target: ConvexSet,
}

impl NormCone {
    pub fn new(c: f64, target: ConvexSet) -> Result<Self> {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::param("c", format!("must be positive, got {c}")));
        }
        if !target.is_compact() {
            return Err(Error::param("target", "minimizer set must be compact"));
        }
        Ok(NormCone { c, target })
    }

    /// Outward unit normals spanning the normal cone of `X*` at a point on it,
    /// or `None` for interior points.
    fn normal_generators(&self, y: &Vector) -> Vec<Vector> {
        let n = y.len();
        let (lo, hi) = self.target.bounding_box().expect("compact target");
        let mut gens = Vec::new();
        match self.target.kind() {
            crate::geometry::SetKind::Ball => {
                let center = (&lo + &hi) / 2.0;
                let radius = (hi[0] - lo[0]) / 2.0;
                let u = y - &center;
                if radius == 0.0 {
                    // whole unit ball: use ± coordinate axes as generators
                    for i in 0..n {
                        gens.push(Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }));
                        gens.push(Vector::from_fn(n, |k, _| if k == i { -1.0 } else { 0.0 }));
                    }
                } else if u.norm() >= radius - KINK_TOLERANCE {
                    gens.push(u.normalize());
                }
            }
            _ => {
                for i in 0..n {
                    if y[i] >= hi[i] - KINK_TOLERANCE {
                        gens.push(Vector::from_fn(n, |k, _| if k == i { 1.0 } else { 0.0 }));
                    }
                    if y[i] <= lo[i] + KINK_TOLERANCE {
                        gens.push(Vector::from_fn(n, |k, _| if k == i { -1.0 } else { 0.0 }));
                    }
                }
            }
        }
        gens
    }
}

impl ScalarField for NormCone {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn value(&self, y: &Vector) -> f64 {
        self.c * self.target.distance(y).unwrap_or(f64::NAN)
    }

    fn gradient(&self, y: &Vector) -> Result<Vector> {
        check_dim(y, self.dim())?;
        let p = self.target.project(y)?;
        let diff = y - p;
        let d = diff.norm();
        if d > KINK_TOLERANCE {
            return Ok(diff * (self.c / d));
        }
        if self.normal_generators(y).is_empty() {
            Ok(Vector::zeros(y.len()))
        } else {
            Err(Error::NotDifferentiable(
                "norm-cone on the boundary of its minimizer set".into(),
            ))
        }
    }

    fn subgradients(&self, y: &Vector, seed: u64, count: usize) -> Result<Vec<Vector>> {
        check_dim(y, self.dim())?;
        let d = self.target.distance(y)?;
        if d > KINK_TOLERANCE {
            return Ok(vec![self.gradient(y)?]);
        }
        let gens = self.normal_generators(y);
        if gens.is_empty() {
            return Ok(vec![Vector::zeros(y.len())]);
        }
        // ∂J(y) = c · (N_X*(y) ∩ unit ball): the origin, the scaled extreme
        // rays, and random members
        let mut out = vec![Vector::zeros(y.len())];
        let point_target = gens.len() == 2 * y.len() && self.target.kind() == crate::geometry::SetKind::Ball;
        if !point_target {
            out.extend(gens.iter().map(|g| g * self.c));
        }
        let mut rng = chunk_rng(seed, 0);
        for _ in 0..count {
            let dir = if point_target {
                random_unit(y.len(), &mut rng)
            } else {
                let mut v = Vector::zeros(y.len());
                for g in &gens {
                    v += g * rng.sample::<f64, _>(Exp1);
                }
                let n = v.norm();
                if n > 0.0 {
                    v / n
                } else {
                    gens[0].clone()
                }
            };
            out.push(dir * (self.c * rng.random::<f64>()));
        }
        Ok(out)
    }

    fn meta(&self) -> FieldMeta {
        FieldMeta {
            lipschitz_grad: None,
            strong_convexity: None,
            minimum_value: Some(0.0),
            convex: true,
        }
    }

    fn name(&self) -> &str {
        "norm-cone"
    }
}

/// One affine piece `slopeᵀy + offset`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Piece {
    pub slope: Vec<f64>,
    pub offset: f64,
}

/// `max_i (a_iᵀy + b_i)` with a unique minimizer.
#[derive(Clone, Debug)]
pub struct MaxAffine {
    slopes: Vec<Vector>,
    offsets: Vec<f64>,
    minimizer: Vector,
    minimum: f64,
}

impl MaxAffine {
    pub fn new(pieces: &[Piece]) -> Result<Self> {
        let Some(first) = pieces.first() else {
            return Err(Error::param("pieces", "need at least one piece"));
        };
        let n = first.slope.len();
        if n == 0 {
            return Err(Error::param("pieces", "slopes must be nonempty"));
        }
        let mut slopes = Vec::with_capacity(pieces.len());
        let mut offsets = Vec::with_capacity(pieces.len());
        for p in pieces {
            if p.slope.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    found: p.slope.len(),
                });
            }
            if !p.offset.is_finite() || p.slope.iter().any(|v| !v.is_finite()) {
                return Err(Error::param("pieces", "coefficients must be finite"));
            }
            slopes.push(Vector::from_column_slice(&p.slope));
            offsets.push(p.offset);
        }
        let (minimizer, minimum) = minimize_max_affine(&slopes, &offsets)?;
        let f = MaxAffine {
            slopes,
            offsets,
            minimizer,
            minimum,
        };
        f.check_unique_minimizer()?;
        Ok(f)
    }

    /// `‖y‖₁` written as a maximum over sign vectors.
    pub fn l1(dim: usize) -> Result<Self> {
        if dim == 0 || dim > 16 {
            return Err(Error::param("dim", "must be between 1 and 16"));
        }
        let pieces: Vec<Piece> = (0..1usize << dim)
            .map(|mask| Piece {
                slope: (0..dim).map(|i| if mask >> i & 1 == 1 { -1.0 } else { 1.0 }).collect(),
                offset: 0.0,
            })
            .collect();
        Self::new(&pieces)
    }

    pub fn minimizer(&self) -> &Vector {
        &self.minimizer
    }

    fn active(&self, y: &Vector) -> Vec<usize> {
        let vals: Vec<f64> = self
            .slopes
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| a.dot(y) + b)
            .collect();
        let top = vals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let tol = TIE_TOLERANCE * (1.0 + top.abs());
        (0..vals.len()).filter(|&i| top - vals[i] <= tol).collect()
    }

    fn check_unique_minimizer(&self) -> Result<()> {
        // unique iff the directional derivative max_{active} a_iᵀu is positive
        // for every unit u
        let active = self.active(&self.minimizer);
        let n = self.minimizer.len();
        let mut rng = chunk_rng(0x5eed, 0);
        let mut dirs: Vec<Vector> = (0..n)
            .flat_map(|i| {
                [1.0, -1.0]
                    .into_iter()
                    .map(move |s| Vector::from_fn(n, |k, _| if k == i { s } else { 0.0 }))
            })
            .collect();
        dirs.extend((0..4096).map(|_| random_unit(n, &mut rng)));
        for a in &active {
            // directions orthogonal to a single slope are the usual failure mode
            if n == 2 {
                let s = &self.slopes[*a];
                let perp = Vector::from_vec(vec![-s[1], s[0]]);
                if perp.norm() > 0.0 {
                    dirs.push(perp.normalize());
                    dirs.push(-perp.normalize());
                }
            }
        }
        for u in &dirs {
            let slope = active
                .iter()
                .map(|&i| self.slopes[i].dot(u))
                .fold(f64::NEG_INFINITY, f64::max);
            if slope <= 1e-12 {
                return Err(Error::param(
                    "pieces",
                    "the minimizer set must be a single point (found a flat or descending direction)",
                ));
            }
        }
        Ok(())
    }
}

/// Minimizes `max_i a_iᵀy + b_i` by enumerating vertices of the epigraph.
fn minimize_max_affine(slopes: &[Vector], offsets: &[f64]) -> Result<(Vector, f64)> {
    let n = slopes[0].len();
    let m = slopes.len();
    let k = n + 1;
    if m < k {
        return Err(Error::param(
            "pieces",
            format!("need at least {k} pieces for a bounded minimum in dimension {n}"),
        ));
    }
    let mut subsets = 1f64;
    for i in 0..k {
        subsets *= (m - i) as f64 / (i + 1) as f64;
    }
    if subsets > 2e6 {
        return Err(Error::param("pieces", "too many pieces for vertex enumeration"));
    }
    let mut best: Option<(Vector, f64)> = None;
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let mut a = DMatrix::<f64>::zeros(k, k);
        let mut rhs = Vector::zeros(k);
        for (row, &i) in idx.iter().enumerate() {
            for j in 0..n {
                a[(row, j)] = slopes[i][j];
            }
            a[(row, n)] = -1.0;
            rhs[row] = -offsets[i];
        }
        if let Some(sol) = a.lu().solve(&rhs) {
            if sol.iter().all(|v| v.is_finite()) {
                let y = sol.rows(0, n).into_owned();
                let t = sol[n];
                let feasible = slopes
                    .iter()
                    .zip(offsets)
                    .all(|(s, b)| s.dot(&y) + b <= t + 1e-9 * (1.0 + t.abs()));
                if feasible && best.as_ref().is_none_or(|(_, bt)| t < *bt) {
                    best = Some((y, t));
                }
            }
        }
        // next k-combination of 0..m
        let mut pos = k;
        while pos > 0 && idx[pos - 1] == m - k + pos - 1 {
            pos -= 1;
        }
        if pos == 0 {
            break;
        }
        idx[pos - 1] += 1;
        for j in pos..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
    let (y, _) = best.ok_or_else(|| Error::param("pieces", "objective is unbounded below"))?;
    let value = slopes
        .iter()
        .zip(offsets)
        .map(|(s, b)| s.dot(&y) + b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok((y, value))
}

impl ScalarField for MaxAffine {
    fn dim(&self) -> usize {
        self.minimizer.len()
    }

    fn value(&self, y: &Vector) -> f64 {
        self.slopes
            .iter()
            .zip(&self.offsets)
            .map(|(a, b)| a.dot(y) + b)
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn gradient(&self, y: &Vector) -> Result<Vector> {
        check_dim(y, self.dim())?;
        let active = self.active(y);
        let first = &self.slopes[active[0]];
        if active.iter().all(|&i| (&self.slopes[i] - first).amax() == 0.0) {
            Ok(first.clone())
        } else {
            Err(Error::NotDifferentiable(format!(
                "{} max-affine pieces active",
                active.len()
            )))
        }
    }

    fn subgradients(&self, y: &Vector, seed: u64, count: usize) -> Result<Vec<Vector>> {
        check_dim(y, self.dim())?;
        let active = self.active(y);
        if active.len() == 1 {
            return Ok(vec![self.slopes[active[0]].clone()]);
        }
        let mut out: Vec<Vector> = active.iter().map(|&i| self.slopes[i].clone()).collect();
        let mut rng = chunk_rng(seed, 0);
        for _ in 0..count {
            let w: Vec<f64> = active.iter().map(|_| rng.sample::<f64, _>(Exp1)).collect();
            let total: f64 = w.iter().sum();
            let mut g = Vector::zeros(y.len());
            for (wi, &i) in w.iter().zip(&active) {
                g += &self.slopes[i] * (wi / total);
            }
            out.push(g);
        }
        Ok(out)
    }

    fn meta(&self) -> FieldMeta {
        FieldMeta {
            lipschitz_grad: None,
            strong_convexity: None,
            minimum_value: Some(self.minimum),
            convex: true,
        }
    }

    fn name(&self) -> &str {
        "max-affine"
    }
}

/// `J(y) = u² + 3 sin²(u)` with `u = y − x*`.
///
/// `J'' = 2 + 6 cos 2u` takes negative values, yet `u·J'(u) > 0` for `u ≠ 0`.
#[derive(Clone, Debug)]
pub struct Nonconvex1d {
    center: f64,
}

impl Nonconvex1d {
    pub fn new(center: f64) -> Result<Self> {
        if !center.is_finite() {
            return Err(Error::param("center", "must be finite"));
        }
        Ok(Nonconvex1d { center })
    }
}

impl ScalarField for Nonconvex1d {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, y: &Vector) -> f64 {
        let u = y[0] - self.center;
        u * u + 3.0 * u.sin().powi(2)
    }

    fn gradient(&self, y: &Vector) -> Result<Vector> {
        check_dim(y, 1)?;
        let u = y[0] - self.center;
        Ok(Vector::from_element(1, 2.0 * u + 3.0 * (2.0 * u).sin()))
    }

    fn meta(&self) -> FieldMeta {
        FieldMeta {
            lipschitz_grad: Some(8.0),
            strong_convexity: None,
            minimum_value: Some(0.0),
            convex: false,
        }
    }

    fn name(&self) -> &str {
        "nonconvex-1d"
    }
}

fn default_dim() -> usize {
    2
}

fn default_c() -> f64 {
    1.0
}

fn default_l() -> f64 {
    2.0
}

fn default_weights() -> Vec<f64> {
    vec![1.0, 4.0]
}

/// Named builtin problems and their parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "kebab-case", deny_unknown_fields)]
pub enum BuiltinSpec {
    /// `½‖y − x*‖²`.
    Quadratic {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `½(y − x*)ᵀH(y − x*)` with `H = diag` of eigenvalues evenly spaced in `[c, l]`.
    StronglyConvexQuadratic {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default = "default_l")]
        l: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `½ Σ wᵢ (yᵢ − x*ᵢ)²`.
    WeightedQuadratic {
        #[serde(default = "default_weights")]
        weights: Vec<f64>,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// `c · dist(y, ball(center, radius))`.
    NormCone {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default = "default_c")]
        c: f64,
        #[serde(default)]
        radius: f64,
        #[serde(default)]
        center: Option<Vec<f64>>,
    },
    /// Pointwise maximum of affine pieces; defaults to `‖y‖₁`.
    MaxAffine {
        #[serde(default = "default_dim")]
        dim: usize,
        #[serde(default)]
        pieces: Option<Vec<Piece>>,
    },
    /// `(y − x*)² + 3 sin²(y − x*)` on the real line.
    #[serde(rename = "nonconvex-1d")]
    Nonconvex1d {
        #[serde(default)]
        center: f64,
    },
}

pub const BUILTIN_NAMES: [&str; 6] = [
    "quadratic",
    "strongly-convex-quadratic",
    "weighted-quadratic",
    "norm-cone",
    "max-affine",
    "nonconvex-1d",
];

/// A builtin objective with its exact minimizer set.
#[derive(Clone, Debug)]
pub struct Builtin {
    pub field: Field,
    pub attractor: ConvexSet,
}

fn center_or_zero(center: &Option<Vec<f64>>, dim: usize) -> Result<Vector> {
    match center {
        None => Ok(Vector::zeros(dim)),
        Some(c) if c.len() == dim => {
            let v = Vector::from_column_slice(c);
            if v.iter().all(|x| x.is_finite()) {
                Ok(v)
            } else {
                Err(Error::param("center", "must be finite"))
            }
        }
        Some(c) => Err(Error::param(
            "center",
            format!("has length {}, expected {dim}", c.len()),
        )),
    }
}

fn check_dim_param(dim: usize) -> Result<()> {
    if dim == 0 {
        Err(Error::param("dim", "must be at least 1"))
    } else {
        Ok(())
    }
}

impl BuiltinSpec {
    /// Default parameters for a builtin name.
    pub fn from_name(name: &str) -> Result<Self> {
        Ok(match name {
            "quadratic" => BuiltinSpec::Quadratic {
                dim: default_dim(),
                center: None,
            },
            "strongly-convex-quadratic" => BuiltinSpec::StronglyConvexQuadratic {
                dim: default_dim(),
                c: default_c(),
                l: default_l(),
                center: None,
            },
            "weighted-quadratic" => BuiltinSpec::WeightedQuadratic {
                weights: default_weights(),
                center: None,
            },
            "norm-cone" => BuiltinSpec::NormCone {
                dim: default_dim(),
                c: default_c(),
                radius: 0.0,
                center: None,
            },
            "max-affine" => BuiltinSpec::MaxAffine {
                dim: default_dim(),
                pieces: None,
            },
            "nonconvex-1d" => BuiltinSpec::Nonconvex1d { center: 0.0 },
            other => return Err(Error::UnknownBuiltin(other.to_string())),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            BuiltinSpec::Quadratic { .. } => "quadratic",
            BuiltinSpec::StronglyConvexQuadratic { .. } => "strongly-convex-quadratic",
            BuiltinSpec::WeightedQuadratic { .. } => "weighted-quadratic",
            BuiltinSpec::NormCone { .. } => "norm-cone",
            BuiltinSpec::MaxAffine { .. } => "max-affine",
            BuiltinSpec::Nonconvex1d { .. } => "nonconvex-1d",
        }
    }

    pub fn build(&self) -> Result<Builtin> {
        match self {
            BuiltinSpec::Quadratic { dim, center } => {
                check_dim_param(*dim)?;
                let x = center_or_zero(center, *dim)?;
                let f = Quadratic::new("quadratic", DMatrix::identity(*dim, *dim), x.clone())?;
                Ok(Builtin {
                    field: Arc::new(f),
                    attractor: ConvexSet::point(x)?,
                })
            }
            BuiltinSpec::StronglyConvexQuadratic { dim, c, l, center } => {
                check_dim_param(*dim)?;
                if !(*c > 0.0 && c.is_finite()) {
                    return Err(Error::param("c", format!("must be positive, got {c}")));
                }
                if !(*l >= *c && l.is_finite()) {
                    return Err(Error::param("l", format!("must be finite and at least c, got {l}")));
                }
                let x = center_or_zero(center, *dim)?;
                let eig = Vector::from_fn(*dim, |i, _| {
                    if *dim == 1 {
                        *c
                    } else {
                        c + (l - c) * i as f64 / (*dim - 1) as f64
                    }
                });
                let f = Quadratic::new("strongly-convex-quadratic", DMatrix::from_diagonal(&eig), x.clone())?;
                Ok(Builtin {
                    field: Arc::new(f),
                    attractor: ConvexSet::point(x)?,
                })
            }
            BuiltinSpec::WeightedQuadratic { weights, center } => {
                check_dim_param(weights.len())?;
                if weights.iter().any(|w| !(*w > 0.0 && w.is_finite())) {
                    return Err(Error::param("weights", "must be positive and finite"));
                }
                let x = center_or_zero(center, weights.len())?;
                let h = DMatrix::from_diagonal(&Vector::from_column_slice(weights));
                let f = Quadratic::new("weighted-quadratic", h, x.clone())?;
                Ok(Builtin {
                    field: Arc::new(f),
                    attractor: ConvexSet::point(x)?,
                })
            }
            BuiltinSpec::NormCone { dim, c, radius, center } => {
                check_dim_param(*dim)?;
                let x = center_or_zero(center, *dim)?;
                let target = ConvexSet::ball(x, *radius).map_err(|e| Error::param("radius", e.to_string()))?;
                let f = NormCone::new(*c, target.clone())?;
                Ok(Builtin {
                    field: Arc::new(f),
                    attractor: target,
                })
            }
            BuiltinSpec::MaxAffine { dim, pieces } => {
                let f = match pieces {
                    Some(p) => MaxAffine::new(p)?,
                    None => MaxAffine::l1(*dim)?,
                };
                let attractor = ConvexSet::point(f.minimizer().clone())?;
                Ok(Builtin {
                    field: Arc::new(f),
                    attractor,
                })
            }
            BuiltinSpec::Nonconvex1d { center } => {
                let f = Nonconvex1d::new(*center)?;
                Ok(Builtin {
                    field: Arc::new(f),
                    attractor: ConvexSet::point(Vector::from_element(1, *center))?,
                })
            }
        }
    }
}

/// Builtin by name with default parameters.
pub fn builtin(name: &str) -> Result<Builtin> {
    BuiltinSpec::from_name(name)?.build()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LyapunovKind {
    /// `V = ½ dist(y, 𝒜)²`.
    SquaredDistance,
    /// `V = J − J*`.
    ObjectiveGap,
    /// User-supplied field, assumed positive definite w.r.t. the attractor.
    Custom,
}

/// A Lyapunov candidate `V` attached to an attractor.
#[derive(Clone, Debug)]
pub struct LyapunovField {
    kind: LyapunovKind,
    attractor: ConvexSet,
    field: Option<Field>,
    offset: f64,
}

/// Builds `V` of the requested kind. `objective` is required for the
/// objective-gap (with known `J*`) and custom kinds.
pub fn make_lyapunov(kind: LyapunovKind, attractor: ConvexSet, objective: Option<Field>) -> Result<LyapunovField> {
    if !attractor.is_compact() {
        return Err(Error::param("attractor", "must be compact"));
    }
    let offset = match kind {
        LyapunovKind::SquaredDistance => 0.0,
        LyapunovKind::ObjectiveGap => {
            let f = objective
                .as_ref()
                .ok_or_else(|| Error::FieldMismatch("objective-gap needs an objective".into()))?;
            f.meta().minimum_value.ok_or_else(|| {
                Error::FieldMismatch(format!("objective-gap needs a known minimum value for {}", f.name()))
            })?
        }
        LyapunovKind::Custom => {
            if objective.is_none() {
                return Err(Error::FieldMismatch("custom Lyapunov function needs a field".into()));
            }
            0.0
        }
    };
    if let Some(f) = &objective {
        if f.dim() != attractor.dim() {
            return Err(Error::DimensionMismatch {
                expected: attractor.dim(),
                found: f.dim(),
            });
        }
    }
    Ok(LyapunovField {
        kind,
        attractor,
        field: if kind == LyapunovKind::SquaredDistance {
            None
        } else {
            objective
        },
        offset,
    })
}

impl LyapunovField {
    pub fn squared_distance(attractor: ConvexSet) -> Result<Self> {
        make_lyapunov(LyapunovKind::SquaredDistance, attractor, None)
    }

    pub fn objective_gap(attractor: ConvexSet, objective: Field) -> Result<Self> {
        make_lyapunov(LyapunovKind::ObjectiveGap, attractor, Some(objective))
    }

    pub fn kind(&self) -> LyapunovKind {
        self.kind
    }

    pub fn attractor(&self) -> &ConvexSet {
        &self.attractor
    }

    pub fn dim(&self) -> usize {
        self.attractor.dim()
    }

    pub fn value(&self, y: &Vector) -> Result<f64> {
        match &self.field {
            None => {
                let d = self.attractor.distance(y)?;
                Ok(0.5 * d * d)
            }
            Some(f) => {
                check_dim(y, f.dim())?;
                Ok(f.value(y) - self.offset)
            }
        }
    }

    pub fn gradient(&self, y: &Vector) -> Result<Vector> {
        match &self.field {
            None => Ok(y - self.attractor.project(y)?),
            Some(f) => f.gradient(y),
        }
    }

    /// Lipschitz constant of `∇V` when known.
    pub fn lipschitz_grad(&self) -> Option<f64> {
        match &self.field {
            None => Some(1.0),
            Some(f) => f.meta().lipschitz_grad,
        }
    }
}

/// Estimates a gradient Lipschitz constant on `B̄_radius(center)` as the
/// largest difference quotient over `pairs` random pairs, inflated by 1.1.
pub fn estimate_lipschitz(
    field: &dyn ScalarField,
    center: &Vector,
    radius: f64,
    pairs: usize,
    seed: u64,
) -> Result<f64> {
    let n = field.dim();
    let mut rng = chunk_rng(seed, 0);
    let mut best: f64 = 0.0;
    for _ in 0..pairs {
        let y1 = center + random_unit(n, &mut rng) * (radius * rng.random::<f64>());
        let y2 = center + random_unit(n, &mut rng) * (radius * rng.random::<f64>());
        let dy = (&y1 - &y2).norm();
        if dy < 1e-12 {
            continue;
        }
        let (Ok(g1), Ok(g2)) = (field.gradient(&y1), field.gradient(&y2)) else {
            continue;
        };
        best = best.max((g1 - g2).norm() / dy);
    }
    Ok(1.1 * best)
}
