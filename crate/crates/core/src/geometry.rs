//! Closed convex sets with exact (or Dykstra-approximated) orthogonal
//! projections, distances, and rejection sampling on bands around a compact
//! attractor.

use nalgebra::DMatrix;
use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::par::{chunk_rng, Execution, CHUNK};
use crate::Vector;

/// Residual tolerance for the cyclic projection onto intersections.
pub const DYKSTRA_TOLERANCE: f64 = 1e-12;
/// Cycle cap for the cyclic projection onto intersections.
pub const DYKSTRA_MAX_CYCLES: usize = 100_000;

/// Proposals allowed per requested sample before a band is declared empty.
const REJECTION_FACTOR: usize = 2_000;

#[derive(Clone, Debug, PartialEq)]
enum Repr {
    WholeSpace {
        dim: usize,
    },
    Box {
        lo: Vector,
        hi: Vector,
    },
    Ball {
        center: Vector,
        radius: f64,
    },
    Halfspace {
        normal: Vector,
        offset: f64,
    },
    Affine {
        anchor: Vector,
        basis: DMatrix<f64>,
    },
    Intersection {
        sets: Vec<ConvexSet>,
        tolerance: f64,
        max_cycles: usize,
    },
}

/// Which family a [`ConvexSet`] belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SetKind {
    WholeSpace,
    Box,
    Ball,
    Halfspace,
    Affine,
    Intersection,
}

/// A nonempty closed convex subset of ℝⁿ.
#[derive(Clone, Debug, PartialEq)]
pub struct ConvexSet(Repr);

fn check_finite(x: &Vector, context: &'static str) -> Result<()> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite { context })
    }
}

impl ConvexSet {
    pub fn whole_space(dim: usize) -> Self {
        ConvexSet(Repr::WholeSpace { dim })
    }

    /// Axis-aligned box; bounds may be infinite.
    pub fn boxed(lo: Vector, hi: Vector) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        if lo.iter().chain(hi.iter()).any(|v| v.is_nan()) {
            return Err(Error::InvalidSet("box bound is NaN".into()));
        }
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::InvalidSet("box requires lo <= hi".into()));
        }
        if lo.iter().any(|v| *v == f64::INFINITY) || hi.iter().any(|v| *v == f64::NEG_INFINITY) {
            return Err(Error::InvalidSet("box is empty".into()));
        }
        Ok(ConvexSet(Repr::Box { lo, hi }))
    }

    pub fn ball(center: Vector, radius: f64) -> Result<Self> {
        check_finite(&center, "ball center")?;
        if !(radius >= 0.0 && radius.is_finite()) {
            return Err(Error::InvalidSet(format!(
                "ball radius must be finite and >= 0, got {radius}"
            )));
        }
        Ok(ConvexSet(Repr::Ball { center, radius }))
    }

    pub fn point(p: Vector) -> Result<Self> {
        Self::ball(p, 0.0)
    }

    /// `{x : normalᵀx ≤ offset}`.
    pub fn halfspace(normal: Vector, offset: f64) -> Result<Self> {
        check_finite(&normal, "halfspace normal")?;
        if normal.norm() == 0.0 {
            return Err(Error::InvalidSet("halfspace normal must be nonzero".into()));
        }
        if !offset.is_finite() {
            return Err(Error::InvalidSet("halfspace offset must be finite".into()));
        }
        Ok(ConvexSet(Repr::Halfspace { normal, offset }))
    }

    /// `{anchor + B t}` for the column span of `basis`. The basis is
    /// orthonormalized; linearly dependent columns are rejected.
    pub fn affine(anchor: Vector, basis: DMatrix<f64>) -> Result<Self> {
        check_finite(&anchor, "affine anchor")?;
        if basis.nrows() != anchor.len() {
            return Err(Error::DimensionMismatch {
                expected: anchor.len(),
                found: basis.nrows(),
            });
        }
        let mut q = DMatrix::<f64>::zeros(basis.nrows(), basis.ncols());
        for j in 0..basis.ncols() {
            let mut v = basis.column(j).into_owned();
            let scale = v.norm();
            if !scale.is_finite() {
                return Err(Error::NonFinite {
                    context: "affine basis",
                });
            }
            // two passes of modified Gram-Schmidt
            for _ in 0..2 {
                for k in 0..j {
                    let qk = q.column(k);
                    let proj = qk.dot(&v);
                    v -= qk * proj;
                }
            }
            let n = v.norm();
            if n <= 1e-10 * scale.max(1e-300) {
                return Err(Error::InvalidSet("affine basis is rank deficient".into()));
            }
            q.set_column(j, &(v / n));
        }
        Ok(ConvexSet(Repr::Affine { anchor, basis: q }))
    }

    pub fn intersection(sets: Vec<ConvexSet>) -> Result<Self> {
        Self::intersection_with(sets, DYKSTRA_TOLERANCE, DYKSTRA_MAX_CYCLES)
    }

    pub fn intersection_with(sets: Vec<ConvexSet>, tolerance: f64, max_cycles: usize) -> Result<Self> {
        let Some(first) = sets.first() else {
            return Err(Error::InvalidSet("intersection of no sets".into()));
        };
        let dim = first.dim();
        if let Some(bad) = sets.iter().find(|s| s.dim() != dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(ConvexSet(Repr::Intersection {
            sets,
            tolerance,
            max_cycles: max_cycles.max(1),
        }))
    }

    pub fn kind(&self) -> SetKind {
        match &self.0 {
            Repr::WholeSpace { .. } => SetKind::WholeSpace,
            Repr::Box { .. } => SetKind::Box,
            Repr::Ball { .. } => SetKind::Ball,
            Repr::Halfspace { .. } => SetKind::Halfspace,
            Repr::Affine { .. } => SetKind::Affine,
            Repr::Intersection { .. } => SetKind::Intersection,
        }
    }

    pub fn dim(&self) -> usize {
        match &self.0 {
            Repr::WholeSpace { dim } => *dim,
            Repr::Box { lo, .. } => lo.len(),
            Repr::Ball { center, .. } => center.len(),
            Repr::Halfspace { normal, .. } => normal.len(),
            Repr::Affine { anchor, .. } => anchor.len(),
            Repr::Intersection { sets, .. } => sets[0].dim(),
        }
    }

    pub fn is_whole_space(&self) -> bool {
        matches!(self.0, Repr::WholeSpace { .. })
    }

    /// Nearest point of the set to `x`.
    pub fn project(&self, x: &Vector) -> Result<Vector> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        check_finite(x, "projection input")?;
        self.project_unchecked(x)
    }

    fn project_unchecked(&self, x: &Vector) -> Result<Vector> {
        Ok(match &self.0 {
            Repr::WholeSpace { .. } => x.clone(),
            Repr::Box { lo, hi } => Vector::from_iterator(
                x.len(),
                x.iter()
                    .zip(lo.iter().zip(hi.iter()))
                    .map(|(v, (l, h))| v.clamp(*l, *h)),
            ),
            Repr::Ball { center, radius } => {
                let diff = x - center;
                let n = diff.norm();
                if n <= *radius {
                    x.clone()
                } else {
                    center + diff * (*radius / n)
                }
            }
            Repr::Halfspace { normal, offset } => {
                let excess = normal.dot(x) - offset;
                if excess <= 0.0 {
                    x.clone()
                } else {
                    x - normal * (excess / normal.norm_squared())
                }
            }
            Repr::Affine { anchor, basis } => {
                let coeffs = basis.tr_mul(&(x - anchor));
                anchor + basis * coeffs
            }
            Repr::Intersection {
                sets,
                tolerance,
                max_cycles,
            } => dykstra(sets, x, *tolerance, *max_cycles)?,
        })
    }

    /// Euclidean distance from `x` to the set.
    pub fn distance(&self, x: &Vector) -> Result<f64> {
        let p = self.project(x)?;
        Ok((x - p).norm())
    }

    /// Membership predicate with an absolute slack.
    pub fn contains(&self, x: &Vector, tol: f64) -> bool {
        if x.len() != self.dim() || x.iter().any(|v| !v.is_finite()) {
            return false;
        }
        match &self.0 {
            Repr::WholeSpace { .. } => true,
            Repr::Box { lo, hi } => x
                .iter()
                .zip(lo.iter().zip(hi.iter()))
                .all(|(v, (l, h))| *v >= *l - tol && *v <= *h + tol),
            Repr::Ball { center, radius } => (x - center).norm() <= radius + tol,
            Repr::Halfspace { normal, offset } => (normal.dot(x) - offset) / normal.norm() <= tol,
            Repr::Affine { .. } => self
                .project_unchecked(x)
                .map(|p| (x - p).norm() <= tol)
                .unwrap_or(false),
            Repr::Intersection { sets, .. } => sets.iter().all(|s| s.contains(x, tol)),
        }
    }

    pub fn is_compact(&self) -> bool {
        self.bounding_box().is_some()
    }

    /// Tight axis-aligned bounding box for boxes and balls; for intersections,
    /// the overlap of the members' boxes. `None` when unbounded.
    pub fn bounding_box(&self) -> Option<(Vector, Vector)> {
        match &self.0 {
            Repr::WholeSpace { .. } | Repr::Halfspace { .. } => None,
            Repr::Affine { anchor, basis } => (basis.ncols() == 0).then(|| (anchor.clone(), anchor.clone())),
            Repr::Box { lo, hi } => {
                let finite = lo.iter().chain(hi.iter()).all(|v| v.is_finite());
                finite.then(|| (lo.clone(), hi.clone()))
            }
            Repr::Ball { center, radius } => Some((center.add_scalar(-radius), center.add_scalar(*radius))),
            Repr::Intersection { sets, .. } => {
                let dim = self.dim();
                let mut lo = Vector::from_element(dim, f64::NEG_INFINITY);
                let mut hi = Vector::from_element(dim, f64::INFINITY);
                for s in sets {
                    if let Some((l, h)) = s.partial_bounds() {
                        lo = lo.zip_map(&l, f64::max);
                        hi = hi.zip_map(&h, f64::min);
                    }
                }
                let finite = lo.iter().chain(hi.iter()).all(|v| v.is_finite());
                finite.then_some((lo, hi))
            }
        }
    }

    /// Per-coordinate bounds, possibly infinite.
    fn partial_bounds(&self) -> Option<(Vector, Vector)> {
        match &self.0 {
            Repr::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            _ => self.bounding_box(),
        }
    }

    /// Radius of a ball around the bounding-box center that contains the set.
    pub fn circumradius(&self) -> Option<f64> {
        match &self.0 {
            Repr::Ball { radius, .. } => Some(*radius),
            _ => self.bounding_box().map(|(lo, hi)| (hi - lo).norm() / 2.0),
        }
    }

    /// Uniform sample from a compact set by bounding-box rejection.
    pub fn sample_member(&self, rng: &mut ChaCha8Rng) -> Result<Vector> {
        let (lo, hi) = self
            .bounding_box()
            .ok_or_else(|| Error::InvalidSet("cannot sample an unbounded set".into()))?;
        for attempt in 1..=REJECTION_FACTOR * 10 {
            let y = uniform_in_box(&lo, &hi, rng);
            if self.contains(&y, 0.0) {
                return Ok(y);
            }
            if attempt == REJECTION_FACTOR * 10 {
                break;
            }
        }
        Err(Error::EmptyBand {
            accepted: 0,
            attempts: REJECTION_FACTOR * 10,
            rate: 0.0,
        })
    }
}

fn dykstra(sets: &[ConvexSet], x0: &Vector, tolerance: f64, max_cycles: usize) -> Result<Vector> {
    let mut x = x0.clone();
    let mut increments = vec![Vector::zeros(x0.len()); sets.len()];
    let mut residual = f64::INFINITY;
    for _ in 0..max_cycles {
        let prev = x.clone();
        for (set, incr) in sets.iter().zip(increments.iter_mut()) {
            let z = &x + &*incr;
            let y = set.project_unchecked(&z)?;
            *incr = z - &y;
            x = y;
        }
        let change = (&x - &prev).norm();
        let mut infeasibility: f64 = 0.0;
        for set in sets {
            infeasibility = infeasibility.max((&x - set.project_unchecked(&x)?).norm());
        }
        residual = change.max(infeasibility);
        if residual <= tolerance * (1.0 + x.norm()) {
            return Ok(x);
        }
    }
    Err(Error::ProjectionTolerance {
        residual,
        tolerance,
        iterations: max_cycles,
    })
}

pub(crate) fn uniform_in_box(lo: &Vector, hi: &Vector, rng: &mut ChaCha8Rng) -> Vector {
    Vector::from_iterator(
        lo.len(),
        lo.iter().zip(hi.iter()).map(|(l, h)| l + (h - l) * rng.random::<f64>()),
    )
}

/// Uniformly distributed unit vector.
pub(crate) fn random_unit(dim: usize, rng: &mut ChaCha8Rng) -> Vector {
    use rand_distr::StandardNormal;
    loop {
        let v = Vector::from_iterator(dim, (0..dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
        let n = v.norm();
        if n > 1e-12 {
            return v / n;
        }
    }
}

/// The verification region `Ξ ∩ (B̄_σ(𝒜) \ B_ε(𝒜))`.
#[derive(Clone, Debug)]
pub struct Band {
    pub attractor: ConvexSet,
    pub feasible: ConvexSet,
    pub sigma: f64,
    pub epsilon: f64,
}

impl Band {
    /// `sigma` may be infinite; it must exceed `epsilon >= 0`.
    pub fn new(attractor: ConvexSet, feasible: ConvexSet, sigma: f64, epsilon: f64) -> Result<Self> {
        if !attractor.is_compact() {
            return Err(Error::InvalidBand("attractor must be compact".into()));
        }
        if attractor.dim() != feasible.dim() {
            return Err(Error::DimensionMismatch {
                expected: attractor.dim(),
                found: feasible.dim(),
            });
        }
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidBand(format!(
                "epsilon must be finite and >= 0, got {epsilon}"
            )));
        }
        if !(sigma > epsilon) {
            return Err(Error::InvalidBand(format!(
                "sigma must exceed epsilon (sigma = {sigma}, epsilon = {epsilon})"
            )));
        }
        Ok(Band {
            attractor,
            feasible,
            sigma,
            epsilon,
        })
    }

    /// Same band with `sigma` capped at `radius`.
    pub fn truncated(&self, radius: f64) -> Result<Self> {
        Band::new(
            self.attractor.clone(),
            self.feasible.clone(),
            self.sigma.min(radius),
            self.epsilon,
        )
    }

    pub fn contains(&self, y: &Vector) -> bool {
        match self.attractor.distance(y) {
            Ok(d) => d >= self.epsilon && d <= self.sigma && self.feasible.contains(y, 0.0),
            Err(_) => false,
        }
    }
}

/// Samples `count` points of `Ξ ∩ {y : inner ≤ dist(y, 𝒜) ≤ outer}`, uniformly on
/// a bounding box of `B̄_outer(𝒜)` with rejection. Deterministic in `seed`
/// regardless of the execution mode.
pub fn sample_shell(
    attractor: &ConvexSet,
    feasible: &ConvexSet,
    inner: f64,
    outer: f64,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vector>> {
    if !outer.is_finite() {
        return Err(Error::InvalidBand(
            "cannot sample with infinite outer radius; truncate first".into(),
        ));
    }
    if inner > outer {
        return Err(Error::InvalidBand(format!(
            "inner radius {inner} exceeds outer radius {outer}"
        )));
    }
    let (alo, ahi) = attractor
        .bounding_box()
        .ok_or_else(|| Error::InvalidBand("attractor must be compact".into()))?;
    let mut lo = alo.add_scalar(-outer);
    let mut hi = ahi.add_scalar(outer);
    if let Some((flo, fhi)) = feasible.partial_bounds() {
        lo = lo.zip_map(&flo, f64::max);
        hi = hi.zip_map(&fhi, f64::min);
        if lo.iter().zip(hi.iter()).any(|(l, h)| l > h) {
            return Err(Error::EmptyBand {
                accepted: 0,
                attempts: 0,
                rate: 0.0,
            });
        }
    }
    let chunks = exec.map_chunks(count, CHUNK, |chunk, range| -> Result<Vec<Vector>> {
        let mut rng = chunk_rng(seed, chunk);
        let want = range.len();
        let budget = REJECTION_FACTOR * want + 10_000;
        let mut out = Vec::with_capacity(want);
        let mut attempts = 0;
        while out.len() < want {
            if attempts >= budget {
                return Err(Error::EmptyBand {
                    accepted: out.len(),
                    attempts,
                    rate: out.len() as f64 / attempts as f64,
                });
            }
            attempts += 1;
            let y = uniform_in_box(&lo, &hi, &mut rng);
            let d = attractor.distance(&y)?;
            if d >= inner && d <= outer && feasible.contains(&y, 0.0) {
                out.push(y);
            }
        }
        Ok(out)
    });
    let mut all = Vec::with_capacity(count);
    for c in chunks {
        all.extend(c?);
    }
    Ok(all)
}

/// `count` points of the band, each with `ε ≤ dist(y, 𝒜) ≤ σ` and `y ∈ Ξ`.
pub fn sample_band(band: &Band, count: usize, seed: u64, exec: Execution) -> Result<Vec<Vector>> {
    sample_shell(
        &band.attractor,
        &band.feasible,
        band.epsilon,
        band.sigma,
        count,
        seed,
        exec,
    )
}

/// `count` points of `Ξ ∩ B̄_radius(𝒜)`.
pub fn sample_neighborhood(
    attractor: &ConvexSet,
    feasible: &ConvexSet,
    radius: f64,
    count: usize,
    seed: u64,
    exec: Execution,
) -> Result<Vec<Vector>> {
    sample_shell(attractor, feasible, 0.0, radius, count, seed, exec)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn unit_box() -> ConvexSet {
        ConvexSet::boxed(dvector![-1.0, -1.0], dvector![1.0, 1.0]).unwrap()
    }

    /// Lattice argmin of ‖x − z‖ over members z of `set`.
    fn grid_argmin(set: &ConvexSet, x: &Vector, lo: f64, hi: f64, n: usize) -> (Vector, f64) {
        let h = (hi - lo) / n as f64;
        let mut best = (Vector::zeros(2), f64::INFINITY);
        for i in 0..=n {
            for j in 0..=n {
                let z = dvector![lo + i as f64 * h, lo + j as f64 * h];
                if set.contains(&z, 1e-12) {
                    let d = (x - &z).norm();
                    if d < best.1 {
                        best = (z, d);
                    }
                }
            }
        }
        best
    }

    #[test]
    fn ball_projection_is_radial() {
        let ball = ConvexSet::ball(dvector![0.0, 0.0], 1.0).unwrap();
        assert_eq!(ball.project(&dvector![2.0, 0.0]).unwrap(), dvector![1.0, 0.0]);
        assert_eq!(ball.distance(&dvector![2.0, 0.0]).unwrap(), 1.0);
    }

    #[test]
    fn members_are_fixed_points() {
        let sets = [
            unit_box(),
            ConvexSet::ball(dvector![0.5, 0.0], 2.0).unwrap(),
            ConvexSet::halfspace(dvector![1.0, 1.0], 0.5).unwrap(),
            ConvexSet::intersection(vec![unit_box(), ConvexSet::halfspace(dvector![1.0, 0.0], 0.2).unwrap()]).unwrap(),
        ];
        let x = dvector![0.1, -0.3];
        for s in &sets {
            assert_eq!(s.project(&x).unwrap(), x);
            assert_eq!(s.distance(&x).unwrap(), 0.0);
        }
    }

    #[test]
    fn box_projection_matches_grid_argmin() {
        let b = unit_box();
        let x = dvector![3.0, 0.5];
        let p = b.project(&x).unwrap();
        assert_eq!(p, dvector![1.0, 0.5]);
        let (z, _) = grid_argmin(&b, &x, -1.0, 1.0, 400);
        assert!((z - &p).norm() <= 1e-9);
    }

    #[test]
    fn box_distance_matches_grid_search() {
        let b = unit_box();
        let x = dvector![3.0, 4.0];
        let d = b.distance(&x).unwrap();
        let (_, grid_d) = grid_argmin(&b, &x, -1.0, 1.0, 200);
        assert_relative_eq!(d, 2f64.hypot(3.0), epsilon = 1e-12);
        assert_relative_eq!(d, grid_d, epsilon = 1e-9);
        assert_relative_eq!(d, 3.605551275463989, epsilon = 1e-12);
    }

    #[test]
    fn affine_projection_onto_line() {
        let line = ConvexSet::affine(dvector![0.0, 1.0], DMatrix::from_column_slice(2, 1, &[2.0, 0.0])).unwrap();
        assert_eq!(line.project(&dvector![3.0, 5.0]).unwrap(), dvector![3.0, 1.0]);
        assert!(line.contains(&dvector![-7.0, 1.0], 1e-12));
        assert!(!line.is_compact());
    }

    #[test]
    fn rank_deficient_affine_rejected() {
        let basis = DMatrix::from_column_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        assert!(matches!(
            ConvexSet::affine(dvector![0.0, 0.0], basis),
            Err(Error::InvalidSet(_))
        ));
    }

    #[test]
    fn invalid_constructors() {
        assert!(ConvexSet::boxed(dvector![1.0], dvector![0.0]).is_err());
        assert!(ConvexSet::ball(dvector![0.0], -1.0).is_err());
        assert!(ConvexSet::halfspace(dvector![0.0, 0.0], 1.0).is_err());
        assert!(ConvexSet::intersection(vec![]).is_err());
    }

    #[test]
    fn non_finite_inputs_rejected() {
        let b = unit_box();
        assert!(matches!(
            b.project(&dvector![f64::NAN, 0.0]),
            Err(Error::NonFinite { .. })
        ));
        assert!(matches!(
            b.project(&dvector![0.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn dykstra_ball_and_halfspace() {
        // unit ball cut by x ≤ 0.5: nearest point to (2, 0) is (0.5, 0)
        let s = ConvexSet::intersection(vec![
            ConvexSet::ball(dvector![0.0, 0.0], 1.0).unwrap(),
            ConvexSet::halfspace(dvector![1.0, 0.0], 0.5).unwrap(),
        ])
        .unwrap();
        let p = s.project(&dvector![2.0, 0.0]).unwrap();
        assert!((p - dvector![0.5, 0.0]).norm() < 1e-10);
        // nearest point to (2, 2): corner (0.5, sqrt(0.75))
        let p = s.project(&dvector![2.0, 2.0]).unwrap();
        assert!((&p - dvector![0.5, 0.75f64.sqrt()]).norm() < 1e-9, "{p}");
    }

    #[test]
    fn dykstra_reports_residual_when_capped() {
        let s = ConvexSet::intersection_with(
            vec![
                ConvexSet::ball(dvector![0.0, 0.0], 1.0).unwrap(),
                ConvexSet::halfspace(dvector![1.0, 1.0], -1.2).unwrap(),
            ],
            1e-15,
            2,
        )
        .unwrap();
        match s.project(&dvector![3.0, 0.2]) {
            Err(Error::ProjectionTolerance {
                residual, iterations, ..
            }) => {
                assert!(residual > 0.0);
                assert_eq!(iterations, 2);
            }
            other => panic!("expected tolerance failure, got {other:?}"),
        }
    }

    #[test]
    fn empty_intersection_fails_to_converge() {
        let s = ConvexSet::intersection_with(
            vec![
                ConvexSet::ball(dvector![0.0], 1.0).unwrap(),
                ConvexSet::ball(dvector![5.0], 1.0).unwrap(),
            ],
            1e-12,
            500,
        )
        .unwrap();
        assert!(s.project(&dvector![2.5]).is_err());
    }

    #[test]
    fn band_rejects_sigma_equal_epsilon() {
        let a = ConvexSet::point(dvector![0.0, 0.0]).unwrap();
        assert!(Band::new(a.clone(), ConvexSet::whole_space(2), 1.0, 1.0).is_err());
        assert!(Band::new(a, ConvexSet::halfspace(dvector![1.0, 0.0], 0.0).unwrap(), 1.0, 0.5).is_ok());
        assert!(Band::new(ConvexSet::whole_space(2), ConvexSet::whole_space(2), 1.0, 0.5).is_err());
    }

    #[test]
    fn band_samples_annulus() {
        let band = Band::new(
            ConvexSet::point(dvector![0.0, 0.0]).unwrap(),
            ConvexSet::whole_space(2),
            1.0,
            0.5,
        )
        .unwrap();
        let pts = sample_band(&band, 100, 3, Execution::Sequential).unwrap();
        assert_eq!(pts.len(), 100);
        for y in &pts {
            let n = y.norm();
            assert!((0.5..=1.0).contains(&n));
            assert!(band.contains(y));
        }
    }

    #[test]
    fn band_samples_respect_feasible_halfline() {
        // 𝒜 = {0}, σ = 2, ε = 1, Ξ = [0, ∞)
        let band = Band::new(
            ConvexSet::point(dvector![0.0]).unwrap(),
            ConvexSet::boxed(dvector![0.0], dvector![f64::INFINITY]).unwrap(),
            2.0,
            1.0,
        )
        .unwrap();
        let pts = sample_band(&band, 500, 11, Execution::Parallel).unwrap();
        assert!(pts.iter().all(|y| (1.0..=2.0).contains(&y[0])));
    }

    #[test]
    fn sampling_is_worker_invariant() {
        let band = Band::new(unit_box(), ConvexSet::whole_space(2), 3.0, 0.25).unwrap();
        let a = sample_band(&band, 1500, 42, Execution::Sequential).unwrap();
        let b = sample_band(&band, 1500, 42, Execution::Parallel).unwrap();
        assert_eq!(a, b);
        let c = sample_band(&band, 1500, 43, Execution::Parallel).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn empty_band_reports_diagnostics() {
        // feasible slab far from the attractor
        let band = Band::new(
            ConvexSet::point(dvector![0.0, 0.0]).unwrap(),
            ConvexSet::boxed(dvector![10.0, -1.0], dvector![11.0, 1.0]).unwrap(),
            1.0,
            0.5,
        )
        .unwrap();
        assert!(matches!(
            sample_band(&band, 10, 1, Execution::Sequential),
            Err(Error::EmptyBand { .. })
        ));
    }
}
