//! Sublevel-set containment, underestimation constants, step-size budgets
//! and robustness margins.

use std::collections::BTreeMap;

use serde::Serialize;

use crate::certificates::{attractor_points, Phi, Provenance, SpspCertificate};
use crate::error::{Error, Result};
use crate::geometry::{sample_shell, ConvexSet};
use crate::oracles::DirectionOracle;
use crate::par::{derive_seed, Execution, CHUNK};
use crate::Vector;

/// Fraction of `l₁` used as the containment level.
pub const SHRINK: f64 = 0.9;
/// Inflation applied to strict lower bounds on `κ` and `K_φ`.
pub const STRICT_INFLATION: f64 = 1.01;

#[derive(Clone, Copy, Debug)]
pub struct ContainmentOptions {
    pub resolution: f64,
    pub shrink: f64,
    /// Grid sweeps are used up to this dimension; above it, random search.
    pub max_grid_dim: usize,
    pub max_grid_points: usize,
    /// Sample count for the random-search fallback.
    pub random_samples: usize,
    /// Sweep radius standing in for `σ = ∞`; defaults to `10(ρ + ε) + 10`.
    pub truncation: Option<f64>,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ContainmentOptions {
    fn default() -> Self {
        ContainmentOptions {
            resolution: 0.01,
            shrink: SHRINK,
            max_grid_dim: 3,
            max_grid_points: 20_000_000,
            random_samples: 200_000,
            truncation: None,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ContainmentResult {
    /// `shrink·l₁`.
    pub level: f64,
    /// Minimum of `φ` on the shell at distance `ρ + ε`.
    pub l2: f64,
    /// Minimum of `φ` over `{φ ≤ l₂}` outside the open `(ρ + ε)`-neighborhood.
    pub l1: f64,
    pub shrink: f64,
    pub grid_resolution: f64,
    /// Outer radius of the sweep.
    pub sweep_radius: f64,
    pub grid_points: usize,
    pub certified: bool,
    /// A point outside `B̄_{ρ+ε}(𝒜)` with `φ ≤ level`, if the sweep found one.
    pub violator: Option<Vec<f64>>,
}

/// Regular lattice `lo + (i + offset)·h` covering a box.
struct Lattice {
    lo: Vector,
    h: f64,
    counts: Vec<usize>,
    total: usize,
}

impl Lattice {
    fn new(lo: Vector, hi: &Vector, h: f64, max_points: usize) -> Result<Self> {
        let mut counts = Vec::with_capacity(lo.len());
        let mut total: usize = 1;
        for (l, u) in lo.iter().zip(hi.iter()) {
            let m = (((u - l) / h).ceil() as usize).max(1);
            counts.push(m);
            total = total.saturating_mul(m);
        }
        if total > max_points {
            return Err(Error::GridTooLarge(format!(
                "{total} points at resolution {h} exceeds the limit of {max_points}"
            )));
        }
        Ok(Lattice { lo, h, counts, total })
    }

    fn point(&self, mut index: usize, offset: f64) -> Vector {
        let mut y = self.lo.clone();
        for (k, m) in self.counts.iter().enumerate() {
            y[k] += ((index % m) as f64 + offset) * self.h;
            index /= m;
        }
        y
    }
}

fn expanded_box(attractor: &ConvexSet, radius: f64) -> Result<(Vector, Vector)> {
    let (lo, hi) = attractor
        .bounding_box()
        .ok_or_else(|| Error::InvalidBand("attractor must be compact".into()))?;
    Ok((lo.add_scalar(-radius), hi.add_scalar(radius)))
}

/// Radial projection of `y` onto the shell at distance `radius` from `𝒜`.
fn onto_shell(attractor: &ConvexSet, y: &Vector, radius: f64) -> Result<Option<Vector>> {
    let p = attractor.project(y)?;
    let d = (y - &p).norm();
    if d == 0.0 {
        return Ok(None);
    }
    Ok(Some(&p + (y - &p) * (radius / d)))
}

fn min_reduce(parts: Vec<Result<f64>>) -> Result<f64> {
    parts.into_iter().try_fold(f64::INFINITY, |m, p| Ok(m.min(p?)))
}

/// Minimum of `phi` on `{y : dist(y, 𝒜) = radius}`, from lattice points within
/// one cell of the shell projected radially onto it.
pub fn shell_minimum<F>(
    phi: &F,
    attractor: &ConvexSet,
    radius: f64,
    resolution: f64,
    execution: Execution,
) -> Result<f64>
where
    F: Fn(&Vector) -> f64 + Sync,
{
    shell_minimum_with(
        phi,
        attractor,
        radius,
        &ContainmentOptions {
            resolution,
            execution,
            ..ContainmentOptions::default()
        },
    )
}

fn shell_minimum_with<F>(phi: &F, attractor: &ConvexSet, radius: f64, opts: &ContainmentOptions) -> Result<f64>
where
    F: Fn(&Vector) -> f64 + Sync,
{
    if !(radius > 0.0 && radius.is_finite()) {
        return Err(Error::param(
            "radius",
            format!("must be finite and positive, got {radius}"),
        ));
    }
    let h = opts.resolution;
    if attractor.dim() > opts.max_grid_dim {
        let points = sample_shell(
            attractor,
            &ConvexSet::whole_space(attractor.dim()),
            0.5 * radius,
            2.0 * radius,
            opts.random_samples,
            derive_seed(opts.seed, 11),
            opts.execution,
        )?;
        let parts = opts
            .execution
            .map_chunks(points.len(), CHUNK, |_, range| -> Result<f64> {
                let mut m = f64::INFINITY;
                for y in &points[range] {
                    if let Some(z) = onto_shell(attractor, y, radius)? {
                        m = m.min(phi(&z));
                    }
                }
                Ok(m)
            });
        return min_reduce(parts);
    }
    let (lo, hi) = expanded_box(attractor, radius + h)?;
    let lattice = Lattice::new(lo, &hi, h, opts.max_grid_points)?;
    let parts = opts
        .execution
        .map_chunks(lattice.total, 4 * CHUNK, |_, range| -> Result<f64> {
            let mut m = f64::INFINITY;
            for i in range {
                let y = lattice.point(i, 0.5);
                let d = attractor.distance(&y)?;
                if (d - radius).abs() <= h {
                    if let Some(z) = onto_shell(attractor, &y, radius)? {
                        m = m.min(phi(&z));
                    }
                }
            }
            Ok(m)
        });
    min_reduce(parts)
}

/// Largest level `l` whose sublevel set `{φ ≤ l}` within `B̄_σ(𝒜)` lies in
/// `B̄_{ρ+ε}(𝒜)`.
///
/// `l₂` is the minimum of `φ` on the shell at distance `ρ + ε`; `l₁` is the
/// minimum over lattice points between the shell and `σ` that lie in
/// `{φ ≤ l₂}` (at most `l₂`, attained on the shell otherwise). The result is
/// checked on a second lattice offset by half a cell.
pub fn containment_level<F>(
    phi: &F,
    attractor: &ConvexSet,
    epsilon: f64,
    rho: f64,
    sigma: f64,
    opts: &ContainmentOptions,
) -> Result<ContainmentResult>
where
    F: Fn(&Vector) -> f64 + Sync,
{
    if !(epsilon >= 0.0 && rho >= 0.0 && epsilon + rho > 0.0) {
        return Err(Error::param(
            "rho",
            format!("need rho, epsilon >= 0 with rho + epsilon > 0, got {rho}, {epsilon}"),
        ));
    }
    if !(opts.resolution > 0.0 && opts.resolution.is_finite()) {
        return Err(Error::param("grid_resolution", "must be finite and positive"));
    }
    if !(opts.shrink > 0.0 && opts.shrink < 1.0) {
        return Err(Error::param("shrink", "must lie in (0, 1)"));
    }
    let inner = epsilon + rho;
    if !(sigma >= inner) {
        return Err(Error::InvalidBand(format!(
            "rho + epsilon = {inner} exceeds sigma = {sigma}"
        )));
    }
    let outer = if sigma.is_finite() {
        sigma
    } else {
        opts.truncation.unwrap_or(10.0 * inner + 10.0)
    };
    let h = opts.resolution;
    let l2 = shell_minimum_with(phi, attractor, inner, opts)?;

    let gridded = attractor.dim() <= opts.max_grid_dim;
    let (region_min, grid_points) = if gridded {
        let (lo, hi) = expanded_box(attractor, outer)?;
        let lattice = Lattice::new(lo, &hi, h, opts.max_grid_points)?;
        let parts = opts
            .execution
            .map_chunks(lattice.total, 4 * CHUNK, |_, range| -> Result<f64> {
                let mut m = f64::INFINITY;
                for i in range {
                    let y = lattice.point(i, 0.5);
                    let d = attractor.distance(&y)?;
                    if d >= inner && d <= outer {
                        m = m.min(phi(&y));
                    }
                }
                Ok(m)
            });
        (min_reduce(parts)?, lattice.total)
    } else {
        let points = sample_shell(
            attractor,
            &ConvexSet::whole_space(attractor.dim()),
            inner,
            outer,
            opts.random_samples,
            derive_seed(opts.seed, 12),
            opts.execution,
        )?;
        let m = points.iter().map(phi).fold(f64::INFINITY, f64::min);
        (m, points.len())
    };
    let l1 = l2.min(region_min);
    if !(l1 > 0.0) {
        return Err(Error::param(
            "phi",
            format!("not positive outside the inner neighborhood (min {l1})"),
        ));
    }
    let level = opts.shrink * l1;

    let violator = if gridded {
        let (lo, hi) = expanded_box(attractor, outer)?;
        let lattice = Lattice::new(lo, &hi, h, opts.max_grid_points)?;
        let found = opts
            .execution
            .map_chunks(lattice.total, 4 * CHUNK, |_, range| -> Result<Option<Vec<f64>>> {
                for i in range {
                    let y = lattice.point(i, 0.0);
                    let d = attractor.distance(&y)?;
                    if d > inner && d <= outer && phi(&y) <= level {
                        return Ok(Some(y.as_slice().to_vec()));
                    }
                }
                Ok(None)
            });
        let mut first = None;
        for f in found {
            if let (None, Some(v)) = (&first, f?) {
                first = Some(v);
            }
        }
        first
    } else {
        None
    };
    Ok(ContainmentResult {
        level,
        l2,
        l1,
        shrink: opts.shrink,
        grid_resolution: h,
        sweep_radius: outer,
        grid_points,
        certified: gridded && violator.is_none(),
        violator,
    })
}

/// Constants of the quadratic and linear underestimates of `φ` on a band of
/// outer radius `σ̂`, given a containment level `c`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct Underestimation {
    /// `c/(K_φ σ̂²)`.
    pub alpha_q: f64,
    /// `c/(K_φ σ̂)`.
    pub alpha_l: f64,
    /// `φ ≥ (c/σ̂²)·d²`.
    pub quadratic_coefficient: f64,
    /// `φ ≥ (c/σ̂)·d`.
    pub linear_coefficient: f64,
    /// Combined bound `φ ≥ (c/(2σ̂))·d + (c/(2σ̂²))·d²`.
    pub combined_linear: f64,
    pub combined_quadratic: f64,
}

pub fn underestimation_alphas(c: f64, k_phi: f64, sigma_hat: f64) -> Result<Underestimation> {
    for (name, v) in [("c", c), ("K_phi", k_phi), ("sigma_hat", sigma_hat)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::param(name, format!("must be finite and positive, got {v}")));
        }
    }
    Ok(Underestimation {
        alpha_q: c / (k_phi * sigma_hat * sigma_hat),
        alpha_l: c / (k_phi * sigma_hat),
        quadratic_coefficient: c / (sigma_hat * sigma_hat),
        linear_coefficient: c / sigma_hat,
        combined_linear: c / (2.0 * sigma_hat),
        combined_quadratic: c / (2.0 * sigma_hat * sigma_hat),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum BudgetKind {
    /// `‖s‖² ≤ β φ` on the band.
    Growth,
    /// `‖s‖ ≤ B` on the band.
    Bounded,
    /// `s` Lipschitz in `y` with constant `L`.
    Lipschitz,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepSizeBudget {
    pub kind: BudgetKind,
    pub alpha_max: f64,
    /// Each upper bound on `α`; `alpha_max` is their minimum.
    pub components: BTreeMap<String, f64>,
    pub params: BTreeMap<String, f64>,
}

impl StepSizeBudget {
    fn from_parts(kind: BudgetKind, components: &[(&str, f64)], params: &[(&str, f64)]) -> Self {
        let components: BTreeMap<String, f64> = components.iter().map(|(k, v)| (k.to_string(), *v)).collect();
        let alpha_max = components.values().copied().fold(f64::INFINITY, f64::min);
        StepSizeBudget {
            kind,
            alpha_max,
            components,
            params: params.iter().map(|(k, v)| (k.to_string(), *v)).collect(),
        }
    }

    /// Name of the component attaining `alpha_max`.
    pub fn binding(&self) -> &str {
        self.components
            .iter()
            .find(|(_, v)| **v == self.alpha_max)
            .map(|(k, _)| k.as_str())
            .unwrap_or("")
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.params.get(name).copied()
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and positive, got {v}")))
    }
}

fn nonnegative(name: &str, v: f64) -> Result<()> {
    if v >= 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::param(name, format!("must be finite and >= 0, got {v}")))
    }
}

/// Positive root of `q α² + b α − b_o = 0` for `q > 0`, `b ≥ 0`, `b_o > 0`.
fn positive_root(q: f64, b: f64, b_o: f64) -> f64 {
    2.0 * b_o / (b + (b * b + 4.0 * q * b_o).sqrt())
}

/// Budget under the relative growth condition `‖s‖² ≤ βφ`.
///
/// `α₁` is the largest `α ≤ 1/(wβ)` with `αb(1 − αwβ) ≤ b_o` on `[0, α]`.
/// Since `W = αφ(1 − αwβ)` vanishes at `α = 1/(wβ)`, `alpha_max` uses the
/// strict bound `1/(1.01·wβ)`; `1/(wβ)` itself is reported as `inv_w_beta`.
pub fn budget_growth(w: f64, beta: f64, b: f64, b_o: f64) -> Result<StepSizeBudget> {
    positive("w", w)?;
    positive("beta", beta)?;
    nonnegative("b", b)?;
    positive("b_o", b_o)?;
    let wb = w * beta;
    let inv = 1.0 / wb;
    let alpha_1 = if b == 0.0 || b / (4.0 * wb) <= b_o {
        inv
    } else {
        // smaller root of wβbα² − bα + b_o = 0
        2.0 * b_o / (b + (b * b - 4.0 * wb * b * b_o).sqrt())
    };
    let mut budget = StepSizeBudget::from_parts(
        BudgetKind::Growth,
        &[("strict_growth", 1.0 / (STRICT_INFLATION * wb)), ("alpha_1", alpha_1)],
        &[("w", w), ("beta", beta), ("b", b), ("b_o", b_o)],
    );
    budget.params.insert("inv_w_beta".into(), inv);
    Ok(budget)
}

fn check_geometry(sigma_o: f64, epsilon_o: f64, rho_o: f64) -> Result<()> {
    nonnegative("epsilon_o", epsilon_o)?;
    positive("rho_o", rho_o)?;
    positive("sigma_o", sigma_o)?;
    if sigma_o <= epsilon_o + rho_o {
        return Err(Error::InvalidBand(format!(
            "sigma_o = {sigma_o} must exceed epsilon_o + rho_o = {}",
            epsilon_o + rho_o
        )));
    }
    Ok(())
}

/// Budget when `‖s‖ ≤ B` on the band. `c` is a containment level of `φ` for
/// the `(ε_o + ρ_o)`-neighborhood taken at most `l₁/1.01`.
#[allow(clippy::too_many_arguments)]
pub fn budget_bounded(
    w: f64,
    bound: f64,
    b: f64,
    c: f64,
    sigma_o: f64,
    epsilon_o: f64,
    rho_o: f64,
    b_o: f64,
) -> Result<StepSizeBudget> {
    positive("w", w)?;
    positive("B", bound)?;
    nonnegative("b", b)?;
    positive("c", c)?;
    positive("b_o", b_o)?;
    check_geometry(sigma_o, epsilon_o, rho_o)?;
    let er2 = (epsilon_o + rho_o).powi(2);
    let wb2 = w * bound * bound;
    let alpha_q = c * er2 / (sigma_o * sigma_o * wb2);
    let alpha_1 = positive_root(wb2, b, b_o);
    let k_phi = STRICT_INFLATION * wb2 / er2;
    Ok(StepSizeBudget::from_parts(
        BudgetKind::Bounded,
        &[("alpha_q", alpha_q), ("alpha_1", alpha_1)],
        &[
            ("w", w),
            ("B", bound),
            ("b", b),
            ("c", c),
            ("sigma_o", sigma_o),
            ("epsilon_o", epsilon_o),
            ("rho_o", rho_o),
            ("b_o", b_o),
            ("K_phi", k_phi),
        ],
    ))
}

/// Budget when `s` is `L`-Lipschitz and `s* = max_𝒜 ‖s‖²`. With `s* = 0`
/// the strict bound on `κ` is zero and `κ = 0.01·2wL²` is used.
#[allow(clippy::too_many_arguments)]
pub fn budget_lipschitz(
    w: f64,
    lipschitz: f64,
    s_star: f64,
    b: f64,
    c: f64,
    sigma_o: f64,
    epsilon_o: f64,
    rho_o: f64,
    b_o: f64,
) -> Result<StepSizeBudget> {
    positive("w", w)?;
    positive("L", lipschitz)?;
    nonnegative("s_star", s_star)?;
    nonnegative("b", b)?;
    positive("c", c)?;
    positive("b_o", b_o)?;
    check_geometry(sigma_o, epsilon_o, rho_o)?;
    let er2 = (epsilon_o + rho_o).powi(2);
    let two_wl2 = 2.0 * w * lipschitz * lipschitz;
    let kappa_floor = 2.0 * w * s_star / er2;
    let kappa = if s_star > 0.0 {
        STRICT_INFLATION * kappa_floor
    } else {
        (STRICT_INFLATION - 1.0) * two_wl2
    };
    let alpha_q = c / (sigma_o * sigma_o * (two_wl2 + kappa_floor));
    let alpha_1 = positive_root(2.0 * w * (lipschitz * lipschitz * er2 + s_star), b, b_o);
    Ok(StepSizeBudget::from_parts(
        BudgetKind::Lipschitz,
        &[("alpha_q", alpha_q), ("alpha_1", alpha_1)],
        &[
            ("w", w),
            ("L", lipschitz),
            ("s_star", s_star),
            ("b", b),
            ("c", c),
            ("sigma_o", sigma_o),
            ("epsilon_o", epsilon_o),
            ("rho_o", rho_o),
            ("b_o", b_o),
            ("kappa", kappa),
            ("K_phi", two_wl2 + kappa),
        ],
    ))
}

/// `max ‖s‖²` over sampled points of `Ξ ∩ 𝒜` and sampled directions.
pub fn sample_s_star(
    oracle: &dyn DirectionOracle,
    attractor: &ConvexSet,
    feasible: &ConvexSet,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<f64> {
    let points = attractor_points(attractor, feasible, samples.max(1), derive_seed(seed, 13))?;
    let parts = execution.map_chunks(points.len(), CHUNK, |_, range| -> Result<f64> {
        let mut oracle = oracle.boxed_clone();
        let mut m: f64 = 0.0;
        for i in range {
            for s in oracle.query(&points[i], derive_seed(seed, i as u64))? {
                m = m.max(s.norm_squared());
            }
        }
        Ok(m)
    });
    parts.into_iter().try_fold(0.0, |m: f64, p| Ok(m.max(p?)))
}

/// Admissible error magnitudes for an oracle certified with the combined
/// bound `φ ≥ (c/(2σ̂))d + (c/(2σ̂²))d²` on `B̄_σ̂(𝒜) \ B_ε̂(𝒜)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RobustnessMargins {
    pub c: f64,
    pub sigma_hat: f64,
    pub lipschitz: f64,
    pub b: f64,
    pub epsilon_hat: f64,
    /// Strict upper bound `c/(2σ̂L)` on `a`.
    pub a_max: f64,
    /// Strict upper bound `c/(2σ̂²L)` on `r`.
    pub r_max: f64,
}

pub fn robustness_margins(
    c: f64,
    sigma_hat: f64,
    lipschitz: f64,
    b: f64,
    epsilon_hat: f64,
) -> Result<RobustnessMargins> {
    positive("c", c)?;
    positive("sigma_hat", sigma_hat)?;
    positive("L", lipschitz)?;
    nonnegative("b", b)?;
    nonnegative("epsilon_hat", epsilon_hat)?;
    if epsilon_hat >= sigma_hat {
        return Err(Error::InvalidBand(format!(
            "epsilon_hat = {epsilon_hat} must be below sigma_hat = {sigma_hat}"
        )));
    }
    Ok(RobustnessMargins {
        c,
        sigma_hat,
        lipschitz,
        b,
        epsilon_hat,
        a_max: c / (2.0 * sigma_hat * lipschitz),
        r_max: c / (2.0 * sigma_hat * sigma_hat * lipschitz),
    })
}

impl RobustnessMargins {
    /// `b + Lε̂(a + rε̂)`.
    pub fn b_hat(&self, a: f64, r: f64) -> f64 {
        self.b + self.lipschitz * self.epsilon_hat * (a + r * self.epsilon_hat)
    }

    /// `(c/(2σ̂) − aL)d + (c/(2σ̂²) − rL)d²`.
    pub fn phi_hat(&self, a: f64, r: f64) -> Phi {
        let s = self.sigma_hat;
        Phi::DistancePolynomial(vec![
            0.0,
            self.c / (2.0 * s) - a * self.lipschitz,
            self.c / (2.0 * s * s) - r * self.lipschitz,
        ])
    }

    /// Certificate `(σ̂, ε̂, b̂, φ̂)` for the perturbed oracle.
    pub fn certificate(&self, a: f64, r: f64) -> Result<SpspCertificate> {
        nonnegative("a", a)?;
        nonnegative("r", r)?;
        SpspCertificate::new(
            self.sigma_hat,
            self.epsilon_hat,
            self.b_hat(a, r),
            self.phi_hat(a, r),
            Provenance::Analytic("robustness".into()),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dvector;

    fn origin1() -> ConvexSet {
        ConvexSet::point(dvector![0.0]).unwrap()
    }

    #[test]
    fn containment_radial_square() {
        let phi = |y: &Vector| y.norm_squared();
        let res = containment_level(&phi, &origin1(), 0.0, 1.0, 2.0, &ContainmentOptions::default()).unwrap();
        assert_relative_eq!(res.l2, 1.0, epsilon = 1e-12);
        assert_relative_eq!(res.l1, 1.0, epsilon = 1e-12);
        assert_relative_eq!(res.level, 0.9, epsilon = 1e-12);
        assert!(res.certified);
    }

    #[test]
    fn containment_disconnected_sublevel() {
        let phi = |y: &Vector| {
            let d = y.norm();
            (d * d).min((d - 3.0).powi(2) + 0.5)
        };
        let res = containment_level(&phi, &origin1(), 0.0, 1.0, 5.0, &ContainmentOptions::default()).unwrap();
        assert_relative_eq!(res.l2, 1.0, epsilon = 1e-12);
        assert!(res.l1 < res.l2);
        assert!((res.l1 - 0.5).abs() < 1e-4);
        assert!(res.certified);
    }

    #[test]
    fn containment_reports_violator_on_coarse_grid() {
        // a narrow well between lattice points of the primary grid
        let phi = |y: &Vector| {
            let d = y.norm();
            let well = 0.01 + 1e3 * (d - 2.5).powi(2);
            (d * d).min(well)
        };
        let opts = ContainmentOptions {
            resolution: 0.5,
            ..ContainmentOptions::default()
        };
        let res = containment_level(&phi, &origin1(), 0.0, 1.0, 4.0, &opts).unwrap();
        assert!(!res.certified);
        assert!(res.violator.is_some());
    }

    #[test]
    fn containment_rejects_bad_geometry() {
        let phi = |y: &Vector| y.norm_squared();
        assert!(containment_level(&phi, &origin1(), 0.5, 1.0, 1.0, &ContainmentOptions::default()).is_err());
    }

    #[test]
    fn grid_limit() {
        let phi = |y: &Vector| y.norm_squared();
        let opts = ContainmentOptions {
            resolution: 1e-4,
            ..ContainmentOptions::default()
        };
        let a = ConvexSet::point(dvector![0.0, 0.0, 0.0]).unwrap();
        assert!(matches!(
            containment_level(&phi, &a, 0.0, 1.0, 2.0, &opts),
            Err(Error::GridTooLarge(_))
        ));
    }

    #[test]
    fn shell_minimum_on_box_attractor() {
        let a = ConvexSet::boxed(dvector![-1.0, 0.0], dvector![1.0, 0.0]).unwrap();
        let phi = |y: &Vector| y[1].abs() + 10.0 * (y[0] - 2.0).abs();
        let m = shell_minimum(&phi, &a, 0.5, 0.01, Execution::Parallel).unwrap();
        // attained at (1.5, 0)
        assert!((5.0..5.05).contains(&m));
    }

    #[test]
    fn underestimation_example() {
        let u = underestimation_alphas(0.5, 1.0, 2.0).unwrap();
        assert_eq!((u.alpha_q, u.alpha_l), (0.125, 0.25));
        let v = underestimation_alphas(0.5, 2.0, 2.0).unwrap();
        assert_eq!((v.alpha_q, v.alpha_l), (0.0625, 0.125));
        assert!(underestimation_alphas(0.0, 1.0, 1.0).is_err());
    }

    #[test]
    fn growth_budget() {
        let g = budget_growth(0.5, 4.0, 0.0, 1.0).unwrap();
        assert_eq!(g.param("inv_w_beta"), Some(0.5));
        assert_relative_eq!(g.alpha_max, 0.5 / 1.01, epsilon = 1e-15);
        let g = budget_growth(0.5, 4.0, 1.0, 0.1).unwrap();
        let a1 = g.components["alpha_1"];
        assert!(a1 <= 0.5);
        assert!((a1 * (1.0 - 2.0 * a1) - 0.1).abs() < 1e-12);
        let g = budget_growth(0.5, 4.0, 1.0, 1e6).unwrap();
        assert_eq!(g.binding(), "strict_growth");
    }

    #[test]
    fn bounded_budget() {
        let g = budget_bounded(0.5, 2.0, 0.0, 1.0, 2.0, 0.5, 0.5, 1e6).unwrap();
        assert_eq!(g.components["alpha_q"], 0.125);
        let b_o = 0.01;
        let g = budget_bounded(0.5, 2.0, 0.0, 1.0, 2.0, 0.5, 0.5, b_o).unwrap();
        assert_relative_eq!(g.components["alpha_1"], (b_o / 2.0f64).sqrt(), epsilon = 1e-15);
        assert!(budget_bounded(0.5, 2.0, 0.0, 1.0, 1.0, 0.5, 0.5, 1.0).is_err());
    }

    #[test]
    fn lipschitz_budget() {
        let g = budget_lipschitz(0.5, 1.0, 1.0, 0.0, 1.0, 2.0, 0.5, 0.5, 1e6).unwrap();
        assert_eq!(g.components["alpha_q"], 0.125);
        assert_relative_eq!(g.param("kappa").unwrap(), 1.01, epsilon = 1e-15);
        let g = budget_lipschitz(0.5, 3.0, 0.0, 0.0, 1.0, 2.0, 0.5, 0.5, 1e6).unwrap();
        assert_relative_eq!(g.components["alpha_q"], 1.0 / (2.0 * 4.0 * 0.5 * 9.0), epsilon = 1e-15);
    }

    #[test]
    fn robustness_example() {
        let m = robustness_margins(1.0, 2.0, 1.0, 0.0, 0.5).unwrap();
        assert_eq!((m.a_max, m.r_max), (0.25, 0.125));
        assert_eq!(m.b_hat(0.0, 0.0), 0.0);
        assert_eq!(m.phi_hat(0.0, 0.0).coefficients().unwrap(), &[0.0, 0.25, 0.125]);
        assert_relative_eq!(m.b_hat(0.1, 0.1), 0.5 * (0.1 + 0.05), epsilon = 1e-15);
    }
}
