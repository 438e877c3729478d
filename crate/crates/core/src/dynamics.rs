//! The projected iteration `y⁺ = P_Ξ[y − αs]`, `s ∈ Ψ(y)`, with pointwise
//! descent checks and empirical stability/attractivity certification.

use serde::{Deserialize, Serialize};

use crate::certificates::{Phi, PointFn, TOLERANCE, WITNESS_COUNT};
use crate::error::{Error, Result};
use crate::geometry::{sample_neighborhood, sample_shell, ConvexSet};
use crate::lemmas::{BudgetKind, StepSizeBudget};
use crate::oracles::DirectionOracle;
use crate::par::{derive_seed, Execution, CHUNK};
use crate::problems::{LyapunovField, LyapunovKind};
use crate::Vector;

/// Which element of a multi-valued `Ψ(y)` the iteration follows.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    First,
    /// The sampled direction minimizing `∇V(y)ᵀs`.
    #[default]
    WorstCase,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub t: usize,
    pub s: Vec<f64>,
    pub v: Option<f64>,
    pub dv: Option<f64>,
    pub dist: Option<f64>,
    pub grad_dot_s: Option<f64>,
    /// `−α∇Vᵀs + α²w‖s‖²` with `w = ½` for the squared distance and
    /// `w = L_{∇V}` otherwise, when known.
    pub descent_rhs: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryRecord {
    pub alpha: f64,
    pub seed: u64,
    pub oracle: String,
    pub selection: Selection,
    /// Set when `y0` was outside `Ξ` and got projected.
    pub projected_start: bool,
    pub iterates: Vec<Vec<f64>>,
    pub steps: Vec<StepRecord>,
    /// Oracle or projection failure that ended the run early.
    pub failure: Option<String>,
}

impl TrajectoryRecord {
    pub fn last(&self) -> Vector {
        Vector::from_column_slice(self.iterates.last().expect("at least the start"))
    }
}

struct Stepper<'a> {
    oracle: Box<dyn DirectionOracle>,
    feasible: &'a ConvexSet,
    v: Option<&'a LyapunovField>,
    alpha: f64,
    selection: Selection,
    seed: u64,
}

impl Stepper<'_> {
    /// Returns `(s, y⁺)`.
    fn step(&mut self, y: &Vector, t: usize) -> Result<(Vector, Vector)> {
        let query_seed = derive_seed(self.seed, t as u64);
        let mut dirs = self.oracle.query(y, query_seed)?;
        if dirs.is_empty() {
            return Err(Error::param("oracle", "returned no directions"));
        }
        let s = match self.selection {
            Selection::First => dirs.swap_remove(0),
            Selection::Random => {
                let k = (derive_seed(query_seed, 7) % dirs.len() as u64) as usize;
                dirs.swap_remove(k)
            }
            Selection::WorstCase => {
                if dirs.len() == 1 {
                    dirs.swap_remove(0)
                } else {
                    let v = self
                        .v
                        .ok_or_else(|| Error::param("selection", "worst-case selection needs a Lyapunov function"))?;
                    let g = v.gradient(y)?;
                    let k = dirs
                        .iter()
                        .enumerate()
                        .min_by(|a, b| g.dot(a.1).total_cmp(&g.dot(b.1)))
                        .map(|(k, _)| k)
                        .unwrap_or(0);
                    dirs.swap_remove(k)
                }
            }
        };
        let next = self.feasible.project(&(y - &s * self.alpha))?;
        Ok((s, next))
    }
}

fn descent_weight(v: &LyapunovField) -> Option<f64> {
    match v.kind() {
        LyapunovKind::SquaredDistance => Some(0.5),
        _ => v.lipschitz_grad(),
    }
}

fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha.is_finite() {
        Ok(())
    } else {
        Err(Error::param(
            "alpha",
            format!("must be finite and positive, got {alpha}"),
        ))
    }
}

/// Runs `horizon` steps from `y0`. Oracle and projection failures end the run
/// and are reported in [`TrajectoryRecord::failure`].
#[allow(clippy::too_many_arguments)]
pub fn iterate(
    y0: &Vector,
    oracle: &dyn DirectionOracle,
    feasible: &ConvexSet,
    alpha: f64,
    horizon: usize,
    selection: Selection,
    v: Option<&LyapunovField>,
    seed: u64,
) -> Result<TrajectoryRecord> {
    check_alpha(alpha)?;
    if y0.len() != feasible.dim() {
        return Err(Error::DimensionMismatch {
            expected: feasible.dim(),
            found: y0.len(),
        });
    }
    let projected_start = !feasible.contains(y0, 0.0);
    let mut y = if projected_start {
        feasible.project(y0)?
    } else {
        y0.clone()
    };
    let mut stepper = Stepper {
        oracle: oracle.boxed_clone(),
        feasible,
        v,
        alpha,
        selection,
        seed,
    };
    let w = v.and_then(descent_weight);
    let mut rec = TrajectoryRecord {
        alpha,
        seed,
        oracle: oracle.name(),
        selection,
        projected_start,
        iterates: vec![y.as_slice().to_vec()],
        steps: Vec::with_capacity(horizon),
        failure: None,
    };
    for t in 0..horizon {
        let (s, next) = match stepper.step(&y, t) {
            Ok(x) => x,
            Err(e) => {
                rec.failure = Some(e.to_string());
                break;
            }
        };
        let mut step = StepRecord {
            t,
            s: s.as_slice().to_vec(),
            v: None,
            dv: None,
            dist: None,
            grad_dot_s: None,
            descent_rhs: None,
        };
        if let Some(v) = v {
            let diag = (|| -> Result<()> {
                let vy = v.value(&y)?;
                let gs = v.gradient(&y)?.dot(&s);
                step.v = Some(vy);
                step.dv = Some(v.value(&next)? - vy);
                step.dist = Some(v.attractor().distance(&y)?);
                step.grad_dot_s = Some(gs);
                step.descent_rhs = w.map(|w| -alpha * gs + alpha * alpha * w * s.norm_squared());
                Ok(())
            })();
            if let Err(e) = diag {
                rec.failure = Some(e.to_string());
                break;
            }
        }
        rec.steps.push(step);
        rec.iterates.push(next.as_slice().to_vec());
        y = next;
    }
    Ok(rec)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "mode")]
pub enum DescentMode {
    /// Squared-distance `V`, any convex `Ξ`: `ΔV ≤ −α∇Vᵀs + ½α²‖s‖²`.
    Half,
    /// `∇V` Lipschitz with constant `L`, `Ξ = ℝⁿ`: `ΔV ≤ −α∇Vᵀs + α²L‖s‖²`.
    Lipschitz { l: f64 },
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DescentCheck {
    pub pass: bool,
    /// `rhs − ΔV` per step.
    pub margins: Vec<f64>,
    pub worst_margin: f64,
    pub worst_step: Option<usize>,
}

/// Evaluates the one-step descent inequality along a recorded trajectory.
pub fn check_descent_lemma(
    traj: &TrajectoryRecord,
    v: &LyapunovField,
    feasible: &ConvexSet,
    mode: DescentMode,
) -> Result<DescentCheck> {
    let w = match mode {
        DescentMode::Half => {
            if v.kind() != LyapunovKind::SquaredDistance {
                return Err(Error::FieldMismatch(
                    "the half mode needs the squared-distance Lyapunov function".into(),
                ));
            }
            0.5
        }
        DescentMode::Lipschitz { l } => {
            if !feasible.is_whole_space() {
                return Err(Error::FieldMismatch(
                    "the Lipschitz mode needs an unconstrained feasible set".into(),
                ));
            }
            if !(l > 0.0 && l.is_finite()) {
                return Err(Error::param("L", format!("must be finite and positive, got {l}")));
            }
            l
        }
    };
    let alpha = traj.alpha;
    let mut margins = Vec::with_capacity(traj.steps.len());
    for (t, step) in traj.steps.iter().enumerate() {
        let y = Vector::from_column_slice(&traj.iterates[t]);
        let next = Vector::from_column_slice(&traj.iterates[t + 1]);
        let s = Vector::from_column_slice(&step.s);
        let dv = v.value(&next)? - v.value(&y)?;
        let rhs = -alpha * v.gradient(&y)?.dot(&s) + alpha * alpha * w * s.norm_squared();
        margins.push(rhs - dv);
    }
    let (worst_step, worst_margin) = margins
        .iter()
        .copied()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .map_or((None, f64::INFINITY), |(k, m)| (Some(k), m));
    Ok(DescentCheck {
        pass: worst_margin >= -TOLERANCE,
        margins,
        worst_margin,
        worst_step,
    })
}

/// The guaranteed decrease `W(y)` in `ΔV ≤ −W`.
#[derive(Clone)]
pub enum WForm {
    /// `αφ(y)(1 − αwβ)`.
    Growth {
        alpha: f64,
        w: f64,
        beta: f64,
        phi: Phi,
    },
    /// `α²(k·d² − offset)`.
    Quadratic {
        alpha: f64,
        k: f64,
        offset: f64,
    },
    Custom(PointFn),
}

impl std::fmt::Debug for WForm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            WForm::Growth { alpha, w, beta, phi } => {
                write!(f, "Growth {{ alpha: {alpha}, w: {w}, beta: {beta}, phi: {phi:?} }}")
            }
            WForm::Quadratic { alpha, k, offset } => {
                write!(f, "Quadratic {{ alpha: {alpha}, k: {k}, offset: {offset} }}")
            }
            WForm::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl WForm {
    pub fn eval(&self, y: &Vector, d: f64) -> Result<f64> {
        Ok(match self {
            WForm::Growth { alpha, w, beta, phi } => alpha * phi.eval(y, d)? * (1.0 - alpha * w * beta),
            WForm::Quadratic { alpha, k, offset } => alpha * alpha * (k * d * d - offset),
            WForm::Custom(f) => f(y, d),
        })
    }

    /// The decrease promised by `budget` at step size `alpha`. The growth
    /// case needs the certificate's `φ`.
    pub fn from_budget(budget: &StepSizeBudget, alpha: f64, phi: Option<Phi>) -> Result<Self> {
        let p = |name: &str| {
            budget
                .param(name)
                .ok_or_else(|| Error::param(name, "missing from the budget"))
        };
        Ok(match budget.kind {
            BudgetKind::Growth => WForm::Growth {
                alpha,
                w: p("w")?,
                beta: p("beta")?,
                phi: phi.ok_or_else(|| Error::param("phi", "the growth decrease needs the certificate's phi"))?,
            },
            BudgetKind::Bounded => {
                let bound = p("B")?;
                WForm::Quadratic {
                    alpha,
                    k: p("K_phi")?,
                    offset: p("w")? * bound * bound,
                }
            }
            BudgetKind::Lipschitz => WForm::Quadratic {
                alpha,
                k: p("kappa")?,
                offset: 2.0 * p("w")? * p("s_star")?,
            },
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `W > 0` on the band.
    P1,
    /// `ΔV ≤ −W` on the band.
    P2,
    /// `ΔV ≤ b_o` near the attractor.
    P3,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConditionWitness {
    pub condition: Condition,
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub margin: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct SpasBand {
    pub sigma_o: f64,
    pub epsilon_o: f64,
    pub rho_o: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpasConditionReport {
    pub pass: bool,
    pub p1: bool,
    pub p2: bool,
    pub p3: bool,
    pub min_w: f64,
    /// `min (−W − ΔV)` over the band.
    pub p2_margin: f64,
    /// `min (b_o − ΔV)` over the inner set.
    pub p3_margin: f64,
    pub band_samples: usize,
    pub inner_samples: usize,
    pub alpha: f64,
    pub b_o: f64,
    pub band: SpasBand,
    pub seed: u64,
    pub witnesses: Vec<ConditionWitness>,
}

struct ConditionPartial {
    min_w: f64,
    p2: f64,
    p3: f64,
    witnesses: Vec<ConditionWitness>,
}

impl ConditionPartial {
    fn empty() -> Self {
        ConditionPartial {
            min_w: f64::INFINITY,
            p2: f64::INFINITY,
            p3: f64::INFINITY,
            witnesses: Vec::new(),
        }
    }

    fn trim(&mut self) {
        self.witnesses.sort_by(|a, b| a.margin.total_cmp(&b.margin));
        self.witnesses.truncate(WITNESS_COUNT);
    }
}

#[derive(Clone, Copy, Debug)]
pub struct ConditionOptions {
    pub band_samples: usize,
    pub inner_samples: usize,
    pub seed: u64,
    pub execution: Execution,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            band_samples: 10_000,
            inner_samples: 10_000,
            seed: 0,
            execution: Execution::Parallel,
        }
    }
}

/// Samples `Ξ ∩ (B̄_{σ_o} \ B_{ε_o+ρ_o})` and `Ξ ∩ B̄_{ε_o+ρ_o}` and checks
/// `W > 0`, `ΔV ≤ −W` and `ΔV ≤ b_o` for every sampled direction.
#[allow(clippy::too_many_arguments)]
pub fn check_spas_conditions(
    v: &LyapunovField,
    oracle: &dyn DirectionOracle,
    feasible: &ConvexSet,
    band: SpasBand,
    alpha: f64,
    b_o: f64,
    w: &WForm,
    opts: &ConditionOptions,
) -> Result<SpasConditionReport> {
    check_alpha(alpha)?;
    let inner = band.epsilon_o + band.rho_o;
    if !(band.sigma_o > inner && band.epsilon_o >= 0.0 && band.rho_o >= 0.0) {
        return Err(Error::InvalidBand(format!(
            "need sigma_o > epsilon_o + rho_o, got {} and {inner}",
            band.sigma_o
        )));
    }
    let attractor = v.attractor();
    let band_points = sample_shell(
        attractor,
        feasible,
        inner,
        band.sigma_o,
        opts.band_samples,
        derive_seed(opts.seed, 21),
        opts.execution,
    )?;
    let inner_points = if inner > 0.0 {
        sample_neighborhood(
            attractor,
            feasible,
            inner,
            opts.inner_samples,
            derive_seed(opts.seed, 22),
            opts.execution,
        )?
    } else {
        Vec::new()
    };

    let run = |points: &[Vector], on_band: bool| -> Result<ConditionPartial> {
        let parts = opts
            .execution
            .map_chunks(points.len(), CHUNK, |_, range| -> Result<ConditionPartial> {
                let mut oracle = oracle.boxed_clone();
                let mut part = ConditionPartial::empty();
                for i in range {
                    let y = &points[i];
                    let vy = v.value(y)?;
                    let seed = derive_seed(opts.seed ^ if on_band { 0xB } else { 0xC }, i as u64);
                    let wy = if on_band {
                        let wy = w.eval(y, attractor.distance(y)?)?;
                        part.min_w = part.min_w.min(wy);
                        if wy <= 0.0 {
                            part.witnesses.push(ConditionWitness {
                                condition: Condition::P1,
                                y: y.as_slice().to_vec(),
                                s: Vec::new(),
                                margin: wy,
                            });
                        }
                        wy
                    } else {
                        0.0
                    };
                    for s in oracle.query(y, seed)? {
                        let next = feasible.project(&(y - &s * alpha))?;
                        let dv = v.value(&next)? - vy;
                        let (condition, m) = if on_band {
                            (Condition::P2, -wy - dv)
                        } else {
                            (Condition::P3, b_o - dv)
                        };
                        if on_band {
                            part.p2 = part.p2.min(m);
                        } else {
                            part.p3 = part.p3.min(m);
                        }
                        if m < -TOLERANCE {
                            part.witnesses.push(ConditionWitness {
                                condition,
                                y: y.as_slice().to_vec(),
                                s: s.as_slice().to_vec(),
                                margin: m,
                            });
                            if part.witnesses.len() > 4 * WITNESS_COUNT {
                                part.trim();
                            }
                        }
                    }
                }
                part.trim();
                Ok(part)
            });
        let mut total = ConditionPartial::empty();
        for p in parts {
            let p = p?;
            total.min_w = total.min_w.min(p.min_w);
            total.p2 = total.p2.min(p.p2);
            total.p3 = total.p3.min(p.p3);
            total.witnesses.extend(p.witnesses);
        }
        Ok(total)
    };

    let band_part = run(&band_points, true)?;
    let inner_part = run(&inner_points, false)?;
    let p1 = band_part.min_w > 0.0;
    let p2 = band_part.p2 >= -TOLERANCE;
    let p3 = inner_part.p3 >= -TOLERANCE;
    let mut all = ConditionPartial {
        witnesses: band_part.witnesses.into_iter().chain(inner_part.witnesses).collect(),
        ..ConditionPartial::empty()
    };
    all.trim();
    Ok(SpasConditionReport {
        pass: p1 && p2 && p3,
        p1,
        p2,
        p3,
        min_w: band_part.min_w,
        p2_margin: band_part.p2,
        p3_margin: inner_part.p3,
        band_samples: band_points.len(),
        inner_samples: inner_points.len(),
        alpha,
        b_o,
        band,
        seed: opts.seed,
        witnesses: all.witnesses,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpasParams {
    /// Radius of the region of initial conditions for attractivity.
    pub sigma: f64,
    /// Target neighborhood for attractivity.
    pub rho_a: f64,
    /// Neighborhood trajectories must not leave for stability.
    pub rho_s: f64,
    pub trials: usize,
    pub horizon: usize,
    pub selection: Selection,
}

impl Default for SpasParams {
    fn default() -> Self {
        SpasParams {
            sigma: 1.0,
            rho_a: 0.1,
            rho_s: 0.5,
            trials: 64,
            horizon: 10_000,
            selection: Selection::WorstCase,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StabilityReport {
    pub rho_s: f64,
    /// Largest `δ` found such that every trial from `B̄_δ(𝒜) ∩ Ξ` stays in
    /// `B̄_{ρ_s}(𝒜)` over the horizon.
    pub delta_found: Option<f64>,
    pub escape_witness: Option<TrajectoryRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AttractivityReport {
    pub sigma: f64,
    pub rho_a: f64,
    /// Smallest `T` with every trial inside `B̄_{ρ_a}(𝒜)` on `[T, horizon]`.
    pub t_found: Option<usize>,
    /// Largest distance to `𝒜` over the final tenth of the horizon, across trials.
    pub achieved_rho_a: f64,
    pub straggler_witness: Option<TrajectoryRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SpasReport {
    pub alpha: f64,
    pub trials: usize,
    pub horizon: usize,
    pub seed: u64,
    pub stability: StabilityReport,
    pub attractivity: AttractivityReport,
    pub spas: bool,
}

/// Per-trial distance summary.
struct Run {
    /// First step index whose iterate leaves `B̄_limit`, if any.
    first_exit: Option<usize>,
    /// Last step index whose iterate is outside `B̄_target`, if any.
    last_outside: Option<usize>,
    tail_max: f64,
}

#[allow(clippy::too_many_arguments)]
fn run_distances(
    y0: &Vector,
    oracle: &dyn DirectionOracle,
    feasible: &ConvexSet,
    v: &LyapunovField,
    alpha: f64,
    params: &SpasParams,
    seed: u64,
    limit: f64,
    target: f64,
    stop_on_exit: bool,
) -> Result<Run> {
    let attractor = v.attractor();
    let mut stepper = Stepper {
        oracle: oracle.boxed_clone(),
        feasible,
        v: Some(v),
        alpha,
        selection: params.selection,
        seed,
    };
    let tail_start = params.horizon - params.horizon / 10;
    let mut run = Run {
        first_exit: None,
        last_outside: None,
        tail_max: 0.0,
    };
    let mut y = if feasible.contains(y0, 0.0) {
        y0.clone()
    } else {
        feasible.project(y0)?
    };
    for t in 0..=params.horizon {
        let d = attractor.distance(&y)?;
        if !(d <= limit) && run.first_exit.is_none() {
            run.first_exit = Some(t);
            if stop_on_exit {
                return Ok(run);
            }
        }
        if !(d <= target) {
            run.last_outside = Some(t);
        }
        if t >= tail_start {
            run.tail_max = run.tail_max.max(d);
        }
        if t < params.horizon {
            match stepper.step(&y, t) {
                Ok((_, next)) => y = next,
                // overflow from a diverging run counts as leaving every ball
                Err(Error::NonFinite { .. }) => {
                    run.first_exit.get_or_insert(t + 1);
                    run.last_outside = Some(params.horizon);
                    run.tail_max = f64::INFINITY;
                    return Ok(run);
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(run)
}

/// Starting points in `Ξ ∩ B̄_radius(𝒜)`, the first `trials/4` pushed out to
/// distance `radius` along their own ray.
fn trial_starts(
    attractor: &ConvexSet,
    feasible: &ConvexSet,
    radius: f64,
    trials: usize,
    seed: u64,
    execution: Execution,
) -> Result<Vec<Vector>> {
    let mut starts = sample_neighborhood(attractor, feasible, radius, trials, seed, execution)?;
    for y in starts.iter_mut().take(trials / 4) {
        let p = attractor.project(y)?;
        let d = (&*y - &p).norm();
        if d > 0.0 {
            let pushed = &p + (&*y - &p) * (radius / d);
            if feasible.contains(&pushed, 0.0) {
                *y = pushed;
            }
        }
    }
    Ok(starts)
}

/// Empirical practical stability and semiglobal practical attractivity at
/// each step size of `alpha_grid`.
///
/// Stability binary-searches `δ ∈ (0, ρ_s]` to resolution `10⁻³·ρ_s`, with
/// trial starts in `B̄_{ρ_s}(𝒜)` scaled toward `𝒜` by `δ/ρ_s`. Attractivity
/// runs the trials from `B̄_σ(𝒜)`. Both are limited to the horizon.
#[allow(clippy::too_many_arguments)]
pub fn certify_spas(
    oracle: &dyn DirectionOracle,
    feasible: &ConvexSet,
    v: &LyapunovField,
    alpha_grid: &[f64],
    params: &SpasParams,
    seed: u64,
    execution: Execution,
) -> Result<Vec<SpasReport>> {
    if !(params.sigma > params.rho_a && params.rho_a > 0.0 && params.rho_s > 0.0) {
        return Err(Error::param("sigma", "need sigma > rho_a > 0 and rho_s > 0"));
    }
    if params.trials == 0 || params.horizon == 0 {
        return Err(Error::param("trials", "trials and horizon must be positive"));
    }
    let attractor = v.attractor();
    let stability_starts = trial_starts(
        attractor,
        feasible,
        params.rho_s,
        params.trials,
        derive_seed(seed, 31),
        execution,
    )?;
    let attract_starts = trial_starts(
        attractor,
        feasible,
        params.sigma,
        params.trials,
        derive_seed(seed, 32),
        execution,
    )?;
    let anchors: Vec<Vector> = stability_starts
        .iter()
        .map(|y| attractor.project(y))
        .collect::<Result<_>>()?;
    let trial_seed = |i: usize| derive_seed(seed, 1000 + i as u64);

    alpha_grid
        .iter()
        .map(|&alpha| -> Result<SpasReport> {
            check_alpha(alpha)?;
            let scaled_start = |i: usize, delta: f64| -> Vector {
                let p = &anchors[i];
                p + (&stability_starts[i] - p) * (delta / params.rho_s)
            };
            // index of the first escaping trial, if any
            let escapes = |delta: f64| -> Result<Option<usize>> {
                let runs = execution.map(stability_starts.len(), |i| {
                    run_distances(
                        &scaled_start(i, delta),
                        oracle,
                        feasible,
                        v,
                        alpha,
                        params,
                        trial_seed(i),
                        params.rho_s,
                        f64::INFINITY,
                        true,
                    )
                });
                for (i, r) in runs.into_iter().enumerate() {
                    if r?.first_exit.is_some() {
                        return Ok(Some(i));
                    }
                }
                Ok(None)
            };
            let (delta_found, witness) = match escapes(params.rho_s)? {
                None => (Some(params.rho_s), None),
                Some(first) => {
                    let (mut lo, mut hi) = (0.0, params.rho_s);
                    let mut worst = (hi, first);
                    while hi - lo > 1e-3 * params.rho_s {
                        let mid = 0.5 * (lo + hi);
                        match escapes(mid)? {
                            None => lo = mid,
                            Some(i) => {
                                hi = mid;
                                worst = (mid, i);
                            }
                        }
                    }
                    let (delta, i) = worst;
                    let rec = iterate(
                        &scaled_start(i, delta),
                        oracle,
                        feasible,
                        alpha,
                        params.horizon,
                        params.selection,
                        Some(v),
                        trial_seed(i),
                    )?;
                    ((lo > 0.0).then_some(lo), Some(rec))
                }
            };

            let runs = execution.map(attract_starts.len(), |i| {
                run_distances(
                    &attract_starts[i],
                    oracle,
                    feasible,
                    v,
                    alpha,
                    params,
                    trial_seed(params.trials + i),
                    f64::INFINITY,
                    params.rho_a,
                    false,
                )
            });
            let mut achieved: f64 = 0.0;
            let mut latest: Option<(usize, usize)> = None;
            for (i, r) in runs.into_iter().enumerate() {
                let r = r?;
                achieved = achieved.max(r.tail_max);
                if let Some(t) = r.last_outside {
                    if latest.is_none_or(|(_, best)| t > best) {
                        latest = Some((i, t));
                    }
                }
            }
            let t_found = match latest {
                None => Some(0),
                Some((_, t)) if t < params.horizon => Some(t + 1),
                Some(_) => None,
            };
            let straggler_witness = match (t_found, latest) {
                (None, Some((i, _))) => Some(iterate(
                    &attract_starts[i],
                    oracle,
                    feasible,
                    alpha,
                    params.horizon,
                    params.selection,
                    Some(v),
                    trial_seed(params.trials + i),
                )?),
                _ => None,
            };
            Ok(SpasReport {
                alpha,
                trials: params.trials,
                horizon: params.horizon,
                seed,
                spas: delta_found.is_some() && t_found.is_some(),
                stability: StabilityReport {
                    rho_s: params.rho_s,
                    delta_found,
                    escape_witness: witness,
                },
                attractivity: AttractivityReport {
                    sigma: params.sigma,
                    rho_a: params.rho_a,
                    t_found,
                    achieved_rho_a: achieved,
                    straggler_witness,
                },
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracles::{gradient_oracle, subgradient_oracle};
    use crate::problems::builtin;
    use nalgebra::dvector;

    #[test]
    fn quadratic_contracts_geometrically() {
        let b = builtin("quadratic").unwrap();
        let xi = ConvexSet::whole_space(2);
        let rec = iterate(
            &dvector![1.0, 0.0],
            &gradient_oracle(b.field),
            &xi,
            0.1,
            50,
            Selection::First,
            None,
            0,
        )
        .unwrap();
        assert_eq!(rec.iterates.len(), 51);
        for (t, y) in rec.iterates.iter().enumerate() {
            assert!((y[0] - 0.9f64.powi(t as i32)).abs() < 1e-12);
            assert_eq!(y[1], 0.0);
        }
    }

    #[test]
    fn stationary_on_attractor() {
        let b = builtin("strongly-convex-quadratic").unwrap();
        let xi = ConvexSet::whole_space(2);
        let rec = iterate(
            &dvector![0.0, 0.0],
            &gradient_oracle(b.field),
            &xi,
            0.3,
            10,
            Selection::First,
            None,
            0,
        )
        .unwrap();
        assert!(rec.iterates.iter().all(|y| y == &vec![0.0, 0.0]));
    }

    #[test]
    fn box_projection_clamps() {
        let b = builtin("quadratic").unwrap();
        let xi = ConvexSet::boxed(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        // the minimizer (0, 0) is a corner; a huge step overshoots outside
        let rec = iterate(
            &dvector![0.5, 0.5],
            &gradient_oracle(b.field),
            &xi,
            3.0,
            1,
            Selection::First,
            None,
            0,
        )
        .unwrap();
        assert_eq!(rec.iterates[1], vec![0.0, 0.0]);
        assert!(!rec.projected_start);
        let rec = iterate(
            &dvector![2.0, 0.5],
            &gradient_oracle(builtin("quadratic").unwrap().field),
            &xi,
            0.1,
            1,
            Selection::First,
            None,
            0,
        )
        .unwrap();
        assert!(rec.projected_start);
        assert_eq!(rec.iterates[0], vec![1.0, 0.5]);
    }

    #[test]
    fn descent_lemma_modes() {
        let b = builtin("quadratic").unwrap();
        let xi = ConvexSet::whole_space(2);
        let sq = LyapunovField::squared_distance(b.attractor.clone()).unwrap();
        let gap = LyapunovField::objective_gap(b.attractor.clone(), b.field.clone()).unwrap();
        let rec = iterate(
            &dvector![2.0, -1.0],
            &gradient_oracle(b.field),
            &xi,
            0.7,
            30,
            Selection::First,
            Some(&sq),
            0,
        )
        .unwrap();
        assert!(check_descent_lemma(&rec, &sq, &xi, DescentMode::Half).unwrap().pass);
        assert!(
            check_descent_lemma(&rec, &gap, &xi, DescentMode::Lipschitz { l: 1.0 })
                .unwrap()
                .pass
        );
        assert!(check_descent_lemma(&rec, &gap, &xi, DescentMode::Half).is_err());
        let boxed = ConvexSet::boxed(dvector![0.0, 0.0], dvector![1.0, 1.0]).unwrap();
        assert!(check_descent_lemma(&rec, &gap, &boxed, DescentMode::Lipschitz { l: 1.0 }).is_err());
    }

    #[test]
    fn worst_case_selection_needs_v() {
        let b = builtin("max-affine").unwrap();
        let xi = ConvexSet::whole_space(2);
        let rec = iterate(
            &dvector![1.0, 0.0],
            &subgradient_oracle(b.field.clone(), 4),
            &xi,
            0.1,
            3,
            Selection::WorstCase,
            None,
            0,
        )
        .unwrap();
        assert!(rec.failure.is_some());
        let v = LyapunovField::squared_distance(b.attractor).unwrap();
        let rec = iterate(
            &dvector![1.0, 0.0],
            &subgradient_oracle(b.field, 4),
            &xi,
            0.1,
            3,
            Selection::WorstCase,
            Some(&v),
            0,
        )
        .unwrap();
        assert!(rec.failure.is_none());
        assert_eq!(rec.iterates.len(), 4);
    }

    #[test]
    fn spas_on_contraction() {
        let b = builtin("strongly-convex-quadratic").unwrap();
        let xi = ConvexSet::whole_space(2);
        let v = LyapunovField::squared_distance(b.attractor.clone()).unwrap();
        let params = SpasParams {
            sigma: 2.0,
            rho_a: 0.05,
            rho_s: 0.5,
            trials: 16,
            horizon: 400,
            selection: Selection::First,
        };
        let reports = certify_spas(
            &gradient_oracle(b.field.clone()),
            &xi,
            &v,
            &[0.1, 1.2],
            &params,
            3,
            Execution::Parallel,
        )
        .unwrap();
        assert!(reports[0].spas);
        assert_eq!(reports[0].stability.delta_found, Some(0.5));
        // 1.2 > 2/L with L = 2: divergence along the stiff axis
        assert!(!reports[1].spas);
        assert!(reports[1].attractivity.straggler_witness.is_some());
    }
}
