//! Pseudogradient certificates `(σ, ε, b, φ)`: closed-form builders for the
//! standard objective families, and sampled verification of
//!
//! ```text
//! ∇V(y)ᵀs ≥ φ(y)   on Ξ ∩ (B̄_σ(𝒜) \ B_ε(𝒜)),
//! ∇V(y)ᵀs ≥ −b     on Ξ ∩ B̄_ε(𝒜),
//! ```
//!
//! for every sampled `s ∈ Ψ(y)`.

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{sample_band, sample_neighborhood, Band, ConvexSet};
use crate::lemmas::{containment_level, shell_minimum, ContainmentOptions};
use crate::oracles::DirectionOracle;
use crate::par::{chunk_rng, derive_seed, Execution, CHUNK};
use crate::problems::{Field, LyapunovField};
use crate::Vector;

/// Default margin tolerance.
pub const TOLERANCE: f64 = 1e-9;
/// Number of worst cases kept in a report.
pub const WITNESS_COUNT: usize = 10;

/// `(y, dist(y, 𝒜)) ↦ value`.
pub type PointFn = Arc<dyn Fn(&Vector, f64) -> f64 + Send + Sync>;

/// Lower-bound function `φ(y)`; evaluated with `d = dist(y, 𝒜)` precomputed.
#[derive(Clone)]
pub enum Phi {
    /// `Σₖ coeffs[k]·dᵏ`.
    DistancePolynomial(Vec<f64>),
    /// `scale·‖∇f(y)‖²`.
    GradientNormSquared {
        field: Field,
        scale: f64,
    },
    /// `scale·(f(y) − minimum)`.
    ObjectiveGap {
        field: Field,
        minimum: f64,
        scale: f64,
    },
    Custom {
        name: String,
        f: PointFn,
    },
}

impl fmt::Debug for Phi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.describe())
    }
}

impl Phi {
    pub fn eval(&self, y: &Vector, d: f64) -> Result<f64> {
        Ok(match self {
            Phi::DistancePolynomial(coeffs) => coeffs.iter().rev().fold(0.0, |acc, c| acc * d + c),
            Phi::GradientNormSquared { field, scale } => scale * field.gradient(y)?.norm_squared(),
            Phi::ObjectiveGap { field, minimum, scale } => scale * (field.value(y) - minimum),
            Phi::Custom { f, .. } => f(y, d),
        })
    }

    /// `k·φ`.
    pub fn scaled(&self, k: f64) -> Phi {
        match self {
            Phi::DistancePolynomial(c) => Phi::DistancePolynomial(c.iter().map(|v| v * k).collect()),
            Phi::GradientNormSquared { field, scale } => Phi::GradientNormSquared {
                field: field.clone(),
                scale: scale * k,
            },
            Phi::ObjectiveGap { field, minimum, scale } => Phi::ObjectiveGap {
                field: field.clone(),
                minimum: *minimum,
                scale: scale * k,
            },
            Phi::Custom { name, f } => {
                let f = f.clone();
                Phi::Custom {
                    name: format!("{k}*{name}"),
                    f: Arc::new(move |y, d| k * f(y, d)),
                }
            }
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Phi::DistancePolynomial(c) => {
                let terms: Vec<String> = c
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| **v != 0.0)
                    .map(|(k, v)| match k {
                        0 => format!("{v}"),
                        1 => format!("{v}*d"),
                        _ => format!("{v}*d^{k}"),
                    })
                    .collect();
                if terms.is_empty() {
                    "0".into()
                } else {
                    terms.join(" + ")
                }
            }
            Phi::GradientNormSquared { field, scale } => format!("{scale}*|grad {}|^2", field.name()),
            Phi::ObjectiveGap { field, minimum, scale } => format!("{scale}*({} - {minimum})", field.name()),
            Phi::Custom { name, .. } => name.clone(),
        }
    }

    /// Polynomial coefficients when `φ` depends on `d` only.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            Phi::DistancePolynomial(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Classification {
    /// Strict pseudogradient: `ε = b = 0`, `σ = ∞`.
    #[serde(rename = "SP")]
    Sp,
    /// Semiglobal strict: `ε = b = 0`.
    #[serde(rename = "SSP")]
    Ssp,
    /// Practical strict: `σ = ∞`.
    #[serde(rename = "PSP")]
    Psp,
    /// Semiglobal practical strict.
    #[serde(rename = "SPSP")]
    Spsp,
}

impl Classification {
    pub fn of(sigma: f64, epsilon: f64, b: f64) -> Self {
        match (epsilon == 0.0 && b == 0.0, sigma.is_infinite()) {
            (true, true) => Classification::Sp,
            (true, false) => Classification::Ssp,
            (false, true) => Classification::Psp,
            (false, false) => Classification::Spsp,
        }
    }
}

impl fmt::Display for Classification {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Classification::Sp => "SP",
            Classification::Ssp => "SSP",
            Classification::Psp => "PSP",
            Classification::Spsp => "SPSP",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    Analytic(String),
    Empirical,
}

#[derive(Clone, Debug)]
pub struct SpspCertificate {
    pub sigma: f64,
    pub epsilon: f64,
    pub b: f64,
    pub phi: Phi,
    pub classification: Classification,
    pub provenance: Provenance,
    /// Set when `ε` was chosen as a function of `σ`.
    pub sigma_dependent_epsilon: bool,
}

impl SpspCertificate {
    pub fn new(sigma: f64, epsilon: f64, b: f64, phi: Phi, provenance: Provenance) -> Result<Self> {
        if !(epsilon >= 0.0 && epsilon.is_finite()) {
            return Err(Error::param(
                "epsilon",
                format!("must be finite and >= 0, got {epsilon}"),
            ));
        }
        if !(b >= 0.0 && b.is_finite()) {
            return Err(Error::param("b", format!("must be finite and >= 0, got {b}")));
        }
        if !(sigma > epsilon) {
            return Err(Error::param(
                "sigma",
                format!("must exceed epsilon = {epsilon}, got {sigma}"),
            ));
        }
        Ok(SpspCertificate {
            sigma,
            epsilon,
            b,
            phi,
            classification: Classification::of(sigma, epsilon, b),
            provenance,
            sigma_dependent_epsilon: false,
        })
    }

    /// The same `φ` claimed on a different `(σ, ε, b)`.
    pub fn with_band(&self, sigma: f64, epsilon: f64, b: f64) -> Result<Self> {
        let mut c = SpspCertificate::new(sigma, epsilon, b, self.phi.clone(), self.provenance.clone())?;
        c.sigma_dependent_epsilon = self.sigma_dependent_epsilon;
        Ok(c)
    }

    pub fn summary(&self) -> CertificateSummary {
        CertificateSummary {
            classification: self.classification,
            sigma: finite_or_none(self.sigma),
            epsilon: self.epsilon,
            b: self.b,
            phi: self.phi.describe(),
            provenance: self.provenance.clone(),
            sigma_dependent_epsilon: self.sigma_dependent_epsilon,
        }
    }
}

fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Serializable view of a certificate; infinite `σ` is `None`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CertificateSummary {
    pub classification: Classification,
    pub sigma: Option<f64>,
    pub epsilon: f64,
    pub b: f64,
    pub phi: String,
    pub provenance: Provenance,
    pub sigma_dependent_epsilon: bool,
}

/// The first violated feasibility inequality `lhs < rhs`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Infeasibility {
    pub inequality: String,
    pub lhs: f64,
    pub rhs: f64,
}

impl fmt::Display for Infeasibility {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "violates {} ({} >= {})", self.inequality, self.lhs, self.rhs)
    }
}

#[derive(Clone, Debug)]
pub enum Certification {
    Feasible(SpspCertificate),
    Infeasible(Infeasibility),
}

impl Certification {
    pub fn feasible(&self) -> Option<&SpspCertificate> {
        match self {
            Certification::Feasible(c) => Some(c),
            Certification::Infeasible(_) => None,
        }
    }

    pub fn infeasibility(&self) -> Option<&Infeasibility> {
        match self {
            Certification::Infeasible(i) => Some(i),
            Certification::Feasible(_) => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Certification::Feasible(_))
    }
}

fn require(inequality: &str, lhs: f64, rhs: f64) -> std::result::Result<(), Infeasibility> {
    if lhs < rhs {
        Ok(())
    } else {
        Err(Infeasibility {
            inequality: inequality.into(),
            lhs,
            rhs,
        })
    }
}

fn check_inputs(pairs: &[(&str, f64, bool)]) -> std::result::Result<(), Infeasibility> {
    for (name, v, strict) in pairs {
        let ok = v.is_finite() && if *strict { *v > 0.0 } else { *v >= 0.0 };
        if !ok {
            return Err(Infeasibility {
                inequality: format!("{name} {} 0", if *strict { ">" } else { ">=" }),
                lhs: *v,
                rhs: 0.0,
            });
        }
    }
    Ok(())
}

/// `J = c·dist(y, X*)` with errors `(a, r)` on `B̄_σ`: SSP when `a < c` and
/// `r < (c − a)/σ`, with `φ = (c − a)d − r d²`.
pub fn certify_linear_objective(c: f64, a: f64, r: f64, sigma: f64) -> Certification {
    let checked = (|| {
        check_inputs(&[("c", c, true), ("a", a, false), ("r", r, false), ("sigma", sigma, true)])?;
        require("a < c", a, c)?;
        require("r < (c - a)/sigma", r, (c - a) / sigma)?;
        Ok(())
    })();
    match checked {
        Err(i) => Certification::Infeasible(i),
        Ok(()) => {
            let phi = Phi::DistancePolynomial(vec![0.0, c - a, -r]);
            let cert = SpspCertificate::new(sigma, 0.0, 0.0, phi, Provenance::Analytic("linear-objective".into()))
                .expect("validated inputs");
            Certification::Feasible(cert)
        }
    }
}

/// `c`-strongly convex `J` with errors `(a, r)`: PSP when `r < c/2`, with
/// `ε = 2a/(c − 2r)`, `b = a²/(2(c − 2r))` and `φ = ((c − 2r)/2)·d·(d − ε)`.
pub fn certify_strongly_convex(c: f64, a: f64, r: f64) -> Certification {
    let checked = (|| {
        check_inputs(&[("c", c, true), ("a", a, false), ("r", r, false)])?;
        require("r < c/2", r, c / 2.0)
    })();
    match checked {
        Err(i) => Certification::Infeasible(i),
        Ok(()) => {
            let k = c - 2.0 * r;
            let epsilon = 2.0 * a / k;
            let b = a * a / (2.0 * k);
            let half = k / 2.0;
            let phi = Phi::DistancePolynomial(vec![0.0, -half * epsilon, half]);
            let cert = SpspCertificate::new(
                f64::INFINITY,
                epsilon,
                b,
                phi,
                Provenance::Analytic("strongly-convex".into()),
            )
            .expect("validated inputs");
            Certification::Feasible(cert)
        }
    }
}

/// Convex `J` whose gap satisfies `J − J* ≥ (c/σ²)d²` on the band, with
/// errors `(a, r)`: SPSP when `r < c/σ²` and `a < (c − σ²r)/σ`, with
/// `ε = σ²a/(c − σ²r)`, `b = aε + rε²` and `φ = ((c − σ²r)/σ²)·d·(d − ε)`.
pub fn convex_certificate_from_level(c: f64, a: f64, r: f64, sigma: f64) -> Certification {
    let checked = (|| {
        check_inputs(&[("c", c, true), ("a", a, false), ("r", r, false), ("sigma", sigma, true)])?;
        let s2 = sigma * sigma;
        require("r < c/sigma^2", r, c / s2)?;
        require("a < (c - sigma^2 r)/sigma", a, (c - s2 * r) / sigma)?;
        Ok(())
    })();
    match checked {
        Err(i) => Certification::Infeasible(i),
        Ok(()) => {
            let s2 = sigma * sigma;
            let k = (c - s2 * r) / s2;
            let epsilon = s2 * a / (c - s2 * r);
            let b = a * epsilon + r * epsilon * epsilon;
            let phi = Phi::DistancePolynomial(vec![0.0, -k * epsilon, k]);
            let mut cert = SpspCertificate::new(sigma, epsilon, b, phi, Provenance::Analytic("convex".into()))
                .expect("validated inputs");
            cert.sigma_dependent_epsilon = a > 0.0;
            Certification::Feasible(cert)
        }
    }
}

/// Result of [`certify_convex`] together with how `c` was obtained.
#[derive(Clone, Debug)]
pub struct ConvexCertification {
    pub certification: Certification,
    /// Sublevel constant used in the underestimate.
    pub c: f64,
    /// Radius of the shell on which `c` was measured.
    pub shell_radius: f64,
    pub grid_resolution: f64,
}

/// Certificate for a convex objective with known `J*` and errors `(a, r)`.
///
/// `c` is the containment level of `J − J*` on a shell of radius `ε̂` around
/// `X*`. For `a > 0` the shell radius is the largest `ε̂` with
/// `ε̂ ≤ σ²a/(c(ε̂) − σ²r)`, found by bisection; for `a = 0` the shell is at
/// `σ` itself.
pub fn certify_convex(
    objective: &Field,
    attractor: &ConvexSet,
    a: f64,
    r: f64,
    sigma: f64,
    options: &ContainmentOptions,
) -> Result<ConvexCertification> {
    let meta = objective.meta();
    if !meta.convex {
        return Err(Error::FieldMismatch(format!(
            "{} is not flagged convex",
            objective.name()
        )));
    }
    let j_star = meta
        .minimum_value
        .ok_or_else(|| Error::FieldMismatch(format!("{} has no known minimum value", objective.name())))?;
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::param(
            "sigma",
            format!("must be finite and positive, got {sigma}"),
        ));
    }
    let f = objective.clone();
    let gap = move |y: &Vector| f.value(y) - j_star;
    let s2 = sigma * sigma;
    let eps_of = |c: f64| {
        if c > s2 * r {
            s2 * a / (c - s2 * r)
        } else {
            f64::INFINITY
        }
    };
    let shrink = options.shrink;
    let shell_radius = if a == 0.0 {
        sigma
    } else {
        let level_at = |radius: f64| -> Result<f64> {
            Ok(shrink * shell_minimum(&gap, attractor, radius, options.resolution, options.execution)?)
        };
        // g(ε̂) = ε̂ − ε(c(ε̂)) is increasing; keep the largest ε̂ with g ≤ 0
        let (mut lo, mut hi) = (0.0, sigma);
        if level_at(sigma).map(|c| sigma - eps_of(c) <= 0.0)? {
            lo = sigma;
        } else {
            for _ in 0..48 {
                let mid = 0.5 * (lo + hi);
                if mid - eps_of(level_at(mid)?) <= 0.0 {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        if lo == 0.0 {
            return Ok(ConvexCertification {
                certification: Certification::Infeasible(Infeasibility {
                    inequality: "a < (c - sigma^2 r)/sigma".into(),
                    lhs: a,
                    rhs: 0.0,
                }),
                c: 0.0,
                shell_radius: 0.0,
                grid_resolution: options.resolution,
            });
        }
        lo
    };
    let containment = containment_level(&gap, attractor, 0.0, shell_radius, sigma, options)?;
    if !containment.certified {
        return Err(Error::param(
            "grid_resolution",
            format!("containment level not certified at resolution {}", options.resolution),
        ));
    }
    let c = containment.level;
    Ok(ConvexCertification {
        certification: convex_certificate_from_level(c, a, r, sigma),
        c,
        shell_radius,
        grid_resolution: options.resolution,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum WitnessKind {
    /// `∇Vᵀs < φ` on the band.
    Band,
    /// `∇Vᵀs < −b` near the attractor.
    Inner,
    /// `φ ≤ 0` on the band.
    PhiNotPositive,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Witness {
    pub y: Vec<f64>,
    pub s: Vec<f64>,
    pub margin: f64,
    pub kind: WitnessKind,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VerificationReport {
    pub pass: bool,
    pub samples: usize,
    pub inner_samples: usize,
    /// `min ∇Vᵀs − φ(y)` over the band.
    pub min_margin: f64,
    /// `min ∇Vᵀs + b` over `Ξ ∩ B̄_ε(𝒜)`.
    pub inner_margin: f64,
    /// `min φ(y)` over band samples off `𝒜`.
    pub phi_min: f64,
    pub witnesses: Vec<Witness>,
    pub seed: u64,
    /// Set when an infinite `σ` was truncated for sampling.
    pub truncation_radius: Option<f64>,
    pub sigma: f64,
    pub epsilon: f64,
    pub b: f64,
    pub tolerance: f64,
}

#[derive(Clone, Copy, Debug)]
pub struct VerifyOptions {
    pub samples: usize,
    pub inner_samples: usize,
    pub seed: u64,
    /// Sampling radius used in place of an infinite `σ`; defaults to
    /// `10·circumradius(𝒜) + 10`.
    pub truncation: Option<f64>,
    pub execution: Execution,
    pub tolerance: f64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            samples: 10_000,
            inner_samples: 2_500,
            seed: 0,
            truncation: None,
            execution: Execution::Parallel,
            tolerance: TOLERANCE,
        }
    }
}

/// Default sampling radius standing in for `σ = ∞`.
pub fn default_truncation(attractor: &ConvexSet) -> f64 {
    10.0 * attractor.circumradius().unwrap_or(0.0) + 10.0
}

#[derive(Default)]
struct Partial {
    min_margin: f64,
    inner_margin: f64,
    phi_min: f64,
    witnesses: Vec<Witness>,
}

fn keep_worst(witnesses: &mut Vec<Witness>) {
    witnesses.sort_by(|x, y| x.margin.total_cmp(&y.margin));
    witnesses.truncate(WITNESS_COUNT);
}

/// Points of `Ξ ∩ 𝒜` for the inner condition when `ε = 0`.
pub(crate) fn attractor_points(
    attractor: &ConvexSet,
    feasible: &ConvexSet,
    count: usize,
    seed: u64,
) -> Result<Vec<Vector>> {
    let (lo, hi) = attractor
        .bounding_box()
        .ok_or_else(|| Error::InvalidBand("attractor must be compact".into()))?;
    if lo == hi {
        return Ok(vec![lo]);
    }
    let mut rng = chunk_rng(seed, 0);
    let mut out = Vec::with_capacity(count);
    let mut tries = 0;
    while out.len() < count && tries < 100 * count + 1000 {
        tries += 1;
        let y = attractor.sample_member(&mut rng)?;
        if feasible.contains(&y, 0.0) {
            out.push(y);
        }
    }
    Ok(out)
}

/// Samples the band and the inner set and evaluates every sampled direction.
pub fn verify(
    oracle: &dyn DirectionOracle,
    v: &LyapunovField,
    feasible: &ConvexSet,
    cert: &SpspCertificate,
    opts: &VerifyOptions,
) -> Result<VerificationReport> {
    let attractor = v.attractor();
    let (sigma, truncation_radius) = if cert.sigma.is_infinite() {
        let t = opts.truncation.unwrap_or_else(|| default_truncation(attractor));
        (t, Some(t))
    } else {
        (cert.sigma, None)
    };
    let band = Band::new(attractor.clone(), feasible.clone(), sigma, cert.epsilon)?;
    let band_points = sample_band(&band, opts.samples, derive_seed(opts.seed, 1), opts.execution)?;
    let inner_points = if cert.epsilon > 0.0 {
        sample_neighborhood(
            attractor,
            feasible,
            cert.epsilon,
            opts.inner_samples,
            derive_seed(opts.seed, 2),
            opts.execution,
        )?
    } else {
        attractor_points(
            attractor,
            feasible,
            opts.inner_samples.max(1),
            derive_seed(opts.seed, 2),
        )?
    };

    let evaluate = |points: &[Vector], inner: bool, stream: u64| -> Result<Partial> {
        let parts = opts
            .execution
            .map_chunks(points.len(), CHUNK, |_, range| -> Result<Partial> {
                let mut oracle = oracle.boxed_clone();
                let mut part = Partial {
                    min_margin: f64::INFINITY,
                    inner_margin: f64::INFINITY,
                    phi_min: f64::INFINITY,
                    witnesses: Vec::new(),
                };
                for i in range {
                    let y = &points[i];
                    let grad = v.gradient(y)?;
                    let dirs = oracle.query(y, derive_seed(opts.seed ^ stream, i as u64))?;
                    if inner {
                        for s in dirs {
                            let m = grad.dot(&s) + cert.b;
                            part.inner_margin = part.inner_margin.min(m);
                            part.witnesses.push(Witness {
                                y: y.as_slice().to_vec(),
                                s: s.as_slice().to_vec(),
                                margin: m,
                                kind: WitnessKind::Inner,
                            });
                        }
                    } else {
                        let d = attractor.distance(y)?;
                        let phi = cert.phi.eval(y, d)?;
                        // with ε = 0 the band contains 𝒜, where φ may vanish
                        if d > 0.0 {
                            part.phi_min = part.phi_min.min(phi);
                        }
                        if phi <= 0.0 && d > 0.0 {
                            part.witnesses.push(Witness {
                                y: y.as_slice().to_vec(),
                                s: Vec::new(),
                                margin: phi,
                                kind: WitnessKind::PhiNotPositive,
                            });
                        }
                        for s in dirs {
                            let m = grad.dot(&s) - phi;
                            part.min_margin = part.min_margin.min(m);
                            part.witnesses.push(Witness {
                                y: y.as_slice().to_vec(),
                                s: s.as_slice().to_vec(),
                                margin: m,
                                kind: WitnessKind::Band,
                            });
                        }
                    }
                    if part.witnesses.len() > 4 * WITNESS_COUNT {
                        keep_worst(&mut part.witnesses);
                    }
                }
                keep_worst(&mut part.witnesses);
                Ok(part)
            });
        let mut total = Partial {
            min_margin: f64::INFINITY,
            inner_margin: f64::INFINITY,
            phi_min: f64::INFINITY,
            witnesses: Vec::new(),
        };
        for p in parts {
            let p = p?;
            total.min_margin = total.min_margin.min(p.min_margin);
            total.inner_margin = total.inner_margin.min(p.inner_margin);
            total.phi_min = total.phi_min.min(p.phi_min);
            total.witnesses.extend(p.witnesses);
        }
        Ok(total)
    };

    let band_part = evaluate(&band_points, false, 0xB0)?;
    let inner_part = evaluate(&inner_points, true, 0x1A)?;
    let tol = opts.tolerance;
    let pass = band_part.min_margin >= -tol && inner_part.inner_margin >= -tol && band_part.phi_min > 0.0;
    let mut witnesses: Vec<Witness> = band_part.witnesses.into_iter().chain(inner_part.witnesses).collect();
    keep_worst(&mut witnesses);
    Ok(VerificationReport {
        pass,
        samples: band_points.len(),
        inner_samples: inner_points.len(),
        min_margin: band_part.min_margin,
        inner_margin: inner_part.inner_margin,
        phi_min: band_part.phi_min,
        witnesses,
        seed: opts.seed,
        truncation_radius,
        sigma,
        epsilon: cert.epsilon,
        b: cert.b,
        tolerance: tol,
    })
}

/// Strongest notion from the pseudogradient hierarchy supported by samples.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
#[serde(rename_all = "kebab-case", tag = "class")]
pub enum PolyakClass {
    /// `∇Vᵀs ≥ τ̂V` with `τ̂ > 0`.
    StrongPseudogradient {
        tau: f64,
    },
    /// `∇Vᵀs > 0` off the attractor.
    Strict,
    /// `∇Vᵀs ≥ 0`.
    Pseudogradient,
    None,
}

impl PolyakClass {
    /// Rank in the hierarchy; higher is stronger.
    pub fn rank(&self) -> u8 {
        match self {
            PolyakClass::StrongPseudogradient { .. } => 3,
            PolyakClass::Strict => 2,
            PolyakClass::Pseudogradient => 1,
            PolyakClass::None => 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolyakReport {
    pub class: PolyakClass,
    /// `min (∇Vᵀs)/V` over the samples.
    pub tau_hat: f64,
    /// `min ∇Vᵀs` over the samples.
    pub min_inner_product: f64,
    pub samples: usize,
    pub seed: u64,
}

/// Samples `Ξ ∩ B̄_radius(𝒜)` off the attractor and classifies `Ψ` against `V`.
pub fn classify_polyak(
    oracle: &dyn DirectionOracle,
    v: &LyapunovField,
    feasible: &ConvexSet,
    radius: f64,
    samples: usize,
    seed: u64,
    execution: Execution,
) -> Result<PolyakReport> {
    let attractor = v.attractor();
    let points = sample_neighborhood(attractor, feasible, radius, samples, derive_seed(seed, 3), execution)?;
    let parts = execution.map_chunks(points.len(), CHUNK, |_, range| -> Result<(f64, f64)> {
        let mut oracle = oracle.boxed_clone();
        let (mut tau, mut inner) = (f64::INFINITY, f64::INFINITY);
        for i in range {
            let y = &points[i];
            let vy = v.value(y)?;
            if vy <= 0.0 {
                continue;
            }
            let grad = v.gradient(y)?;
            for s in oracle.query(y, derive_seed(seed, i as u64))? {
                let g = grad.dot(&s);
                inner = inner.min(g);
                tau = tau.min(g / vy);
            }
        }
        Ok((tau, inner))
    });
    let (mut tau, mut inner) = (f64::INFINITY, f64::INFINITY);
    for p in parts {
        let (t, i) = p?;
        tau = tau.min(t);
        inner = inner.min(i);
    }
    let class = if tau > TOLERANCE {
        PolyakClass::StrongPseudogradient { tau }
    } else if inner > 0.0 {
        PolyakClass::Strict
    } else if inner >= -TOLERANCE {
        PolyakClass::Pseudogradient
    } else {
        PolyakClass::None
    };
    Ok(PolyakReport {
        class,
        tau_hat: tau,
        min_inner_product: inner,
        samples: points.len(),
        seed,
    })
}
