use std::collections::BTreeMap;

use serde::Serialize;
use spsp::certificates::{
    certify_convex, certify_linear_objective, certify_strongly_convex, verify, CertificateSummary, Certification,
    Infeasibility, SpspCertificate, VerificationReport, VerifyOptions, Witness,
};
use spsp::dynamics::{
    certify_spas, check_descent_lemma, check_spas_conditions, iterate, ConditionOptions, DescentCheck, DescentMode,
    SpasBand, SpasConditionReport, SpasParams, SpasReport, TrajectoryRecord, WForm,
};
use spsp::geometry::ConvexSet;
use spsp::lemmas::{
    budget_bounded, budget_growth, budget_lipschitz, containment_level, robustness_margins, sample_s_star,
    shell_minimum, underestimation_alphas, ContainmentOptions, ContainmentResult, RobustnessMargins, StepSizeBudget,
    Underestimation,
};
use spsp::oracles::{
    finite_difference_oracle, gradient_oracle, perturb, scaled, subgradient_oracle, DirectionOracle, ErrorModel,
    OracleMeta,
};
use spsp::problems::{make_lyapunov, Builtin, BuiltinSpec, LyapunovField, LyapunovKind};
use spsp::{Error, Execution, Vector};

use crate::config::{BudgetKindConfig, CertificateKind, ConfigError, ExperimentConfig, OracleKind, PhiSource};
use crate::output::{fmt_f64, indexed, opt, Sink};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Command {
    Verify,
    Certify,
    Budget,
    Robust,
    Simulate,
    Spas,
    LemmaB,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Verify => "verify",
            Command::Certify => "certify",
            Command::Budget => "budget",
            Command::Robust => "robust",
            Command::Simulate => "simulate",
            Command::Spas => "spas",
            Command::LemmaB => "lemma-b",
        }
    }
}

pub enum Verdict {
    Pass(String),
    Fail(String),
}

#[derive(Debug)]
pub enum RunError {
    Config(String),
    Internal(String),
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e.0)
    }
}

impl From<anyhow::Error> for RunError {
    fn from(e: anyhow::Error) -> Self {
        RunError::Internal(format!("{e:#}"))
    }
}

/// Library errors caused by the inputs count as configuration errors.
fn lib(context: &str) -> impl Fn(Error) -> RunError + '_ {
    move |e| match e {
        Error::InvalidParameter { .. }
        | Error::UnknownBuiltin(_)
        | Error::InvalidSet(_)
        | Error::InvalidBand(_)
        | Error::DimensionMismatch { .. }
        | Error::FieldMismatch(_) => RunError::Config(format!("{context}: {e}")),
        other => RunError::Internal(format!("{context}: {other}")),
    }
}

fn required(path: &str, why: &str) -> RunError {
    RunError::Config(format!("{path}: required {why}"))
}

#[derive(Serialize)]
struct Summary<'a, T: Serialize> {
    command: &'static str,
    verdict: &'static str,
    seed: u64,
    config: &'a ExperimentConfig,
    result: T,
}

/// Everything a subcommand needs, built once from the config.
pub struct Setup {
    pub cfg: ExperimentConfig,
    problem: Builtin,
    feasible: ConvexSet,
    v: LyapunovField,
    exec: Execution,
    sink: Sink,
}

impl Setup {
    pub fn new(cfg: ExperimentConfig, exec: Execution, sink: Sink) -> Result<Self, RunError> {
        let problem = cfg.problem.build().map_err(lib("problem"))?;
        let dim = problem.field.dim();
        let feasible = cfg.feasible.build(dim)?;
        let v = make_lyapunov(
            cfg.lyapunov.kind,
            problem.attractor.clone(),
            Some(problem.field.clone()),
        )
        .map_err(lib("lyapunov"))?;
        Ok(Setup {
            cfg,
            problem,
            feasible,
            v,
            exec,
            sink,
        })
    }

    fn seed(&self) -> u64 {
        self.cfg.sampling.seed
    }

    fn attractor(&self) -> &ConvexSet {
        &self.problem.attractor
    }

    fn unscaled_oracle(&self) -> Result<Box<dyn DirectionOracle>, RunError> {
        let o = &self.cfg.oracle;
        let field = self.problem.field.clone();
        Ok(match o.kind {
            OracleKind::Gradient => Box::new(gradient_oracle(field)),
            OracleKind::Subgradient => Box::new(subgradient_oracle(field, o.samples_per_query)),
            OracleKind::FiniteDifference => Box::new(finite_difference_oracle(field, o.mu).map_err(lib("oracle.mu"))?),
        })
    }

    fn base_oracle(&self) -> Result<Box<dyn DirectionOracle>, RunError> {
        let base = self.unscaled_oracle()?;
        let k = self.cfg.oracle.scale;
        Ok(if k == 1.0 { base } else { Box::new(scaled(base, k)) })
    }

    /// `(a, r)` of the configured oracle error.
    fn error_magnitudes(&self) -> (f64, f64) {
        self.cfg.oracle.error.as_ref().map_or((0.0, 0.0), |e| (e.a, e.r))
    }

    fn oracle(&self) -> Result<Box<dyn DirectionOracle>, RunError> {
        let base = self.base_oracle()?;
        Ok(match &self.cfg.oracle.error {
            None => base,
            Some(e) => {
                let model = ErrorModel::new(e.a, e.r, e.law.clone()).map_err(lib("oracle.error"))?;
                Box::new(perturb(base, model, self.attractor().clone()).against(self.v.clone()))
            }
        })
    }

    /// Regularity constants of the configured oracle.
    fn oracle_meta(&self) -> Result<OracleMeta, RunError> {
        if self.cfg.oracle.error.is_some() {
            return Ok(self.oracle()?.meta());
        }
        let mut meta = self.unscaled_oracle()?.meta();
        let k = self.cfg.oracle.scale.abs();
        meta.bound = meta.bound.map(|b| b * k);
        meta.lipschitz = meta.lipschitz.map(|l| l * k);
        Ok(meta)
    }

    fn containment_options(&self) -> ContainmentOptions {
        ContainmentOptions {
            resolution: self.cfg.lemma_b.resolution,
            seed: self.seed(),
            execution: self.exec,
            ..ContainmentOptions::default()
        }
    }

    fn verify_options(&self) -> VerifyOptions {
        VerifyOptions {
            samples: self.cfg.sampling.samples,
            inner_samples: self.cfg.sampling.inner_samples,
            seed: self.seed(),
            truncation: self.cfg.sampling.truncation,
            execution: self.exec,
            ..VerifyOptions::default()
        }
    }

    fn distance_fn(&self) -> impl Fn(&Vector) -> f64 + Sync + '_ {
        |y: &Vector| self.attractor().distance(y).unwrap_or(f64::NAN)
    }

    /// Runs the configured certificate builder with errors `(a, r)`.
    fn certificate(&self, a: f64, r: f64) -> Result<BuiltCertificate, RunError> {
        let c_cfg = &self.cfg.certificate;
        let meta = self.problem.field.meta();
        let mut details = BTreeMap::new();
        let (certification, c, sigma) = match c_cfg.kind {
            CertificateKind::StronglyConvex => {
                let c = c_cfg
                    .c
                    .or(meta.strong_convexity)
                    .ok_or_else(|| required("certificate.c", "when the problem has no strong-convexity constant"))?;
                (certify_strongly_convex(c, a, r), c, None)
            }
            CertificateKind::LinearObjective => {
                let c = match (c_cfg.c, &self.cfg.problem) {
                    (Some(c), _) => c,
                    (None, BuiltinSpec::NormCone { c, .. }) => *c,
                    _ => return Err(required("certificate.c", "for a linear objective other than norm-cone")),
                };
                let sigma = c_cfg
                    .sigma
                    .ok_or_else(|| required("certificate.sigma", "for a linear objective"))?;
                (certify_linear_objective(c, a, r, sigma), c, Some(sigma))
            }
            CertificateKind::Convex => {
                let sigma = c_cfg
                    .sigma
                    .ok_or_else(|| required("certificate.sigma", "for a convex objective"))?;
                let out = certify_convex(
                    &self.problem.field,
                    self.attractor(),
                    a,
                    r,
                    sigma,
                    &self.containment_options(),
                )
                .map_err(lib("certificate"))?;
                details.insert("shell_radius".to_string(), out.shell_radius);
                details.insert("grid_resolution".to_string(), out.grid_resolution);
                (out.certification, out.c, Some(sigma))
            }
        };
        let certification = match (certification, &c_cfg.band) {
            (Certification::Feasible(cert), Some(band)) => Certification::Feasible(
                cert.with_band(band.sigma, band.epsilon, band.b)
                    .map_err(lib("certificate.band"))?,
            ),
            (other, _) => other,
        };
        Ok(BuiltCertificate {
            certification,
            inputs: CertificateInputs {
                kind: c_cfg.kind,
                c,
                a,
                r,
                sigma,
            },
            details,
        })
    }

    fn configured_certificate(&self) -> Result<BuiltCertificate, RunError> {
        let (a, r) = self.error_magnitudes();
        let c = &self.cfg.certificate;
        self.certificate(c.a.unwrap_or(a), c.r.unwrap_or(r))
    }

    fn write_summary<T: Serialize>(&self, cmd: Command, pass: bool, result: T) -> Result<Option<String>, RunError> {
        let summary = Summary {
            command: cmd.name(),
            verdict: if pass { "pass" } else { "fail" },
            seed: self.seed(),
            config: &self.cfg,
            result,
        };
        let path = self.sink.json(&cmd.name().replace('-', "_"), &summary)?;
        Ok(path.map(|p| p.display().to_string()))
    }

    fn csv(&self, name: &str, header: Vec<String>, rows: Vec<Vec<String>>) -> Result<Option<String>, RunError> {
        Ok(self.sink.csv(name, &header, &rows)?.map(|p| p.display().to_string()))
    }
}

struct BuiltCertificate {
    certification: Certification,
    inputs: CertificateInputs,
    details: BTreeMap<String, f64>,
}

#[derive(Clone, Copy, Serialize)]
struct CertificateInputs {
    kind: CertificateKind,
    c: f64,
    a: f64,
    r: f64,
    sigma: Option<f64>,
}

#[derive(Serialize)]
struct CertificateOutcome<'a> {
    inputs: CertificateInputs,
    certificate: Option<CertificateSummary>,
    infeasibility: Option<&'a Infeasibility>,
    details: &'a BTreeMap<String, f64>,
}

impl BuiltCertificate {
    fn outcome(&self) -> CertificateOutcome<'_> {
        CertificateOutcome {
            inputs: self.inputs,
            certificate: self.certification.feasible().map(SpspCertificate::summary),
            infeasibility: self.certification.infeasibility(),
            details: &self.details,
        }
    }

    fn require_feasible(&self) -> Result<&SpspCertificate, Verdict> {
        match &self.certification {
            Certification::Feasible(c) => Ok(c),
            Certification::Infeasible(i) => Err(Verdict::Fail(format!("certificate infeasible: {i}"))),
        }
    }
}

pub fn run(cmd: Command, setup: &Setup) -> Result<Verdict, RunError> {
    match cmd {
        Command::Verify => run_verify(setup),
        Command::Certify => run_certify(setup),
        Command::Budget => run_budget(setup),
        Command::Robust => run_robust(setup),
        Command::Simulate => run_simulate(setup),
        Command::Spas => run_spas(setup),
        Command::LemmaB => run_lemma_b(setup),
    }
}

fn witness_rows(witnesses: &[Witness], dim: usize) -> (Vec<String>, Vec<Vec<String>>) {
    let mut header = vec!["index".to_string(), "kind".to_string()];
    header.extend(indexed("y", dim));
    header.extend(indexed("s", dim));
    header.push("margin".into());
    let rows = witnesses
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let kind = serde_json::to_value(w.kind)
                .ok()
                .and_then(|k| k.as_str().map(String::from))
                .unwrap_or_default();
            let mut row = vec![i.to_string(), kind];
            row.extend(w.y.iter().map(|x| fmt_f64(*x)));
            // φ-positivity witnesses carry no direction
            if w.s.len() == dim {
                row.extend(w.s.iter().map(|x| fmt_f64(*x)));
            } else {
                row.extend(std::iter::repeat_n(String::new(), dim));
            }
            row.push(fmt_f64(w.margin));
            row
        })
        .collect();
    (header, rows)
}

fn class_name(cert: &SpspCertificate) -> String {
    format!("{:?}", cert.classification).to_uppercase()
}

fn report_line(report: &VerificationReport) -> String {
    format!(
        "min_margin={} inner_margin={} phi_min={} samples={}",
        fmt_f64(report.min_margin),
        fmt_f64(report.inner_margin),
        fmt_f64(report.phi_min),
        report.samples
    )
}

fn with_paths(line: String, paths: &[Option<String>]) -> String {
    let p: Vec<&str> = paths.iter().flatten().map(String::as_str).collect();
    if p.is_empty() {
        line
    } else {
        format!("{line} [{}]", p.join(", "))
    }
}

#[derive(Serialize)]
struct VerifyResult<'a> {
    certificate: CertificateOutcome<'a>,
    report: Option<&'a VerificationReport>,
}

fn run_verify(s: &Setup) -> Result<Verdict, RunError> {
    let built = s.configured_certificate()?;
    let cert = match built.require_feasible() {
        Ok(c) => c.clone(),
        Err(v) => {
            let json = s.write_summary(
                Command::Verify,
                false,
                VerifyResult {
                    certificate: built.outcome(),
                    report: None,
                },
            )?;
            return Ok(match v {
                Verdict::Fail(m) => Verdict::Fail(with_paths(m, &[json])),
                pass => pass,
            });
        }
    };
    let oracle = s.oracle()?;
    let report = verify(oracle.as_ref(), &s.v, &s.feasible, &cert, &s.verify_options()).map_err(lib("verify"))?;
    let json = s.write_summary(
        Command::Verify,
        report.pass,
        VerifyResult {
            certificate: built.outcome(),
            report: Some(&report),
        },
    )?;
    let (header, rows) = witness_rows(&report.witnesses, s.feasible.dim());
    let csv = s.csv("verify_witnesses", header, rows)?;
    let line = format!("{} certificate, {}", class_name(&cert), report_line(&report));
    Ok(if report.pass {
        Verdict::Pass(with_paths(line, &[json]))
    } else {
        Verdict::Fail(with_paths(format!("{line}; witnesses"), &[csv, json]))
    })
}

fn run_certify(s: &Setup) -> Result<Verdict, RunError> {
    let built = s.configured_certificate()?;
    let feasible = built.certification.is_feasible();
    let json = s.write_summary(Command::Certify, feasible, built.outcome())?;
    let header = [
        "feasible",
        "classification",
        "sigma",
        "epsilon",
        "b",
        "phi",
        "violated",
        "c",
        "a",
        "r",
    ]
    .map(String::from)
    .to_vec();
    let inputs = [built.inputs.c, built.inputs.a, built.inputs.r].map(fmt_f64);
    let row = match &built.certification {
        Certification::Feasible(c) => {
            let mut row = vec![
                "true".into(),
                class_name(c),
                fmt_f64(c.sigma),
                fmt_f64(c.epsilon),
                fmt_f64(c.b),
                c.phi.describe(),
                String::new(),
            ];
            row.extend(inputs);
            row
        }
        Certification::Infeasible(i) => {
            let mut row = vec![
                "false".into(),
                String::new(),
                String::new(),
                String::new(),
                String::new(),
            ];
            row.extend([String::new(), i.inequality.clone()]);
            row.extend(inputs);
            row
        }
    };
    let csv = s.csv("certify", header, vec![row])?;
    Ok(match &built.certification {
        Certification::Feasible(c) => Verdict::Pass(with_paths(
            format!(
                "{} certificate: sigma={} epsilon={} b={} phi={}",
                class_name(c),
                fmt_f64(c.sigma),
                fmt_f64(c.epsilon),
                fmt_f64(c.b),
                c.phi.describe()
            ),
            &[json, csv],
        )),
        Certification::Infeasible(i) => Verdict::Fail(with_paths(format!("infeasible: {i}"), &[json, csv])),
    })
}

/// Budget for the configured oracle and certificate, with the containment
/// level it used.
fn compute_budget(
    s: &Setup,
    cert: &SpspCertificate,
) -> Result<(StepSizeBudget, Option<ContainmentResult>, SpasBand), RunError> {
    let b = &s.cfg.budget;
    let sigma_o = match b.sigma_o {
        Some(v) => v,
        None if cert.sigma.is_finite() => cert.sigma,
        None => return Err(required("budget.sigma_o", "when the certificate band is unbounded")),
    };
    let epsilon_o = b.epsilon_o.unwrap_or(cert.epsilon);
    let band = SpasBand {
        sigma_o,
        epsilon_o,
        rho_o: b.rho_o,
    };
    let meta = s.oracle_meta()?;
    let level = |phi: &spsp::certificates::Phi| -> Result<(f64, Option<ContainmentResult>), RunError> {
        if let Some(c) = b.c {
            return Ok((c, None));
        }
        let dist = s.distance_fn();
        let f = |y: &Vector| phi.eval(y, dist(y)).unwrap_or(f64::NAN);
        let res = containment_level(&f, s.attractor(), epsilon_o, b.rho_o, sigma_o, &s.containment_options())
            .map_err(lib("budget.c"))?;
        Ok((res.level, Some(res)))
    };
    Ok(match b.kind {
        BudgetKindConfig::Growth => {
            let beta = b
                .beta
                .or(meta.growth_beta)
                .ok_or_else(|| required("budget.beta", "when the oracle declares no growth constant"))?;
            (
                budget_growth(b.w, beta, cert.b, b.b_o).map_err(lib("budget"))?,
                None,
                band,
            )
        }
        BudgetKindConfig::Bounded => {
            let bound = b
                .bound
                .or(meta.bound)
                .ok_or_else(|| required("budget.bound", "when the oracle declares no bound"))?;
            let (c, res) = level(&cert.phi)?;
            let budget =
                budget_bounded(b.w, bound, cert.b, c, sigma_o, epsilon_o, b.rho_o, b.b_o).map_err(lib("budget"))?;
            (budget, res, band)
        }
        BudgetKindConfig::Lipschitz => {
            let l = b
                .lipschitz
                .or(meta.lipschitz)
                .ok_or_else(|| required("budget.lipschitz", "when the oracle declares no Lipschitz constant"))?;
            let s_star = match b.s_star {
                Some(v) => v,
                None => {
                    let oracle = s.oracle()?;
                    sample_s_star(
                        oracle.as_ref(),
                        s.attractor(),
                        &s.feasible,
                        s.cfg.sampling.inner_samples,
                        s.seed(),
                        s.exec,
                    )
                    .map_err(lib("budget.s_star"))?
                }
            };
            let (c, res) = level(&cert.phi)?;
            let budget = budget_lipschitz(b.w, l, s_star, cert.b, c, sigma_o, epsilon_o, b.rho_o, b.b_o)
                .map_err(lib("budget"))?;
            (budget, res, band)
        }
    })
}

#[derive(Serialize)]
struct BudgetResult<'a> {
    certificate: CertificateOutcome<'a>,
    budget: Option<&'a StepSizeBudget>,
    binding: Option<&'a str>,
    containment: Option<&'a ContainmentResult>,
    conditions: Option<&'a SpasConditionReport>,
}

fn run_budget(s: &Setup) -> Result<Verdict, RunError> {
    let built = s.configured_certificate()?;
    let cert = match built.require_feasible() {
        Ok(c) => c.clone(),
        Err(v) => return Ok(v),
    };
    let (budget, containment, band) = compute_budget(s, &cert)?;
    let conditions = if s.cfg.budget.check {
        let oracle = s.oracle()?;
        let alpha = budget.alpha_max;
        let w = WForm::from_budget(&budget, alpha, Some(cert.phi.clone())).map_err(lib("budget"))?;
        let opts = ConditionOptions {
            band_samples: s.cfg.sampling.samples,
            inner_samples: s.cfg.sampling.inner_samples,
            seed: s.seed(),
            execution: s.exec,
        };
        Some(
            check_spas_conditions(
                &s.v,
                oracle.as_ref(),
                &s.feasible,
                band,
                alpha,
                s.cfg.budget.b_o,
                &w,
                &opts,
            )
            .map_err(lib("budget conditions"))?,
        )
    } else {
        None
    };
    let pass = conditions.as_ref().is_none_or(|c| c.pass);
    let json = s.write_summary(
        Command::Budget,
        pass,
        BudgetResult {
            certificate: built.outcome(),
            budget: Some(&budget),
            binding: Some(budget.binding()),
            containment: containment.as_ref(),
            conditions: conditions.as_ref(),
        },
    )?;
    let rows = budget
        .components
        .iter()
        .map(|(k, v)| vec![k.clone(), fmt_f64(*v), (k == budget.binding()).to_string()])
        .collect();
    let comp_csv = s.csv(
        "budget_components",
        ["component", "alpha", "binding"].map(String::from).to_vec(),
        rows,
    )?;
    let mut line = format!(
        "{:?} budget alpha_max={} (binding {})",
        budget.kind,
        fmt_f64(budget.alpha_max),
        budget.binding()
    );
    let mut paths = vec![json, comp_csv];
    if let Some(c) = &conditions {
        line.push_str(&format!(
            "; P1 {} P2 {} P3 {} (min_w={} p2_margin={} p3_margin={})",
            ok(c.p1),
            ok(c.p2),
            ok(c.p3),
            fmt_f64(c.min_w),
            fmt_f64(c.p2_margin),
            fmt_f64(c.p3_margin)
        ));
        let dim = s.feasible.dim();
        let mut header = vec!["condition".to_string()];
        header.extend(indexed("y", dim));
        header.extend(indexed("s", dim));
        header.push("margin".into());
        let rows = c
            .witnesses
            .iter()
            .map(|w| {
                let mut row = vec![format!("{:?}", w.condition)];
                row.extend(w.y.iter().map(|x| fmt_f64(*x)));
                row.extend(w.s.iter().map(|x| fmt_f64(*x)));
                row.push(fmt_f64(w.margin));
                row
            })
            .collect();
        paths.insert(0, s.csv("budget_witnesses", header, rows)?);
    }
    Ok(if pass {
        Verdict::Pass(with_paths(line, &paths))
    } else {
        Verdict::Fail(with_paths(line, &paths))
    })
}

fn ok(b: bool) -> &'static str {
    if b {
        "ok"
    } else {
        "FAIL"
    }
}

#[derive(Serialize)]
struct RobustResult<'a> {
    base_certificate: CertificateOutcome<'a>,
    margins: &'a RobustnessMargins,
    a: f64,
    r: f64,
    b_hat: f64,
    certificate: CertificateSummary,
    report: &'a VerificationReport,
}

fn run_robust(s: &Setup) -> Result<Verdict, RunError> {
    let rc = &s.cfg.robust;
    let built = s.certificate(0.0, 0.0)?;
    let base = match built.require_feasible() {
        Ok(c) => c.clone(),
        Err(v) => return Ok(v),
    };
    let c = match rc.c {
        Some(c) => c,
        None => {
            let dist = s.distance_fn();
            let f = |y: &Vector| base.phi.eval(y, dist(y)).unwrap_or(f64::NAN);
            containment_level(
                &f,
                s.attractor(),
                0.0,
                rc.epsilon_hat,
                rc.sigma_hat,
                &s.containment_options(),
            )
            .map_err(lib("robust.c"))?
            .level
        }
    };
    let l = rc.lipschitz.or(s.v.lipschitz_grad()).ok_or_else(|| {
        required(
            "robust.lipschitz",
            "when the Lyapunov gradient has no known Lipschitz constant",
        )
    })?;
    let margins = robustness_margins(c, rc.sigma_hat, l, base.b, rc.epsilon_hat).map_err(lib("robust"))?;
    let (a, r) = (rc.a_fraction * margins.a_max, rc.r_fraction * margins.r_max);
    let model = ErrorModel::new(a, r, rc.law.clone()).map_err(lib("robust.law"))?;
    let oracle = perturb(s.base_oracle()?, model, s.attractor().clone()).against(s.v.clone());
    let cert = margins.certificate(a, r).map_err(lib("robust"))?;
    let report = verify(&oracle, &s.v, &s.feasible, &cert, &s.verify_options()).map_err(lib("verify"))?;
    let json = s.write_summary(
        Command::Robust,
        report.pass,
        RobustResult {
            base_certificate: built.outcome(),
            margins: &margins,
            a,
            r,
            b_hat: margins.b_hat(a, r),
            certificate: cert.summary(),
            report: &report,
        },
    )?;
    let (header, rows) = witness_rows(&report.witnesses, s.feasible.dim());
    let csv = s.csv("robust_witnesses", header, rows)?;
    let line = format!(
        "a={} (a_max={}) r={} (r_max={}) b_hat={}; {}",
        fmt_f64(a),
        fmt_f64(margins.a_max),
        fmt_f64(r),
        fmt_f64(margins.r_max),
        fmt_f64(margins.b_hat(a, r)),
        report_line(&report)
    );
    Ok(if report.pass {
        Verdict::Pass(with_paths(line, &[json]))
    } else {
        Verdict::Fail(with_paths(format!("{line}; witnesses"), &[csv, json]))
    })
}

fn trajectory_rows(
    rec: &TrajectoryRecord,
    v: &LyapunovField,
    attractor: &ConvexSet,
    margins: Option<&[f64]>,
) -> (Vec<String>, Vec<Vec<String>>) {
    let dim = rec.iterates.first().map_or(0, Vec::len);
    let mut header = vec!["t".to_string()];
    header.extend(indexed("y", dim));
    header.extend(["V", "dV", "dist", "margin"].map(String::from));
    let rows = rec
        .iterates
        .iter()
        .enumerate()
        .map(|(t, y)| {
            let point = Vector::from_column_slice(y);
            let mut row = vec![t.to_string()];
            row.extend(y.iter().map(|x| fmt_f64(*x)));
            row.push(opt(v.value(&point).ok()));
            row.push(opt(rec.steps.get(t).and_then(|st| st.dv)));
            row.push(opt(attractor.distance(&point).ok()));
            row.push(opt(margins.and_then(|m| m.get(t).copied())));
            row
        })
        .collect();
    (header, rows)
}

#[derive(Serialize)]
struct SimulateResult<'a> {
    alpha: f64,
    oracle: &'a str,
    selection: spsp::dynamics::Selection,
    projected_start: bool,
    steps: usize,
    start: &'a [f64],
    end: &'a [f64],
    end_distance: f64,
    failure: Option<&'a str>,
    descent: Option<DescentSummary>,
}

#[derive(Serialize)]
struct DescentSummary {
    mode: DescentMode,
    pass: bool,
    worst_margin: f64,
    worst_step: Option<usize>,
}

fn run_simulate(s: &Setup) -> Result<Verdict, RunError> {
    let d = &s.cfg.dynamics;
    let alpha = d.alpha.ok_or_else(|| required("dynamics.alpha", "for simulate"))?;
    let y0 = match &d.y0 {
        Some(y) => {
            if y.len() != s.feasible.dim() {
                return Err(RunError::Config(format!(
                    "dynamics.y0: has length {}, the problem has dimension {}",
                    y.len(),
                    s.feasible.dim()
                )));
            }
            Vector::from_column_slice(y)
        }
        None => {
            let p = s
                .attractor()
                .project(&Vector::zeros(s.feasible.dim()))
                .map_err(lib("attractor"))?;
            p.add_scalar(1.0)
        }
    };
    let oracle = s.oracle()?;
    let rec = iterate(
        &y0,
        oracle.as_ref(),
        &s.feasible,
        alpha,
        d.horizon,
        d.selection,
        Some(&s.v),
        s.seed(),
    )
    .map_err(lib("simulate"))?;
    let mode = if s.v.kind() == LyapunovKind::SquaredDistance {
        Some(DescentMode::Half)
    } else if s.feasible.is_whole_space() {
        s.v.lipschitz_grad().map(|l| DescentMode::Lipschitz { l })
    } else {
        None
    };
    let check: Option<(DescentMode, DescentCheck)> = match mode {
        Some(m) => Some((
            m,
            check_descent_lemma(&rec, &s.v, &s.feasible, m).map_err(lib("descent"))?,
        )),
        None => None,
    };
    let pass = rec.failure.is_none() && check.as_ref().is_none_or(|(_, c)| c.pass);
    let end = rec.iterates.last().expect("at least the start");
    let end_distance = s.attractor().distance(&rec.last()).map_err(lib("simulate"))?;
    let oracle_name = oracle.name();
    let json = s.write_summary(
        Command::Simulate,
        pass,
        SimulateResult {
            alpha,
            oracle: &oracle_name,
            selection: rec.selection,
            projected_start: rec.projected_start,
            steps: rec.steps.len(),
            start: &rec.iterates[0],
            end,
            end_distance,
            failure: rec.failure.as_deref(),
            descent: check.as_ref().map(|(m, c)| DescentSummary {
                mode: *m,
                pass: c.pass,
                worst_margin: c.worst_margin,
                worst_step: c.worst_step,
            }),
        },
    )?;
    let (header, rows) = trajectory_rows(
        &rec,
        &s.v,
        s.attractor(),
        check.as_ref().map(|(_, c)| c.margins.as_slice()),
    );
    let csv = s.csv("trajectory", header, rows)?;
    let mut line = format!(
        "{} steps at alpha={}, final dist={}",
        rec.steps.len(),
        fmt_f64(alpha),
        fmt_f64(end_distance)
    );
    if let Some((_, c)) = &check {
        line.push_str(&format!(", descent worst margin={}", fmt_f64(c.worst_margin)));
    }
    if let Some(f) = &rec.failure {
        line.push_str(&format!(", stopped: {f}"));
    }
    Ok(if pass {
        Verdict::Pass(with_paths(line, &[csv, json]))
    } else {
        Verdict::Fail(with_paths(line, &[csv, json]))
    })
}

#[derive(Serialize)]
struct SpasRow {
    alpha: f64,
    delta_found: Option<f64>,
    t_found: Option<usize>,
    achieved_rho_a: f64,
    stable: bool,
    attractive: bool,
    spas: bool,
}

#[derive(Serialize)]
struct SpasResult<'a> {
    params: SpasParams,
    budget: Option<&'a StepSizeBudget>,
    reports: Vec<SpasRow>,
}

fn run_spas(s: &Setup) -> Result<Verdict, RunError> {
    let d = &s.cfg.dynamics;
    let mut budget = None;
    let grid: Vec<f64> = if let Some(g) = &d.alpha_grid {
        g.clone()
    } else if let Some(f) = &d.budget_fractions {
        let built = s.configured_certificate()?;
        let cert = match built.require_feasible() {
            Ok(c) => c.clone(),
            Err(v) => return Ok(v),
        };
        let (b, _, _) = compute_budget(s, &cert)?;
        let grid = f.iter().map(|x| x * b.alpha_max).collect();
        budget = Some(b);
        grid
    } else if let Some(a) = d.alpha {
        vec![a]
    } else {
        return Err(required(
            "dynamics.alpha_grid",
            "for spas (or dynamics.budget_fractions, or dynamics.alpha)",
        ));
    };
    let params = SpasParams {
        sigma: d.sigma,
        rho_a: d.rho_a,
        rho_s: d.rho_s,
        trials: d.trials,
        horizon: d.horizon,
        selection: d.selection,
    };
    let oracle = s.oracle()?;
    let reports =
        certify_spas(oracle.as_ref(), &s.feasible, &s.v, &grid, &params, s.seed(), s.exec).map_err(lib("spas"))?;
    let pass = reports.iter().all(|r| r.spas);
    let rows: Vec<SpasRow> = reports
        .iter()
        .map(|r| SpasRow {
            alpha: r.alpha,
            delta_found: r.stability.delta_found,
            t_found: r.attractivity.t_found,
            achieved_rho_a: r.attractivity.achieved_rho_a,
            stable: r.stability.delta_found.is_some(),
            attractive: r.attractivity.t_found.is_some(),
            spas: r.spas,
        })
        .collect();
    let csv_rows = rows
        .iter()
        .map(|r| {
            vec![
                fmt_f64(r.alpha),
                opt(r.delta_found),
                r.t_found.map(|t| t.to_string()).unwrap_or_default(),
                fmt_f64(r.achieved_rho_a),
                if r.spas { "spas" } else { "fail" }.to_string(),
            ]
        })
        .collect();
    let csv = s.csv(
        "spas",
        ["alpha", "delta", "T", "achieved_rho_a", "verdict"]
            .map(String::from)
            .to_vec(),
        csv_rows,
    )?;
    let mut paths = vec![csv];
    if let Some(w) = reports.iter().find(|r| !r.spas).and_then(first_witness) {
        let (header, rows) = trajectory_rows(w, &s.v, s.attractor(), None);
        paths.insert(0, s.csv("spas_witness", header, rows)?);
    }
    let json = s.write_summary(
        Command::Spas,
        pass,
        SpasResult {
            params,
            budget: budget.as_ref(),
            reports: rows,
        },
    )?;
    paths.push(json);
    let line = reports
        .iter()
        .map(|r| {
            format!(
                "alpha={} {} (delta={}, T={}, rho_a={})",
                fmt_f64(r.alpha),
                if r.spas { "ok" } else { "FAIL" },
                opt(r.stability.delta_found),
                r.attractivity
                    .t_found
                    .map(|t| t.to_string())
                    .unwrap_or_else(|| "-".into()),
                fmt_f64(r.attractivity.achieved_rho_a)
            )
        })
        .collect::<Vec<_>>()
        .join("; ");
    Ok(if pass {
        Verdict::Pass(with_paths(line, &paths))
    } else {
        Verdict::Fail(with_paths(line, &paths))
    })
}

fn first_witness(r: &SpasReport) -> Option<&TrajectoryRecord> {
    r.stability
        .escape_witness
        .as_ref()
        .or(r.attractivity.straggler_witness.as_ref())
}

#[derive(Serialize)]
struct LemmaBResult<'a> {
    phi: &'a str,
    containment: &'a ContainmentResult,
    underestimation: Option<Underestimation>,
}

fn run_lemma_b(s: &Setup) -> Result<Verdict, RunError> {
    let l = &s.cfg.lemma_b;
    let cert = match l.phi {
        PhiSource::Lyapunov => None,
        PhiSource::Certificate => {
            let built = s.configured_certificate()?;
            match built.require_feasible() {
                Ok(c) => Some(c.clone()),
                Err(v) => return Ok(v),
            }
        }
    };
    let dist = s.distance_fn();
    let phi = |y: &Vector| match &cert {
        None => s.v.value(y).unwrap_or(f64::NAN),
        Some(c) => c.phi.eval(y, dist(y)).unwrap_or(f64::NAN),
    };
    let phi_name = cert.as_ref().map_or_else(|| "V".to_string(), |c| c.phi.describe());
    let res = containment_level(&phi, s.attractor(), l.epsilon, l.rho, l.sigma, &s.containment_options())
        .map_err(lib("lemma_b"))?;
    let under = match l.k_phi {
        Some(k) => Some(underestimation_alphas(res.level, k, l.sigma_hat.unwrap_or(l.sigma)).map_err(lib("lemma_b"))?),
        None => None,
    };
    let inner = l.epsilon + l.rho;
    let n = l.profile_points.max(2);
    let mut rows = Vec::with_capacity(n);
    for i in 0..n {
        let radius = inner + (l.sigma - inner) * i as f64 / (n - 1) as f64;
        let m = shell_minimum(&phi, s.attractor(), radius, l.resolution, s.exec).map_err(lib("lemma_b"))?;
        rows.push(vec![fmt_f64(radius), fmt_f64(m)]);
    }
    let csv = s.csv("lemma_b_profile", vec!["radius".into(), "shell_min".into()], rows)?;
    let json = s.write_summary(
        Command::LemmaB,
        res.certified,
        LemmaBResult {
            phi: &phi_name,
            containment: &res,
            underestimation: under,
        },
    )?;
    let mut line = format!(
        "level={} (l1={} l2={}, {} grid points)",
        fmt_f64(res.level),
        fmt_f64(res.l1),
        fmt_f64(res.l2),
        res.grid_points
    );
    if let Some(u) = &under {
        line.push_str(&format!(
            ", alpha_q={} alpha_l={}",
            fmt_f64(u.alpha_q),
            fmt_f64(u.alpha_l)
        ));
    }
    Ok(if res.certified {
        Verdict::Pass(with_paths(line, &[json, csv]))
    } else {
        Verdict::Fail(with_paths(format!("{line}; level not certified"), &[json, csv]))
    })
}
