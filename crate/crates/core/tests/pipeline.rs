use nalgebra::dvector;

use spsp::certificates::{
    certify_convex, certify_linear_objective, certify_strongly_convex, classify_polyak, verify, PolyakClass,
    VerifyOptions,
};
use spsp::dynamics::{
    certify_spas, check_spas_conditions, iterate, ConditionOptions, Selection, SpasBand, SpasParams, WForm,
};
use spsp::geometry::ConvexSet;
use spsp::lemmas::{budget_lipschitz, containment_level, robustness_margins, ContainmentOptions};
use spsp::oracles::{gradient_oracle, perturb, subgradient_oracle, ErrorModel};
use spsp::problems::{builtin, BuiltinSpec, LyapunovField};
use spsp::{Execution, Vector};

fn xi2() -> ConvexSet {
    ConvexSet::whole_space(2)
}

#[test]
fn linear_certificate_on_norm_cone_with_worst_case_errors() {
    let cone = BuiltinSpec::NormCone {
        dim: 2,
        c: 2.0,
        radius: 0.0,
        center: None,
    }
    .build()
    .unwrap();
    let v = LyapunovField::squared_distance(cone.attractor.clone()).unwrap();
    let cert = certify_linear_objective(2.0, 0.5, 0.1, 10.0);
    let cert = cert.feasible().unwrap();
    let oracle = perturb(
        Box::new(subgradient_oracle(cone.field, 2)),
        ErrorModel::worst_case(0.5, 0.1).unwrap(),
        cone.attractor,
    )
    .against(v.clone());
    let report = verify(&oracle, &v, &xi2(), cert, &VerifyOptions::default()).unwrap();
    assert!(report.pass, "{report:?}");
    assert_eq!(report.samples, 10_000);
}

#[test]
fn strongly_convex_certificate_with_truncation() {
    let s = builtin("strongly-convex-quadratic").unwrap();
    let v = LyapunovField::squared_distance(s.attractor.clone()).unwrap();
    let cert = certify_strongly_convex(1.0, 0.3, 0.2);
    let cert = cert.feasible().unwrap();
    let oracle = perturb(
        Box::new(gradient_oracle(s.field)),
        ErrorModel::worst_case(0.3, 0.2).unwrap(),
        s.attractor,
    )
    .against(v.clone());
    let report = verify(
        &oracle,
        &v,
        &xi2(),
        cert,
        &VerifyOptions {
            truncation: Some(10.0),
            ..VerifyOptions::default()
        },
    )
    .unwrap();
    assert!(report.pass, "{report:?}");
    assert_eq!(report.truncation_radius, Some(10.0));
}

#[test]
fn convex_certificate_without_errors_is_ssp() {
    let m = builtin("max-affine").unwrap();
    let out = certify_convex(&m.field, &m.attractor, 0.0, 0.0, 3.0, &ContainmentOptions::default()).unwrap();
    let cert = out.certification.feasible().unwrap();
    assert_eq!((cert.epsilon, cert.b), (0.0, 0.0));
    assert!(!cert.sigma_dependent_epsilon);
    // min of |y|₁ on the radius-3 circle is 3, located to grid accuracy
    assert!(out.c >= 0.9 * 3.0 && out.c < 0.9 * 3.0 * 1.01, "c = {}", out.c);
    let boundary = certify_convex(
        &m.field,
        &m.attractor,
        0.0,
        out.c / 9.0,
        3.0,
        &ContainmentOptions::default(),
    )
    .unwrap();
    assert!(!boundary.certification.is_feasible());
}

#[test]
fn convex_certificate_rejects_nonconvex_field() {
    let nc = builtin("nonconvex-1d").unwrap();
    assert!(certify_convex(&nc.field, &nc.attractor, 0.0, 0.0, 1.0, &ContainmentOptions::default()).is_err());
}

#[test]
fn nonconvex_gradient_is_strict() {
    let nc = builtin("nonconvex-1d").unwrap();
    let v = LyapunovField::squared_distance(nc.attractor.clone()).unwrap();
    let report = classify_polyak(
        &gradient_oracle(nc.field),
        &v,
        &ConvexSet::whole_space(1),
        6.0,
        5000,
        2,
        Execution::Parallel,
    )
    .unwrap();
    assert!(report.class.rank() >= PolyakClass::Pseudogradient.rank());
    assert!(report.min_inner_product > 0.0);
}

#[test]
fn inner_bound_floor_violates_p3() {
    let s = builtin("strongly-convex-quadratic").unwrap();
    let v = LyapunovField::squared_distance(s.attractor.clone()).unwrap();
    // constant error pushes ΔV up near the attractor
    let oracle = perturb(
        Box::new(gradient_oracle(s.field)),
        ErrorModel::worst_case(0.5, 0.0).unwrap(),
        s.attractor,
    )
    .against(v.clone());
    let band = SpasBand {
        sigma_o: 3.0,
        epsilon_o: 0.0,
        rho_o: 0.1,
    };
    let w = WForm::Quadratic {
        alpha: 0.1,
        k: 0.0,
        offset: -1.0,
    };
    let opts = ConditionOptions {
        band_samples: 1000,
        inner_samples: 1000,
        ..ConditionOptions::default()
    };
    let rep = check_spas_conditions(&v, &oracle, &xi2(), band, 0.1, 1e-6, &w, &opts).unwrap();
    assert!(!rep.p3);
}

#[test]
fn lipschitz_budget_end_to_end_over_a_range_of_steps() {
    let s = builtin("strongly-convex-quadratic").unwrap();
    let v = LyapunovField::squared_distance(s.attractor.clone()).unwrap();
    let oracle = gradient_oracle(s.field.clone());
    let c = containment_level(
        &|y: &Vector| y.norm_squared(),
        &s.attractor,
        0.0,
        0.4,
        2.0,
        &ContainmentOptions::default(),
    )
    .unwrap();
    let budget = budget_lipschitz(0.5, 2.0, 0.0, 0.0, c.level, 2.0, 0.0, 0.4, 0.05).unwrap();
    let band = SpasBand {
        sigma_o: 2.0,
        epsilon_o: 0.0,
        rho_o: 0.4,
    };
    let opts = ConditionOptions {
        band_samples: 2000,
        inner_samples: 500,
        ..ConditionOptions::default()
    };
    for f in [1.0, 0.5, 0.1] {
        let alpha = f * budget.alpha_max;
        let w = WForm::from_budget(&budget, alpha, None).unwrap();
        let rep = check_spas_conditions(&v, &oracle, &xi2(), band, alpha, 0.05, &w, &opts).unwrap();
        assert!(rep.pass, "alpha = {alpha}: {rep:?}");
    }
}

#[test]
fn spas_achieved_radius_shrinks_with_step_size_under_random_errors() {
    let s = builtin("strongly-convex-quadratic").unwrap();
    let v = LyapunovField::squared_distance(s.attractor.clone()).unwrap();
    let m = robustness_margins(0.2, 1.0, 1.0, 0.0, 0.3).unwrap();
    let oracle = perturb(
        Box::new(gradient_oracle(s.field)),
        ErrorModel::worst_case(0.5 * m.a_max, 0.5 * m.r_max).unwrap(),
        s.attractor,
    )
    .against(v.clone());
    let params = SpasParams {
        sigma: 1.0,
        rho_a: 0.2,
        rho_s: 0.5,
        trials: 16,
        horizon: 3000,
        selection: Selection::WorstCase,
    };
    let reports = certify_spas(&oracle, &xi2(), &v, &[0.2, 0.1], &params, 9, Execution::Parallel).unwrap();
    assert!(reports.iter().all(|r| r.spas));
    assert!(reports[1].attractivity.achieved_rho_a <= reports[0].attractivity.achieved_rho_a + 1e-9);
    let seq = certify_spas(&oracle, &xi2(), &v, &[0.2, 0.1], &params, 9, Execution::Sequential).unwrap();
    assert_eq!(seq, reports);
}

#[test]
fn iterates_stay_feasible_under_projection() {
    let q = builtin("quadratic").unwrap();
    let xi = ConvexSet::intersection(vec![
        ConvexSet::ball(dvector![1.0, 1.0], 1.5).unwrap(),
        ConvexSet::halfspace(dvector![0.0, 1.0], 1.2).unwrap(),
    ])
    .unwrap();
    let rec = iterate(
        &dvector![3.0, 3.0],
        &gradient_oracle(q.field),
        &xi,
        0.4,
        40,
        Selection::First,
        None,
        0,
    )
    .unwrap();
    assert!(rec.projected_start);
    for y in &rec.iterates {
        assert!(xi.contains(&Vector::from_column_slice(y), 1e-9));
    }
}
