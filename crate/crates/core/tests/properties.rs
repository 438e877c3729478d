use nalgebra::{dvector, DMatrix};
use proptest::prelude::*;

use spsp::certificates::{
    certify_linear_objective, certify_strongly_convex, classify_polyak, verify, Classification, Phi, PolyakClass,
    Provenance, SpspCertificate, VerifyOptions,
};
use spsp::dynamics::{check_descent_lemma, iterate, DescentMode, Selection};
use spsp::geometry::ConvexSet;
use spsp::lemmas::{budget_bounded, budget_growth, budget_lipschitz, robustness_margins};
use spsp::oracles::{gradient_oracle, subgradient_oracle};
use spsp::problems::{builtin, BuiltinSpec, LyapunovField};
use spsp::{Execution, Vector};

fn vec2() -> impl Strategy<Value = Vector> {
    (-5.0..5.0f64, -5.0..5.0f64).prop_map(|(a, b)| dvector![a, b])
}

fn any_set() -> impl Strategy<Value = ConvexSet> {
    prop_oneof![
        (vec2(), 0.1..3.0f64).prop_map(|(lo, w)| ConvexSet::boxed(lo.clone(), lo.add_scalar(w)).unwrap()),
        (vec2(), 0.1..3.0f64).prop_map(|(c, r)| ConvexSet::ball(c, r).unwrap()),
        (vec2(), -2.0..2.0f64).prop_filter_map("zero normal", |(n, o)| {
            (n.norm() > 1e-3).then(|| ConvexSet::halfspace(n, o).unwrap())
        }),
        (vec2(), vec2()).prop_filter_map("zero direction", |(a, d)| {
            (d.norm() > 1e-3).then(|| ConvexSet::affine(a, DMatrix::from_column_slice(2, 1, d.as_slice())).unwrap())
        }),
        (vec2(), 0.5..3.0f64, -1.0..1.0f64).prop_map(|(c, r, o)| {
            ConvexSet::intersection(vec![
                ConvexSet::ball(c, r).unwrap(),
                ConvexSet::halfspace(dvector![1.0, -1.0], o).unwrap(),
            ])
            .unwrap()
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn projection_is_nonexpansive_and_idempotent(set in any_set(), x in vec2(), z in vec2()) {
        // the intersection may be empty for some draws
        if let (Ok(px), Ok(pz)) = (set.project(&x), set.project(&z)) {
            prop_assert!(set.contains(&px, 1e-9));
            prop_assert!((&px - &pz).norm() <= (&x - &z).norm() + 1e-9);
            let again = set.project(&px).unwrap();
            prop_assert!((&again - &px).norm() <= 1e-9);
        }
    }

    #[test]
    fn classification_matches_parameters(sigma in prop_oneof![Just(f64::INFINITY), 1.0..10.0f64],
                                         eps in prop_oneof![Just(0.0), 0.0..0.5f64],
                                         b in prop_oneof![Just(0.0), 0.0..1.0f64]) {
        let cert = SpspCertificate::new(sigma, eps, b, Phi::DistancePolynomial(vec![0.0, 1.0]), Provenance::Empirical).unwrap();
        let expected = match (eps == 0.0 && b == 0.0, sigma.is_infinite()) {
            (true, true) => Classification::Sp,
            (true, false) => Classification::Ssp,
            (false, true) => Classification::Psp,
            (false, false) => Classification::Spsp,
        };
        prop_assert_eq!(cert.classification, expected);
    }

    #[test]
    fn exact_strongly_convex_is_sp(c in 0.01..10.0f64) {
        let cert = certify_strongly_convex(c, 0.0, 0.0);
        let cert = cert.feasible().unwrap();
        prop_assert_eq!((cert.epsilon, cert.b), (0.0, 0.0));
        prop_assert_eq!(cert.classification, Classification::Sp);
    }

    #[test]
    fn linear_certificate_phi_positive_on_band(c in 0.1..5.0f64, fa in 0.0..0.99f64, fr in 0.0..0.99f64, sigma in 0.1..20.0f64) {
        let a = fa * c;
        let r = fr * (c - a) / sigma;
        let cert = certify_linear_objective(c, a, r, sigma);
        let cert = cert.feasible().unwrap();
        let y = dvector![0.0];
        for k in 1..=50 {
            let d = sigma * k as f64 / 50.0;
            prop_assert!(cert.phi.eval(&y, d).unwrap() > 0.0);
        }
    }

    #[test]
    fn budgets_are_minimum_of_positive_components(w in 0.1..2.0f64, x in 0.1..5.0f64, b in 0.0..2.0f64,
                                                   c in 0.01..2.0f64, b_o in 0.001..2.0f64,
                                                   eps in 0.0..1.0f64, rho in 0.01..1.0f64, extra in 0.01..3.0f64) {
        let sigma = eps + rho + extra;
        for budget in [
            budget_growth(w, x, b, b_o).unwrap(),
            budget_bounded(w, x, b, c, sigma, eps, rho, b_o).unwrap(),
            budget_lipschitz(w, x, 0.5 * x, b, c, sigma, eps, rho, b_o).unwrap(),
        ] {
            prop_assert!(budget.components.values().all(|v| *v > 0.0));
            let min = budget.components.values().copied().fold(f64::INFINITY, f64::min);
            prop_assert_eq!(budget.alpha_max, min);
        }
    }

    #[test]
    fn growth_alpha_1_satisfies_inner_bound(w in 0.1..2.0f64, beta in 0.1..5.0f64, b in 0.01..2.0f64, b_o in 0.001..1.0f64) {
        let g = budget_growth(w, beta, b, b_o).unwrap();
        let a1 = g.components["alpha_1"];
        // αb(1 − αwβ) ≤ b_o on (0, α₁]
        for k in 1..=100 {
            let a = a1 * k as f64 / 100.0;
            prop_assert!(a * b * (1.0 - a * w * beta) <= b_o * (1.0 + 1e-12));
        }
    }

    #[test]
    fn perturbed_phi_positive_inside_margins(c in 0.01..2.0f64, sigma in 0.5..5.0f64, l in 0.1..3.0f64,
                                              fa in 0.0..0.999f64, fr in 0.0..0.999f64, fe in 0.0..0.9f64) {
        let m = robustness_margins(c, sigma, l, 0.0, fe * sigma).unwrap();
        let phi = m.phi_hat(fa * m.a_max, fr * m.r_max);
        let y = dvector![0.0];
        for k in 1..=50 {
            let d = fe * sigma + (1.0 - fe) * sigma * k as f64 / 50.0;
            prop_assert!(phi.eval(&y, d).unwrap() > 0.0);
        }
    }

    #[test]
    fn descent_inequality_on_quadratic(y0 in vec2(), alpha in 0.001..1.99f64, boxed in any::<bool>()) {
        let b = builtin("quadratic").unwrap();
        let v = LyapunovField::squared_distance(b.attractor.clone()).unwrap();
        let xi = if boxed {
            ConvexSet::boxed(dvector![-1.0, -1.0], dvector![1.0, 2.0]).unwrap()
        } else {
            ConvexSet::whole_space(2)
        };
        let rec = iterate(&y0, &gradient_oracle(b.field), &xi, alpha, 20, Selection::First, Some(&v), 0).unwrap();
        prop_assert_eq!(rec.iterates.len(), 21);
        for y in &rec.iterates {
            prop_assert!(xi.contains(&Vector::from_column_slice(y), 1e-12));
        }
        prop_assert!(check_descent_lemma(&rec, &v, &xi, DescentMode::Half).unwrap().pass);
    }
}

#[test]
fn hierarchy_monotonicity() {
    let b = BuiltinSpec::StronglyConvexQuadratic {
        dim: 2,
        c: 1.0,
        l: 3.0,
        center: Some(vec![0.5, -0.5]),
    }
    .build()
    .unwrap();
    let v = LyapunovField::squared_distance(b.attractor.clone()).unwrap();
    let oracle = gradient_oracle(b.field);
    let xi = ConvexSet::whole_space(2);
    let sp = certify_strongly_convex(1.0, 0.0, 0.0);
    let sp = sp.feasible().unwrap();
    let opts = VerifyOptions {
        samples: 3000,
        inner_samples: 1000,
        ..VerifyOptions::default()
    };
    let mut seen = Vec::new();
    for (sigma, eps, bb) in [
        (f64::INFINITY, 0.0, 0.0),
        (4.0, 0.0, 0.0),
        (f64::INFINITY, 0.3, 0.1),
        (4.0, 0.3, 0.1),
    ] {
        let cert = sp.with_band(sigma, eps, bb).unwrap();
        seen.push(cert.classification);
        let report = verify(&oracle, &v, &xi, &cert, &opts).unwrap();
        assert!(report.pass, "{:?}: {report:?}", cert.classification);
    }
    assert_eq!(
        seen,
        vec![
            Classification::Sp,
            Classification::Ssp,
            Classification::Psp,
            Classification::Spsp
        ]
    );
}

#[test]
fn polyak_classes_are_nested() {
    for name in ["strongly-convex-quadratic", "max-affine", "norm-cone"] {
        let b = builtin(name).unwrap();
        let v = LyapunovField::squared_distance(b.attractor.clone()).unwrap();
        let report = classify_polyak(
            &subgradient_oracle(b.field, 3),
            &v,
            &ConvexSet::whole_space(2),
            3.0,
            2000,
            4,
            Execution::Parallel,
        )
        .unwrap();
        if report.class.rank() >= PolyakClass::Strict.rank() {
            assert!(report.min_inner_product > 0.0, "{name}");
        }
        if report.class.rank() >= PolyakClass::Pseudogradient.rank() {
            assert!(report.min_inner_product >= -1e-9, "{name}");
        }
        assert!(report.class.rank() >= PolyakClass::Strict.rank(), "{name}: {report:?}");
    }
}
