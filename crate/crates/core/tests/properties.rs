use std::sync::Arc;

use caloric_lab::carleman::Sigma;
use caloric_lab::certifiers::{hardy_check, CertificateReport, Provenance};
use caloric_lab::numerics::{
    weighted_integrals, GaussianWeight, IntegrandKind, QuadratureRule, Rescaled, SpaceTimeField, Translated,
};
use caloric_lab::oracles::{catalog, find};
use caloric_lab::solver::DirichletModes;
use proptest::prelude::*;

fn oracle_names(max_dim: usize) -> Vec<String> {
    catalog().iter().filter(|o| o.dim() <= max_dim).map(|o| o.name().to_string()).collect()
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn dirichlet_modes_vanish_on_the_boundary(
        amps in prop::collection::vec(-2.0..2.0f64, 1..5),
        half_width in 0.5..8.0f64,
        y in -1.0..1.0f64,
    ) {
        let f = DirichletModes::new(2, half_width, amps).unwrap();
        for x in [[-half_width, y * half_width], [half_width, y * half_width], [y * half_width, half_width]] {
            prop_assert!(f.jet(&x, 0.0).value.abs() < 1e-12);
        }
    }

    #[test]
    fn weighted_energies_follow_translation(
        idx in 0usize..1000,
        shift in prop::array::uniform2(-1.0..1.0f64),
        offset in 0.1..2.0f64,
        t in 0.0..1.0f64,
    ) {
        let names = oracle_names(2);
        let u = find(&names[idx % names.len()]).unwrap();
        let n = u.dim();
        let kinds = [IntegrandKind::ValueSq, IntegrandKind::GradSq];
        let rule = QuadratureRule::default();
        let base = weighted_integrals(&*u, t, &GaussianWeight::new(n, offset).unwrap(), &kinds, &rule).unwrap();
        let moved = Translated::new(u.clone(), &shift[..n], 0.0);
        let centered = GaussianWeight::centered(n, &shift[..n], offset).unwrap();
        let other = weighted_integrals(&moved, t, &centered, &kinds, &rule).unwrap();
        for (a, b) in base.iter().zip(&other) {
            prop_assert!((a.value - b.value).abs() <= 1e-7 * a.magnitude.max(1e-300), "{a:?} {b:?}");
        }
    }

    #[test]
    fn homogeneous_oracles_scale_parabolically(
        idx in 0usize..1000,
        lambda in 0.2..3.0f64,
        x in prop::array::uniform3(-1.0..1.0f64),
        t in -1.0..1.0f64,
    ) {
        let homogeneous: Vec<_> = catalog().iter().filter(|o| o.flags().parabolic_degree.is_some()).collect();
        let u = homogeneous[idx % homogeneous.len()];
        let d = u.flags().parabolic_degree.unwrap() as i32;
        let n = u.dim();
        let scaled = Rescaled::new(u.clone(), lambda);
        let lhs = scaled.jet(&x[..n], t).value;
        let rhs = lambda.powi(d) * u.jet(&x[..n], t).value;
        prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + rhs.abs()));
    }

    #[test]
    fn hardy_holds_for_every_oracle(idx in 0usize..1000, a in 0.1..5.0f64, t in 0.0..0.5f64) {
        let names = oracle_names(1);
        let u = find(&names[idx % names.len()]).unwrap();
        let (lo, hi) = u.time_domain();
        prop_assume!(t > lo && t < hi);
        let report = hardy_check(&*u, t, a, &QuadratureRule::default()).unwrap();
        prop_assert!(report.pass, "{} {a} {t}", u.name());
    }

    #[test]
    fn merged_reports_pass_only_if_all_parts_pass(passes in prop::collection::vec(any::<bool>(), 1..6)) {
        let parts: Vec<_> = passes
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let mut r = CertificateReport::new("x", Provenance::new("t"));
                r.pass = p;
                r.constant = Some(i as f64);
                r.lhs = vec![i as f64];
                r
            })
            .collect();
        let merged = CertificateReport::merge(parts).unwrap();
        prop_assert_eq!(merged.pass, passes.iter().all(|&p| p));
        prop_assert_eq!(merged.lhs.len(), passes.len());
        prop_assert_eq!(merged.constant, Some((passes.len() - 1) as f64));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(12))]

    #[test]
    fn carleman_weight_stays_below_time(gamma in 2.0..64.0f64, frac in prop::collection::vec(0.001..1.0f64, 1..6)) {
        let sigma = Sigma::new(gamma, 1e-10).unwrap();
        let mut ts: Vec<f64> = frac.iter().map(|f| f * sigma.end()).collect();
        ts.sort_by(f64::total_cmp);
        let mut prev = 0.0;
        for t in ts {
            let s = sigma.value(t).unwrap();
            prop_assert!(s > 0.0 && s <= t * (1.0 + 1e-12), "σ({t}) = {s}");
            prop_assert!(s >= prev - 1e-14);
            prev = s;
        }
    }
}

#[test]
fn translated_fields_keep_their_polynomial_degree() {
    let u = find("heat4").unwrap();
    assert_eq!(u.polynomial_degree(), Some(4));
    let moved = Translated::new(u.clone() as Arc<dyn SpaceTimeField>, &[0.3], 0.1);
    assert_eq!(moved.polynomial_degree(), Some(4));
    assert!(close(moved.jet(&[0.3], 0.1).value, u.jet(&[0.0], 0.0).value, 1e-14));
}
