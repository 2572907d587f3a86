use hemoshape::analysis::verify::{projector_input, swirl_fixture};
use hemoshape::analysis::{project_solenoidal_testfield, run_suite, ProjectorConfig, Suite, TestField, VerifyOptions};

/// ‖P(Pη) − Pη‖ / ‖Pη − η‖ in the worst layer.
fn reprojection_ratio(n: usize) -> f64 {
    let (mm, _) = swirl_fixture(20, 1.0, 0.02).unwrap();
    let eta = TestField::from_reference(&mm, projector_input(1.0)).unwrap();
    let cfg = ProjectorConfig::with_n(n);
    let (once, first) = project_solenoidal_testfield(&mm, &eta, &cfg).unwrap();
    let (twice, second) = project_solenoidal_testfield(&mm, &once, &cfg).unwrap();
    assert!(first.support_ok() && second.support_ok());
    let change = once.w12_distance(&mm, &twice).into_iter().fold(0.0, f64::max);
    let correction = eta.w12_distance(&mm, &once).into_iter().fold(0.0, f64::max);
    change / correction
}

#[test]
fn reprojection_moves_less_than_the_first_pass_and_less_as_n_grows() {
    let (r4, r8) = (reprojection_ratio(4), reprojection_ratio(8));
    assert!(r4 < 1.0 && r8 < r4, "{r4} {r8}");
}

#[test]
fn time_derivative_stays_bounded_across_n() {
    let (mm, _) = swirl_fixture(20, 1.0, 0.02).unwrap();
    let eta = TestField::from_reference(&mm, projector_input(1.0)).unwrap();
    let norms: Vec<f64> = [4, 8]
        .iter()
        .map(|&n| project_solenoidal_testfield(&mm, &eta, &ProjectorConfig::with_n(n)).unwrap().1.time_derivative_norm)
        .collect();
    assert!(norms.iter().all(|v| v.is_finite()));
    assert!(norms.iter().all(|&v| v > 0.0) && norms[1] <= 2.0 * norms[0], "{norms:?}");
}

#[test]
fn unknown_suite_names_are_rejected() {
    assert!("korn".parse::<Suite>().is_ok());
    let err = "kron".parse::<Suite>().unwrap_err();
    assert!(err.contains("rheology|bogovskii|korn|piola|projector|all"));
}

#[test]
fn cheap_suites_pass_on_defaults() {
    let opts = VerifyOptions::default();
    for suite in [Suite::Rheology, Suite::Bogovskii, Suite::Korn, Suite::Piola] {
        let r = run_suite(suite, &opts);
        let failing: Vec<_> = r.suites.iter().flat_map(|s| s.checks.iter().filter(|c| !c.pass)).collect();
        assert!(r.pass, "{suite:?}: {failing:?}");
    }
}
