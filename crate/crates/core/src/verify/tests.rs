use super::*;
use crate::scenario::{zoo, ZOO};
use proptest::prelude::*;

fn scenario(name: &str) -> ScenarioConfig {
    zoo(name).unwrap().remove(0)
}

#[test]
fn catalog_ids_are_unique_and_reachable() {
    let kinds: Vec<ScenarioKind> = zoo("all").unwrap().iter().map(|s| s.kind()).collect();
    for (i, c) in catalog().iter().enumerate() {
        assert!(!c.claim.is_empty());
        assert!(catalog()[..i].iter().all(|d| d.id != c.id), "duplicate {}", c.id);
        assert!(kinds.iter().any(|k| c.applies_to(*k)), "{} has no zoo scenario", c.id);
        assert_eq!(find(c.id).unwrap().id, c.id);
    }
    assert_eq!(ZOO.len(), kinds.len());
}

#[test]
fn suites_select_by_verdict() {
    for (name, v) in [
        ("identities", Verdict::Identity),
        ("inequalities", Verdict::Inequality),
        ("trends", Verdict::Trend),
        ("diagnostics", Verdict::Diagnostic),
    ] {
        let s = suite(name).unwrap();
        assert!(!s.is_empty());
        assert!(s.iter().all(|c| c.verdict == v));
    }
    assert_eq!(suite("default").unwrap().len(), catalog().len());
    assert_eq!(suite("entropy-chain").unwrap().len(), 1);
    assert!(matches!(suite("no-such-check"), Err(Error::UnknownCheck(_))));
    assert!(matches!(run_suite(&["nope".into()], &[]), Err(Error::UnknownCheck(_))));
}

#[test]
fn empty_run_passes() {
    let r = run_suite(&[], &zoo("euclidean").unwrap()).unwrap();
    assert!(r.reports.is_empty() && r.pass);
}

#[test]
fn measurement_judging() {
    assert_eq!(Measurement::identity("a", 1e-4, 1e-5, 1e-3).outcome, Outcome::Pass);
    assert_eq!(Measurement::identity("a", 1e-3, 1e-4, 1e-3).outcome, Outcome::Indeterminate);
    assert_eq!(Measurement::identity("a", 2e-3, 1e-4, 1e-3).outcome, Outcome::Fail);
    assert_eq!(Measurement::identity("a", f64::NAN, 0.0, 1.0).outcome, Outcome::Fail);
    assert_eq!(Measurement::inequality("b", 0.1, 0.01, 0.0).outcome, Outcome::Pass);
    assert_eq!(Measurement::inequality("b", -0.5e-6, 0.0, 1e-6).outcome, Outcome::Pass);
    assert_eq!(Measurement::inequality("b", -0.01, 0.02, 0.0).outcome, Outcome::Indeterminate);
    assert_eq!(Measurement::trend("c", -0.1, 0.01, 0.0).outcome, Outcome::Fail);
    assert_eq!(Measurement::diagnostic("d", 3.0, true).outcome, Outcome::Pass);
    assert_eq!(Measurement::diagnostic("d", f64::INFINITY, true).outcome, Outcome::Fail);
    assert_eq!(Measurement::diagnostic("d", 3.0, false).outcome, Outcome::Fail);
    assert!(Outcome::Pass < Outcome::Indeterminate && Outcome::Fail < Outcome::Error);
}

proptest! {
    #[test]
    fn larger_budget_never_upgrades(r in 0.0f64..1.0, b in 0.0f64..1.0, extra in 0.0f64..1.0, tol in 0.0f64..1.0) {
        let lo = Measurement::identity("x", r, b, tol).outcome;
        let hi = Measurement::identity("x", r, b + extra, tol).outcome;
        prop_assert!(lo == hi || hi == Outcome::Indeterminate);
        let lo = Measurement::inequality("x", r - 0.5, b, tol).outcome;
        let hi = Measurement::inequality("x", r - 0.5, b + extra, tol).outcome;
        prop_assert!(lo == hi || hi == Outcome::Indeterminate);
    }
}

#[test]
fn inapplicable_check_is_a_config_error() {
    let def = find("distance-distortion").unwrap();
    assert!(matches!(run_check(def, &scenario("torus")), Err(Error::Config(_))));
}

#[test]
fn flat_scenarios_pass_their_checks() {
    let scs: Vec<ScenarioConfig> = ["euclidean", "torus", "product", "cover"].iter().map(|n| scenario(n)).collect();
    let r = run_suite(&["default".into()], &scs).unwrap();
    assert!(r.pass, "{}", r.table());
    assert!(r.reports.iter().all(|x| x.outcome == Outcome::Pass), "{}", r.table());
    let applicable: usize = scs
        .iter()
        .map(|s| catalog().iter().filter(|c| c.applies_to(s.kind())).count())
        .sum();
    assert_eq!(r.reports.len(), applicable);
    let headline = &r.reports[0];
    assert!(headline.measurements.iter().any(|m| m.value == headline.residual));
}

#[test]
fn coarse_grid_is_not_a_pass() {
    let mut sc = scenario("sphere");
    sc.method = crate::scenario::MethodSpec::Pde;
    sc.grid.nodes = 48;
    sc.tolerances.checks.insert("w-production-identity".into(), 1e-3);
    let r = run_check(find("w-production-identity").unwrap(), &sc).unwrap();
    assert_eq!(r.outcome, Outcome::Indeterminate, "{:?}", r.measurements);
    assert!(r.budget > 0.0 && r.tolerance == 1e-3);
    sc.grid.nodes = 24;
    assert!(matches!(run_check(find("w-production-identity").unwrap(), &sc), Err(Error::Config(_))));
}

#[test]
fn numerical_failures_become_error_reports() {
    let mut sc = scenario("sphere");
    sc.schedule.times = vec![-0.25, -0.5];
    let r = run_check(find("nash-decay-lower-bound").unwrap(), &sc).unwrap();
    assert_eq!(r.outcome, Outcome::Error, "{:?}", r.measurements);
    assert!(r.error.is_some());
}

#[test]
fn report_serializes_without_csv_bodies() {
    let r = run_check(find("gaussian-shrinker-equality").unwrap(), &scenario("euclidean")).unwrap();
    let v = serde_json::to_value(&r).unwrap();
    assert_eq!(v["outcome"], "pass");
    assert!(v["artifacts"].as_array().unwrap().iter().all(|a| a.get("csv").is_none()));
}

