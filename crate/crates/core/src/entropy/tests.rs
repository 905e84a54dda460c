use super::*;
use crate::geometry::{FlatTorus, GridSpec};
use crate::kernels::SampleOptions;
use proptest::prelude::*;

fn euclid(dim: usize) -> ModelFlow {
    ModelFlow::EuclideanStatic { dim }
}

fn sphere() -> ModelFlow {
    ModelFlow::sphere(2, 1.0)
}

fn field(flow: &ModelFlow, times: &[f64]) -> KernelField {
    let base = match flow {
        ModelFlow::EuclideanStatic { dim } => Point::origin(*dim),
        _ => Point(vec![0.0]),
    };
    kernel_field(flow, &base, 0.0, times, &FieldOptions::default()).unwrap()
}

#[test]
fn gaussian_shrinker_has_zero_entropies() {
    for dim in 1..=3 {
        let times = [-1.0, -10.0, -100.0];
        let f = field(&euclid(dim), &times);
        for &s in &times {
            let (w, n) = (entropy_w(&f, s).unwrap(), nash_n(&f, s).unwrap());
            assert!(w.value.abs() <= 1e-8, "n={dim} T={s}: W={}", w.value);
            assert!(n.value.abs() <= 1e-8, "n={dim} T={s}: N={}", n.value);
            assert!(w.error < 1e-8 && n.error < 1e-8);
            let p = perelman_production(&f, s).unwrap();
            assert!(p.value.abs() <= 1e-8);
        }
    }
}

#[test]
fn torus_nash_entropy_matches_the_volume_asymptote() {
    let f = field(&ModelFlow::circle(1.0), &[-100.0]);
    let n = nash_n(&f, -100.0).unwrap().value;
    let oracle = -0.5 * (400.0 * PI).ln() - 0.5;
    assert!((n - oracle).abs() < 1e-8, "{n} vs {oracle}");
    assert!((n + 4.068).abs() < 1e-2);
    assert!(entropy_w(&f, -100.0).unwrap().value <= n);
}

#[test]
fn sphere_entropies_are_ordered() {
    let f = field(&sphere(), &[-1.0, -4.0]);
    let (w1, w4) = (entropy_w(&f, -1.0).unwrap().value, entropy_w(&f, -4.0).unwrap().value);
    assert!(w4 <= w1 && w1 <= 0.0, "W(-4) = {w4}, W(-1) = {w1}");
    for s in [-1.0, -4.0] {
        let (w, n) = (entropy_w(&f, s).unwrap().value, nash_n(&f, s).unwrap().value);
        assert!(w <= n && n <= 0.0);
    }
}

#[test]
fn nu_is_a_probability_measure() {
    let f = field(&sphere(), &[-0.5]);
    let one = nu_expectation(&f, -0.5, |_, _| 1.0).unwrap();
    assert!((one - 1.0).abs() < 1e-6);
    let g = field(&euclid(3), &[-2.0]);
    let fm = nu_expectation(&g, -2.0, |sl, i| sl.f[i]).unwrap();
    assert!((fm - 1.5).abs() < 1e-8);
    let bound = nu_expectation(&f, -0.5, |sl, i| sl.tau * (sl.grad_f_sq[i] + sl.scalar[i])).unwrap();
    assert!(bound <= 1.0 + 1e-8, "{bound}");
}

#[test]
fn production_matches_the_derivative_of_w() {
    let (s, d) = (-2.0, 1e-3);
    let f = field(&sphere(), &[s - d, s, s + d]);
    let fd = (entropy_w(&f, s + d).unwrap().value - entropy_w(&f, s - d).unwrap().value) / (2.0 * d);
    let p = perelman_production(&f, s).unwrap().value;
    assert!(p >= 0.0);
    assert!((fd / p - 1.0).abs() < 0.02, "fd {fd} vs production {p}");
}

#[test]
fn deficit_weight_vanishes_at_both_ends() {
    assert_eq!(deficit_weight(0.0, 3.0), 0.0);
    assert_eq!(deficit_weight(3.0, 3.0), 0.0);
    assert!(deficit_weight(1.5, 3.0) > 0.0);
}

#[test]
fn time_rule_integrates_polynomials() {
    let rule = TimeRule::default();
    let (times, weights, gap) = rule.nodes(0.5, -3.5).unwrap();
    assert!(gap <= rule.max_gap);
    assert!(times.windows(2).all(|w| w[0] < w[1]));
    let tau: f64 = 4.0;
    let integral: f64 = times.iter().zip(&weights).map(|(s, w)| w * (0.5 - s).powi(3)).sum();
    let exact = (tau.powi(4) - gap.powi(4)) / 4.0;
    assert!((integral / exact - 1.0).abs() < 1e-13);
}

#[test]
fn deficit_and_time_average_reproduce_nash_entropy() {
    let rule = TimeRule::default();
    let big_t = -1.0;
    let mut times = rule.times(0.0, big_t).unwrap();
    times.push(big_t);
    let f = field(&sphere(), &times);
    let n = nash_n(&f, big_t).unwrap().value;
    let deficit = nash_deficit_integral(&f, big_t, &rule).unwrap();
    assert!((deficit.value / n - 1.0).abs() < 5e-3, "deficit {} vs N {n}", deficit.value);
    let avg = nash_time_average(&f, big_t, &rule).unwrap();
    assert!((avg.value / n - 1.0).abs() < 1e-3, "average {} vs N {n}", avg.value);
    let g = field(&euclid(2), &times);
    assert!(nash_deficit_integral(&g, big_t, &rule).unwrap().value.abs() < 1e-8);
}

#[test]
fn deficit_needs_its_slices() {
    let f = field(&sphere(), &[-1.0]);
    let err = nash_deficit_integral(&f, -1.0, &TimeRule::default()).unwrap_err();
    assert!(matches!(err, Error::Schedule(_)));
}

#[test]
fn torus_deficit_resolves_the_first_image_bump() {
    let rule = TimeRule::default();
    let big_t = -4.0;
    let mut times = rule.times(0.0, big_t).unwrap();
    times.push(big_t);
    let f = field(&ModelFlow::circle(1.0), &times);
    let n = nash_n(&f, big_t).unwrap().value;
    let d = nash_deficit_integral(&f, big_t, &rule).unwrap();
    assert!((d.value / n - 1.0).abs() < 1e-6 && d.error < 1e-6, "{d:?} vs {n}");
}

#[test]
fn euclidean_limit_is_zero_and_converged() {
    let times = geometric_schedule(0.0, 6);
    let mut c = entropy_curve(&euclid(2), &Point::origin(2), 0.0, &times, &FieldOptions::default(), false).unwrap();
    c.extrapolate(&LimitOptions::default()).unwrap();
    let w = c.w_limit.as_ref().unwrap();
    assert!(w.converged && !w.divergent);
    assert!(w.estimate.abs() <= 1e-8);
}

#[test]
fn torus_nash_limit_diverges() {
    let times = geometric_schedule(0.0, 14);
    let mut c = entropy_curve(&ModelFlow::circle(1.0), &Point(vec![0.0]), 0.0, &times, &FieldOptions::default(), false).unwrap();
    c.extrapolate(&LimitOptions::default()).unwrap();
    let n = c.n_limit.as_ref().unwrap();
    assert!(n.divergent && !n.converged, "{n:?}");
    c.check_invariants(1e-9).unwrap();
}

#[test]
fn sphere_limit_converges_to_a_negative_value() {
    let times = geometric_schedule(0.0, 8);
    let opts = FieldOptions::default();
    let mut c = entropy_curve(&sphere(), &Point(vec![0.0]), 0.0, &times, &opts, true).unwrap();
    c.check_invariants(1e-6).unwrap();
    c.extrapolate(&LimitOptions::default()).unwrap();
    let w = c.w_limit.as_ref().unwrap();
    assert!(w.converged && !w.divergent, "{w:?}");
    assert!(w.estimate <= -0.1);
    // the round shrinker has constant f, so its entropy is log 2 - 1
    assert!((w.estimate - (2f64.ln() - 1.0)).abs() < 1e-4, "{}", w.estimate);
    let coarse = entropy_curve(&sphere(), &Point(vec![0.0]), 0.0, &times, &opts, false).unwrap();
    let wc = asymptotic_limit(&coarse, Quantity::W, &LimitOptions::default()).unwrap();
    assert!((wc.estimate - w.estimate).abs() < 1e-6, "{} vs {}", wc.estimate, w.estimate);
}

#[test]
fn non_monotone_samples_are_rejected() {
    let times = geometric_schedule(0.0, 3);
    let mut c = entropy_curve(&sphere(), &Point(vec![0.0]), 0.0, &times, &FieldOptions::default(), false).unwrap();
    c.samples[2].w += 0.5;
    let err = asymptotic_limit(&c, Quantity::W, &LimitOptions::default()).unwrap_err();
    assert!(matches!(err, Error::DataQuality(_)));
}

#[test]
fn curve_serializes() {
    let times = geometric_schedule(0.0, 3);
    let mut c = entropy_curve(&ModelFlow::circle(1.0), &Point(vec![0.2]), 0.0, &times, &FieldOptions::default(), false).unwrap();
    c.extrapolate(&LimitOptions::default()).unwrap();
    let mut buf = Vec::new();
    c.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("T,W,W_err,N,N_err\n"));
    assert_eq!(text.lines().count(), 5);
    let summary = c.summary();
    assert!(summary["n_limit"]["differences"].is_array());
}

#[test]
fn homogeneous_gradient_is_zero() {
    let g = nash_gradient(
        &ModelFlow::circle(1.0),
        &Point(vec![0.3]),
        0.0,
        -4.0,
        0.01,
        &FieldOptions::default(),
        &SupSearch::default(),
    )
    .unwrap();
    assert_eq!(g.value, 0.0);
    assert!(g.bound_squared.unwrap() >= 0.0);
}

#[test]
fn method_resolution() {
    assert_eq!(resolve_method(&sphere(), MethodChoice::Auto).unwrap(), KernelMethod::Spectral);
    assert_eq!(resolve_method(&ModelFlow::CigarSoliton, MethodChoice::Auto).unwrap(), KernelMethod::Pde);
    assert!(resolve_method(&sphere(), MethodChoice::Exact).is_err());
    assert!(resolve_method(&euclid(1), MethodChoice::Spectral).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn torus_entropies_are_ordered(side in 0.5f64..2.0, log_tau in -4.0f64..3.0, x in 0.0f64..1.0) {
        let flow = ModelFlow::FlatTorus { torus: FlatTorus::cube(1, side) };
        let s = -(10f64.powf(log_tau));
        let f = kernel_field(&flow, &Point(vec![x]), 0.0, &[s], &FieldOptions::default()).unwrap();
        let (w, n) = (entropy_w(&f, s).unwrap().value, nash_n(&f, s).unwrap().value);
        prop_assert!(w <= n + 1e-9 && n <= 1e-9, "W {} N {}", w, n);
    }
}



#[test]
fn oracle_deviation_tracks_the_pde_grid() {
    let times = [-0.1, -0.5];
    let dev = |flow: &ModelFlow, base: Point, nodes: usize| {
        let opts = FieldOptions {
            method: MethodChoice::Pde,
            grid: GridSpec { nodes, ..GridSpec::default() },
            ..FieldOptions::default()
        };
        let f = kernel_field(flow, &base, 0.0, &times, &opts).unwrap();
        oracle_deviation(&f, &opts.sample).unwrap()
    };
    let coarse = dev(&sphere(), Point(vec![0.0]), 256);
    let fine = dev(&sphere(), Point(vec![0.0]), 512);
    assert!(coarse / fine > 3.5, "{coarse:e} -> {fine:e}");
    assert!(dev(&ModelFlow::circle(1.0), Point(vec![0.3]), 512) < 1e-3);
    let (coarse, fine) = (dev(&euclid(2), Point(vec![0.5, -1.0]), 512), dev(&euclid(2), Point(vec![0.5, -1.0]), 1024));
    assert!(coarse / fine > 3.5, "{coarse:e} -> {fine:e}");
    let tight = FieldOptions {
        sample: SampleOptions {
            series_tol: 1e-12,
            ..SampleOptions::default()
        },
        ..FieldOptions::default()
    };
    let exact = kernel_field(&sphere(), &Point(vec![0.0]), 0.0, &times, &tight).unwrap();
    let d = oracle_deviation(&exact, &tight.sample).unwrap();
    assert!(d < 1e-9, "{d:e}");
}
