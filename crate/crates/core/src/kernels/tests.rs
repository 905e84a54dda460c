use super::*;
use crate::geometry::{FlatTorus, Isometry};
use proptest::prelude::*;

fn circle(l: f64) -> ModelFlow {
    ModelFlow::circle(l)
}

fn p(v: &[f64]) -> Point {
    Point(v.to_vec())
}

// Values below were produced by an independent mpmath lattice sum (30 digits,
// unbounded image range) and frozen here.
const TORUS_QUARTER: f64 = 1.000_103_446_372_407_6;
const TORUS_ONE: f64 = 1.000_000_000_000_000_0;
const TORUS_OFFSET: f64 = 0.297_339_221_626_016_9;

#[test]
fn euclidean_kernel_at_centre() {
    let e = ModelFlow::EuclideanStatic { dim: 2 };
    let h = exact_flat_kernel(&e, &p(&[0.0, 0.0]), -1.0, &p(&[0.0, 0.0]), 0.0, &Cutoff::default()).unwrap();
    assert!((h - 1.0 / (4.0 * PI)).abs() < 1e-16);
}

#[test]
fn torus_kernel_matches_frozen_lattice_sums() {
    let c = circle(1.0);
    let cut = Cutoff::default();
    let h = exact_flat_kernel(&c, &p(&[0.0]), -0.25, &p(&[0.0]), 0.0, &cut).unwrap();
    assert!((h - TORUS_QUARTER).abs() < 1e-13);
    let h = exact_flat_kernel(&c, &p(&[0.3]), -0.01, &p(&[0.0]), 0.0, &cut).unwrap();
    assert!((h - TORUS_OFFSET).abs() < 1e-13);
    let h = exact_flat_kernel(&c, &p(&[0.0]), -1.0, &p(&[0.0]), 0.0, &cut).unwrap();
    assert!((h - TORUS_ONE).abs() < 1e-14);
}

#[test]
fn torus_kernel_equilibrates_to_inverse_volume() {
    let c = circle(1.0);
    let h = exact_flat_kernel(&c, &p(&[0.4]), -500.0, &p(&[0.0]), 0.0, &Cutoff::default()).unwrap();
    assert!((h - 1.0).abs() < 1e-14);
    let c = circle(3.0);
    let h = exact_flat_kernel(&c, &p(&[0.4]), -500.0, &p(&[0.0]), 0.0, &Cutoff::default()).unwrap();
    assert!((h - 1.0 / 3.0).abs() < 1e-14);
}

#[test]
fn image_and_dual_sums_agree() {
    let torus = FlatTorus {
        lattice: vec![vec![1.0, 0.0], vec![0.3, 0.9]],
    };
    let cut = Cutoff::default();
    for &tau in &[0.02, 0.07, 0.3] {
        for d in [[0.0, 0.0], [0.2, -0.4], [0.5, 0.45]] {
            let a = image_sum(&torus, &d, tau, &cut).unwrap();
            let b = dual_sum(&torus, &d, tau, &cut).unwrap();
            assert!((a.value() - b.value()).abs() < 1e-10 * a.value().max(1e-3), "tau {tau}");
            for i in 0..2 {
                assert!((a.grad[i] - b.grad[i]).abs() < 1e-7 * (1.0 + a.grad[i].abs()));
                for j in 0..2 {
                    assert!((a.hess[i][j] - b.hess[i][j]).abs() < 1e-6 * (1.0 + a.hess[i][j].abs()));
                }
            }
        }
    }
}

#[test]
fn lattice_derivatives_match_finite_differences() {
    let torus = FlatTorus::cube(1, 1.0);
    let cut = Cutoff::default();
    for &tau in &[0.01, 0.5] {
        let x = 0.31;
        let h = 1e-4;
        let lk = lattice_kernel(&torus, &[x], tau, &cut).unwrap();
        let lp = lattice_kernel(&torus, &[x + h], tau, &cut).unwrap().log_value;
        let lm = lattice_kernel(&torus, &[x - h], tau, &cut).unwrap().log_value;
        assert!((lk.grad[0] - (lp - lm) / (2.0 * h)).abs() < 1e-6 * (1.0 + lk.grad[0].abs()));
        let fd2 = (lp - 2.0 * lk.log_value + lm) / (h * h);
        assert!((lk.hess[0][0] - fd2).abs() < 1e-4 * (1.0 + lk.hess[0][0].abs()));
    }
}

#[test]
fn truncation_failure_suggests_a_cutoff() {
    let torus = FlatTorus::cube(1, 1.0);
    let cut = Cutoff { tol: 1e-12, max_shell: 0 };
    match image_sum(&torus, &[0.0], 0.07, &cut) {
        Err(Error::Truncation { suggested, .. }) => assert!(suggested >= 1),
        other => panic!("expected truncation error, got {other:?}"),
    }
}

fn double_cover() -> ModelFlow {
    ModelFlow::TorusQuotient {
        cover: FlatTorus::cube(1, 2.0),
        deck: vec![Isometry::identity(1), Isometry::translation(vec![1.0])],
    }
}

#[test]
fn quotient_of_double_circle_is_the_unit_circle() {
    let q = double_cover();
    let c = circle(1.0);
    let cut = Cutoff::default();
    for &tau in &[0.003, 0.2, 5.0] {
        for &y in &[0.0, 0.37, 0.9] {
            let a = exact_flat_kernel(&q, &p(&[y]), -tau, &p(&[0.0]), 0.0, &cut).unwrap();
            let b = exact_flat_kernel(&c, &p(&[y]), -tau, &p(&[0.0]), 0.0, &cut).unwrap();
            assert!((a / b - 1.0).abs() < 1e-10, "tau {tau} y {y}");
        }
    }
    let a = exact_flat_kernel(&q, &p(&[0.37]), -0.2, &p(&[0.0]), 0.0, &cut).unwrap();
    assert!((a - 0.999_490_221_458_506_1).abs() < 1e-13);
}

#[test]
fn trivial_deck_reproduces_the_cover() {
    let cover = FlatTorus::cube(2, 1.0);
    let q = ModelFlow::TorusQuotient {
        cover: cover.clone(),
        deck: vec![Isometry::identity(2)],
    };
    let f = ModelFlow::FlatTorus { torus: cover };
    let cut = Cutoff::default();
    let a = exact_flat_kernel(&q, &p(&[0.2, 0.7]), -0.1, &p(&[0.1, 0.1]), 0.0, &cut).unwrap();
    let b = exact_flat_kernel(&f, &p(&[0.2, 0.7]), -0.1, &p(&[0.1, 0.1]), 0.0, &cut).unwrap();
    assert!((a - b).abs() < 1e-15);
}

#[test]
fn quotient_slice_has_unit_mass() {
    let q = double_cover();
    let sl = exact_slice(&q, &p(&[0.3]), 0.0, -0.05, &SampleOptions::default()).unwrap();
    assert!((sl.mass() - 1.0).abs() < 1e-12);
}

#[test]
fn product_kernel_factorises() {
    let sq = ModelFlow::FlatTorus {
        torus: FlatTorus::cube(2, 1.0),
    };
    let c = circle(1.0);
    let cut = Cutoff::default();
    for &tau in &[0.01, 0.3, 4.0] {
        let a = exact_flat_kernel(&sq, &p(&[0.2, 0.45]), -tau, &p(&[0.0, 0.0]), 0.0, &cut).unwrap();
        let b1 = exact_flat_kernel(&c, &p(&[0.2]), -tau, &p(&[0.0]), 0.0, &cut).unwrap();
        let b2 = exact_flat_kernel(&c, &p(&[0.45]), -tau, &p(&[0.0]), 0.0, &cut).unwrap();
        assert!((a / (b1 * b2) - 1.0).abs() < 1e-12);
    }
}

#[test]
fn flat_semigroup_property() {
    let c = circle(1.0);
    let cut = Cutoff::default();
    let (t_start, s, t) = (-0.3, -0.1, 0.0);
    let n = 400;
    let mut total = 0.0;
    for i in 0..n {
        let y = i as f64 / n as f64;
        let a = exact_flat_kernel(&c, &p(&[0.1]), t_start, &p(&[y]), s, &cut).unwrap();
        let b = exact_flat_kernel(&c, &p(&[y]), s, &p(&[0.6]), t, &cut).unwrap();
        total += a * b / n as f64;
    }
    let direct = exact_flat_kernel(&c, &p(&[0.1]), t_start, &p(&[0.6]), t, &cut).unwrap();
    assert!((total / direct - 1.0).abs() < 1e-6);
}

#[test]
fn sup_kernel_examples() {
    let s = SupSearch::default();
    let m = sup_kernel(&circle(1.0), -1.0, 0.0, &s).unwrap();
    assert!((m.value - TORUS_ONE).abs() < 1e-14);
    let e = ModelFlow::EuclideanStatic { dim: 3 };
    let m = sup_kernel(&e, -2.0, -0.5, &s).unwrap();
    assert!((m.value - (4.0 * PI * 1.5f64).powf(-1.5)).abs() < 1e-16);
    let sph = ModelFlow::sphere(2, 1.0);
    let wide = sup_kernel(&sph, -3.0, -1.0, &s).unwrap().value;
    let narrow = sup_kernel(&sph, -2.0, -1.0, &s).unwrap().value;
    assert!(wide <= narrow);
    let q = sup_kernel(&double_cover(), -0.5, 0.0, &SupSearch { points: 8, ..s }).unwrap();
    let direct = sup_kernel(&circle(1.0), -0.5, 0.0, &SupSearch::default()).unwrap();
    assert!((q.value / direct.value - 1.0).abs() < 1e-10);
}

#[test]
fn harmonic_dimensions_follow_the_closed_forms() {
    for l in 0..20usize {
        let lf = l as f64;
        assert_eq!(harmonic_dim(2, l), 2.0 * lf + 1.0);
        assert!((harmonic_dim(3, l) - (lf + 1.0).powi(2)).abs() < 1e-9);
        assert!((harmonic_dim(4, l) - (lf + 1.0) * (lf + 2.0) * (2.0 * lf + 3.0) / 6.0).abs() < 1e-9);
    }
}

/// Heat kernel of the static unit 3-sphere by the method of images.
fn unit_s3_kernel(theta: f64, time: f64) -> f64 {
    let mut total = 0.0;
    for k in -20i32..=20 {
        let a = theta + 2.0 * PI * k as f64;
        total += a * (-a * a / (4.0 * time)).exp();
    }
    let ratio = if theta.abs() < 1e-12 { 1.0 } else { 1.0 / theta.sin() };
    // the k-sum of a e^{-a^2/4t} vanishes at theta = 0; use its derivative there
    let lead = if theta.abs() < 1e-12 {
        (-20i32..=20)
            .map(|k| {
                let a = 2.0 * PI * k as f64;
                (1.0 - a * a / (2.0 * time)) * (-a * a / (4.0 * time)).exp()
            })
            .sum::<f64>()
    } else {
        total * ratio
    };
    (4.0 * PI * time).powf(-1.5) * time.exp() * lead
}

#[test]
fn three_sphere_series_matches_image_formula() {
    let flow = ModelFlow::sphere(3, 1.0);
    let (s, t) = (-0.7, -0.1);
    let (cs, ct) = (flow.sphere_scale(s).unwrap(), flow.sphere_scale(t).unwrap());
    let time = (cs / ct).ln() / 4.0;
    let series = SphereSeries::new(&flow, s, t, None, 1e-12).unwrap();
    for &q in &[0.0, 0.3, 1.1, 2.5, 3.1] {
        let oracle = unit_s3_kernel(q, time) / cs.powf(1.5);
        let v = series.eval(q).h;
        assert!((v - oracle).abs() < 1e-9 * oracle + 1e-12, "theta {q}: {v} vs {oracle}");
    }
}

#[test]
fn series_satisfies_the_conjugate_heat_equation() {
    let flow = ModelFlow::sphere(2, 1.0);
    let t = 0.0;
    let s = -0.4;
    let ds = 1e-4;
    let at = |s: f64, q: f64| SphereSeries::new(&flow, s, t, None, 1e-13).unwrap().eval(q);
    for &q in &[0.2, 0.9, 2.0] {
        let v = at(s, q);
        // d/ds H = -(lap H - R H)
        let dh_ds = (at(s + ds, q).h - at(s - ds, q).h) / (2.0 * ds);
        let c = flow.sphere_scale(s).unwrap();
        let lap = (v.h_theta_theta + q.cos() / q.sin() * v.h_theta) / c;
        let r = 2.0 / c;
        assert!((dh_ds + lap - r * v.h).abs() < 1e-6 * (1.0 + v.h.abs()), "theta {q}");
    }
}

#[test]
fn series_derivatives_match_finite_differences() {
    let flow = ModelFlow::sphere(3, 1.0);
    let series = SphereSeries::new(&flow, -0.3, 0.0, None, 1e-13).unwrap();
    let h = 1e-4;
    for &q in &[0.1, 0.8, 2.2] {
        let v = series.eval(q);
        let (a, b) = (series.eval(q + h).h, series.eval(q - h).h);
        assert!((v.h_theta - (a - b) / (2.0 * h)).abs() < 1e-6 * (1.0 + v.h_theta.abs()));
        let fd2 = (a - 2.0 * v.h + b) / (h * h);
        assert!((v.h_theta_theta - fd2).abs() < 1e-4 * (1.0 + v.h_theta_theta.abs()));
    }
}

#[test]
fn spectral_slice_has_unit_mass_and_short_time_gaussian_shape() {
    let flow = ModelFlow::sphere(2, 1.0);
    for &s in &[-1e-3, -0.5, -8.0] {
        let sl = spectral_slice(&flow, 0.0, s, &SampleOptions::default()).unwrap();
        assert!((sl.mass() - 1.0).abs() < 1e-9, "s {s}: {}", sl.mass());
    }
    let tau = 1e-3;
    let series = SphereSeries::new(&flow, -tau, 0.0, None, 1e-10).unwrap();
    let c = flow.sphere_scale(0.0).unwrap();
    for &q in &[0.0, 0.01, 0.03] {
        let gauss = (-c * q * q / (4.0 * tau)).exp() / (4.0 * PI * tau);
        assert!((series.eval(q).h / gauss - 1.0).abs() < 2e-3, "theta {q}");
    }
}

#[test]
fn fixed_degree_reports_truncation() {
    let flow = ModelFlow::sphere(2, 1.0);
    match spectral_sphere_kernel(&flow, 0.0, -0.01, 0.0, 5, 1e-8) {
        Err(Error::Truncation { suggested, .. }) => assert!(suggested > 5),
        other => panic!("expected truncation, got {other:?}"),
    }
    let ok = spectral_sphere_kernel(&flow, 0.0, -4.0, 0.0, 40, 1e-8).unwrap();
    assert!(ok.h > 0.0);
}

#[test]
fn sphere_semigroup_property() {
    let flow = ModelFlow::sphere(2, 1.0);
    // H_{(x,t)}(z,T) = int H_{(y,s)}(z,T) H_{(x,t)}(y,s) dg_s(y), with x, z at angle 0.7
    let (big_t, s, t) = (-1.0, -0.4, 0.0);
    let inner = SphereSeries::new(&flow, big_t, s, None, 1e-12).unwrap();
    let outer = SphereSeries::new(&flow, s, t, None, 1e-12).unwrap();
    let whole = SphereSeries::new(&flow, big_t, t, None, 1e-12).unwrap();
    let sep: f64 = 0.7;
    let (gx, gw) = crate::quad::composite_gauss(&(0..=64).map(|i| PI * i as f64 / 64.0).collect::<Vec<_>>(), 16);
    let (px, pw) = crate::quad::composite_gauss(&(0..=64).map(|i| 2.0 * PI * i as f64 / 64.0).collect::<Vec<_>>(), 16);
    let c = flow.sphere_scale(s).unwrap();
    let mut total = 0.0;
    for (th, w) in gx.iter().zip(&gw) {
        let a = outer.eval(*th).h;
        for (ph, v) in px.iter().zip(&pw) {
            let cosd = th.cos() * sep.cos() + th.sin() * sep.sin() * ph.cos();
            let b = inner.eval(cosd.clamp(-1.0, 1.0).acos()).h;
            total += w * v * th.sin() * c * a * b;
        }
    }
    let direct = whole.eval(sep).h;
    assert!((total / direct - 1.0).abs() < 1e-6);
}

#[test]
fn field_lookup_and_csv() {
    let c = circle(1.0);
    let field = exact_field(&c, &p(&[0.0]), 0.0, &[-0.5, -0.1], &SampleOptions::default()).unwrap();
    assert_eq!(field.times(), vec![-0.5, -0.1]);
    assert!(matches!(field.slice(-0.3), Err(Error::MissingSlice(_))));
    field.check(1e-10).unwrap();
    let mut buf = Vec::new();
    field.write_csv(&mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert!(text.starts_with("s,q,H,f\n"));
    assert_eq!(text.lines().count(), 1 + field.slices.iter().map(|s| s.len()).sum::<usize>());
}

proptest! {
    #[test]
    fn quotient_dominates_each_orbit_term(y in 0.0f64..2.0, tau in 0.001f64..3.0) {
        let cover = FlatTorus::cube(1, 2.0);
        let deck = vec![Isometry::identity(1), Isometry::translation(vec![1.0])];
        let cut = Cutoff::default();
        let q = quotient_kernel(&cover, &deck, &[0.0], &[y], tau, &cut).unwrap().value();
        for h in &deck {
            let term = lattice_kernel(&cover, &h.apply(&[y]), tau, &cut).unwrap().value();
            prop_assert!(q >= term);
        }
    }

    #[test]
    fn torus_kernel_is_symmetric_under_isometries(x in -1.0f64..1.0, y in -1.0f64..1.0, shift in -3.0f64..3.0, tau in 0.001f64..2.0) {
        let torus = FlatTorus::cube(1, 1.0);
        let cut = Cutoff::default();
        let a = lattice_kernel(&torus, &[y - x], tau, &cut).unwrap().value();
        let b = lattice_kernel(&torus, &[(y + shift) - (x + shift)], tau, &cut).unwrap().value();
        let c = lattice_kernel(&torus, &[x - y], tau, &cut).unwrap().value();
        prop_assert!((a - b).abs() < 1e-9 * a.max(1e-300));
        prop_assert!((a - c).abs() < 1e-9 * a.max(1e-300));
    }

    #[test]
    fn sphere_kernel_is_positive_near_the_base(theta in 0.0f64..0.5, s in -10.0f64..-0.01) {
        let flow = ModelFlow::sphere(2, 1.0);
        let v = SphereSeries::new(&flow, s, 0.0, None, 1e-8).unwrap().eval(theta);
        prop_assert!(v.h > 0.0);
    }
}
