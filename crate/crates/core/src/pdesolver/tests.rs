use super::*;
use crate::kernels::{exact_flat_kernel, sup_kernel, SphereSeries};

fn circle_grid(nodes: usize) -> ReducedGrid {
    ReducedGrid::periodic(1.0, nodes).unwrap()
}

fn max_rel_err(slice: &KernelSlice, oracle: impl Fn(f64) -> f64, floor: f64) -> f64 {
    let peak = slice.peak();
    (0..slice.len())
        .filter(|&i| slice.h[i] >= floor * peak)
        .map(|i| {
            let o = oracle(slice.coords[i][0]);
            (slice.h[i] / o - 1.0).abs()
        })
        .fold(0.0, f64::max)
}

fn torus_error(nodes: usize, tau: f64, tau0: Option<f64>) -> f64 {
    let flow = ModelFlow::circle(1.0);
    let x = Point(vec![0.3]);
    let opts = SolverOptions {
        tau0,
        ..SolverOptions::default()
    };
    let field = solve_conjugate(&flow, &x, 0.0, -tau, &circle_grid(nodes), &opts).unwrap();
    let sl = field.slice(-tau).unwrap();
    let cut = Cutoff::default();
    max_rel_err(
        sl,
        |q| exact_flat_kernel(&flow, &Point(vec![q]), -tau, &x, 0.0, &cut).unwrap(),
        0.0,
    )
}

fn sphere_error(cells: usize, s: f64, tau0: Option<f64>) -> f64 {
    let flow = ModelFlow::sphere(2, 1.0);
    let grid = ReducedGrid::sphere(2, cells).unwrap();
    let opts = SolverOptions {
        tau0,
        ..SolverOptions::default()
    };
    let field = solve_conjugate(&flow, &Point(vec![0.0]), 0.0, s, &grid, &opts).unwrap();
    let series = SphereSeries::new(&flow, s, 0.0, None, 1e-12).unwrap();
    max_rel_err(field.slice(s).unwrap(), |q| series.eval(q).h, 0.0)
}

#[test]
fn circle_solve_matches_lattice_kernel() {
    let err = torus_error(512, 1.0, None);
    assert!(err <= 1e-4, "max relative error {err:e}");
}

#[test]
fn sphere_solve_matches_spectral_kernel() {
    let err = sphere_error(1024, -0.5, None);
    assert!(err <= 1e-3, "max relative error {err:e}");
}

#[test]
fn refinement_is_second_order() {
    let (a, b) = (torus_error(128, 0.02, Some(1e-3)), torus_error(256, 0.02, Some(1e-3)));
    assert!((a / b).log2() >= 1.9, "circle: {a:e} -> {b:e}");
    let (a, b) = (sphere_error(256, -0.5, Some(5e-3)), sphere_error(512, -0.5, Some(5e-3)));
    assert!((a / b).log2() >= 1.9, "sphere: {a:e} -> {b:e}");
}

#[test]
fn conjugate_mass_is_conserved_at_every_slice() {
    let flow = ModelFlow::sphere(3, 1.0);
    let grid = ReducedGrid::sphere(3, 256).unwrap();
    let opts = SolverOptions {
        slices: vec![-0.01, -0.1, -1.0, -8.0],
        ..SolverOptions::default()
    };
    let field = solve_conjugate(&flow, &Point(vec![0.0]), 0.0, -64.0, &grid, &opts).unwrap();
    assert_eq!(field.slices.len(), 5);
    for sl in &field.slices {
        assert!((sl.mass() - 1.0).abs() < 1e-6, "slice {}: {}", sl.time, sl.mass());
        assert!(sl.h.iter().all(|&h| h > 0.0));
    }
    let diag = field.meta.diagnostics.as_ref().unwrap();
    assert!(diag["mass_drift"].as_f64().unwrap() < 1e-10);
    assert!(diag["step"]["steps"].as_u64().unwrap() > 0);
}

#[test]
fn euclidean_seed_is_the_gaussian() {
    let flow = ModelFlow::EuclideanStatic { dim: 3 };
    let grid = ReducedGrid::euclidean_radial(3, 1.0, 4096).unwrap();
    let tau0 = 1e-3;
    let seed = delta_seed(&flow, &Point(vec![0.0; 3]), 0.0, &grid, tau0).unwrap();
    assert!((seed.mass() - 1.0).abs() < 1e-10);
    let ratios: Vec<f64> = (0..seed.len())
        .filter(|&i| seed.coords[i][0] < 0.3)
        .map(|i| {
            let r = seed.coords[i][0];
            seed.h[i] / (4.0 * PI * tau0).powf(-1.5) / (-r * r / (4.0 * tau0)).exp()
        })
        .collect();
    let (lo, hi) = ratios.iter().fold((f64::INFINITY, 0.0f64), |(a, b), &r| (a.min(r), b.max(r)));
    assert!(hi / lo - 1.0 < 1e-12, "seed shape differs from the Gaussian");
    // the common factor is the lumped quadrature error of the seed
    assert!((lo - 1.0).abs() < 1e-4, "normalisation factor {lo}");
}

#[test]
fn sphere_seed_matches_spectral_kernel_near_the_pole() {
    let flow = ModelFlow::sphere(2, 1.0);
    let grid = ReducedGrid::sphere(2, 4096).unwrap();
    let tau0 = 1e-3;
    let seed = delta_seed(&flow, &Point(vec![0.0]), 0.0, &grid, tau0).unwrap();
    assert!((seed.mass() - 1.0).abs() < 1e-10);
    let series = SphereSeries::new(&flow, -tau0, 0.0, None, 1e-12).unwrap();
    for i in 0..seed.len() {
        let q = seed.coords[i][0];
        if q > 0.05 {
            break;
        }
        let o = series.eval(q).h;
        assert!((seed.h[i] / o - 1.0).abs() <= 1e-4, "theta {q}: {} vs {o}", seed.h[i]);
    }
}

#[test]
fn coarse_grids_are_rejected() {
    let flow = ModelFlow::circle(1.0);
    let grid = circle_grid(64);
    let err = delta_seed(&flow, &Point(vec![0.0]), 0.0, &grid, 1e-4).unwrap_err();
    assert!(matches!(err, Error::Config(_)));
    let opts = SolverOptions {
        slices: vec![0.5],
        ..SolverOptions::default()
    };
    let err = solve_conjugate(&flow, &Point(vec![0.0]), 0.0, -1.0, &grid, &opts).unwrap_err();
    assert!(matches!(err, Error::Schedule(_)));
}

#[test]
fn static_forward_and_conjugate_kernels_coincide() {
    let flow = ModelFlow::circle(1.0);
    let grid = circle_grid(256);
    let opts = SolverOptions {
        slices: vec![-0.3],
        ..SolverOptions::default()
    };
    let conj = solve_conjugate(&flow, &Point(vec![0.2]), 0.0, -1.0, &grid, &opts).unwrap();
    let fopts = SolverOptions {
        slices: vec![0.3],
        ..SolverOptions::default()
    };
    let fwd = solve_forward(&flow, &Point(vec![0.2]), -1.0, 0.0, &grid, &SolverOptions {
        slices: vec![-0.7],
        ..fopts
    })
    .unwrap();
    let (a, b) = (conj.slice(-0.3).unwrap(), fwd.slice(-0.7).unwrap());
    assert!((a.tau - b.tau).abs() < 1e-14);
    for i in 0..a.len() {
        assert!((a.h[i] - b.h[i]).abs() <= 1e-10 * a.h[i].max(1e-3));
    }
}

#[test]
fn constant_data_stays_constant() {
    let flow = ModelFlow::circle(1.0);
    let op = ReducedOperator::new(&flow, &circle_grid(128), 0).unwrap();
    let u = vec![0.7; 128];
    let mut blocks = vec![Block {
        op,
        y: u.clone(),
        x: u,
    }];
    let mut integ = Integrator::new(Form::Nodal, Clock { origin: -1.0, sign: 1.0 }, 1e-8, 1e-12, 1e-3, 10_000);
    let mut e = 0.0;
    integ.advance(&mut blocks, &mut e, 1.0).unwrap();
    let dev = blocks[0].x.iter().fold(0.0f64, |m, v| m.max((v - 0.7).abs()));
    assert!(dev < 1e-12, "deviation {dev:e}");
}

#[test]
fn sphere_forward_kernel_matches_spectral_kernel() {
    let flow = ModelFlow::sphere(2, 1.0);
    let grid = ReducedGrid::sphere(2, 2048).unwrap();
    let opts = SolverOptions {
        slices: vec![-0.5],
        ..SolverOptions::default()
    };
    let fwd = solve_forward(&flow, &Point(vec![0.0]), -1.0, 0.0, &grid, &opts).unwrap();
    for &t in &[-0.5, 0.0] {
        let series = SphereSeries::new(&flow, -1.0, t, None, 1e-12).unwrap();
        let err = max_rel_err(fwd.slice(t).unwrap(), |q| series.eval(q).h, 0.0);
        assert!(err <= 1e-3, "t {t}: {err:e}");
    }
}

#[test]
fn duality_pairing_is_constant() {
    let flow = ModelFlow::sphere(2, 1.0);
    let grid = ReducedGrid::sphere(2, 512).unwrap();
    let times = [-0.8, -0.5, -0.2];
    let conj = solve_conjugate(&flow, &Point(vec![0.0]), 0.0, -0.8, &grid, &SolverOptions {
        slices: times.to_vec(),
        ..SolverOptions::default()
    })
    .unwrap();
    let fwd = solve_forward(&flow, &Point(vec![0.0]), -1.0, -0.2, &grid, &SolverOptions {
        slices: times.to_vec(),
        ..SolverOptions::default()
    })
    .unwrap();
    let pair: Vec<f64> = times
        .iter()
        .map(|&s| {
            let (h, u) = (conj.slice(s).unwrap(), fwd.slice(s).unwrap());
            (0..h.len()).map(|i| h.weights[i] * h.h[i] * u.h[i]).sum()
        })
        .collect();
    for p in &pair[1..] {
        assert!((p / pair[0] - 1.0).abs() < 1e-5, "{pair:?}");
    }
}

#[test]
fn maximum_principle_against_sup_kernel() {
    let flow = ModelFlow::sphere(2, 1.0);
    let grid = ReducedGrid::sphere(2, 256).unwrap();
    let times = [-1.0, -2.0, -4.0];
    let field = solve_conjugate(&flow, &Point(vec![0.0]), 0.0, -4.0, &grid, &SolverOptions {
        slices: times.to_vec(),
        ..SolverOptions::default()
    })
    .unwrap();
    for &s in &times {
        let bound = sup_kernel(&flow, s, s + 1.0, &SupSearch::default()).unwrap().value;
        let peak = field.slice(s).unwrap().peak();
        assert!(peak <= 1.01 * bound, "slice {s}: {peak} vs {bound}");
    }
}

#[test]
fn cigar_tip_kernel_conserves_mass_and_reports_leakage() {
    let flow = ModelFlow::CigarSoliton;
    let grid = ReducedGrid::log_radial(60.0, 0.02, 0.01).unwrap();
    let field = solve_conjugate(&flow, &Point(vec![0.0]), 0.0, -16.0, &grid, &SolverOptions {
        slices: vec![-1.0, -4.0],
        ..SolverOptions::default()
    })
    .unwrap();
    for sl in &field.slices {
        assert!((sl.mass() - 1.0).abs() < 1e-6, "slice {}: {}", sl.time, sl.mass());
        assert!(sl.h.iter().all(|&h| h > 0.0));
    }
    let diag = field.meta.diagnostics.as_ref().unwrap();
    assert!(diag["step"]["leakage"].as_f64().unwrap() >= 0.0);
}

#[test]
fn cigar_off_tip_kernel_is_a_probability_density() {
    let flow = ModelFlow::CigarSoliton;
    let grid = ReducedGrid::log_radial(40.0, 0.02, 0.01).unwrap();
    let field = solve_conjugate(&flow, &Point(vec![1.0]), 0.0, -2.0, &grid, &SolverOptions {
        slices: vec![-0.5],
        ..SolverOptions::default()
    })
    .unwrap();
    for sl in &field.slices {
        assert!((sl.mass() - 1.0).abs() < 1e-6, "slice {}: {}", sl.time, sl.mass());
        assert_eq!(sl.coords[0].len(), 2);
        let best = (0..sl.len()).max_by(|&a, &b| sl.h[a].total_cmp(&sl.h[b])).unwrap();
        assert_eq!(sl.coords[best][1], 0.0, "peak should sit on the base ray");
    }
    let diag = field.meta.diagnostics.as_ref().unwrap();
    assert!(diag["modes_initial"].as_u64().unwrap() > 10);
}

#[test]
fn cigar_sup_kernel_is_the_cylinder_limit() {
    let search = SupSearch {
        cigar_radii: vec![0.0, 4.0],
        grid: crate::geometry::GridSpec {
            truncation: Some(40.0),
            ..Default::default()
        },
        ..SupSearch::default()
    };
    let m = sup_kernel(&ModelFlow::CigarSoliton, -1.0, 0.0, &search).unwrap();
    assert_eq!(m.method, KernelMethod::Pde);
    let cylinder = (1.0 + 2.0 * (-PI * PI).exp()) / (4.0 * PI);
    assert!(m.value >= cylinder && m.value < 1.001 * cylinder, "{} vs {cylinder}", m.value);
    // positive curvature lowers the peak at the tip
    let tip = solve_conjugate(&ModelFlow::CigarSoliton, &Point(vec![0.0]), 0.0, -1.0, &ReducedGrid::log_radial(40.0, 0.02, 0.01).unwrap(), &SolverOptions::default()).unwrap();
    assert!(tip.slice(-1.0).unwrap().peak() < cylinder);
}
