//! Acceptance criteria, one line each. Exits non-zero when any criterion fails.

use ricci_entropy::entropy::{entropy_w, kernel_field, nash_n, FieldOptions};
use ricci_entropy::kernels::{exact_flat_kernel, Cutoff, KernelSlice, SphereSeries};
use ricci_entropy::pdesolver::{solve_conjugate, solve_forward, SolverOptions};
use ricci_entropy::scenario::zoo;
use ricci_entropy::verify::{find, run_check, CheckReport, Outcome};
use ricci_entropy::{ModelFlow, Point, ReducedGrid};
use std::time::Instant;

type Verdict = Result<String, String>;

fn ensure(ok: bool, msg: String) -> Verdict {
    if ok {
        Ok(msg)
    } else {
        Err(msg)
    }
}

fn report(id: &str, scenario: &str) -> Result<CheckReport, String> {
    let sc = zoo(scenario).map_err(|e| e.to_string())?.remove(0);
    let def = find(id).map_err(|e| e.to_string())?;
    run_check(def, &sc).map_err(|e| format!("{id} on {scenario}: {e}"))
}

/// Runs catalog checks and requires every one to pass.
fn checks(pairs: &[(&str, &[&str])]) -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for (id, scenarios) in pairs {
        for sc in *scenarios {
            let r = report(id, sc)?;
            ok &= r.outcome == Outcome::Pass;
            notes.push(format!("{id}@{sc}={:?}({:.2e})", r.outcome, r.residual).to_lowercase());
        }
    }
    ensure(ok, notes.join(" "))
}

/// Maximum relative error over unmasked nodes and mass-weighted L1 error.
fn errors(slice: &KernelSlice, oracle: impl Fn(f64) -> f64) -> (f64, f64) {
    let (mut max_rel, mut l1): (f64, f64) = (0.0, 0.0);
    for i in 0..slice.len() {
        let o = oracle(slice.coords[i][0]);
        l1 += slice.weights[i] * (slice.h[i] - o).abs();
        if slice.valid[i] {
            max_rel = max_rel.max((slice.h[i] / o - 1.0).abs());
        }
    }
    (max_rel, l1)
}

fn solver(tau0: Option<f64>) -> SolverOptions {
    match tau0 {
        Some(_) => SolverOptions {
            tau0,
            rtol: 1e-9,
            ..SolverOptions::default()
        },
        None => SolverOptions::default(),
    }
}

fn circle_error(nodes: usize, tau: f64, tau0: Option<f64>) -> Result<(f64, f64), String> {
    let flow = ModelFlow::circle(1.0);
    let x = Point(vec![0.3]);
    let grid = ReducedGrid::periodic(1.0, nodes).map_err(|e| e.to_string())?;
    let field = solve_conjugate(&flow, &x, 0.0, -tau, &grid, &solver(tau0)).map_err(|e| e.to_string())?;
    let cut = Cutoff::default();
    Ok(errors(field.slice(-tau).map_err(|e| e.to_string())?, |q| {
        exact_flat_kernel(&flow, &Point(vec![q]), -tau, &x, 0.0, &cut).unwrap()
    }))
}

fn sphere_error(cells: usize, s: f64, tau0: Option<f64>, forward: bool) -> Result<(f64, f64), String> {
    let flow = ModelFlow::sphere(2, 1.0);
    let grid = ReducedGrid::sphere(2, cells).map_err(|e| e.to_string())?;
    let opts = solver(tau0);
    let pole = Point(vec![0.0]);
    let (field, at) = if forward {
        (solve_forward(&flow, &pole, s, 0.0, &grid, &opts).map_err(|e| e.to_string())?, 0.0)
    } else {
        (solve_conjugate(&flow, &pole, 0.0, s, &grid, &opts).map_err(|e| e.to_string())?, s)
    };
    let series = SphereSeries::new(&flow, s, 0.0, None, 1e-12).map_err(|e| e.to_string())?;
    Ok(errors(field.slice(at).map_err(|e| e.to_string())?, |q| series.eval(q).h))
}

fn gaussian_identity() -> Verdict {
    let start = Instant::now();
    let times = [-1.0, -10.0, -100.0];
    let mut worst: f64 = 0.0;
    for dim in 1..=3 {
        let flow = ModelFlow::EuclideanStatic { dim };
        let f = kernel_field(&flow, &Point::origin(dim), 0.0, &times, &FieldOptions::default())
            .map_err(|e| e.to_string())?;
        for &s in &times {
            let (w, n) = (entropy_w(&f, s).map_err(|e| e.to_string())?, nash_n(&f, s).map_err(|e| e.to_string())?);
            worst = worst.max(w.value.abs()).max(n.value.abs());
        }
    }
    let secs = start.elapsed().as_secs_f64();
    ensure(worst <= 1e-8 && secs < 1.0, format!("max |W|, |N| = {worst:.2e} over n = 1..3, {secs:.3} s"))
}

fn oracle_equivalence() -> Verdict {
    let start = Instant::now();
    let circle = circle_error(512, 1.0, None)?.0;
    let circle_secs = start.elapsed().as_secs_f64();
    let start = Instant::now();
    let sphere = sphere_error(1024, -0.5, None, false)?.0;
    let sphere_fwd = sphere_error(2048, -1.0, None, true)?.0;
    let sphere_secs = start.elapsed().as_secs_f64();
    let orders = |a: (f64, f64), b: (f64, f64)| ((a.1 / b.1).log2(), (a.0 / b.0).log2());
    let (circle_l1, circle_max) = orders(circle_error(128, 0.02, Some(1e-3))?, circle_error(256, 0.02, Some(1e-3))?);
    let (sphere_l1, sphere_max) = orders(
        sphere_error(512, -0.5, Some(5e-3), false)?,
        sphere_error(1024, -0.5, Some(5e-3), false)?,
    );
    ensure(
        circle <= 1e-4 && sphere <= 1e-3 && sphere_fwd <= 1e-3 && circle_l1 >= 2.0 && sphere_l1 >= 2.0
            && circle_secs < 60.0 && sphere_secs < 60.0,
        format!(
            "max rel err circle {circle:.2e} ({circle_secs:.1} s), sphere conjugate {sphere:.2e} forward {sphere_fwd:.2e} ({sphere_secs:.1} s); L1 orders {circle_l1:.3} / {sphere_l1:.3} (max-relative {circle_max:.3} / {sphere_max:.3})"
        ),
    )
}

fn hamilton() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for sc in ["torus", "sphere"] {
        let r = report("hamilton-gradient-estimate", sc)?;
        ok &= r.outcome == Outcome::Pass;
        notes.push(format!(
            "{sc}: {}/{} nodes, {} pole-adjacent excluded, worst margin {:.2e}",
            r.values["satisfied"], r.values["nodes"], r.values["pole_adjacent_excluded"],
            r.values["worst_margin"].as_f64().unwrap_or(f64::NAN)
        ));
    }
    ensure(ok, notes.join("; "))
}

fn gap_evidence() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for sc in ["euclidean", "sphere"] {
        let r = report("entropy-gap-evidence", sc)?;
        ok &= r.outcome == Outcome::Pass;
        notes.push(format!("W limit on {sc} = {:.9}", r.values["w_limit"]["estimate"].as_f64().unwrap_or(f64::NAN)));
    }
    ensure(ok, notes.join(", "))
}

fn noncollapsing() -> Verdict {
    let mut notes = Vec::new();
    let mut ok = true;
    for sc in ["euclidean", "sphere", "cigar"] {
        let r = report("noncollapsing-evidence", sc)?;
        ok &= r.outcome == Outcome::Pass;
        let detail = match sc {
            "cigar" => format!("last tip N {:.3}", r.values["tip_n_last"].as_f64().unwrap_or(f64::NAN)),
            _ => format!("min ratio {:.3}", r.values["min_ratio"].as_f64().unwrap_or(f64::NAN)),
        };
        notes.push(format!("{sc}: {:?}, {detail}", r.outcome).to_lowercase());
    }
    ensure(ok, notes.join("; "))
}

fn main() {
    const ST: &[&str] = &["sphere", "torus"];
    let criteria: Vec<(&str, Box<dyn Fn() -> Verdict>)> = vec![
        ("Gaussian shrinker identity", Box::new(gaussian_identity)),
        ("PDE solver vs exact and spectral oracles", Box::new(oracle_equivalence)),
        (
            "entropy identities on the shrinking sphere",
            Box::new(|| {
                checks(&[
                    ("w-vanishes-at-base-time", &["sphere"]),
                    ("nash-time-average", &["sphere"]),
                    ("w-below-nash-below-zero", &["sphere"]),
                    ("w-production-identity", &["sphere"]),
                    ("nash-derivative-identity", &["sphere"]),
                    ("nash-deficit-integral", &["sphere"]),
                ])
            }),
        ),
        ("torus Nash divergence", Box::new(|| checks(&[("torus-nash-divergence", &["torus"])]))),
        ("product additivity", Box::new(|| checks(&[("product-nash-additivity", &["product"])]))),
        ("covering inequality", Box::new(|| checks(&[("covering-nash-inequality", &["cover"])]))),
        (
            "Poincare and log-Sobolev battery",
            Box::new(|| {
                checks(&[
                    ("poincare-inequality", &["euclidean", "torus", "sphere"]),
                    ("log-sobolev-inequality", &["euclidean", "torus", "sphere"]),
                    ("gaussian-shrinker-equality", &["euclidean"]),
                ])
            }),
        ),
        ("Hamilton gradient estimate", Box::new(hamilton)),
        ("entropy chain", Box::new(|| checks(&[("entropy-chain", ST)]))),
        ("mean-value inequality", Box::new(|| checks(&[("nash-mean-value-inequality", ST)]))),
        ("entropy gap evidence", Box::new(gap_evidence)),
        ("noncollapsing and collapse evidence", Box::new(noncollapsing)),
    ];
    let mut failed = 0;
    let total = Instant::now();
    for (k, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (tag, msg) = match run() {
            Ok(m) => ("PASS", m),
            Err(m) => {
                failed += 1;
                ("FAIL", m)
            }
        };
        println!("criterion {:>2} {tag} {name} [{:.1} s]: {msg}", k + 1, start.elapsed().as_secs_f64());
    }
    println!(
        "acceptance: {} of {} criteria passed in {:.1} s",
        criteria.len() - failed,
        criteria.len(),
        total.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
