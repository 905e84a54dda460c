use crate::output::{load_config, OutRoot, suite_status, ConfigRecord, Manifest, RunDir};
use crate::Status;
use anyhow::Result;
use ricci_entropy::entropy::{kernel_field, oracle_deviation, EntropyCurve, FieldOptions, MethodChoice};
use ricci_entropy::verify::run_suite;
use ricci_entropy::{KernelField, Point, ScenarioConfig};
use serde_json::{json, Value};
use std::path::{Path, PathBuf};

/// Slack on `W <= N <= 0` and the monotonicity of `W` beyond the error estimates.
const INVARIANT_SLACK: f64 = 1e-9;

/// Entropy curve of one base point, with limits when the schedule allows.
pub struct PointRun {
    pub field: KernelField,
    pub curve: EntropyCurve,
}

pub fn solve_point(sc: &ScenarioConfig, base: &Point, opts: &FieldOptions) -> ricci_entropy::Result<PointRun> {
    let times = sc.times();
    let field = kernel_field(&sc.flow, base, sc.base_time, &times, opts)?;
    let mut curve = EntropyCurve::from_field(&field, &times)?;
    if curve.samples.len() >= 3 {
        curve.extrapolate(&sc.tolerances.limit)?;
    }
    curve.check_invariants(INVARIANT_SLACK)?;
    Ok(PointRun { field, curve })
}

fn run_dir(sc: &ScenarioConfig, root: &OutRoot) -> PathBuf {
    match (&sc.output, root.explicit) {
        (Some(out), false) => PathBuf::from(out),
        _ => root.path.join(&sc.name),
    }
}

pub fn cmd_run(config: &Path, root: &OutRoot) -> Result<Status> {
    let (sc, raw) = load_config(config)?;
    let mut dir = RunDir::create(run_dir(&sc, root))?;
    let mut manifest = Manifest::new(vec![ConfigRecord::new(&sc, Some(config), Some(&raw))?]);
    let result = execute(&sc, &mut dir, &mut manifest);
    let status = match &result {
        Ok(s) => *s,
        Err(e) => crate::classify(e),
    };
    manifest.finish(&mut dir, status as u8)?;
    result
}

fn execute(sc: &ScenarioConfig, dir: &mut RunDir, manifest: &mut Manifest) -> Result<Status> {
    let opts = sc.field_options();
    let mut points = Vec::new();
    for (i, base) in sc.bases().iter().enumerate() {
        let run = manifest.timings.time(format!("point_{i}"), || solve_point(sc, base, &opts))?;
        dir.write_with(&format!("kernel_{i}.csv"), |b| run.field.write_csv(b))?;
        dir.write_with(&format!("entropy_{i}.csv"), |b| run.curve.write_csv(b))?;
        let mut entry = run.curve.summary();
        if sc.method.cross_check() {
            let pde = FieldOptions {
                method: MethodChoice::Pde,
                ..opts.clone()
            };
            let cross = manifest.timings.time(format!("point_{i}_pde"), || solve_point(sc, base, &pde))?;
            let deviation = oracle_deviation(&cross.field, &opts.sample)?;
            dir.write_with(&format!("kernel_pde_{i}.csv"), |b| cross.field.write_csv(b))?;
            dir.write_with(&format!("entropy_pde_{i}.csv"), |b| cross.curve.write_csv(b))?;
            entry["pde"] = cross.curve.summary();
            entry["oracle_deviation"] = json!(deviation);
        }
        print_curve(i, &run.curve);
        points.push(entry);
    }
    let mut status = Status::Ok;
    let mut suite = Value::Null;
    if !sc.checks.is_empty() {
        let report = manifest
            .timings
            .time("checks", || run_suite(&sc.checks, std::slice::from_ref(sc)))?;
        print!("{}", report.table());
        dir.write_suite(&report)?;
        status = suite_status(&report);
        suite = json!({
            "passed": report.passed,
            "failed": report.failed,
            "indeterminate": report.indeterminate,
            "errors": report.errors,
            "pass": report.pass,
        });
    }
    dir.write_json("summary.json", &json!({ "scenario": sc.name, "points": points, "checks": suite }))?;
    println!("wrote {}", dir.path.display());
    Ok(status)
}

fn print_curve(i: usize, curve: &EntropyCurve) {
    let fmt = |l: &Option<ricci_entropy::entropy::Limit>| match l {
        Some(l) => format!("{:.9}{}", l.estimate, if l.converged { "" } else { " (not converged)" }),
        None => "-".into(),
    };
    println!(
        "point {i} {:?}: {} samples, W -> {}, N -> {}",
        curve.base.coords(),
        curve.samples.len(),
        fmt(&curve.w_limit),
        fmt(&curve.n_limit)
    );
}
