use crate::output::{load_config, ConfigRecord, Manifest, OutRoot, RunDir};
use crate::run::solve_point;
use crate::Status;
use anyhow::{anyhow, bail, Context, Result};
use rayon::prelude::*;
use ricci_entropy::entropy::oracle_deviation;
use ricci_entropy::{Error, ScenarioConfig};
use serde_json::Value;
use std::f64::consts::PI;
use std::fmt::Write as _;
use std::path::Path;
use std::time::Instant;

/// Ball radii probed by `--ratios`.
const RATIO_SCALES: [f64; 5] = [0.25, 0.5, 1.0, 2.0, 4.0];
const CUBE_SAMPLES: usize = 32;

#[derive(Clone, Debug, PartialEq)]
pub enum Axis {
    Nodes,
    Truncation,
    Depth,
    Tau,
    /// JSON pointer into the scenario file.
    Param(String),
}

impl Axis {
    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "nodes" => Axis::Nodes,
            "truncation" => Axis::Truncation,
            "depth" => Axis::Depth,
            "tau" => Axis::Tau,
            _ => match s.strip_prefix("param:") {
                Some(p) if p.starts_with('/') => Axis::Param(p.to_string()),
                _ => bail!("unknown sweep axis {s:?}; expected nodes, truncation, depth, tau or param:/json/pointer"),
            },
        })
    }

    fn label(&self) -> String {
        match self {
            Axis::Param(p) => format!("param{}", p.replace('/', "_")),
            other => format!("{other:?}").to_lowercase(),
        }
    }

    /// The scenario with this axis set to `value`.
    pub fn apply(&self, base: &ScenarioConfig, value: &str) -> Result<ScenarioConfig> {
        let num = || value.parse::<f64>().with_context(|| format!("axis value {value:?} is not a number"));
        let count = || value.parse::<usize>().with_context(|| format!("axis value {value:?} is not a count"));
        let mut sc = base.clone();
        match self {
            Axis::Nodes => sc.grid.nodes = count()?,
            Axis::Truncation => sc.grid.truncation = Some(num()?),
            Axis::Depth => {
                sc.schedule.depth = Some(count()?);
                sc.schedule.times.clear();
            }
            Axis::Tau => {
                let tau = num()?;
                if !(tau > 0.0) {
                    bail!("tau {tau} must be positive");
                }
                sc.schedule.times = [0.25, 0.5, 1.0].iter().map(|k| sc.base_time - k * tau).collect();
            }
            Axis::Param(pointer) => {
                let mut doc = serde_json::to_value(&sc)?;
                let slot = doc
                    .pointer_mut(pointer)
                    .ok_or_else(|| anyhow!("{pointer} does not name a field of the scenario"))?;
                *slot = serde_json::from_str(value).unwrap_or_else(|_| Value::String(value.to_string()));
                sc = serde_json::from_value(doc).with_context(|| format!("setting {pointer} to {value}"))?;
            }
        }
        sc.validate()?;
        Ok(sc)
    }
}

/// One sweep row; absent quantities are left empty in the CSV.
#[derive(Default)]
struct Row {
    value: String,
    w_limit: Option<f64>,
    w_converged: Option<bool>,
    n_limit: Option<f64>,
    n_converged: Option<bool>,
    t_last: Option<f64>,
    n_last: Option<f64>,
    n_shifted: Option<f64>,
    oracle_error: Option<f64>,
    order: Option<f64>,
    min_ratio: Option<f64>,
    elapsed_s: f64,
    error: Option<String>,
}

fn cell<T: std::fmt::Display>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn sci(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.12e}")).unwrap_or_default()
}

fn measure(sc: &ScenarioConfig, axis: &Axis, value: &str, ratios: bool) -> Result<Row> {
    let start = Instant::now();
    let base = sc.base();
    let opts = sc.field_options();
    let run = solve_point(sc, &base, &opts)?;
    let last = run.curve.samples.last().ok_or_else(|| anyhow!("empty schedule"))?;
    let n = run.curve.dim as f64;
    let tau = sc.base_time - last.time;
    let oracle_error = match oracle_deviation(&run.field, &opts.sample) {
        Ok(e) => Some(e),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(e.into()),
    };
    let min_ratio = if ratios {
        let mut best: Option<f64> = None;
        for r in RATIO_SCALES {
            let v = sc.flow.volume_ratio(&base, sc.base_time, r, CUBE_SAMPLES)?;
            if v.admissible {
                best = Some(best.map_or(v.ratio, |b: f64| b.min(v.ratio)));
            }
        }
        best
    } else {
        None
    };
    Ok(Row {
        value: value.to_string(),
        w_limit: run.curve.w_limit.as_ref().map(|l| l.estimate),
        w_converged: run.curve.w_limit.as_ref().map(|l| l.converged),
        n_limit: run.curve.n_limit.as_ref().map(|l| l.estimate),
        n_converged: run.curve.n_limit.as_ref().map(|l| l.converged),
        t_last: Some(last.time),
        n_last: Some(last.n),
        n_shifted: (*axis == Axis::Tau).then(|| last.n + 0.5 * n * (4.0 * PI * tau).ln() + 0.5 * n),
        oracle_error,
        order: None,
        min_ratio,
        elapsed_s: start.elapsed().as_secs_f64(),
        error: None,
    })
}

/// Observed order `log(e_prev / e) / log(v / v_prev)` between consecutive rows of a node sweep.
fn fill_orders(rows: &mut [Row]) {
    for k in 1..rows.len() {
        let (a, b) = (&rows[k - 1], &rows[k]);
        let (Ok(va), Ok(vb)) = (a.value.parse::<f64>(), b.value.parse::<f64>()) else {
            continue;
        };
        if let (Some(ea), Some(eb)) = (a.oracle_error, b.oracle_error) {
            let order = (ea / eb).ln() / (vb / va).ln();
            if order.is_finite() {
                rows[k].order = Some(order);
            }
        }
    }
}

fn to_csv(rows: &[Row], ratios: bool) -> String {
    let mut out = String::from(
        "value,W_limit,W_converged,N_limit,N_converged,T_last,N_last,N_shifted,oracle_error,order",
    );
    if ratios {
        out.push_str(",min_ratio");
    }
    out.push_str(",elapsed_s,error\n");
    for r in rows {
        let _ = write!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.value,
            sci(r.w_limit),
            cell(r.w_converged),
            sci(r.n_limit),
            cell(r.n_converged),
            sci(r.t_last),
            sci(r.n_last),
            sci(r.n_shifted),
            r.oracle_error.map(|e| format!("{e:.6e}")).unwrap_or_default(),
            r.order.map(|p| format!("{p:.4}")).unwrap_or_default(),
        );
        if ratios {
            let _ = write!(out, ",{}", sci(r.min_ratio));
        }
        let msg = r.error.as_deref().unwrap_or("").replace([',', '\n'], ";");
        let _ = writeln!(out, ",{:.3},{msg}", r.elapsed_s);
    }
    out
}

pub fn cmd_sweep(config: &Path, axis: &str, values: &[String], ratios: bool, root: &OutRoot) -> Result<Status> {
    let axis = Axis::parse(axis)?;
    if values.is_empty() {
        bail!("--values needs at least one value");
    }
    let (base, raw) = load_config(config)?;
    let scenarios = values
        .iter()
        .map(|v| axis.apply(&base, v))
        .collect::<Result<Vec<_>>>()?;
    let mut records = vec![ConfigRecord::new(&base, Some(config), Some(&raw))?];
    for sc in &scenarios {
        records.push(ConfigRecord::new(sc, None, None)?);
    }
    let mut dir = RunDir::create(root.path.join(format!("sweep-{}-{}", base.name, axis.label())))?;
    let mut manifest = Manifest::new(records);
    let outcomes: Vec<(Row, Option<Status>)> = manifest.timings.time("sweep", || {
        scenarios
            .par_iter()
            .zip(values)
            .map(|(sc, v)| match measure(sc, &axis, v, ratios) {
                Ok(row) => (row, None),
                Err(e) => (
                    Row {
                        value: v.clone(),
                        error: Some(format!("{e:#}")),
                        ..Row::default()
                    },
                    Some(crate::classify(&e)),
                ),
            })
            .collect()
    });
    let status = outcomes.iter().filter_map(|(_, s)| *s).max().unwrap_or(Status::Ok);
    let mut rows: Vec<Row> = outcomes.into_iter().map(|(r, _)| r).collect();
    if axis == Axis::Nodes {
        fill_orders(&mut rows);
    }
    let csv = to_csv(&rows, ratios);
    print!("{csv}");
    dir.write("sweep.csv", &csv)?;
    manifest.finish(&mut dir, status as u8)?;
    println!("wrote {}", dir.path.display());
    Ok(status)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ricci_entropy::ModelFlow;

    #[test]
    fn axes_parse_and_apply() {
        let sc = ScenarioConfig::new("t", ModelFlow::circle(1.0));
        assert_eq!(Axis::parse("param:/grid/nodes").unwrap(), Axis::Param("/grid/nodes".into()));
        assert!(Axis::parse("param:grid").is_err() && Axis::parse("speed").is_err());
        assert_eq!(Axis::Nodes.apply(&sc, "64").unwrap().grid.nodes, 64);
        assert_eq!(Axis::Param("/grid/nodes".into()).apply(&sc, "96").unwrap().grid.nodes, 96);
        assert_eq!(Axis::Tau.apply(&sc, "4").unwrap().times(), vec![-1.0, -2.0, -4.0]);
        assert!(Axis::Param("/nope".into()).apply(&sc, "1").is_err());
        assert!(Axis::Nodes.apply(&sc, "4").is_err());
    }

    #[test]
    fn orders_follow_error_ratios() {
        let row = |v: &str, e: f64| Row {
            value: v.into(),
            oracle_error: Some(e),
            ..Row::default()
        };
        let mut rows = vec![row("64", 4e-4), row("128", 1e-4)];
        fill_orders(&mut rows);
        assert!(rows[0].order.is_none());
        assert!((rows[1].order.unwrap() - 2.0).abs() < 1e-12);
    }
}
