//! Volume ratios against Nash entropies at matched scales.

use crate::entropy::{kernel_field, nash_n, FieldOptions};
use crate::error::Result;
use crate::geometry::{ModelFlow, Point};
use crate::par_map;
use serde::Serialize;
use std::io::Write;

/// Admissibility samples per parabolic cube.
const CUBE_SAMPLES: usize = 32;

/// One `(point, r)` entry: `N_{(x,t)}(t - r^2)` next to `Vol(B_t(x, r)) / r^n`.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CollapseRow {
    pub point: Point,
    pub scale: f64,
    pub time: f64,
    pub nash: f64,
    pub nash_err: f64,
    pub volume: f64,
    pub ratio: f64,
    /// `|Rm| <= r^-2` on the sampled parabolic cube.
    pub admissible: bool,
    pub curvature_scale: f64,
}

/// Evidence table; no noncollapsing constant is derived from it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NoncollapsingReport {
    pub label: String,
    pub flow: ModelFlow,
    pub base_time: f64,
    pub entropy_floor: f64,
    pub rows: Vec<CollapseRow>,
    /// Points whose sampled Nash entropies all stay at or above the floor.
    pub bounded_points: Vec<Point>,
    /// Smallest admissible ratio among the bounded points.
    pub min_ratio: Option<f64>,
}

impl NoncollapsingReport {
    /// Columns `x,r,T,N,N_err,volume,ratio,admissible,curvature_scale`; `x` joins coordinates with `;`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,r,T,N,N_err,volume,ratio,admissible,curvature_scale")?;
        for r in &self.rows {
            let x: Vec<String> = r.point.coords().iter().map(|c| format!("{c}")).collect();
            writeln!(
                out,
                "{},{},{:.12e},{:.12e},{:.6e},{:.12e},{:.12e},{},{:.6e}",
                x.join(";"),
                r.scale,
                r.time,
                r.nash,
                r.nash_err,
                r.volume,
                r.ratio,
                r.admissible,
                r.curvature_scale
            )?;
        }
        Ok(())
    }

    /// Ratios of the admissible rows of `point`, by increasing scale.
    pub fn ratios(&self, point: &Point) -> Vec<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| &r.point == point)
            .map(|r| (r.scale, r.ratio))
            .collect()
    }
}

/// Tabulates volume ratios and Nash entropies for every point and scale.
pub fn noncollapsing_report(
    flow: &ModelFlow,
    points: &[Point],
    scales: &[f64],
    entropy_floor: f64,
    t: f64,
    opts: &FieldOptions,
) -> Result<NoncollapsingReport> {
    let mut scales = scales.to_vec();
    scales.sort_by(f64::total_cmp);
    let times: Vec<f64> = scales.iter().map(|r| t - r * r).collect();
    let per_point = par_map(points, |x| -> Result<Vec<CollapseRow>> {
        let field = kernel_field(flow, x, t, &times, opts)?;
        scales
            .iter()
            .zip(&times)
            .map(|(&r, &s)| {
                let n = nash_n(&field, s)?;
                let v = flow.volume_ratio(x, t, r, CUBE_SAMPLES)?;
                Ok(CollapseRow {
                    point: x.clone(),
                    scale: r,
                    time: s,
                    nash: n.value,
                    nash_err: n.error,
                    volume: v.volume,
                    ratio: v.ratio,
                    admissible: v.admissible,
                    curvature_scale: v.curvature_scale,
                })
            })
            .collect()
    });
    let mut rows = Vec::new();
    for r in per_point {
        rows.extend(r?);
    }
    let bounded_points: Vec<Point> = points
        .iter()
        .filter(|x| rows.iter().filter(|r| &r.point == *x).all(|r| r.nash >= entropy_floor))
        .cloned()
        .collect();
    let min_ratio = rows
        .iter()
        .filter(|r| r.admissible && bounded_points.contains(&r.point))
        .map(|r| r.ratio)
        .reduce(f64::min);
    Ok(NoncollapsingReport {
        label: "evidence table: volume ratios and Nash entropies at sampled scales; no noncollapsing constant is computed"
            .into(),
        flow: flow.clone(),
        base_time: t,
        entropy_floor,
        rows,
        bounded_points,
        min_ratio,
    })
}
