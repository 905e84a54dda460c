//! Slice builders for the closed-form kernels.

use super::lattice::{lattice_kernel, log_gaussian, quotient_kernel, Cutoff};
use super::sphere::SphereSeries;
use super::{potential, KernelField, KernelMeta, KernelMethod, KernelSlice};
use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_area, FlatTorus, ModelFlow, Point};
use crate::par_map;
use crate::quad::composite_gauss;
use std::f64::consts::PI;

/// Sampling controls for the closed-form kernels.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleOptions {
    /// Multiplies node counts; 2.0 doubles the resolution.
    pub resolution: f64,
    /// Nodes with `H < floor * peak` are masked.
    pub floor: f64,
    pub cutoff: Cutoff,
    /// Absolute truncation tolerance for the spherical series.
    pub series_tol: f64,
    /// Gauss nodes per panel.
    pub per_panel: usize,
}

impl Default for SampleOptions {
    fn default() -> Self {
        SampleOptions {
            resolution: 1.0,
            floor: 1e-12,
            cutoff: Cutoff::default(),
            series_tol: 1e-8,
            per_panel: 16,
        }
    }
}

impl SampleOptions {
    pub fn doubled(&self) -> Self {
        SampleOptions {
            resolution: 2.0 * self.resolution,
            series_tol: 1e-2 * self.series_tol,
            cutoff: Cutoff {
                tol: 1e-2 * self.cutoff.tol,
                ..self.cutoff
            },
            ..self.clone()
        }
    }
}

fn check_times(flow: &ModelFlow, s: f64, t: f64) -> Result<f64> {
    flow.check_time(t)?;
    flow.check_time(s)?;
    if !(s < t) {
        return Err(Error::Config(format!("slice time {s} must precede base time {t}")));
    }
    Ok(t - s)
}

/// Radial Gauss panels resolving a Gaussian of variance `2 tau`.
fn radial_panels(tau: f64, res: f64, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let width = (2.0 * tau).sqrt();
    let panels = (32.0 * res).ceil() as usize;
    let reach = 16.0 * width;
    let breaks: Vec<f64> = (0..=panels).map(|i| reach * i as f64 / panels as f64).collect();
    composite_gauss(&breaks, per_panel)
}

fn flat_dev_sq(hess_log: &[Vec<f64>], tau: f64) -> f64 {
    let k = hess_log.len();
    let mut total = 0.0;
    for a in 0..k {
        for b in 0..k {
            let delta = if a == b { 0.5 / tau } else { 0.0 };
            total += (-hess_log[a][b] - delta).powi(2);
        }
    }
    total
}

struct FlatNode {
    coord: Vec<f64>,
    weight: f64,
    log_h: f64,
    grad_sq: f64,
    dev_sq: f64,
}

fn torus_grid(torus: &FlatTorus, tau: f64, res: f64) -> (Vec<Vec<f64>>, f64) {
    let k = torus.dim();
    let width = (2.0 * tau).sqrt();
    let per_axis: Vec<usize> = (0..k)
        .map(|a| {
            let len = torus.basis(a).iter().map(|v| v * v).sum::<f64>().sqrt();
            let base = (4.0 * len / width).ceil().max(64.0 / k as f64);
            let n = (base * res).ceil() as usize;
            n + n % 2
        })
        .collect();
    let total: usize = per_axis.iter().product();
    let cell = torus.volume() / total as f64;
    let pts = (0..total)
        .map(|mut idx| {
            let u: Vec<f64> = per_axis
                .iter()
                .map(|&n| {
                    let v = (idx % n) as f64 / n as f64;
                    idx /= n;
                    v
                })
                .collect();
            torus.from_lattice_coords(&u)
        })
        .collect();
    (pts, cell)
}

fn flat_nodes(
    flow: &ModelFlow,
    base: &Point,
    tau: f64,
    opts: &SampleOptions,
) -> Result<(Vec<FlatNode>, f64)> {
    let xs = base.coords();
    if xs.len() != flow.dim() {
        return Err(Error::Point(format!("expected {} coordinates", flow.dim())));
    }
    match flow {
        ModelFlow::EuclideanStatic { dim } => {
            let (r, w) = radial_panels(tau, opts.resolution, opts.per_panel);
            let area = unit_sphere_area(dim - 1);
            let nodes = r
                .iter()
                .zip(&w)
                .map(|(&r, &w)| {
                    let g = r / (2.0 * tau);
                    FlatNode {
                        coord: vec![r],
                        weight: w * area * r.powi(*dim as i32 - 1),
                        log_h: log_gaussian(*dim, r * r, tau),
                        grad_sq: g * g,
                        dev_sq: 0.0,
                    }
                })
                .collect();
            Ok((nodes, 0.0))
        }
        ModelFlow::FlatTorus { torus } => {
            let (pts, cell) = torus_grid(torus, tau, opts.resolution);
            let evals = par_map(&pts, |d| lattice_kernel(torus, d, tau, &opts.cutoff));
            let mut nodes = Vec::with_capacity(pts.len());
            let mut trunc: f64 = 0.0;
            for (p, e) in pts.into_iter().zip(evals) {
                let e = e?;
                trunc = trunc.max(e.remainder);
                nodes.push(FlatNode {
                    coord: p,
                    weight: cell,
                    log_h: e.log_value,
                    grad_sq: e.grad.iter().map(|g| g * g).sum(),
                    dev_sq: flat_dev_sq(&e.hess, tau),
                });
            }
            Ok((nodes, trunc))
        }
        ModelFlow::FlatProduct { torus, euclidean_dim } => {
            let (pts, cell) = torus_grid(torus, tau, opts.resolution);
            let m = *euclidean_dim;
            let evals = par_map(&pts, |d| lattice_kernel(torus, d, tau, &opts.cutoff));
            let (rs, rw) = if m == 0 {
                (vec![0.0], vec![1.0])
            } else {
                let (r, w) = radial_panels(tau, opts.resolution, opts.per_panel);
                let area = unit_sphere_area(m - 1);
                let w = r.iter().zip(&w).map(|(r, w)| w * area * r.powi(m as i32 - 1)).collect();
                (r, w)
            };
            let mut nodes = Vec::with_capacity(pts.len() * rs.len());
            let mut trunc: f64 = 0.0;
            for (p, e) in pts.into_iter().zip(evals) {
                let e = e?;
                trunc = trunc.max(e.remainder);
                let gt: f64 = e.grad.iter().map(|g| g * g).sum();
                let dt = flat_dev_sq(&e.hess, tau);
                for (&r, &w) in rs.iter().zip(&rw) {
                    let mut coord = p.clone();
                    if m > 0 {
                        coord.push(r);
                    }
                    let gr = r / (2.0 * tau);
                    let log_e = if m == 0 { 0.0 } else { log_gaussian(m, r * r, tau) };
                    nodes.push(FlatNode {
                        coord,
                        weight: cell * w,
                        log_h: e.log_value + log_e,
                        grad_sq: gt + gr * gr,
                        dev_sq: dt,
                    });
                }
            }
            Ok((nodes, trunc))
        }
        ModelFlow::TorusQuotient { cover, deck } => {
            let (pts, cell) = torus_grid(cover, tau, opts.resolution);
            let order = deck.len() as f64;
            let evals = par_map(&pts, |y| quotient_kernel(cover, deck, xs, y, tau, &opts.cutoff));
            let mut nodes = Vec::with_capacity(pts.len());
            let mut trunc: f64 = 0.0;
            for (p, e) in pts.into_iter().zip(evals) {
                let e = e?;
                trunc = trunc.max(e.remainder);
                nodes.push(FlatNode {
                    coord: p,
                    weight: cell / order,
                    log_h: e.log_value,
                    grad_sq: e.grad.iter().map(|g| g * g).sum(),
                    dev_sq: flat_dev_sq(&e.hess, tau),
                });
            }
            Ok((nodes, trunc))
        }
        other => Err(Error::Unsupported(format!(
            "no exact kernel for {}",
            other.short_name()
        ))),
    }
}

/// Samples the closed-form flat kernel based at `(base, t)` on the slice `s`.
pub fn exact_slice(
    flow: &ModelFlow,
    base: &Point,
    t: f64,
    s: f64,
    opts: &SampleOptions,
) -> Result<KernelSlice> {
    let tau = check_times(flow, s, t)?;
    let n = flow.dim();
    let (nodes, trunc) = flat_nodes(flow, base, tau, opts)?;
    let peak = nodes.iter().map(|p| p.log_h).fold(f64::NEG_INFINITY, f64::max);
    let floor = peak + opts.floor.ln();
    let mut slice = KernelSlice {
        time: s,
        tau,
        coords: Vec::with_capacity(nodes.len()),
        weights: Vec::with_capacity(nodes.len()),
        h: Vec::with_capacity(nodes.len()),
        f: Vec::with_capacity(nodes.len()),
        grad_f_sq: Vec::with_capacity(nodes.len()),
        dev_sq: Vec::with_capacity(nodes.len()),
        scalar: vec![0.0; nodes.len()],
        valid: Vec::with_capacity(nodes.len()),
        truncation_error: trunc,
    };
    for p in nodes {
        slice.valid.push(p.log_h >= floor);
        slice.h.push(p.log_h.exp());
        slice.f.push(potential(n, tau, p.log_h));
        slice.coords.push(p.coord);
        slice.weights.push(p.weight);
        slice.grad_f_sq.push(p.grad_sq);
        slice.dev_sq.push(p.dev_sq);
    }
    Ok(slice)
}

/// Closed-form kernel field on a flat variant.
pub fn exact_field(
    flow: &ModelFlow,
    base: &Point,
    t: f64,
    times: &[f64],
    opts: &SampleOptions,
) -> Result<KernelField> {
    flow.validate()?;
    let slices = times
        .iter()
        .map(|&s| exact_slice(flow, base, t, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let trunc = slices.iter().map(|s| s.truncation_error).fold(0.0, f64::max);
    Ok(KernelField::new(
        flow.clone(),
        base.clone(),
        t,
        slices,
        KernelMeta {
            method: KernelMethod::Exact,
            truncation: format!("lattice tol {:e}", opts.cutoff.tol),
            truncation_error: trunc,
            diagnostics: None,
        },
    ))
}

/// Polar-angle Gauss panels resolving the kernel width, graded outward.
fn sphere_panels(width: f64, res: f64) -> Vec<f64> {
    let fine = (0.5 * width / res).min(PI / (24.0 * res));
    let coarse = PI / (24.0 * res);
    let mut breaks = vec![0.0];
    let mut step = fine;
    while *breaks.last().unwrap() < PI {
        let last = *breaks.last().unwrap();
        if last > 12.0 * width {
            step = (step * 1.5).min(coarse);
        }
        breaks.push((last + step).min(PI));
    }
    breaks
}

/// Samples the spectral sphere kernel based at `(pole, t)` on the slice `s`.
pub fn spectral_slice(flow: &ModelFlow, t: f64, s: f64, opts: &SampleOptions) -> Result<KernelSlice> {
    let tau = check_times(flow, s, t)?;
    let n = flow.dim();
    let series = SphereSeries::new(flow, s, t, None, opts.series_tol)?;
    let c = flow.sphere_scale(s).unwrap();
    let width = (2.0 * tau / c).sqrt();
    let breaks = sphere_panels(width, opts.resolution);
    let (theta, gw) = composite_gauss(&breaks, opts.per_panel);
    let vals = par_map(&theta, |&q| series.eval(q));
    let peak = series.eval(0.0).h;
    let r = flow.scalar_curvature(&Point(vec![0.0]), s)?;
    let len = theta.len();
    let mut slice = KernelSlice {
        time: s,
        tau,
        coords: Vec::with_capacity(len),
        weights: Vec::with_capacity(len),
        h: Vec::with_capacity(len),
        f: Vec::with_capacity(len),
        grad_f_sq: Vec::with_capacity(len),
        dev_sq: Vec::with_capacity(len),
        scalar: vec![r; len],
        valid: Vec::with_capacity(len),
        truncation_error: series.remainder,
    };
    for ((q, w), v) in theta.iter().zip(&gw).zip(vals) {
        let frame = flow.radial_frame(*q, s)?;
        let ok = v.h >= opts.floor * peak && v.h > 0.0;
        let f = if v.h > 0.0 { potential(n, tau, v.h.ln()) } else { f64::NAN };
        let (fq, fqq) = if ok {
            let g = v.h_theta / v.h;
            (-g, -v.h_theta_theta / v.h + g * g)
        } else {
            (0.0, 0.0)
        };
        slice.coords.push(vec![*q]);
        slice.weights.push(w * flow.reduced_density(*q) * flow.measure_factor(*q, s));
        slice.h.push(v.h);
        slice.f.push(f);
        slice.grad_f_sq.push(frame.grad_sq(fq));
        slice.dev_sq.push(frame.deviation_sq(fq, fqq, tau));
        slice.valid.push(ok);
    }
    Ok(slice)
}

/// Spectral kernel field on the shrinking sphere, based at the north pole.
pub fn spectral_field(flow: &ModelFlow, t: f64, times: &[f64], opts: &SampleOptions) -> Result<KernelField> {
    flow.validate()?;
    let slices = times
        .iter()
        .map(|&s| spectral_slice(flow, t, s, opts))
        .collect::<Result<Vec<_>>>()?;
    let trunc = slices.iter().map(|s| s.truncation_error).fold(0.0, f64::max);
    Ok(KernelField::new(
        flow.clone(),
        Point(vec![0.0]),
        t,
        slices,
        KernelMeta {
            method: KernelMethod::Spectral,
            truncation: format!("series tol {:e}", opts.series_tol),
            truncation_error: trunc,
            diagnostics: None,
        },
    ))
}
