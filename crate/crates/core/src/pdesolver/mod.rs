//! Method-of-lines solver for the conjugate heat equation (backward in time)
//! and the forward heat equation on symmetry-reduced grids.
//!
//! Space is discretised by lumped finite volumes with the metric coefficients
//! of the slice being integrated, time by an L-stable SDIRK scheme with
//! step-doubling control. The conjugate equation is integrated for the cell
//! masses `M H`, so total mass changes only through an absorbing boundary.
//! Off-tip base points on the cigar are handled by an angular cosine series,
//! one reduced solve per mode.

mod operator;
mod stepper;

pub use stepper::StepState;

use crate::error::{Error, Result};
use crate::geometry::{cigar_conformal, cigar_scalar, radial_derivatives, ModelFlow, Point, ReducedGrid};
use crate::kernels::{
    exact_flat_kernel, lattice_kernel, potential, Cutoff, KernelField, KernelMeta, KernelMethod, KernelSlice, SupKernel,
    SupSearch,
};
use crate::par_map;
use crate::quad::fornberg_weights;
use operator::ReducedOperator;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use stepper::{Block, Clock, Form, Integrator};

/// Which equation a run integrates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Conjugate,
    Forward,
}

/// Solver controls.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    /// Relative local error tolerance per step.
    pub rtol: f64,
    /// Absolute tolerance, as a fraction of the current peak.
    pub atol: f64,
    /// Seed offset; chosen from the horizon and grid when absent.
    pub tau0: Option<f64>,
    /// Output times in addition to the end time.
    pub slices: Vec<f64>,
    /// Nodes below `floor * peak` are masked in the output.
    pub floor: f64,
    pub max_steps: usize,
    /// Cigar angular modes below this fraction of mode 0 are dropped.
    pub mode_tol: f64,
    pub max_modes: usize,
    /// Minimum number of angular samples on `[0, pi]` in cigar output.
    pub angles: usize,
    /// Allowed mass drift per unit time.
    pub drift_tol: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            rtol: 1e-7,
            atol: 1e-10,
            tau0: None,
            slices: Vec::new(),
            floor: 1e-12,
            max_steps: 1_000_000,
            mode_tol: 1e-14,
            max_modes: 512,
            angles: 32,
            drift_tol: 1e-6,
        }
    }
}

/// Record of one solve, attached to the field as JSON diagnostics.
#[derive(Clone, Debug, Serialize)]
pub struct SolverRun {
    pub flow: ModelFlow,
    pub equation: Equation,
    pub base: Point,
    pub base_time: f64,
    pub seed_time: f64,
    pub tau0: f64,
    pub grid_nodes: usize,
    pub grid_min_spacing: f64,
    pub schedule: Vec<f64>,
    pub step: StepState,
    pub modes_initial: usize,
    pub modes_final: usize,
    pub seed_mass: f64,
    pub final_mass: f64,
    /// `|mass - (seed mass - leakage)|` at the end of the run (conjugate runs).
    pub mass_drift: f64,
}

/// Where the base point sits in reduced coordinates.
#[derive(Clone, Copy, Debug)]
enum Placement {
    /// Rotationally symmetric about the reduced origin.
    Centered,
    /// Circle coordinate of the base point.
    Circle(f64),
    /// Cigar base off the tip, at log-radius `s`.
    OffTip(f64),
}

fn place(flow: &ModelFlow, base: &Point, grid: &ReducedGrid) -> Result<Placement> {
    let c = base.coords();
    match flow {
        ModelFlow::EuclideanStatic { dim } => {
            if c.len() != *dim {
                return Err(Error::Point(format!("expected {dim} coordinates")));
            }
            Ok(Placement::Centered)
        }
        ModelFlow::FlatTorus { torus } if torus.dim() == 1 => match c {
            [x] if x.is_finite() => {
                let period = grid.period.unwrap_or(torus.lattice[0][0].abs());
                Ok(Placement::Circle(x.rem_euclid(period)))
            }
            _ => Err(Error::Point("circle points have one coordinate".into())),
        },
        ModelFlow::ShrinkingSphere { .. } => Ok(Placement::Centered),
        ModelFlow::CigarSoliton => match c {
            [rho] if *rho == 0.0 => Ok(Placement::Centered),
            [rho] if *rho > 0.0 && rho.is_finite() => {
                let s = rho.ln();
                let (lo, hi) = (grid.nodes[0], grid.nodes[grid.len() - 1]);
                if s <= lo + 0.1 * (hi - lo) || s >= hi - 0.1 * (hi - lo) {
                    return Err(Error::Point(format!("base radius {rho} too close to the grid ends")));
                }
                Ok(Placement::OffTip(s))
            }
            _ => Err(Error::Point("cigar points are a single radius rho >= 0".into())),
        },
        other => Err(Error::Unsupported(format!(
            "no reduced solve for {}",
            other.short_name()
        ))),
    }
}

/// Proper spacing of the grid where a seed of width `width` sits.
fn seed_spacing(flow: &ModelFlow, grid: &ReducedGrid, at: Placement, seed_time: f64, width: f64) -> f64 {
    match (flow, at) {
        (ModelFlow::ShrinkingSphere { .. }, _) => {
            flow.sphere_scale(seed_time).unwrap().sqrt() * grid.spacing_near(0.0)
        }
        (ModelFlow::CigarSoliton, Placement::OffTip(s)) => {
            cigar_conformal(s, seed_time).sqrt() * grid.spacing_near(s)
        }
        (ModelFlow::CigarSoliton, _) => {
            let s = width.sinh().ln() + 2.0 * seed_time;
            grid.spacing_near(s) * width.tanh()
        }
        (_, Placement::Circle(x)) => grid.spacing_near(x),
        _ => grid.spacing_near(grid.nodes[0]),
    }
}

fn choose_tau0(
    flow: &ModelFlow,
    grid: &ReducedGrid,
    at: Placement,
    clock: Clock,
    span: f64,
    opts: &SolverOptions,
) -> Result<f64> {
    let resolved = |tau0: f64| {
        let width = (2.0 * tau0).sqrt();
        width >= 3.0 * seed_spacing(flow, grid, at, clock.at(tau0), width)
    };
    if let Some(tau0) = opts.tau0 {
        if !(tau0 > 0.0 && tau0 < span) {
            return Err(Error::Config(format!("seed offset {tau0} must lie in (0, {span})")));
        }
        if !resolved(tau0) {
            return Err(Error::Config(format!(
                "grid too coarse for seed offset {tau0}: width sqrt(2 tau0) must cover 3 spacings"
            )));
        }
        return Ok(tau0);
    }
    let cap = match (flow, at) {
        (ModelFlow::CigarSoliton, Placement::OffTip(_)) => 2.5e-3,
        (ModelFlow::CigarSoliton, _) => 1e-2,
        _ => 1e-3,
    };
    let mut tau0 = (1e-3 * span).min(cap);
    while !resolved(tau0) {
        tau0 *= 1.25;
        if tau0 > 0.05 * span {
            return Err(Error::Config(
                "grid too coarse to resolve a seed within the requested horizon".into(),
            ));
        }
    }
    Ok(tau0)
}

/// `asinh(e^x)` without overflow.
fn asinh_exp(x: f64) -> f64 {
    if x > 30.0 {
        x + std::f64::consts::LN_2 + 0.25 * (-2.0 * x).exp()
    } else {
        x.exp().asinh()
    }
}

/// Log of the unnormalised short-time profile and the mass it should carry.
fn seed_shape(
    flow: &ModelFlow,
    grid: &ReducedGrid,
    at: Placement,
    clock: Clock,
    tau0: f64,
    equation: Equation,
    opts: &SolverOptions,
) -> Result<(Vec<Vec<f64>>, f64)> {
    let seed_time = clock.at(tau0);
    let nodes = &grid.nodes;
    match (flow, at) {
        (ModelFlow::EuclideanStatic { .. }, _) => {
            let h = nodes.iter().map(|r| (-r * r / (4.0 * tau0)).exp()).collect();
            Ok((vec![h], 1.0))
        }
        (ModelFlow::FlatTorus { torus }, Placement::Circle(x)) => {
            let cut = Cutoff::default();
            let h = nodes
                .iter()
                .map(|q| Ok(lattice_kernel(torus, &[q - x], tau0, &cut)?.value()))
                .collect::<Result<Vec<f64>>>()?;
            Ok((vec![h], 1.0))
        }
        (ModelFlow::ShrinkingSphere { dim, .. }, _) => {
            let (early, late) = match equation {
                Equation::Conjugate => (seed_time, clock.origin),
                Equation::Forward => (clock.origin, seed_time),
            };
            let (ce, cl) = (flow.sphere_scale(early).unwrap(), flow.sphere_scale(late).unwrap());
            let nf = *dim as f64;
            let unit_time = (ce / cl).ln() / (2.0 * (nf - 1.0));
            let h = nodes
                .iter()
                .map(|&q| {
                    let sn = q.sin();
                    if q > 0.0 && sn <= 0.0 {
                        return 0.0;
                    }
                    let vv = if q < 1e-8 { 0.0 } else { 0.5 * (nf - 1.0) * (q / sn).ln() };
                    (-q * q / (4.0 * unit_time) + vv).exp()
                })
                .collect();
            let target = match equation {
                Equation::Conjugate => 1.0,
                Equation::Forward => (cl / ce).powf(0.5 * nf),
            };
            Ok((vec![h], target))
        }
        (ModelFlow::CigarSoliton, Placement::Centered) => {
            let h = nodes
                .iter()
                .map(|&s| {
                    let r = asinh_exp(s - 2.0 * seed_time);
                    let radial = r * r / (4.0 * tau0);
                    if radial > 745.0 {
                        return 0.0;
                    }
                    let vv = if r < 1e-8 { 0.0 } else { 0.5 * (r / r.tanh()).ln() };
                    (-radial + vv).exp()
                })
                .collect();
            let target = match equation {
                Equation::Conjugate => 1.0,
                Equation::Forward => (-4.0 * tau0).exp(),
            };
            Ok((vec![h], target))
        }
        (ModelFlow::CigarSoliton, Placement::OffTip(sx)) => {
            let radius = |s: f64| asinh_exp(s - 2.0 * seed_time);
            let rx = radius(sx);
            let samples = 2048;
            let dphi = PI / samples as f64;
            let mut modes: Vec<Vec<f64>> = vec![vec![0.0; nodes.len()]];
            for (i, &s) in nodes.iter().enumerate() {
                let r = radius(s);
                let dr = r - rx;
                let radial = dr * dr / (4.0 * tau0);
                if radial > 745.0 {
                    continue;
                }
                let w = (0.5 * (r + rx)).tanh();
                let a = w * w / (4.0 * tau0);
                // trapezoid on [0, pi] of the even angular profile
                let g: Vec<f64> = (0..=samples)
                    .map(|j| {
                        let phi = j as f64 * dphi;
                        let end = if j == 0 || j == samples { 0.5 } else { 1.0 };
                        end * dphi * (-radial - a * phi * phi).exp()
                    })
                    .collect();
                let mut m = 0usize;
                loop {
                    let coef: f64 = g
                        .iter()
                        .enumerate()
                        .map(|(j, gj)| gj * (m as f64 * j as f64 * dphi).cos())
                        .sum::<f64>()
                        * if m == 0 { 1.0 / PI } else { 2.0 / PI };
                    if m >= modes.len() {
                        modes.push(vec![0.0; nodes.len()]);
                    }
                    modes[m][i] = coef;
                    m += 1;
                    let decay = (-((m * m) as f64) / (4.0 * a)).exp();
                    if decay < 1e-3 * opts.mode_tol || m >= opts.max_modes {
                        break;
                    }
                }
            }
            let peak0 = modes[0].iter().copied().fold(0.0, f64::max);
            while modes.len() > 1 {
                let top = modes.last().unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs()));
                if top < opts.mode_tol * peak0 {
                    modes.pop();
                } else {
                    break;
                }
            }
            if modes.len() >= opts.max_modes {
                return Err(Error::Truncation {
                    remainder: modes.last().unwrap().iter().fold(0.0f64, |m, x| m.max(x.abs())) / peak0,
                    tolerance: opts.mode_tol,
                    suggested: 2 * opts.max_modes,
                });
            }
            let target = match equation {
                Equation::Conjugate => 1.0,
                Equation::Forward => (-cigar_scalar(sx, seed_time) * tau0).exp(),
            };
            Ok((modes, target))
        }
        _ => Err(Error::Unsupported(format!("no seed for {}", flow.short_name()))),
    }
}

/// Short-time seed at `t - tau0` (conjugate) or `t + tau0` (forward), one
/// nodal profile per angular mode, normalised to its exact mass on the grid.
fn seed(
    flow: &ModelFlow,
    grid: &ReducedGrid,
    at: Placement,
    clock: Clock,
    tau0: f64,
    equation: Equation,
    opts: &SolverOptions,
) -> Result<Vec<Vec<f64>>> {
    let (mut modes, target) = seed_shape(flow, grid, at, clock, tau0, equation, opts)?;
    let op = ReducedOperator::new(flow, grid, 0)?;
    let m = op.mass(clock.at(tau0));
    let mass: f64 = m.iter().zip(&modes[0]).map(|(a, b)| a * b).sum();
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Config("seed carries no mass on this grid".into()));
    }
    let scale = target / mass;
    for v in modes.iter_mut().flatten() {
        *v *= scale;
    }
    Ok(modes)
}

/// Conjugate-kernel seed at time `t - tau0`, normalised to unit mass.
pub fn delta_seed(flow: &ModelFlow, x: &Point, t: f64, grid: &ReducedGrid, tau0: f64) -> Result<KernelSlice> {
    flow.validate()?;
    flow.check_time(t)?;
    flow.check_time(t - tau0)?;
    let at = place(flow, x, grid)?;
    if matches!(at, Placement::OffTip(_)) {
        return Err(Error::Unsupported("off-tip cigar seeds are angular series; use solve_conjugate".into()));
    }
    let clock = Clock { origin: t, sign: -1.0 };
    let opts = SolverOptions {
        tau0: Some(tau0),
        ..SolverOptions::default()
    };
    choose_tau0(flow, grid, at, clock, f64::INFINITY, &opts)?;
    let modes = seed(flow, grid, at, clock, tau0, Equation::Conjugate, &opts)?;
    let op = ReducedOperator::new(flow, grid, 0)?;
    profile_slice(&op, &modes[0], t - tau0, tau0, opts.floor)
}

/// Conjugate heat kernel based at `(x, t)` down to `s_end`.
pub fn solve_conjugate(
    flow: &ModelFlow,
    x: &Point,
    t: f64,
    s_end: f64,
    grid: &ReducedGrid,
    opts: &SolverOptions,
) -> Result<KernelField> {
    solve(flow, x, t, s_end, grid, opts, Equation::Conjugate)
}

/// Forward heat kernel from `(z, big_t)` up to `t_end`; slice `tau` is `time - big_t`.
pub fn solve_forward(
    flow: &ModelFlow,
    z: &Point,
    big_t: f64,
    t_end: f64,
    grid: &ReducedGrid,
    opts: &SolverOptions,
) -> Result<KernelField> {
    solve(flow, z, big_t, t_end, grid, opts, Equation::Forward)
}

fn solve(
    flow: &ModelFlow,
    base: &Point,
    t_base: f64,
    t_end: f64,
    grid: &ReducedGrid,
    opts: &SolverOptions,
    equation: Equation,
) -> Result<KernelField> {
    flow.validate()?;
    flow.check_time(t_base)?;
    flow.check_time(t_end)?;
    let sign = match equation {
        Equation::Conjugate => -1.0,
        Equation::Forward => 1.0,
    };
    let span = sign * (t_end - t_base);
    if !(span > 0.0) {
        return Err(Error::Config(match equation {
            Equation::Conjugate => "conjugate solve needs s_end < t".into(),
            Equation::Forward => "forward solve needs T < t_end".into(),
        }));
    }
    let clock = Clock { origin: t_base, sign };
    let at = place(flow, base, grid)?;
    let tau0 = choose_tau0(flow, grid, at, clock, span, opts)?;
    let seed_time = clock.at(tau0);

    let mut schedule: Vec<f64> = opts.slices.iter().copied().chain([t_end]).collect();
    for &s in &schedule {
        let e = sign * (s - t_base);
        if !(e >= tau0 * (1.0 - 1e-12) && e <= span * (1.0 + 1e-12)) {
            return Err(Error::Schedule(format!(
                "slice {s} lies outside the solved range between {seed_time} and {t_end}"
            )));
        }
    }
    schedule.sort_by(|a, b| (sign * (a - t_base)).total_cmp(&(sign * (b - t_base))));
    schedule.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * a.abs().max(1.0));

    let profiles = seed(flow, grid, at, clock, tau0, equation, opts)?;
    let form = match equation {
        Equation::Conjugate => Form::Conservative,
        Equation::Forward => Form::Nodal,
    };
    let mut blocks = Vec::with_capacity(profiles.len());
    for (m, x) in profiles.into_iter().enumerate() {
        let op = ReducedOperator::new(flow, grid, m)?;
        let y = match form {
            Form::Conservative => op.mass(seed_time).iter().zip(&x).map(|(a, b)| a * b).collect(),
            Form::Nodal => x.clone(),
        };
        blocks.push(Block { op, y, x });
    }
    let modes_initial = blocks.len();
    let seed_mass: f64 = blocks[0].op.mass(seed_time).iter().zip(&blocks[0].x).map(|(a, b)| a * b).sum();

    let mut integ = Integrator::new(form, clock, opts.rtol, opts.atol, 1e-2 * tau0, opts.max_steps);
    integ.positive = true;
    integ.drop_tol = opts.mode_tol;
    let mut e = tau0;
    let angles = |active: usize| (opts.angles.max(4 * active)).min(2048);
    let mut slices = Vec::with_capacity(schedule.len());
    for &s in &schedule {
        let e_next = sign * (s - t_base);
        integ.advance(&mut blocks, &mut e, e_next)?;
        let slice = if matches!(at, Placement::OffTip(_)) {
            let modes: Vec<&[f64]> = blocks.iter().map(|b| b.x.as_slice()).collect();
            let slice = mode_slice(&blocks[0].op, &modes, s, e_next, angles(blocks.len()), opts.floor)?;
            if let Some(i) = (0..slice.len()).find(|&i| slice.valid[i] && !(slice.h[i] > 0.0)) {
                return Err(Error::Positivity {
                    time: s,
                    min: slice.h[i],
                });
            }
            slice
        } else {
            profile_slice(&blocks[0].op, &blocks[0].x, s, e_next, opts.floor)?
        };
        slices.push(slice);
    }

    let final_time = clock.at(e);
    let final_mass: f64 = blocks[0].op.mass(final_time).iter().zip(&blocks[0].x).map(|(a, b)| a * b).sum();
    let leakage = integ.state.leakage;
    let mass_drift = match equation {
        Equation::Conjugate => (final_mass - (seed_mass - leakage)).abs(),
        Equation::Forward => 0.0,
    };
    if equation == Equation::Conjugate {
        let allowed = opts.drift_tol * span.max(1.0);
        if mass_drift + leakage > allowed {
            return Err(Error::Convergence(format!(
                "mass drift {mass_drift:.3e} plus leakage {leakage:.3e} exceeds {allowed:.3e}"
            )));
        }
    }
    let budget = leakage + mass_drift;
    for sl in slices.iter_mut() {
        sl.truncation_error = budget;
    }
    let run = SolverRun {
        flow: flow.clone(),
        equation,
        base: base.clone(),
        base_time: t_base,
        seed_time,
        tau0,
        grid_nodes: grid.len(),
        grid_min_spacing: grid.min_spacing(),
        schedule: schedule.clone(),
        step: integ.state.clone(),
        modes_initial,
        modes_final: blocks.len(),
        seed_mass,
        final_mass,
        mass_drift,
    };
    let meta = KernelMeta {
        method: KernelMethod::Pde,
        truncation: format!(
            "{} nodes, rtol {:e}, atol {:e}, tau0 {:e}",
            grid.len(),
            opts.rtol,
            opts.atol,
            tau0
        ),
        truncation_error: budget,
        diagnostics: Some(serde_json::to_value(&run).map_err(|e| Error::DataQuality(e.to_string()))?),
    };
    Ok(KernelField::new(flow.clone(), base.clone(), t_base, slices, meta))
}

/// Uniform five-point derivatives on a periodic grid.
fn periodic_derivatives(f: &[f64], h: f64, i: usize) -> (f64, f64) {
    let n = f.len();
    let at = |k: i64| f[(i as i64 + k).rem_euclid(n as i64) as usize];
    let d1 = (at(-2) - 8.0 * at(-1) + 8.0 * at(1) - at(2)) / (12.0 * h);
    let d2 = (-at(-2) + 16.0 * at(-1) - 30.0 * at(0) + 16.0 * at(1) - at(2)) / (12.0 * h * h);
    (d1, d2)
}

/// Slice from nodal values of a rotationally reduced solve.
fn profile_slice(op: &ReducedOperator, x: &[f64], time: f64, tau: f64, floor: f64) -> Result<KernelSlice> {
    let flow = &op.flow;
    let grid = &op.grid;
    let n = flow.dim();
    let weights = op.mass(time);
    let peak = x.iter().copied().fold(0.0, f64::max);
    let f: Vec<f64> = x
        .iter()
        .map(|&h| if h > 0.0 { potential(n, tau, h.ln()) } else { f64::NAN })
        .collect();
    let len = x.len();
    let mut slice = KernelSlice {
        time,
        tau,
        coords: Vec::with_capacity(len),
        weights: weights.clone(),
        h: x.to_vec(),
        f: f.clone(),
        grad_f_sq: Vec::with_capacity(len),
        dev_sq: Vec::with_capacity(len),
        scalar: Vec::with_capacity(len),
        valid: Vec::with_capacity(len),
        truncation_error: 0.0,
    };
    for i in 0..len {
        let q = grid.nodes[i];
        let (fq, fqq) = match grid.period {
            Some(p) => periodic_derivatives(&f, p / len as f64, i),
            None => radial_derivatives(flow, &grid.nodes, &f, i)?,
        };
        let frame = flow.radial_frame(q, time)?;
        let (g, d) = (frame.grad_sq(fq), frame.deviation_sq(fq, fqq, tau));
        let r = match flow {
            ModelFlow::CigarSoliton => cigar_scalar(q, time),
            ModelFlow::ShrinkingSphere { .. } => flow.scalar_curvature(&Point(vec![0.0]), time)?,
            _ => 0.0,
        };
        let ok = x[i] >= floor * peak && x[i] > 0.0 && weights[i] > 0.0 && g.is_finite() && d.is_finite();
        slice.coords.push(vec![q]);
        slice.grad_f_sq.push(if g.is_finite() { g } else { 0.0 });
        slice.dev_sq.push(if d.is_finite() { d } else { 0.0 });
        slice.scalar.push(r);
        slice.valid.push(ok);
    }
    Ok(slice)
}

/// Five-point first and second derivative weights per node.
struct Stencils {
    start: Vec<usize>,
    d1: Vec<[f64; 5]>,
    d2: Vec<[f64; 5]>,
}

impl Stencils {
    fn new(nodes: &[f64]) -> Self {
        let n = nodes.len();
        let mut st = Stencils {
            start: Vec::with_capacity(n),
            d1: Vec::with_capacity(n),
            d2: Vec::with_capacity(n),
        };
        for i in 0..n {
            let j0 = i.saturating_sub(2).min(n - 5);
            let w = fornberg_weights(nodes[i], &nodes[j0..j0 + 5], 2);
            st.start.push(j0);
            st.d1.push([w[1][0], w[1][1], w[1][2], w[1][3], w[1][4]]);
            st.d2.push([w[2][0], w[2][1], w[2][2], w[2][3], w[2][4]]);
        }
        st
    }

    fn apply(&self, w: &[f64; 5], i: usize, col: impl Fn(usize) -> f64) -> f64 {
        let y: [f64; 5] = std::array::from_fn(|k| col(self.start[i] + k));
        crate::geometry::stencil_sum(w, &y)
    }
}

/// Two-dimensional cigar slice from angular cosine modes `h_m(s)`.
fn mode_slice(
    op: &ReducedOperator,
    modes: &[&[f64]],
    time: f64,
    tau: f64,
    angles: usize,
    floor: f64,
) -> Result<KernelSlice> {
    let nodes = &op.grid.nodes;
    let ns = nodes.len();
    let na = angles + 1;
    let dphi = PI / angles as f64;
    let mass = op.mass(time);
    let stencils = Stencils::new(nodes);
    // per angle: H, H_phi, H_phi_phi over s
    let columns: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = (0..na)
        .map(|j| {
            let phi = j as f64 * dphi;
            let mut h = vec![0.0; ns];
            let mut hp = vec![0.0; ns];
            let mut hpp = vec![0.0; ns];
            for (m, hm) in modes.iter().enumerate() {
                let mf = m as f64;
                let (sn, cs) = (mf * phi).sin_cos();
                for i in 0..ns {
                    h[i] += hm[i] * cs;
                    hp[i] -= mf * hm[i] * sn;
                    hpp[i] -= mf * mf * hm[i] * cs;
                }
            }
            (h, hp, hpp)
        })
        .collect();
    let peak = columns
        .iter()
        .flat_map(|c| c.0.iter().copied())
        .fold(0.0, f64::max);
    let total = ns * na;
    let mut slice = KernelSlice {
        time,
        tau,
        coords: Vec::with_capacity(total),
        weights: Vec::with_capacity(total),
        h: Vec::with_capacity(total),
        f: Vec::with_capacity(total),
        grad_f_sq: Vec::with_capacity(total),
        dev_sq: Vec::with_capacity(total),
        scalar: Vec::with_capacity(total),
        valid: Vec::with_capacity(total),
        truncation_error: 0.0,
    };
    let shrink = 0.5 / tau;
    for (j, (h, hp, hpp)) in columns.iter().enumerate() {
        let phi = j as f64 * dphi;
        let wphi = if j == 0 || j == na - 1 { dphi } else { 2.0 * dphi };
        let f: Vec<f64> = h
            .iter()
            .map(|&v| if v > 0.0 { potential(2, tau, v.ln()) } else { f64::NAN })
            .collect();
        let fp: Vec<f64> = h.iter().zip(hp).map(|(v, d)| -d / v).collect();
        for i in 0..ns {
            let s = nodes[i];
            let b = cigar_conformal(s, time);
            let us = 1.0 - b;
            let fs = stencils.apply(&stencils.d1[i], i, |k| f[k]);
            let fss = stencils.apply(&stencils.d2[i], i, |k| f[k]);
            let fsp = stencils.apply(&stencils.d1[i], i, |k| fp[k]);
            let fpp = -hpp[i] / h[i] + fp[i] * fp[i];
            let k = 0.5 * cigar_scalar(s, time);
            let ess = (fss - us * fs) / b + k - shrink;
            let epp = (fpp + us * fs) / b + k - shrink;
            let esp = (fsp - us * fp[i]) / b;
            let dev = ess * ess + epp * epp + 2.0 * esp * esp;
            let grad = (fs * fs + fp[i] * fp[i]) / b;
            let w = mass[i] / (2.0 * PI) * wphi;
            let ok = h[i] >= floor * peak && h[i] > 0.0 && w > 0.0 && dev.is_finite() && grad.is_finite();
            slice.coords.push(vec![s, phi]);
            slice.weights.push(w);
            slice.h.push(h[i]);
            slice.f.push(f[i]);
            slice.grad_f_sq.push(if grad.is_finite() { grad } else { 0.0 });
            slice.dev_sq.push(if dev.is_finite() { dev } else { 0.0 });
            slice.scalar.push(2.0 * k);
            slice.valid.push(ok);
        }
    }
    Ok(slice)
}

/// `M_{t1,t2}` on the cigar: the largest kernel value over the sampled base radii.
pub(crate) fn cigar_sup_kernel(t1: f64, t2: f64, search: &SupSearch) -> Result<SupKernel> {
    let tau = t2 - t1;
    let flow = ModelFlow::CigarSoliton;
    let grid = ReducedGrid::for_flow(&flow, &search.grid)?;
    let opts = SolverOptions::default();
    let values = par_map(&search.cigar_radii, |&rho| -> Result<f64> {
        let field = solve_conjugate(&flow, &Point(vec![rho]), 0.0, -tau, &grid, &opts)?;
        let sl = field.slice(-tau)?;
        Ok(sl.h.iter().copied().filter(|v| v.is_finite()).fold(0.0, f64::max))
    });
    // far from the tip the cigar is the flat cylinder of circumference 2 pi
    let circle = ModelFlow::circle(2.0 * PI);
    let o = Point(vec![0.0]);
    let mut best = exact_flat_kernel(&circle, &o, -tau, &o, 0.0, &search.cutoff)? / (4.0 * PI * tau).sqrt();
    for v in values {
        best = best.max(v?);
    }
    Ok(SupKernel {
        value: best,
        method: KernelMethod::Pde,
        searched: search.cigar_radii.len() + 1,
    })
}

#[cfg(test)]
mod tests;
