//! Catalog entries. Each function measures one claim on one scenario.

use super::battery::test_function;
use super::collapse::noncollapsing_report;
use super::{Artifact, CheckData, CheckDef, Measurement};
use crate::entropy::{
    asymptotic_limit, entropy_curve, entropy_w, kernel_field, nash_deficit_integral, nash_gradients, nash_n,
    nash_time_average, perelman_production, Estimate, FieldOptions, Quantity,
};
use crate::error::{Error, Result};
use crate::geometry::{GridSpec, ModelFlow, Point, ReducedGrid};
use crate::kernels::{sup_kernel, KernelField, KernelMethod, KernelSlice, SupSearch};
use crate::pdesolver::{solve_conjugate, solve_forward, SolverOptions};
use crate::scenario::ScenarioConfig;
use std::f64::consts::PI;

struct Ctx<'a> {
    sc: &'a ScenarioConfig,
    flow: &'a ModelFlow,
    base: Point,
    t: f64,
    opts: FieldOptions,
    tol: f64,
}

impl<'a> Ctx<'a> {
    fn new(def: &CheckDef, sc: &'a ScenarioConfig) -> Self {
        Ctx {
            sc,
            flow: &sc.flow,
            base: sc.base(),
            t: sc.base_time,
            opts: sc.field_options(),
            tol: sc.tolerance(def.id, def.tolerance),
        }
    }

    fn field(&self, times: &[f64]) -> Result<KernelField> {
        self.field_with(times, &self.opts)
    }

    fn field_with(&self, times: &[f64], opts: &FieldOptions) -> Result<KernelField> {
        let mut times = times.to_vec();
        times.sort_by(|a, b| b.total_cmp(a));
        times.dedup();
        kernel_field(self.flow, &self.base, self.t, &times, opts)
    }

    fn n(&self) -> f64 {
        self.flow.dim() as f64
    }
}

fn relative(value: Estimate, reference: Estimate) -> (f64, f64) {
    let scale = reference.value.abs().max(f64::MIN_POSITIVE);
    ((value.value - reference.value).abs() / scale, (value.error + reference.error) / scale)
}

fn csv(name: &str, header: &str, rows: impl IntoIterator<Item = Vec<f64>>) -> Artifact {
    let mut text = format!("{header}\n");
    for r in rows {
        let cells: Vec<String> = r.iter().map(|v| format!("{v:.12e}")).collect();
        text.push_str(&cells.join(","));
        text.push('\n');
    }
    Artifact {
        name: name.into(),
        csv: text,
    }
}

/// Worst of several (margin, budget) pairs by `margin - budget`.
fn worst(pairs: impl IntoIterator<Item = (f64, f64)>) -> (f64, f64) {
    pairs
        .into_iter()
        .min_by(|a, b| (a.0 - a.1).total_cmp(&(b.0 - b.1)))
        .unwrap_or((f64::INFINITY, 0.0))
}

pub(super) fn w_vanishes_at_base_time(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let deltas: Vec<f64> = (0..7).map(|k| 0.1 * 0.5f64.powi(k)).collect();
    let times: Vec<f64> = deltas.iter().map(|d| c.t - d).collect();
    let f = c.field(&times)?;
    let w = times.iter().map(|&s| entropy_w(&f, s)).collect::<Result<Vec<_>>>()?;
    let (margin, budget) = worst(w.windows(2).map(|p| (p[0].value.abs() - p[1].value.abs(), p[0].error + p[1].error)));
    let mut d = CheckData::default();
    d.push(Measurement::trend("|W(t - delta)| decreases as delta halves", margin, budget, c.tol));
    d.value("delta", &deltas);
    d.value("w", w.iter().map(|e| e.value).collect::<Vec<_>>());
    Ok(d)
}

pub(super) fn nash_time_average_identity(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let rule = &sc.tolerances.time_rule;
    let mut d = CheckData::default();
    let mut rows = Vec::new();
    for tau in [1.0, 4.0] {
        let big_t = c.t - tau;
        let mut times = rule.times(c.t, big_t)?;
        times.push(big_t);
        let f = c.field(&times)?;
        let n = nash_n(&f, big_t)?;
        let avg = nash_time_average(&f, big_t, rule)?;
        let (r, b) = relative(avg, n);
        d.push(Measurement::identity(format!("time average of W vs N at tau = {tau}"), r, b, c.tol));
        rows.push(vec![big_t, n.value, avg.value, r]);
    }
    d.artifacts.push(csv("time_average.csv", "T,N,average_W,relative_residual", rows));
    Ok(d)
}

pub(super) fn w_below_nash_below_zero(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let times = sc.times();
    let curve = entropy_curve(c.flow, &c.base, c.t, &times, &c.opts, false)?;
    let (margin, budget) = worst(curve.samples.iter().flat_map(|s| {
        [(s.n - s.w, s.w_err + s.n_err), (-s.n, s.n_err)]
    }));
    let mut d = CheckData::default();
    d.push(Measurement::inequality("min over samples of N - W and -N", margin, budget, c.tol));
    let mut buf = Vec::new();
    curve.write_csv(&mut buf).map_err(|e| Error::Config(e.to_string()))?;
    d.artifacts.push(Artifact {
        name: "curve.csv".into(),
        csv: String::from_utf8_lossy(&buf).into_owned(),
    });
    d.value("samples", curve.samples.len());
    Ok(d)
}

pub(super) fn w_production_identity(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let big_t = c.t - 2.0;
    let h = 1e-3 * (c.t - big_t);
    let eval = |opts: &FieldOptions| -> Result<(f64, f64, Estimate, f64)> {
        let times: Vec<f64> = [2.0, 1.0, 0.0, -1.0, -2.0].iter().map(|k| big_t + k * h).collect();
        let f = c.field_with(&times, opts)?;
        let w = times.iter().map(|&s| entropy_w(&f, s)).collect::<Result<Vec<_>>>()?;
        let fd = (w[1].value - w[3].value) / (2.0 * h);
        let fd2 = (w[0].value - w[4].value) / (4.0 * h);
        let p = perelman_production(&f, big_t)?;
        Ok((fd, fd2, p, (w[1].error + w[3].error) / (2.0 * h)))
    };
    let (fd, fd2, p, w_err) = eval(&c.opts)?;
    let (fd_fine, _, p_fine, _) = eval(&c.opts.refined())?;
    let scale = p.value.abs().max(f64::MIN_POSITIVE);
    let residual = (fd - p.value).abs() / scale;
    let budget = (w_err + p.error + (fd - fd2).abs() / 3.0 + (fd - fd_fine).abs() + (p.value - p_fine.value).abs()) / scale;
    let mut d = CheckData::default();
    d.push(Measurement::identity("centered dW/dT vs production at tau = 2", residual, budget, c.tol));
    let times = sc.times();
    let f = c.field(&times)?;
    let prods = times.iter().map(|&s| perelman_production(&f, s)).collect::<Result<Vec<_>>>()?;
    let (margin, pb) = worst(prods.iter().map(|p| (p.value, p.error)));
    d.push(Measurement::inequality("production >= 0 on the schedule", margin, pb, 1e-8));
    d.value("finite_difference", fd);
    d.value("finite_difference_refined", fd_fine);
    d.value("production", p.value);
    d.value("production_refined", p_fine.value);
    Ok(d)
}

pub(super) fn nash_derivative_identity(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let mut d = CheckData::default();
    for tau in [1.0, 4.0] {
        let big_t = c.t - tau;
        let h = 1e-3 * tau;
        let f = c.field(&[big_t + h, big_t, big_t - h])?;
        let (np, nm) = (nash_n(&f, big_t + h)?, nash_n(&f, big_t - h)?);
        let (n, w) = (nash_n(&f, big_t)?, entropy_w(&f, big_t)?);
        let fd = Estimate::new((np.value - nm.value) / (2.0 * h), (np.error + nm.error) / (2.0 * h));
        let rhs = Estimate::new((n.value - w.value) / tau, (n.error + w.error) / tau);
        let (r, b) = relative(fd, rhs);
        d.push(Measurement::identity(format!("dN/dT vs (N - W)/tau at tau = {tau}"), r, b, c.tol));
        d.value(&format!("tau_{tau}"), [fd.value, rhs.value]);
    }
    Ok(d)
}

pub(super) fn nash_deficit_identity(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let rule = &sc.tolerances.time_rule;
    let mut d = CheckData::default();
    for tau in [1.0, 4.0] {
        let big_t = c.t - tau;
        let mut times = rule.times(c.t, big_t)?;
        times.push(big_t);
        let f = c.field(&times)?;
        let n = nash_n(&f, big_t)?;
        let deficit = nash_deficit_integral(&f, big_t, rule)?;
        let (r, b) = relative(deficit, n);
        d.push(Measurement::identity(format!("deficit integral vs N at tau = {tau}"), r, b, c.tol));
        d.value(&format!("tau_{tau}"), [n.value, deficit.value]);
    }
    Ok(d)
}

pub(super) fn gaussian_shrinker_equality(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let times: Vec<f64> = [1.0, 10.0, 100.0].iter().map(|tau| c.t - tau).collect();
    let f = c.field(&times)?;
    let mut d = CheckData::default();
    let mut rows = Vec::new();
    for &s in &times {
        let (w, n, p) = (entropy_w(&f, s)?, nash_n(&f, s)?, perelman_production(&f, s)?);
        let tau = c.t - s;
        d.push(Measurement::identity(format!("|W| at tau = {tau}"), w.value.abs(), w.error, c.tol));
        d.push(Measurement::identity(format!("|N| at tau = {tau}"), n.value.abs(), n.error, c.tol));
        d.push(Measurement::identity(format!("production at tau = {tau}"), p.value.abs(), p.error, c.tol));
        rows.push(vec![s, w.value, n.value, p.value]);
    }
    d.artifacts.push(csv("shrinker.csv", "T,W,N,production", rows));
    Ok(d)
}

/// Reduced-coordinate support `[lo, hi]`, circle length, and the frame factor `a(q)`.
fn reduced_domain(flow: &ModelFlow, sl: &KernelSlice) -> Result<(f64, f64, Option<f64>, f64)> {
    let valid: Vec<usize> = (0..sl.len()).filter(|&i| sl.valid[i]).collect();
    if valid.len() < 8 {
        return Err(Error::DataQuality("too few valid nodes for the test-function battery".into()));
    }
    match flow {
        ModelFlow::EuclideanStatic { .. } => {
            let mut r: Vec<f64> = valid.iter().map(|&i| sl.coords[i][0]).collect();
            r.sort_by(f64::total_cmp);
            let m = r.len();
            let spacing = r[m - 1] - r[m - 2];
            Ok((0.0, r[m - 1] - 2.0 * spacing, None, 1.0))
        }
        ModelFlow::FlatTorus { torus } if torus.dim() == 1 => {
            let len = torus.lattice[0][0].abs();
            Ok((0.0, len, Some(len), 1.0))
        }
        ModelFlow::ShrinkingSphere { .. } => {
            let a = flow.radial_frame(0.5, sl.time)?.a;
            Ok((0.0, PI, None, a))
        }
        other => Err(Error::Config(format!("no one-dimensional test functions on {}", other.short_name()))),
    }
}

fn battery_slice(c: &Ctx) -> Result<(KernelField, f64)> {
    let s = c.t - 1.0;
    Ok((c.field(&[s])?, s))
}

pub(super) fn poincare_inequality(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let (f, s) = battery_slice(&c)?;
    let sl = f.slice(s)?;
    let tau = sl.tau;
    let (lo, hi, period, a) = reduced_domain(c.flow, sl)?;
    let defect = (sl.mass() - 1.0).abs();
    let mut margins = Vec::new();
    for u in test_function(sc.seed, 20, lo, hi, period, false) {
        let vals: Vec<(f64, f64)> = sl.coords.iter().map(|q| u.eval(q[0])).collect();
        let mean = sl.integrate(|i| vals[i].0);
        let sq = sl.integrate(|i| vals[i].0 * vals[i].0);
        let grad = sl.integrate(|i| (vals[i].1 / a).powi(2));
        let sup = vals.iter().map(|v| v.0 * v.0 + 2.0 * tau * (v.1 / a).powi(2)).fold(0.0, f64::max);
        margins.push((2.0 * tau * grad - (sq - mean * mean), defect * sup + 1e-15));
    }
    let (m, b) = worst(margins.iter().copied());
    let mut d = CheckData::default();
    d.push(Measurement::inequality("2 tau E|grad u|^2 - Var(u) over 20 test functions", m, b, c.tol));
    if let ModelFlow::EuclideanStatic { dim } = c.flow {
        // u = x_1: Var = E[r^2]/n and 2 tau E|grad u|^2 = 2 tau
        let var = sl.integrate(|i| sl.coords[i][0].powi(2)) / *dim as f64;
        d.push(Measurement::identity(
            "linear u: Var(x_1) = 2 tau",
            (var - 2.0 * tau).abs(),
            defect * 2.0 * tau,
            c.tol,
        ));
    }
    d.value("margins", margins.iter().map(|p| p.0).collect::<Vec<_>>());
    d.value("tau", tau);
    Ok(d)
}

pub(super) fn log_sobolev_inequality(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let (f, s) = battery_slice(&c)?;
    let sl = f.slice(s)?;
    let tau = sl.tau;
    let (lo, hi, period, a) = reduced_domain(c.flow, sl)?;
    let defect = (sl.mass() - 1.0).abs();
    let xlogx = |x: f64| if x > 0.0 { x * x.ln() } else { 0.0 };
    let mut margins = Vec::new();
    for u in test_function(sc.seed, 20, lo, hi, period, true) {
        let vals: Vec<(f64, f64)> = sl.coords.iter().map(|q| u.eval(q[0])).collect();
        let mean = sl.integrate(|i| vals[i].0);
        let ent = sl.integrate(|i| xlogx(vals[i].0)) - xlogx(mean);
        let fisher = sl.integrate(|i| {
            let (v, dv) = vals[i];
            if v > 0.0 {
                (dv / a).powi(2) / v
            } else {
                0.0
            }
        });
        let sup = vals
            .iter()
            .map(|&(v, dv)| xlogx(v).abs() + if v > 0.0 { tau * (dv / a).powi(2) / v } else { 0.0 })
            .fold(0.0, f64::max);
        margins.push((tau * fisher - ent, defect * sup + 1e-15));
    }
    let (m, b) = worst(margins.iter().copied());
    let mut d = CheckData::default();
    d.push(Measurement::inequality("tau E[|grad u|^2/u] - Ent(u) over 20 test functions", m, b, c.tol));
    d.value("margins", margins.iter().map(|p| p.0).collect::<Vec<_>>());
    d.value("tau", tau);
    Ok(d)
}

/// Nodes whose one-sided radial stencil touches a pole.
fn pole_adjacent(flow: &ModelFlow, i: usize, len: usize) -> bool {
    matches!(flow, ModelFlow::ShrinkingSphere { .. }) && (i < 2 || i + 2 >= len)
}

pub(super) fn hamilton_gradient_estimate(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let grid = ReducedGrid::for_flow(c.flow, &sc.grid)?;
    let big_t = c.t - 2.0;
    let start = big_t + 0.05;
    let offsets = [0.0, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5];
    let times: Vec<f64> = offsets.iter().map(|o| start + o).collect();
    let solver = SolverOptions {
        slices: times.clone(),
        ..sc.solver.clone()
    };
    let field = solve_forward(c.flow, &c.base, big_t, *times.last().unwrap(), &grid, &solver)?;
    let mut j: f64 = 0.0;
    for &s in &times {
        let sl = field.slice(s)?;
        for i in (0..sl.len()).filter(|&i| sl.valid[i]) {
            j = j.max(sl.h[i]);
        }
    }
    let (mut total, mut ok, mut excluded) = (0usize, 0usize, 0usize);
    let mut worst_margin = f64::INFINITY;
    for (&s, &elapsed) in times.iter().zip(&offsets).skip(1) {
        let sl = field.slice(s)?;
        for i in (0..sl.len()).filter(|&i| sl.valid[i]) {
            if pole_adjacent(c.flow, i, sl.len()) {
                excluded += 1;
                continue;
            }
            // |grad u|^2/u <= u log(J/u)/t, divided through by u
            let margin = (j / sl.h[i]).ln() - elapsed * sl.grad_f_sq[i];
            total += 1;
            if margin >= -c.tol {
                ok += 1;
            }
            worst_margin = worst_margin.min(margin);
        }
    }
    let fraction = ok as f64 / total.max(1) as f64;
    let mut d = CheckData::default();
    d.push(Measurement::inequality(
        "fraction of interior nodes within slack, minus 0.999",
        fraction - 0.999,
        0.0,
        0.0,
    ));
    d.value("nodes", total);
    d.value("satisfied", ok);
    d.value("pole_adjacent_excluded", excluded);
    d.value("worst_margin", worst_margin);
    d.value("sup_observed", j);
    Ok(d)
}

fn conjugate_statistic(c: &Ctx, grid_spec: &GridSpec) -> Result<f64> {
    let grid = ReducedGrid::for_flow(c.flow, grid_spec)?;
    let restart = 0.05;
    let taus = [restart, 0.1, 0.2, 0.5, 1.0];
    let times: Vec<f64> = taus.iter().map(|tau| c.t - tau).collect();
    let solver = SolverOptions {
        slices: times.clone(),
        ..c.sc.solver.clone()
    };
    let field = solve_conjugate(c.flow, &c.base, c.t, *times.last().unwrap(), &grid, &solver)?;
    let mut j: f64 = 0.0;
    for &s in &times {
        let sl = field.slice(s)?;
        j = j.max(sl.peak());
    }
    let mut stat: f64 = 0.0;
    for (&s, &tau) in times.iter().zip(&taus).skip(1) {
        let sl = field.slice(s)?;
        for i in (0..sl.len()).filter(|&i| sl.valid[i] && !pole_adjacent(c.flow, i, sl.len())) {
            let log = 1.0 + (j / sl.h[i]).ln();
            stat = stat.max((tau - restart) * sl.grad_f_sq[i] / (log * log));
        }
    }
    Ok(stat)
}

pub(super) fn conjugate_gradient_boundedness(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let coarse = conjugate_statistic(&c, &sc.grid)?;
    let fine_spec = GridSpec {
        nodes: 2 * sc.grid.nodes,
        spacing: 0.5 * sc.grid.spacing,
        growth: 0.5 * sc.grid.growth,
        ..sc.grid.clone()
    };
    let fine = conjugate_statistic(&c, &fine_spec)?;
    let mut d = CheckData::default();
    d.push(Measurement::diagnostic(
        "sup tau |grad u|^2 / (u^2 (1 + log(J/u))^2), refined grid",
        fine,
        fine <= c.tol * coarse + 1e-12,
    ));
    d.value("coarse", coarse);
    d.value("fine", fine);
    d.value("growth_allowed", c.tol);
    Ok(d)
}

/// Distance from the base point to node `i`, by the coordinate convention of the method.
fn node_distance(c: &Ctx, field: &KernelField, sl: &KernelSlice, i: usize) -> Result<f64> {
    let q = &sl.coords[i];
    Ok(match c.flow {
        ModelFlow::EuclideanStatic { .. } => q[0].abs(),
        ModelFlow::FlatTorus { torus } if field.meta.method == KernelMethod::Pde => torus.distance(q, c.base.coords()),
        ModelFlow::FlatTorus { torus } => torus.distance(q, &vec![0.0; torus.dim()]),
        ModelFlow::ShrinkingSphere { .. } => c.flow.radial_frame(0.5, sl.time)?.a * q[0],
        other => return Err(Error::Config(format!("no node distances on {}", other.short_name()))),
    })
}

pub(super) fn potential_gradient_growth(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let s = c.t - 1.0;
    let f = c.field(&[s])?;
    let sl = f.slice(s)?;
    let mut pts = Vec::new();
    for i in (0..sl.len()).filter(|&i| sl.valid[i]) {
        pts.push((node_distance(&c, &f, sl, i)?, sl.grad_f_sq[i].sqrt()));
    }
    let reach = pts.iter().map(|p| p.0).fold(0.0, f64::max);
    let fit = |limit: f64| {
        pts.iter()
            .filter(|p| p.0 <= limit)
            .map(|p| p.1 / (1.0 + p.0))
            .fold(0.0, f64::max)
    };
    let (full, half) = (fit(reach), fit(0.5 * reach));
    let mut d = CheckData::default();
    d.push(Measurement::diagnostic(
        "fitted C in |grad f| <= C (1 + dist)",
        full,
        full <= c.tol * half + 1e-12,
    ));
    d.value("c_fit", full);
    d.value("c_fit_inner_half", half);
    d.value("reach", reach);
    Ok(d)
}

pub(super) fn distance_distortion(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let (dim, t_sing) = match c.flow {
        ModelFlow::ShrinkingSphere { dim, t_sing } => (*dim as f64, *t_sing),
        other => return Err(Error::Config(format!("distance distortion needs the sphere, got {}", other.short_name()))),
    };
    let t = c.t;
    let scale = c.flow.sphere_scale(t).unwrap();
    let k = 1.0 / scale;
    let mut d = CheckData::default();
    let mut rows = Vec::new();
    let mut margins = Vec::new();
    let mut fd_residual: f64 = 0.0;
    let h = 1e-5 * (t_sing - t);
    for theta in [PI / 4.0, PI / 2.0, PI] {
        let (x, y) = (Point(vec![0.0]), Point(vec![theta]));
        let exact = -theta * (dim - 1.0).sqrt() / (2.0 * (t_sing - t)).sqrt();
        let dist_at = |s: f64| c.flow.geodesic_distance(&x, &y, s);
        let fd = (3.0 * dist_at(t)? - 4.0 * dist_at(t - h)? + dist_at(t - 2.0 * h)?) / (2.0 * h);
        fd_residual = fd_residual.max((fd - exact).abs() / exact.abs());
        let dist = c.flow.geodesic_distance(&x, &y, t)?;
        for r0 in [0.25, 0.5, 1.0] {
            if dist < 2.0 * r0 {
                continue;
            }
            let bound = -2.0 * (dim - 1.0) * (2.0 / 3.0 * k * r0 + 1.0 / r0);
            margins.push(exact - bound);
            rows.push(vec![theta, r0, dist, exact, bound]);
        }
    }
    let m = margins.iter().copied().fold(f64::INFINITY, f64::min);
    d.push(Measurement::inequality("d/dt dist minus the distortion bound", m, 0.0, c.tol));
    d.push(Measurement::identity("closed-form d/dt dist vs finite difference", fd_residual, 0.0, 1e-6));
    d.artifacts.push(csv("distortion.csv", "theta,r0,dist,ddt_dist,bound", rows));
    Ok(d)
}

pub(super) fn torus_nash_divergence(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let k = c.n();
    let vol = c.flow.volume(c.t)?;
    let taus = [0.1, 1.0, 10.0, 100.0, 1000.0, 1e4];
    let times: Vec<f64> = taus.iter().map(|tau| c.t - tau).collect();
    let f = c.field(&times)?;
    let mut d = CheckData::default();
    let (mut resid, mut rb): (f64, f64) = (0.0, 0.0);
    let mut bound_pairs = Vec::new();
    let mut rows = Vec::new();
    for (&tau, &s) in taus.iter().zip(&times) {
        let n = nash_n(&f, s)?;
        let shifted = n.value + 0.5 * k * (4.0 * PI * tau).ln() + 0.5 * k;
        let bound = vol / std::f64::consts::E - 0.5 * k * (4.0 * PI * tau).ln() - 0.5 * k;
        if tau >= 100.0 && (shifted - vol.ln()).abs() >= resid {
            resid = (shifted - vol.ln()).abs();
            rb = n.error;
        }
        bound_pairs.push((bound - n.value, n.error));
        rows.push(vec![tau, n.value, shifted, bound]);
    }
    d.push(Measurement::identity("N + (k/2) log(4 pi tau) + k/2 vs log V for tau >= 100", resid, rb, c.tol));
    let (m, b) = worst(bound_pairs);
    d.push(Measurement::inequality("Vol/e - (k/2) log(4 pi tau) - k/2 - N", m, b, 1e-9));
    d.artifacts.push(csv("torus_divergence.csv", "tau,N,shifted_N,upper_bound", rows));
    Ok(d)
}

fn nash_on(flow: &ModelFlow, x: &Point, t: f64, times: &[f64], opts: &FieldOptions) -> Result<Vec<Estimate>> {
    let f = kernel_field(flow, x, t, times, opts)?;
    times.iter().map(|&s| nash_n(&f, s)).collect()
}

pub(super) fn product_nash_additivity(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let taus = [0.1, 1.0, 10.0, 100.0];
    let times: Vec<f64> = taus.iter().map(|tau| c.t - tau).collect();
    let x = c.base.coords();
    let factors: Vec<(ModelFlow, Point)> = match c.flow {
        ModelFlow::FlatTorus { torus } => {
            let k = torus.dim();
            let diagonal = (0..k).all(|i| (0..k).all(|j| i == j || torus.lattice[i][j] == 0.0));
            if !diagonal || k < 2 {
                return Err(Error::Config("product additivity needs a rectangular torus of dimension >= 2".into()));
            }
            (0..k)
                .map(|i| (ModelFlow::circle(torus.lattice[i][i].abs()), Point(vec![x[i]])))
                .collect()
        }
        ModelFlow::FlatProduct { torus, euclidean_dim } => {
            let kd = torus.dim();
            let mut v = vec![(ModelFlow::FlatTorus { torus: torus.clone() }, Point(x[..kd].to_vec()))];
            if *euclidean_dim > 0 {
                v.push((ModelFlow::EuclideanStatic { dim: *euclidean_dim }, Point(x[kd..].to_vec())));
            }
            v
        }
        other => return Err(Error::Config(format!("{} is not a product", other.short_name()))),
    };
    let whole = nash_on(c.flow, &c.base, c.t, &times, &c.opts)?;
    let mut sum = vec![Estimate::new(0.0, 0.0); times.len()];
    for (flow, p) in &factors {
        let opts = FieldOptions {
            method: crate::entropy::MethodChoice::Auto,
            ..c.opts.clone()
        };
        for (acc, n) in sum.iter_mut().zip(nash_on(flow, p, c.t, &times, &opts)?) {
            acc.value += n.value;
            acc.error += n.error;
        }
    }
    let mut d = CheckData::default();
    let mut rows = Vec::new();
    for ((tau, w), s) in taus.iter().zip(&whole).zip(&sum) {
        d.push(Measurement::identity(
            format!("|N_product - sum of factors| at tau = {tau}"),
            (w.value - s.value).abs(),
            w.error + s.error,
            c.tol,
        ));
        rows.push(vec![*tau, w.value, s.value]);
    }
    d.artifacts.push(csv("product.csv", "tau,N_product,N_factor_sum", rows));
    Ok(d)
}

pub(super) fn covering_nash_inequality(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let cover = match c.flow {
        ModelFlow::TorusQuotient { cover, .. } => cover.clone(),
        other => return Err(Error::Config(format!("{} is not a quotient", other.short_name()))),
    };
    let taus = [0.1, 1.0, 10.0];
    let times: Vec<f64> = taus.iter().map(|tau| c.t - tau).collect();
    let base = nash_on(c.flow, &c.base, c.t, &times, &c.opts)?;
    let up = nash_on(&ModelFlow::FlatTorus { torus: cover }, &c.base, c.t, &times, &c.opts)?;
    let mut d = CheckData::default();
    let mut rows = Vec::new();
    for ((tau, b), u) in taus.iter().zip(&base).zip(&up) {
        d.push(Measurement::inequality(
            format!("N_cover - N_base at tau = {tau}"),
            u.value - b.value,
            u.error + b.error,
            c.tol,
        ));
        rows.push(vec![*tau, u.value, b.value]);
    }
    d.artifacts.push(csv("covering.csv", "tau,N_cover,N_base", rows));
    Ok(d)
}

pub(super) fn nash_decay_lower_bound(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let n = c.n();
    let times: Vec<f64> = sc.times().into_iter().filter(|s| c.t - s >= 1.0).collect();
    if times.is_empty() {
        return Err(Error::Schedule("no sample with t - T >= 1".into()));
    }
    let f = c.field(&times)?;
    let search = SupSearch::default();
    let mut pairs = Vec::new();
    let mut shifted_min = f64::INFINITY;
    let mut rows = Vec::new();
    for &s in &times {
        let tau = c.t - s;
        let e = nash_n(&f, s)?;
        let m = sup_kernel(c.flow, s, s + 1.0, &search)?.value;
        let lower = -0.5 * n - m.ln() - 0.5 * n * (4.0 * PI * tau).ln();
        pairs.push((e.value - lower, e.error));
        let shifted = e.value + 0.5 * n * (4.0 * PI * tau).ln();
        shifted_min = shifted_min.min(shifted);
        rows.push(vec![s, e.value, shifted, lower]);
    }
    let (m, b) = worst(pairs);
    let mut d = CheckData::default();
    d.push(Measurement::inequality("N - (-n/2 - log M - (n/2) log(4 pi tau))", m, b, c.tol));
    d.push(Measurement::diagnostic("inf of N + (n/2) log(4 pi tau)", shifted_min, true));
    d.value("empirical_c", -shifted_min);
    d.artifacts.push(csv("decay.csv", "T,N,shifted_N,lower_bound", rows));
    Ok(d)
}

/// Grid for cigar checks whose horizons stay short.
fn short_horizon(grid: &GridSpec, cap: f64) -> GridSpec {
    GridSpec {
        truncation: Some(grid.truncation.map_or(cap, |t| t.min(cap))),
        ..grid.clone()
    }
}

pub(super) fn nash_gradient_bound(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let grid = short_horizon(&sc.grid, 60.0);
    let opts = FieldOptions {
        grid: grid.clone(),
        ..c.opts.clone()
    };
    let search = SupSearch {
        cigar_radii: vec![0.0, 1.0, 4.0],
        grid,
        ..SupSearch::default()
    };
    let taus = [2.0, 4.0, 8.0];
    let times: Vec<f64> = taus.iter().map(|tau| c.t - tau).collect();
    let x = Point(vec![1.0]);
    let g = nash_gradients(c.flow, &x, c.t, &times, 0.05, &opts, &search)?;
    let mut d = CheckData::default();
    let mut rows = Vec::new();
    let mut pairs = Vec::new();
    for (tau, e) in taus.iter().zip(&g) {
        let bound = e.bound_squared.ok_or_else(|| Error::Schedule("gradient bound needs t - T > 1".into()))?;
        pairs.push((bound - e.value * e.value, 0.0));
        rows.push(vec![*tau, e.value, bound.max(0.0).sqrt(), e.nash, e.sup_kernel.unwrap_or(f64::NAN)]);
    }
    let (m, b) = worst(pairs);
    d.push(Measurement::inequality("bound^2 - |grad N|^2 at rho = 1", m, b, c.tol));
    d.artifacts.push(csv("gradient_bound.csv", "tau,grad_N,bound,N,sup_kernel", rows));
    Ok(d)
}

pub(super) fn nash_base_point_independence(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let opts = FieldOptions {
        grid: short_horizon(&sc.grid, 100.0),
        ..c.opts.clone()
    };
    let taus = [1.0, 4.0, 16.0, 64.0];
    let times: Vec<f64> = taus.iter().map(|tau| c.t - tau).collect();
    let tip = nash_on(c.flow, &Point(vec![0.0]), c.t, &times, &opts)?;
    let off = nash_on(c.flow, &Point(vec![1.0]), c.t, &times, &opts)?;
    let gaps: Vec<Estimate> = tip
        .iter()
        .zip(&off)
        .map(|(a, b)| Estimate::new((a.value - b.value).abs(), a.error + b.error))
        .collect();
    let (m, b) = worst(gaps.windows(2).map(|p| (p[0].value - p[1].value, p[0].error + p[1].error)));
    let mut d = CheckData::default();
    d.push(Measurement::trend("|N_tip - N_(rho = 1)| shrinks as T decreases", m, b, c.tol));
    d.artifacts.push(csv(
        "base_point_gap.csv",
        "tau,N_tip,N_rho1,gap",
        taus.iter()
            .zip(tip.iter().zip(&off))
            .map(|(t, (a, b))| vec![*t, a.value, b.value, (a.value - b.value).abs()]),
    ));
    Ok(d)
}

pub(super) fn nash_mean_value_inequality(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    if !c.flow.is_homogeneous() {
        return Err(Error::Config("the mean-value check integrates over base points only on homogeneous flows".into()));
    }
    let n = c.n();
    let tb = c.t;
    let triples = [(tb - 0.5, tb, tb - 4.0), (tb - 1.0, tb, tb - 8.0), (tb - 0.75, tb - 0.25, tb - 3.0)];
    let search = SupSearch::default();
    let mut d = CheckData::default();
    let mut rows = Vec::new();
    for (s, t, big_t) in triples {
        let lhs = nash_on(c.flow, &c.base, t, &[big_t], &c.opts)?[0];
        // on homogeneous flows the nu-average of N_{(y,s)}(T) is N_{(x,s)}(T)
        let inner = nash_on(c.flow, &c.base, s, &[big_t], &c.opts)?[0];
        let m = sup_kernel(c.flow, big_t, big_t + 1.0, &search)?.value;
        let q = (t - s) / (t - big_t - 1.0);
        let rhs = (1.0 + q) * inner.value
            + q * (m.ln() + 0.5 * n * (4.0 * PI * (s - big_t)).ln() + 0.5 * n)
            + 0.5 * n * ((s - big_t) / (t - big_t)).ln();
        d.push(Measurement::inequality(
            format!("mean-value inequality at (s, t, T) = ({s}, {t}, {big_t})"),
            rhs - lhs.value,
            lhs.error + (1.0 + q) * inner.error,
            c.tol,
        ));
        rows.push(vec![s, t, big_t, lhs.value, rhs]);
    }
    d.artifacts.push(csv("mean_value.csv", "s,t,T,lhs,rhs", rows));
    Ok(d)
}

pub(super) fn entropy_chain(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let samples = sc.times();
    let eps = [0.1, 0.5];
    let mut times = samples.clone();
    for e in eps {
        times.extend(samples.iter().map(|s| c.t + e * (s - c.t)));
    }
    let f = c.field(&times)?;
    let mut d = CheckData::default();
    let mut lower = Vec::new();
    let mut rows = Vec::new();
    for &s in &samples {
        let (w, n) = (entropy_w(&f, s)?, nash_n(&f, s)?);
        lower.push((n.value - w.value, n.error + w.error));
        let mut row = vec![s, w.value, n.value];
        for e in eps {
            let we = entropy_w(&f, c.t + e * (s - c.t))?;
            row.push((1.0 - e) * we.value);
        }
        rows.push(row);
    }
    let (m, b) = worst(lower);
    d.push(Measurement::inequality("N - W on the schedule", m, b, c.tol));
    for e in eps {
        let mut pairs = Vec::new();
        for &s in &samples {
            let n = nash_n(&f, s)?;
            let we = entropy_w(&f, c.t + e * (s - c.t))?;
            pairs.push(((1.0 - e) * we.value - n.value, (1.0 - e) * we.error + n.error));
        }
        let (m, b) = worst(pairs);
        d.push(Measurement::inequality(format!("(1 - eps) W(t + eps (T - t)) - N, eps = {e}"), m, b, c.tol));
    }
    d.artifacts.push(csv("chain.csv", "T,W,N,chain_eps_0.1,chain_eps_0.5", rows));
    Ok(d)
}

pub(super) fn entropy_gap_evidence(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let lim = &sc.tolerances.limit;
    let refine = !matches!(c.flow, ModelFlow::EuclideanStatic { .. });
    let curve = entropy_curve(c.flow, &c.base, c.t, &sc.times(), &c.opts, refine)?;
    let w = asymptotic_limit(&curve, Quantity::W, lim)?;
    let last = curve.samples.last().unwrap();
    let mut d = CheckData::default();
    let steady = w
        .differences
        .last()
        .copied()
        .unwrap_or(f64::INFINITY)
        .abs()
        .max(match w.extrapolants.as_slice() {
            [.., a, b] => (a - b).abs(),
            _ => 0.0,
        });
    d.push(Measurement::inequality("convergence: tol - last change of the W sequence", lim.tol - steady, 0.0, 0.0));
    match c.flow {
        ModelFlow::EuclideanStatic { .. } => {
            d.push(Measurement::identity("|limit of W|", w.estimate.abs(), last.w_err, c.tol));
        }
        _ => {
            d.push(Measurement::inequality("-0.1 - limit of W", -0.1 - w.estimate, last.w_err, c.tol));
        }
    }
    d.value("w_limit", &w);
    d.value("refined", refine);
    Ok(d)
}

pub(super) fn noncollapsing_evidence(def: &CheckDef, sc: &ScenarioConfig) -> Result<CheckData> {
    let c = Ctx::new(def, sc);
    let lim = &sc.tolerances.limit;
    let mut d = CheckData::default();
    let table = |points: &[Point], scales: &[f64], opts: &FieldOptions| {
        noncollapsing_report(c.flow, points, scales, lim.floor, c.t, opts)
    };
    let report = match c.flow {
        ModelFlow::EuclideanStatic { dim } => {
            let r = table(&[c.base.clone()], &[0.5, 1.0, 2.0, 4.0, 8.0], &c.opts)?;
            let omega = crate::geometry::unit_ball_volume(*dim);
            let dev = r.rows.iter().map(|row| (row.ratio - omega).abs()).fold(0.0, f64::max);
            let nmax = r.rows.iter().map(|row| row.nash.abs()).fold(0.0, f64::max);
            d.push(Measurement::identity("ratio equals the unit-ball volume at every scale", dev, 0.0, 1e-6));
            d.push(Measurement::identity("N vanishes at every scale", nmax, 0.0, 1e-8));
            r
        }
        ModelFlow::CigarSoliton => {
            let tip = entropy_curve(c.flow, &Point(vec![0.0]), c.t, &sc.times(), &c.opts, false)?;
            let (m, b) = worst(tip.samples.windows(2).map(|p| (p[0].n - p[1].n, p[0].n_err + p[1].n_err)));
            d.push(Measurement::trend("tip N decreases along the schedule", m, b, c.tol));
            let last = tip.samples.last().unwrap();
            d.push(Measurement::inequality("floor - last tip N", lim.floor - last.n, last.n_err, 0.0));
            let points: Vec<Point> = [10.0, 50.0, 100.0].iter().map(|r| Point(vec![*r])).collect();
            let opts = FieldOptions {
                grid: short_horizon(&sc.grid, 200.0),
                ..c.opts.clone()
            };
            let r = table(&points, &[2.0, 4.0, 8.0, 16.0, 32.0], &opts)?;
            let ratios = r.ratios(&Point(vec![50.0]));
            let mr = ratios.windows(2).map(|p| p[0].1 - p[1].1).fold(f64::INFINITY, f64::min);
            d.push(Measurement::trend("ratio at rho = 50 decreases in r", mr, 0.0, c.tol));
            for x in &points {
                let ns: Vec<f64> = r.rows.iter().filter(|row| &row.point == x).map(|row| row.nash).collect();
                let mn = ns.windows(2).map(|p| p[0] - p[1]).fold(f64::INFINITY, f64::min);
                d.push(Measurement::trend(format!("N at rho = {} decreases in r", x.0[0]), mn, 0.0, c.tol));
            }
            let mut buf = Vec::new();
            tip.write_csv(&mut buf).map_err(|e| Error::Config(e.to_string()))?;
            d.artifacts.push(Artifact {
                name: "tip_curve.csv".into(),
                csv: String::from_utf8_lossy(&buf).into_owned(),
            });
            d.value("tip_n_last", last.n);
            r
        }
        _ => {
            let r = table(&[c.base.clone()], &[0.25, 0.5, 1.0], &c.opts)?;
            let curve = entropy_curve(c.flow, &c.base, c.t, &sc.times(), &c.opts, false)?;
            let nl = asymptotic_limit(&curve, Quantity::N, lim)?;
            let min_ratio = r.min_ratio.unwrap_or(0.0);
            d.push(Measurement::inequality("smallest admissible ratio", min_ratio, 0.0, 0.0));
            let bounded = nl.converged && !nl.divergent && nl.estimate.is_finite();
            d.push(Measurement::trend(
                "N limit converged above the floor",
                if bounded { nl.estimate - lim.floor } else { -1.0 },
                0.0,
                0.0,
            ));
            d.value("n_limit", nl.estimate);
            r
        }
    };
    let mut buf = Vec::new();
    report.write_csv(&mut buf).map_err(|e| Error::Config(e.to_string()))?;
    d.artifacts.push(Artifact {
        name: "kappa_table.csv".into(),
        csv: String::from_utf8_lossy(&buf).into_owned(),
    });
    d.value("label", &report.label);
    d.value("min_ratio", report.min_ratio);
    d.value("bounded_points", &report.bounded_points);
    Ok(d)
}
