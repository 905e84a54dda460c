//! Pointed entropies `W` and `N` of a conjugate heat kernel and the
//! quantities derived from them.
//!
//! With `tau = t - s` and `f = -log((4 pi tau)^{n/2} H)`:
//!
//! * `W(s) = int [tau (|grad f|^2 + R) + f - n] H dg_s`
//! * `N(s) = int f H dg_s - n/2`
//! * `dW/ds = 2 tau int |Ric + Hess f - g/(2 tau)|^2 H dg_s`

mod curve;
mod source;

pub use curve::{
    asymptotic_limit, entropy_curve, geometric_schedule, EntropyCurve, EntropySample, Limit, LimitOptions,
    Quantity,
};
pub use source::{kernel_field, oracle_deviation, resolve_method, FieldOptions, MethodChoice};

use crate::error::{Error, Result};
use crate::geometry::{cigar_conformal, ModelFlow, Point, ReducedGrid};
use crate::kernels::{sup_kernel, KernelField, KernelMethod, KernelSlice, SupSearch};
use crate::quad::composite_gauss;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// A value with an estimate of its absolute error.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    pub fn new(value: f64, error: f64) -> Self {
        Estimate { value, error }
    }

    fn scaled(self, c: f64) -> Self {
        Estimate {
            value: c * self.value,
            error: c.abs() * self.error,
        }
    }
}

/// `int g H dg_s` over the valid nodes of a slice.
///
/// The error combines the mass defect of the quadrature, the mass hidden in
/// masked nodes and, for closed-form kernels, their truncation bound.
fn integrate(field: &KernelField, slice: &KernelSlice, g: impl Fn(usize) -> f64) -> Estimate {
    let (mut value, mut moment, mut mass, mut gmax, mut spread) = (0.0, 0.0, 0.0, 0.0f64, 0.0);
    for i in (0..slice.len()).filter(|&i| slice.valid[i]) {
        let gi = g(i);
        let wh = slice.weights[i] * slice.h[i];
        value += wh * gi;
        moment += wh * gi.abs();
        mass += wh;
        gmax = gmax.max(gi.abs());
        spread += slice.weights[i] * gi.abs();
    }
    let masked = slice.masked_mass();
    let mean = if mass > 0.0 { moment / mass } else { 0.0 };
    let mut error = (mass + masked - 1.0).abs() * mean + masked * gmax + 8.0 * f64::EPSILON * moment;
    if field.meta.method != KernelMethod::Pde {
        error += slice.truncation_error * spread;
    }
    Estimate { value, error }
}

/// Pointed entropy `W` on the slice `s`.
pub fn entropy_w(field: &KernelField, s: f64) -> Result<Estimate> {
    let sl = field.slice(s)?;
    let n = field.dim as f64;
    Ok(integrate(field, sl, |i| sl.tau * (sl.grad_f_sq[i] + sl.scalar[i]) + sl.f[i] - n))
}

/// Pointed Nash entropy `N` on the slice `s`.
pub fn nash_n(field: &KernelField, s: f64) -> Result<Estimate> {
    let sl = field.slice(s)?;
    let half = 0.5 * field.dim as f64;
    Ok(integrate(field, sl, |i| sl.f[i] - half))
}

/// `int observable dnu_s`, with the observable evaluated per node of the slice.
pub fn nu_expectation(
    field: &KernelField,
    s: f64,
    observable: impl Fn(&KernelSlice, usize) -> f64,
) -> Result<f64> {
    let sl = field.slice(s)?;
    Ok(sl.integrate(|i| observable(sl, i)))
}

/// Entropy production `dW/ds` on the slice `s`; nonnegative by construction.
pub fn perelman_production(field: &KernelField, s: f64) -> Result<Estimate> {
    let sl = field.slice(s)?;
    Ok(integrate(field, sl, |i| sl.dev_sq[i]).scaled(2.0 * sl.tau))
}

/// Gauss panels in `sigma = t - s`, geometric towards `sigma = 0`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct TimeRule {
    /// Panels `[tau 2^{-k-1}, tau 2^{-k}]` for `k < levels`; `[0, tau 2^{-levels}]` is not sampled.
    pub levels: usize,
    pub per_panel: usize,
    /// Extra levels are added until the unsampled gap is at most this long.
    pub max_gap: f64,
}

impl Default for TimeRule {
    fn default() -> Self {
        TimeRule {
            levels: 8,
            per_panel: 6,
            max_gap: 1e-3,
        }
    }
}

impl TimeRule {
    /// Slice times (increasing) and weights for `int_big_t^t ds`, plus the unsampled gap next to `t`.
    pub fn nodes(&self, t: f64, big_t: f64) -> Result<(Vec<f64>, Vec<f64>, f64)> {
        let tau = t - big_t;
        if !(tau > 0.0) {
            return Err(Error::Config("time quadrature needs T < t".into()));
        }
        if self.levels == 0 || self.per_panel == 0 {
            return Err(Error::Config("time rule needs at least one panel and node".into()));
        }
        let mut levels = self.levels;
        if self.max_gap > 0.0 {
            levels = levels.max((tau / self.max_gap).log2().ceil() as usize);
        }
        let gap = tau * 0.5f64.powi(levels as i32);
        let breaks: Vec<f64> = (0..=levels).rev().map(|k| tau * 0.5f64.powi(k as i32)).collect();
        let (sigma, w) = composite_gauss(&breaks, self.per_panel);
        let times: Vec<f64> = sigma.iter().rev().map(|sg| t - sg).collect();
        let weights: Vec<f64> = w.into_iter().rev().collect();
        Ok((times, weights, gap))
    }

    /// Slice times needed by [`TimeRule::nodes`].
    pub fn times(&self, t: f64, big_t: f64) -> Result<Vec<f64>> {
        Ok(self.nodes(t, big_t)?.0)
    }
}

/// `int_T^t g(sigma, slice) ds` for an integrand vanishing linearly at `s = t`.
fn time_integral(
    field: &KernelField,
    big_t: f64,
    rule: &TimeRule,
    g: impl Fn(f64, &KernelSlice) -> Result<Estimate>,
) -> Result<Estimate> {
    let t = field.base_time;
    let (times, weights, gap) = rule.nodes(t, big_t)?;
    let mut total = Estimate::new(0.0, 0.0);
    let mut nearest = None;
    for (&s, &w) in times.iter().zip(&weights) {
        let sl = field
            .slice(s)
            .map_err(|_| Error::Schedule(format!("time quadrature needs a slice at {s}")))?;
        let v = g(t - s, sl)?;
        total.value += w * v.value;
        total.error += w * v.error;
        nearest = Some((t - s, v.value));
    }
    if let Some((sigma, v)) = nearest {
        let tail = 0.5 * gap * v * gap / sigma;
        total.value += tail;
        total.error += tail.abs();
    }
    Ok(total)
}

/// Weight `2 sigma (1 - sigma / tau)` of the deficit integral.
pub fn deficit_weight(sigma: f64, tau: f64) -> f64 {
    2.0 * sigma * (1.0 - sigma / tau)
}

/// `-int_T^t 2(t-s)(1-(t-s)/(t-T)) int |Ric + Hess f - g/(2(t-s))|^2 dnu_s ds`,
/// which equals `N(T)`. Needs the slices of [`TimeRule::times`].
pub fn nash_deficit_integral(field: &KernelField, big_t: f64, rule: &TimeRule) -> Result<Estimate> {
    let tau = field.base_time - big_t;
    time_integral(field, big_t, rule, |sigma, sl| {
        let p = integrate(field, sl, |i| sl.dev_sq[i]);
        Ok(p.scaled(-deficit_weight(sigma, tau)))
    })
}

/// `(1/(t-T)) int_T^t W(s) ds`, which equals `N(T)`. Needs the slices of [`TimeRule::times`].
pub fn nash_time_average(field: &KernelField, big_t: f64, rule: &TimeRule) -> Result<Estimate> {
    let tau = field.base_time - big_t;
    let total = time_integral(field, big_t, rule, |_, sl| entropy_w(field, sl.time))?;
    Ok(total.scaled(1.0 / tau))
}

/// Spatial gradient of `N_{(x,t)}(T)` and the Cauchy-Schwarz bound on it.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct NashGradient {
    /// Centered-difference `|grad_x N|`.
    pub value: f64,
    pub nash: f64,
    /// `M_{T,T+1}`, when `t - T > 1`.
    pub sup_kernel: Option<f64>,
    /// `((N + n/2)^2 + n)(log M + (n/2) log(4 pi (t-T)) + n/2) / (t - T - 1)`.
    pub bound_squared: Option<f64>,
}

/// `((N + n/2)^2 + n)(log M + (n/2) log(4 pi tau) + n/2) / (tau - 1)` for `tau > 1`.
pub fn gradient_bound_squared(nash: f64, dim: usize, tau: f64, sup: f64) -> Option<f64> {
    let n = dim as f64;
    (tau > 1.0).then(|| ((nash + 0.5 * n).powi(2) + n) * (sup.ln() + 0.5 * n * (4.0 * PI * tau).ln() + 0.5 * n) / (tau - 1.0))
}

fn nash_series(flow: &ModelFlow, x: &Point, t: f64, times: &[f64], opts: &FieldOptions) -> Result<Vec<f64>> {
    let field = kernel_field(flow, x, t, times, opts)?;
    times.iter().map(|&s| Ok(nash_n(&field, s)?.value)).collect()
}

/// Centered difference of `x -> N_{(x,t)}(T)` with proper step `h`.
pub fn nash_gradient(
    flow: &ModelFlow,
    x: &Point,
    t: f64,
    big_t: f64,
    h: f64,
    opts: &FieldOptions,
    search: &SupSearch,
) -> Result<NashGradient> {
    Ok(nash_gradients(flow, x, t, &[big_t], h, opts, search)?.remove(0))
}

/// [`nash_gradient`] at several times, sharing one solve per stencil point.
pub fn nash_gradients(
    flow: &ModelFlow,
    x: &Point,
    t: f64,
    times: &[f64],
    h: f64,
    opts: &FieldOptions,
    search: &SupSearch,
) -> Result<Vec<NashGradient>> {
    if !(h > 0.0) {
        return Err(Error::Config("gradient step must be positive".into()));
    }
    let nash = nash_series(flow, x, t, times, opts)?;
    let values = match flow {
        _ if flow.is_homogeneous() => vec![0.0; times.len()],
        ModelFlow::CigarSoliton => {
            let rho = match x.coords() {
                [rho] if *rho >= 0.0 => *rho,
                _ => return Err(Error::Point("cigar points are a single radius rho >= 0".into())),
            };
            let stretch = (2.0 * t).exp();
            let r = (rho / stretch).asinh();
            let (ra, rb) = (r + h, (r - h).abs());
            if (ra - rb).abs() <= 1e-15 * ra {
                vec![0.0; times.len()]
            } else {
                let grid = ReducedGrid::for_flow(flow, &opts.grid)?;
                for q in [ra, rb] {
                    let s = (q.sinh() * stretch).ln();
                    let spacing = grid.spacing_near(s) * cigar_conformal(s, t).sqrt();
                    if h < spacing {
                        return Err(Error::Config(format!(
                            "gradient step {h} is below the grid spacing {spacing:.3e}"
                        )));
                    }
                }
                // a step through the tip lands at radius |r - h| on the far side
                let na = nash_series(flow, &Point(vec![ra.sinh() * stretch]), t, times, opts)?;
                let nb = nash_series(flow, &Point(vec![rb.sinh() * stretch]), t, times, opts)?;
                na.iter().zip(&nb).map(|(a, b)| (a - b).abs() / (2.0 * h)).collect()
            }
        }
        _ => {
            let c = x.coords();
            let mut sq = vec![0.0; times.len()];
            for k in 0..c.len() {
                let mut a = c.to_vec();
                let mut b = c.to_vec();
                a[k] += h;
                b[k] -= h;
                let na = nash_series(flow, &Point(a), t, times, opts)?;
                let nb = nash_series(flow, &Point(b), t, times, opts)?;
                for (q, (a, b)) in sq.iter_mut().zip(na.iter().zip(&nb)) {
                    *q += ((a - b) / (2.0 * h)).powi(2);
                }
            }
            sq.into_iter().map(f64::sqrt).collect()
        }
    };
    times
        .iter()
        .zip(nash.into_iter().zip(values))
        .map(|(&big_t, (nash, value))| {
            let tau = t - big_t;
            let sup = if tau > 1.0 {
                Some(sup_kernel(flow, big_t, big_t + 1.0, search)?.value)
            } else {
                None
            };
            Ok(NashGradient {
                value,
                nash,
                sup_kernel: sup,
                bound_squared: sup.and_then(|m| gradient_bound_squared(nash, flow.dim(), tau, m)),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests;
