//! Sampled entropy curves and their limits as `T -> -infinity`.

use super::source::{kernel_field, FieldOptions};
use super::{entropy_w, nash_n, Estimate};
use crate::error::{Error, Result};
use crate::geometry::{ModelFlow, Point};
use crate::kernels::{KernelField, KernelMethod};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// `W` and `N` at one sample time.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EntropySample {
    pub time: f64,
    pub w: f64,
    pub w_err: f64,
    pub n: f64,
    pub n_err: f64,
}

/// Which entropy a limit refers to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Quantity {
    W,
    N,
}

/// Controls for [`asymptotic_limit`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct LimitOptions {
    /// Convergence threshold on successive differences and extrapolants.
    pub tol: f64,
    /// A sequence still falling below this value without flattening is divergent.
    pub floor: f64,
    /// Allowed increase between successive samples beyond their error estimates.
    pub monotone_slack: f64,
    /// Successive-difference ratio at or above which the sequence is not flattening.
    pub flattening_ratio: f64,
}

impl Default for LimitOptions {
    fn default() -> Self {
        LimitOptions {
            tol: 1e-3,
            floor: -5.0,
            monotone_slack: 1e-6,
            flattening_ratio: 0.75,
        }
    }
}

/// Extrapolated limit of a monotone sample sequence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Limit {
    pub quantity: Quantity,
    /// Last extrapolant (the last sample when no extrapolation applies).
    pub estimate: f64,
    pub converged: bool,
    /// Still falling below the floor without flattening.
    pub divergent: bool,
    /// `v_k - v_{k+1}` for samples ordered by decreasing time.
    pub differences: Vec<f64>,
    pub extrapolants: Vec<f64>,
}

/// Entropies of one base point at a sequence of earlier times.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EntropyCurve {
    pub flow: ModelFlow,
    pub base: Point,
    pub base_time: f64,
    pub dim: usize,
    pub method: KernelMethod,
    /// Ordered by decreasing time.
    pub samples: Vec<EntropySample>,
    pub w_limit: Option<Limit>,
    pub n_limit: Option<Limit>,
}

/// `T_k = t - 2^k` for `k = 0..=depth`.
pub fn geometric_schedule(t: f64, depth: usize) -> Vec<f64> {
    (0..=depth).map(|k| t - 2f64.powi(k as i32)).collect()
}

impl EntropyCurve {
    /// Evaluates `W` and `N` on the given slices of a field.
    pub fn from_field(field: &KernelField, times: &[f64]) -> Result<Self> {
        let mut samples = times
            .iter()
            .map(|&s| {
                let (w, n) = (entropy_w(field, s)?, nash_n(field, s)?);
                Ok(EntropySample {
                    time: s,
                    w: w.value,
                    w_err: w.error,
                    n: n.value,
                    n_err: n.error,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        samples.sort_by(|a, b| b.time.total_cmp(&a.time));
        Ok(EntropyCurve {
            flow: field.flow.clone(),
            base: field.base.clone(),
            base_time: field.base_time,
            dim: field.dim,
            method: field.meta.method,
            samples,
            w_limit: None,
            n_limit: None,
        })
    }

    /// Replaces the values by those of a finer curve and folds the
    /// difference into the error estimates.
    pub fn refine_with(self, fine: EntropyCurve) -> Result<Self> {
        if fine.samples.len() != self.samples.len() {
            return Err(Error::Config("refined curve has a different schedule".into()));
        }
        let samples = self
            .samples
            .iter()
            .zip(&fine.samples)
            .map(|(c, f)| {
                if (c.time - f.time).abs() > 1e-12 * c.time.abs().max(1.0) {
                    return Err(Error::Config("refined curve has a different schedule".into()));
                }
                Ok(EntropySample {
                    time: f.time,
                    w: f.w,
                    w_err: f.w_err + (f.w - c.w).abs(),
                    n: f.n,
                    n_err: f.n_err + (f.n - c.n).abs(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(EntropyCurve { samples, ..fine })
    }

    pub fn times(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.time).collect()
    }

    pub fn values(&self, q: Quantity) -> Vec<Estimate> {
        self.samples
            .iter()
            .map(|s| match q {
                Quantity::W => Estimate::new(s.w, s.w_err),
                Quantity::N => Estimate::new(s.n, s.n_err),
            })
            .collect()
    }

    /// Fills both limits; needs at least three samples.
    pub fn extrapolate(&mut self, opts: &LimitOptions) -> Result<()> {
        self.w_limit = Some(asymptotic_limit(self, Quantity::W, opts)?);
        self.n_limit = Some(asymptotic_limit(self, Quantity::N, opts)?);
        Ok(())
    }

    /// `W <= N <= 0` at every sample and `W` nondecreasing in time, each up to
    /// the error estimates plus `slack`.
    pub fn check_invariants(&self, slack: f64) -> Result<()> {
        for s in &self.samples {
            if s.w > s.n + s.w_err + s.n_err + slack || s.n > s.n_err + slack {
                return Err(Error::DataQuality(format!(
                    "W <= N <= 0 violated at T = {}: W = {}, N = {}",
                    s.time, s.w, s.n
                )));
            }
        }
        for p in self.samples.windows(2) {
            if p[1].w > p[0].w + p[0].w_err + p[1].w_err + slack {
                return Err(Error::DataQuality(format!(
                    "W increases from T = {} to T = {}",
                    p[0].time, p[1].time
                )));
            }
        }
        Ok(())
    }

    /// Columns `T,W,W_err,N,N_err`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "T,W,W_err,N,N_err")?;
        for s in &self.samples {
            writeln!(
                out,
                "{:.12e},{:.12e},{:.6e},{:.12e},{:.6e}",
                s.time, s.w, s.w_err, s.n, s.n_err
            )?;
        }
        Ok(())
    }

    /// Summary without the samples: base point, method and extrapolation state.
    pub fn summary(&self) -> serde_json::Value {
        serde_json::json!({
            "flow": self.flow,
            "base": self.base,
            "base_time": self.base_time,
            "dim": self.dim,
            "method": self.method,
            "samples": self.samples.len(),
            "w_limit": self.w_limit,
            "n_limit": self.n_limit,
        })
    }
}

/// Builds a curve on `times`, optionally refining once and reporting the
/// coarse/fine difference as part of the error.
pub fn entropy_curve(
    flow: &ModelFlow,
    base: &Point,
    t: f64,
    times: &[f64],
    opts: &FieldOptions,
    refine: bool,
) -> Result<EntropyCurve> {
    let field = kernel_field(flow, base, t, times, opts)?;
    let curve = EntropyCurve::from_field(&field, times)?;
    if !refine {
        return Ok(curve);
    }
    let fine = kernel_field(flow, base, t, times, &opts.refined())?;
    curve.refine_with(EntropyCurve::from_field(&fine, times)?)
}

/// Monotone-sequence extrapolation of `W` or `N` as `T -> -infinity`.
///
/// Successive differences are accelerated by Aitken's rule when they decay
/// geometrically faster than `flattening_ratio`.
pub fn asymptotic_limit(curve: &EntropyCurve, q: Quantity, opts: &LimitOptions) -> Result<Limit> {
    let v = curve.values(q);
    if v.len() < 3 {
        return Err(Error::Schedule("extrapolation needs at least three samples".into()));
    }
    for (k, p) in v.windows(2).enumerate() {
        if p[1].value > p[0].value + p[0].error + p[1].error + opts.monotone_slack {
            return Err(Error::DataQuality(format!(
                "{q:?} is not monotone between T = {} and T = {}: {} -> {}",
                curve.samples[k].time,
                curve.samples[k + 1].time,
                p[0].value,
                p[1].value
            )));
        }
    }
    let differences: Vec<f64> = v.windows(2).map(|p| p[0].value - p[1].value).collect();
    let extrapolants: Vec<f64> = (1..differences.len())
        .map(|k| {
            let (prev, cur) = (differences[k - 1], differences[k]);
            let last = v[k + 1].value;
            let negligible = 1e-14 + 1e-12 * last.abs();
            if prev > negligible && cur >= 0.0 && cur < opts.flattening_ratio * prev {
                let r = cur / prev;
                last - cur * r / (1.0 - r)
            } else {
                last
            }
        })
        .collect();
    let m = differences.len();
    let last_diff = differences[m - 1].abs();
    let estimate = *extrapolants.last().unwrap();
    let steady = extrapolants.len() < 2 || (extrapolants[extrapolants.len() - 1] - extrapolants[extrapolants.len() - 2]).abs() < opts.tol;
    let converged = last_diff < opts.tol && steady;
    let ratio = if differences[m - 2] > 0.0 {
        differences[m - 1] / differences[m - 2]
    } else {
        0.0
    };
    let divergent = !converged && ratio >= opts.flattening_ratio && v[m].value < opts.floor;
    Ok(Limit {
        quantity: q,
        estimate,
        converged,
        divergent,
        differences,
        extrapolants,
    })
}
