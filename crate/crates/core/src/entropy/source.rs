//! Kernel fields for any variant, by whichever method applies.

use crate::error::{Error, Result};
use crate::geometry::{GridSpec, ModelFlow, Point, ReducedGrid};
use crate::kernels::{
    exact_field, exact_flat_kernel, spectral_field, KernelField, KernelMethod, SampleOptions, SphereSeries,
};
use crate::pdesolver::{solve_conjugate, SolverOptions};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

/// Requested kernel method; `Auto` picks the closed form where one exists.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum MethodChoice {
    #[default]
    Auto,
    Exact,
    Spectral,
    Pde,
}

/// Everything needed to produce a kernel field.
#[derive(Clone, Debug, PartialEq)]
pub struct FieldOptions {
    pub method: MethodChoice,
    pub sample: SampleOptions,
    pub grid: GridSpec,
    pub solver: SolverOptions,
}

impl Default for FieldOptions {
    fn default() -> Self {
        FieldOptions {
            method: MethodChoice::Auto,
            sample: SampleOptions::default(),
            grid: GridSpec::default(),
            solver: SolverOptions::default(),
        }
    }
}

impl FieldOptions {
    /// Doubled resolution in space and tighter tolerances in time.
    pub fn refined(&self) -> Self {
        FieldOptions {
            method: self.method,
            sample: self.sample.doubled(),
            grid: GridSpec {
                nodes: 2 * self.grid.nodes,
                spacing: 0.5 * self.grid.spacing,
                growth: 0.5 * self.grid.growth,
                ..self.grid.clone()
            },
            solver: SolverOptions {
                rtol: 0.1 * self.solver.rtol,
                atol: 0.1 * self.solver.atol,
                ..self.solver.clone()
            },
        }
    }
}

/// The method `choice` resolves to on `flow`.
pub fn resolve_method(flow: &ModelFlow, choice: MethodChoice) -> Result<KernelMethod> {
    let sphere = matches!(flow, ModelFlow::ShrinkingSphere { .. });
    let cigar = matches!(flow, ModelFlow::CigarSoliton);
    match choice {
        MethodChoice::Auto if sphere => Ok(KernelMethod::Spectral),
        MethodChoice::Auto if cigar => Ok(KernelMethod::Pde),
        MethodChoice::Auto => Ok(KernelMethod::Exact),
        MethodChoice::Exact if flow.is_flat() => Ok(KernelMethod::Exact),
        MethodChoice::Spectral if sphere => Ok(KernelMethod::Spectral),
        MethodChoice::Pde => Ok(KernelMethod::Pde),
        other => Err(Error::Config(format!(
            "method {other:?} is not available on {}",
            flow.short_name()
        ))),
    }
}

/// Conjugate heat kernel based at `(base, t)` on the slices `times`.
pub fn kernel_field(
    flow: &ModelFlow,
    base: &Point,
    t: f64,
    times: &[f64],
    opts: &FieldOptions,
) -> Result<KernelField> {
    if times.is_empty() {
        return Err(Error::Schedule("no slice times requested".into()));
    }
    match resolve_method(flow, opts.method)? {
        KernelMethod::Exact => exact_field(flow, base, t, times, &opts.sample),
        KernelMethod::Spectral => spectral_field(flow, t, times, &opts.sample),
        KernelMethod::Pde => {
            let grid = ReducedGrid::for_flow(flow, &opts.grid)?;
            let end = times.iter().copied().fold(f64::INFINITY, f64::min);
            let solver = SolverOptions {
                slices: times.to_vec(),
                ..opts.solver.clone()
            };
            solve_conjugate(flow, base, t, end, &grid, &solver)
        }
    }
}

/// Largest relative deviation of `field` from the closed-form kernel, over
/// unmasked nodes of every slice. Flat variants and the sphere only.
pub fn oracle_deviation(field: &KernelField, sample: &SampleOptions) -> Result<f64> {
    let flow = &field.flow;
    let (x, t) = (&field.base, field.base_time);
    let mut worst: f64 = 0.0;
    for sl in &field.slices {
        let oracle: Box<dyn Fn(&[f64]) -> Result<f64>> = match flow {
            ModelFlow::ShrinkingSphere { .. } => {
                let series = SphereSeries::new(flow, sl.time, t, None, sample.series_tol.min(1e-12))?;
                Box::new(move |c: &[f64]| Ok(series.eval(c[0]).h))
            }
            f if f.is_flat() => Box::new(move |c: &[f64]| {
                let z = if c.len() == f.dim() {
                    Point(c.to_vec())
                } else {
                    let mut p = x.coords().to_vec();
                    p[0] += c[0];
                    Point(p)
                };
                exact_flat_kernel(f, &z, sl.time, x, t, &sample.cutoff)
            }),
            other => {
                return Err(Error::Unsupported(format!("no closed-form kernel for {}", other.short_name())))
            }
        };
        for i in (0..sl.len()).filter(|&i| sl.valid[i]) {
            let o = oracle(&sl.coords[i])?;
            worst = worst.max((sl.h[i] / o - 1.0).abs());
        }
    }
    Ok(worst)
}
