//! Conjugate heat kernels sampled on symmetry-reduced grids.
//!
//! Flat variants use Gaussians, lattice theta sums and deck-group sums; the
//! shrinking sphere uses its zonal-harmonic expansion. The PDE solver emits
//! the same [`KernelField`] type.

mod lattice;
mod sampling;
mod sphere;

pub use lattice::{
    crossover_time, dual_sum, image_sum, lattice_kernel, log_gaussian, quotient_kernel, Cutoff,
    LogKernel, Representation,
};
pub use sampling::{exact_field, exact_slice, spectral_field, spectral_slice, SampleOptions};
pub use sphere::{harmonic_dim, spectral_sphere_kernel, SpectralValue, SphereSeries};

use crate::error::{Error, Result};
use crate::geometry::{ModelFlow, Point};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::io::Write;

/// How a kernel was produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, JsonSchema)]
#[serde(rename_all = "snake_case")]
pub enum KernelMethod {
    Exact,
    Spectral,
    Pde,
}

/// Kernel samples at one earlier time `s`, with everything the entropy
/// integrals need precomputed per node.
#[derive(Clone, Debug, PartialEq)]
pub struct KernelSlice {
    pub time: f64,
    pub tau: f64,
    /// Node coordinates (reduced coordinate first).
    pub coords: Vec<Vec<f64>>,
    /// Riemannian volume weights at time `s`.
    pub weights: Vec<f64>,
    pub h: Vec<f64>,
    pub f: Vec<f64>,
    pub grad_f_sq: Vec<f64>,
    pub dev_sq: Vec<f64>,
    pub scalar: Vec<f64>,
    /// False where the kernel fell below the sampling floor or the stencil did.
    pub valid: Vec<bool>,
    /// Absolute bound on truncation error of the kernel values.
    pub truncation_error: f64,
}

impl KernelSlice {
    pub fn len(&self) -> usize {
        self.h.len()
    }

    pub fn is_empty(&self) -> bool {
        self.h.is_empty()
    }

    pub fn mass(&self) -> f64 {
        self.weights.iter().zip(&self.h).map(|(w, h)| w * h).sum()
    }

    /// Mass carried by masked nodes.
    pub fn masked_mass(&self) -> f64 {
        self.weights
            .iter()
            .zip(&self.h)
            .zip(&self.valid)
            .filter(|(_, ok)| !**ok)
            .map(|((w, h), _)| w * h.max(0.0))
            .sum()
    }

    pub fn peak(&self) -> f64 {
        self.h.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `sum_i w_i H_i g_i` over valid nodes.
    pub fn integrate(&self, g: impl Fn(usize) -> f64) -> f64 {
        (0..self.len())
            .filter(|&i| self.valid[i])
            .map(|i| self.weights[i] * self.h[i] * g(i))
            .sum()
    }

    /// Checks positivity, finiteness and unit mass.
    pub fn check(&self, mass_tol: f64) -> Result<()> {
        for i in 0..self.len() {
            if self.valid[i] && !(self.h[i] > 0.0 && self.f[i].is_finite()) {
                return Err(Error::DataQuality(format!(
                    "kernel not positive/finite at node {i} of slice {}",
                    self.time
                )));
            }
        }
        let m = self.mass();
        if (m - 1.0).abs() > mass_tol {
            return Err(Error::DataQuality(format!(
                "slice {} has mass {m} (tolerance {mass_tol:e})",
                self.time
            )));
        }
        Ok(())
    }
}

/// Run metadata attached to a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelMeta {
    pub method: KernelMethod,
    /// Human-readable truncation parameters.
    pub truncation: String,
    /// Largest per-slice truncation bound.
    pub truncation_error: f64,
    /// Solver diagnostics for PDE fields.
    pub diagnostics: Option<serde_json::Value>,
}

/// Conjugate heat kernel based at `(base, base_time)` on several earlier slices.
#[derive(Clone, Debug)]
pub struct KernelField {
    pub flow: ModelFlow,
    pub base: Point,
    pub base_time: f64,
    pub dim: usize,
    /// Sorted by increasing time.
    pub slices: Vec<KernelSlice>,
    pub meta: KernelMeta,
}

impl KernelField {
    pub fn new(
        flow: ModelFlow,
        base: Point,
        base_time: f64,
        mut slices: Vec<KernelSlice>,
        meta: KernelMeta,
    ) -> Self {
        slices.sort_by(|a, b| a.time.total_cmp(&b.time));
        let dim = flow.dim();
        KernelField {
            flow,
            base,
            base_time,
            dim,
            slices,
            meta,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        self.slices.iter().map(|s| s.time).collect()
    }

    pub fn slice(&self, s: f64) -> Result<&KernelSlice> {
        let tol = 1e-9 * s.abs().max(1.0);
        self.slices
            .iter()
            .find(|sl| (sl.time - s).abs() <= tol)
            .ok_or(Error::MissingSlice(s))
    }

    /// Checks every slice for positivity, finiteness and mass.
    pub fn check(&self, mass_tol: f64) -> Result<()> {
        self.slices.iter().try_for_each(|s| s.check(mass_tol))
    }

    /// Columnar text dump: `s,q,[q2,]H,f`.
    pub fn write_csv<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        let two = self.slices.iter().any(|s| s.coords.iter().any(|c| c.len() > 1));
        if two {
            writeln!(out, "s,q,q2,H,f")?;
        } else {
            writeln!(out, "s,q,H,f")?;
        }
        for sl in &self.slices {
            for i in 0..sl.len() {
                let c = &sl.coords[i];
                if two {
                    let q2 = c.get(1).copied().unwrap_or(0.0);
                    writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}", sl.time, c[0], q2, sl.h[i], sl.f[i])?;
                } else {
                    writeln!(out, "{:.12e},{:.12e},{:.12e},{:.12e}", sl.time, c[0], sl.h[i], sl.f[i])?;
                }
            }
        }
        Ok(())
    }
}

/// Potential `f = -log((4 pi tau)^{n/2} H)` from `log H`.
pub fn potential(dim: usize, tau: f64, log_h: f64) -> f64 {
    -log_h - 0.5 * dim as f64 * (4.0 * PI * tau).ln()
}

/// Evaluate a flat kernel `H_{(x,t)}(z,s)` (heat kernel from `(z,s)` to `(x,t)`).
pub fn exact_flat_kernel(
    flow: &ModelFlow,
    z: &Point,
    s: f64,
    x: &Point,
    t: f64,
    cutoff: &Cutoff,
) -> Result<f64> {
    flow.check_time(t)?;
    flow.check_time(s)?;
    if !(s < t) {
        return Err(Error::Config("exact kernel needs s < t".into()));
    }
    let tau = t - s;
    let (zs, xs) = (z.coords(), x.coords());
    if zs.len() != flow.dim() || xs.len() != flow.dim() {
        return Err(Error::Point(format!("expected {} coordinates", flow.dim())));
    }
    let d: Vec<f64> = zs.iter().zip(xs).map(|(a, b)| a - b).collect();
    match flow {
        ModelFlow::EuclideanStatic { dim } => {
            let dd: f64 = d.iter().map(|v| v * v).sum();
            Ok(log_gaussian(*dim, dd, tau).exp())
        }
        ModelFlow::FlatTorus { torus } => Ok(lattice_kernel(torus, &d, tau, cutoff)?.value()),
        ModelFlow::FlatProduct { torus, euclidean_dim } => {
            let k = torus.dim();
            let lk = lattice_kernel(torus, &d[..k], tau, cutoff)?;
            let dd: f64 = d[k..].iter().map(|v| v * v).sum();
            Ok((lk.log_value + log_gaussian(*euclidean_dim, dd, tau)).exp())
        }
        ModelFlow::TorusQuotient { cover, deck } => {
            Ok(quotient_kernel(cover, deck, xs, zs, tau, cutoff)?.value())
        }
        other => Err(Error::Unsupported(format!(
            "no exact kernel for {}",
            other.short_name()
        ))),
    }
}

/// `M_{T1,T2} = sup_{x,y} H_{(x,T1)}(y,T2)` and where it was found.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SupKernel {
    pub value: f64,
    pub method: KernelMethod,
    /// Base points scanned (1 on homogeneous variants).
    pub searched: usize,
}

/// Search parameters for [`sup_kernel`].
#[derive(Clone, Debug, PartialEq)]
pub struct SupSearch {
    /// Points per axis in the base-point search.
    pub points: usize,
    pub cutoff: Cutoff,
    /// Cigar base radii to scan.
    pub cigar_radii: Vec<f64>,
    pub grid: crate::geometry::GridSpec,
}

impl Default for SupSearch {
    fn default() -> Self {
        SupSearch {
            points: 16,
            cutoff: Cutoff::default(),
            cigar_radii: vec![0.0, 0.5, 1.0, 2.0, 4.0, 8.0],
            grid: crate::geometry::GridSpec::default(),
        }
    }
}

pub fn sup_kernel(flow: &ModelFlow, t1: f64, t2: f64, search: &SupSearch) -> Result<SupKernel> {
    flow.check_time(t2)?;
    flow.check_time(t1)?;
    if !(t1 < t2) {
        return Err(Error::Config("sup kernel needs T1 < T2".into()));
    }
    let tau = t2 - t1;
    let exact = |value: f64| SupKernel {
        value,
        method: KernelMethod::Exact,
        searched: 1,
    };
    match flow {
        ModelFlow::EuclideanStatic { dim } => Ok(exact(log_gaussian(*dim, 0.0, tau).exp())),
        ModelFlow::FlatTorus { torus } => {
            let zero = vec![0.0; torus.dim()];
            Ok(exact(lattice_kernel(torus, &zero, tau, &search.cutoff)?.value()))
        }
        ModelFlow::FlatProduct { torus, euclidean_dim } => {
            let zero = vec![0.0; torus.dim()];
            let lk = lattice_kernel(torus, &zero, tau, &search.cutoff)?;
            Ok(exact((lk.log_value + log_gaussian(*euclidean_dim, 0.0, tau)).exp()))
        }
        ModelFlow::TorusQuotient { cover, deck } => {
            let k = cover.dim();
            let n = search.points.max(2);
            let total = n.pow(k as u32);
            let pts: Vec<Vec<f64>> = (0..total)
                .map(|mut idx| {
                    let u: Vec<f64> = (0..k)
                        .map(|_| {
                            let v = (idx % n) as f64 / n as f64;
                            idx /= n;
                            v
                        })
                        .collect();
                    cover.from_lattice_coords(&u)
                })
                .collect();
            let mut best = f64::NEG_INFINITY;
            for x in &pts {
                for y in &pts {
                    let v = quotient_kernel(cover, deck, x, y, tau, &search.cutoff)?.log_value;
                    best = best.max(v);
                }
            }
            Ok(SupKernel {
                value: best.exp(),
                method: KernelMethod::Exact,
                searched: pts.len(),
            })
        }
        ModelFlow::ShrinkingSphere { .. } => {
            let series = SphereSeries::new(flow, t1, t2, None, 1e-10)?;
            Ok(SupKernel {
                value: series.eval(0.0).h,
                method: KernelMethod::Spectral,
                searched: 1,
            })
        }
        ModelFlow::CigarSoliton => crate::pdesolver::cigar_sup_kernel(t1, t2, search),
    }
}

#[cfg(test)]
mod tests;
