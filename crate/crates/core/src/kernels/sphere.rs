//! Zonal-harmonic expansion of the conjugate heat kernel on the shrinking sphere.

use crate::error::{Error, Result};
use crate::geometry::{unit_sphere_area, ModelFlow};

/// Coefficients of `H(theta) = pref * sum_l a_l P_l(cos theta)`, with `P_l`
/// the Gegenbauer polynomials normalised by `P_l(1) = 1`.
#[derive(Clone, Debug)]
pub struct SphereSeries {
    pub dim: usize,
    pub prefactor: f64,
    pub coeffs: Vec<f64>,
    /// Bound on the omitted tail of the value series.
    pub remainder: f64,
}

/// Value and first two polar derivatives.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralValue {
    pub h: f64,
    pub h_theta: f64,
    pub h_theta_theta: f64,
}

/// Dimension of degree-`l` spherical harmonics on `S^n`.
pub fn harmonic_dim(n: usize, l: usize) -> f64 {
    let (nf, lf) = (n as f64, l as f64);
    let binom: f64 = (1..n - 1).map(|i| (lf + i as f64) / i as f64).product();
    (2.0 * lf + nf - 1.0) / (nf - 1.0) * binom
}

fn sphere_params(flow: &ModelFlow) -> Result<(usize, f64)> {
    match flow {
        ModelFlow::ShrinkingSphere { dim, t_sing } => Ok((*dim, *t_sing)),
        _ => Err(Error::Unsupported("spectral kernel needs the shrinking sphere".into())),
    }
}

impl SphereSeries {
    /// Series for the kernel based at time `t`, evaluated at the earlier time `s`.
    ///
    /// With `l_max = None` the degree is chosen so the tail of the value and of
    /// its first two derivatives stays below `tol` (absolute).
    pub fn new(flow: &ModelFlow, s: f64, t: f64, l_max: Option<usize>, tol: f64) -> Result<Self> {
        let (n, _) = sphere_params(flow)?;
        flow.check_time(t)?;
        flow.check_time(s)?;
        if !(s < t) {
            return Err(Error::Config("spectral kernel needs s < t".into()));
        }
        let (ct, cs) = (flow.sphere_scale(t).unwrap(), flow.sphere_scale(s).unwrap());
        let log_q = (ct / cs).ln();
        let nf = n as f64;
        let prefactor = 1.0 / (unit_sphere_area(n) * cs.powf(0.5 * nf));
        let expo = |l: f64| l * (l + nf - 1.0) / (2.0 * (nf - 1.0)) * log_q;
        // tail after degree m, weighted for two derivatives
        let tail = |m: usize, weighted: bool| -> f64 {
            let mut total = 0.0;
            for l in m + 1.. {
                let lf = l as f64;
                let d = harmonic_dim(n, l);
                let w = if weighted { (1.0 + lf * lf).powi(2) } else { 1.0 };
                let term = prefactor * d * w * expo(lf).exp();
                total += term;
                if term < 1e-4 * total.max(1e-300) && lf * (lf + nf - 1.0) * -log_q > 40.0 {
                    break;
                }
            }
            total
        };
        let l_max = match l_max {
            Some(l) => {
                let rem = tail(l, false);
                if rem > tol {
                    let mut need = l.max(1);
                    while tail(need, false) > tol && need < 1 << 22 {
                        need *= 2;
                    }
                    return Err(Error::Truncation {
                        remainder: rem,
                        tolerance: tol,
                        suggested: need,
                    });
                }
                l
            }
            None => {
                // smallest l past which the weighted terms fall below tol
                let mut l = 0usize;
                loop {
                    let lf = l as f64;
                    let decreasing = lf * (lf + nf - 1.0) * -log_q > 4.0 * (2.0 + nf);
                    if decreasing && tail(l, true) <= tol {
                        break l;
                    }
                    l += 1 + l / 16;
                    if l > 1 << 20 {
                        return Err(Error::Truncation {
                            remainder: tail(l, true),
                            tolerance: tol,
                            suggested: l,
                        });
                    }
                }
            }
        };
        let coeffs = (0..=l_max)
            .map(|l| harmonic_dim(n, l) * expo(l as f64).exp())
            .collect();
        Ok(SphereSeries {
            dim: n,
            prefactor,
            coeffs,
            remainder: tail(l_max, false),
        })
    }

    pub fn l_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn eval(&self, theta: f64) -> SpectralValue {
        let x = theta.cos();
        let sn = theta.sin();
        let alpha = 0.5 * (self.dim as f64 - 1.0);
        let (mut p0, mut p1) = (1.0, x);
        let (mut d0, mut d1) = (0.0, 1.0);
        let (mut e0, mut e1) = (0.0, 0.0);
        let mut sum = self.coeffs[0];
        let mut sum_d = 0.0;
        let mut sum_e = 0.0;
        if self.coeffs.len() > 1 {
            sum += self.coeffs[1] * p1;
            sum_d += self.coeffs[1] * d1;
        }
        for (l, a) in self.coeffs.iter().enumerate().skip(2) {
            let lf = l as f64;
            let den = lf + 2.0 * alpha - 1.0;
            let c1 = 2.0 * (lf + alpha - 1.0);
            let c2 = lf - 1.0;
            let p2 = (c1 * x * p1 - c2 * p0) / den;
            let d2 = (c1 * (p1 + x * d1) - c2 * d0) / den;
            let e2 = (c1 * (2.0 * d1 + x * e1) - c2 * e0) / den;
            sum += a * p2;
            sum_d += a * d2;
            sum_e += a * e2;
            p0 = p1;
            p1 = p2;
            d0 = d1;
            d1 = d2;
            e0 = e1;
            e1 = e2;
        }
        SpectralValue {
            h: self.prefactor * sum,
            h_theta: -self.prefactor * sn * sum_d,
            h_theta_theta: self.prefactor * (-x * sum_d + sn * sn * sum_e),
        }
    }
}

/// Conjugate heat kernel on the shrinking sphere at polar angle `theta` from
/// the base point, for base time `t` and evaluation time `s < t`.
pub fn spectral_sphere_kernel(
    flow: &ModelFlow,
    theta: f64,
    s: f64,
    t: f64,
    l_max: usize,
    tol: f64,
) -> Result<SpectralValue> {
    Ok(SphereSeries::new(flow, s, t, Some(l_max), tol)?.eval(theta))
}
