//! Flat kernels: Gaussians, lattice theta sums and deck-group sums.
//!
//! Everything is returned in logarithmic form so far tails never underflow.

use crate::error::{Error, Result};
use crate::geometry::{FlatTorus, Isometry};
use std::f64::consts::PI;

/// Truncation control for lattice and dual sums.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Cutoff {
    /// Absolute tolerance on the kernel value.
    pub tol: f64,
    /// Largest shell index allowed before giving up.
    pub max_shell: usize,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff {
            tol: 1e-12,
            max_shell: 4096,
        }
    }
}

/// Which representation of the torus kernel was used.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Representation {
    Images,
    Dual,
}

/// `log H`, `grad log H` and `Hess log H` with respect to the displacement.
#[derive(Clone, Debug, PartialEq)]
pub struct LogKernel {
    pub log_value: f64,
    pub grad: Vec<f64>,
    pub hess: Vec<Vec<f64>>,
    /// Absolute bound on the omitted part of the sum.
    pub remainder: f64,
    pub shells: usize,
    pub representation: Representation,
}

impl LogKernel {
    pub fn value(&self) -> f64 {
        self.log_value.exp()
    }
}

/// `log` of the Euclidean heat kernel `(4 pi tau)^{-n/2} exp(-d^2 / (4 tau))`.
pub fn log_gaussian(dim: usize, dist_sq: f64, tau: f64) -> f64 {
    -0.5 * dim as f64 * (4.0 * PI * tau).ln() - dist_sq / (4.0 * tau)
}

/// Diffusion time at which the image and dual sums cost the same.
pub fn crossover_time(torus: &FlatTorus) -> f64 {
    let l = torus.shortest_vector();
    l * l / (4.0 * PI)
}

fn shell_count(k: usize, j: usize) -> f64 {
    if j == 0 {
        1.0
    } else {
        ((2 * j + 1) as f64).powi(k as i32) - ((2 * j - 1) as f64).powi(k as i32)
    }
}

/// Iterates the integer vectors with `|m|_inf == j`.
fn for_shell(k: usize, j: i64, mut visit: impl FnMut(&[i64])) {
    let mut m = vec![-j; k];
    loop {
        if m.iter().any(|v| v.abs() == j) {
            visit(&m);
        }
        let mut i = 0;
        loop {
            if i == k {
                return;
            }
            m[i] += 1;
            if m[i] > j {
                m[i] = -j;
                i += 1;
            } else {
                break;
            }
        }
    }
}

/// Torus kernel at displacement `d` after diffusion time `tau`.
pub fn lattice_kernel(torus: &FlatTorus, d: &[f64], tau: f64, cutoff: &Cutoff) -> Result<LogKernel> {
    if !(tau > 0.0) {
        return Err(Error::Config("diffusion time must be positive".into()));
    }
    if tau < crossover_time(torus) {
        image_sum(torus, d, tau, cutoff)
    } else {
        dual_sum(torus, d, tau, cutoff)
    }
}

/// Image representation, forced.
pub fn image_sum(torus: &FlatTorus, d: &[f64], tau: f64, cutoff: &Cutoff) -> Result<LogKernel> {
    let k = torus.dim();
    let d0 = torus.reduce(d);
    let d0n = d0.iter().map(|v| v * v).sum::<f64>().sqrt();
    let sigma = torus.min_stretch();
    let log_pref = -0.5 * k as f64 * (4.0 * PI * tau).ln();
    let base = d0n * d0n / (4.0 * tau);
    // relative tail bound after shell `m`, scaled to absolute by the prefactor
    let tail = |m: usize| -> f64 {
        let mut total = 0.0;
        let mut j = m + 1;
        loop {
            let reach = sigma * j as f64 - d0n;
            if reach <= 0.0 {
                return f64::INFINITY;
            }
            let expo = -reach * reach / (4.0 * tau) + log_pref;
            let far = sigma * j as f64 + d0n;
            let weight = 1.0 + far / (2.0 * tau) + far * far / (4.0 * tau * tau);
            let term = shell_count(k, j) * weight * expo.exp();
            total += term;
            if term < 1e-3 * total.max(1e-300) || j > m + 200 {
                return total;
            }
            j += 1;
        }
    };
    let mut shells = 0;
    while tail(shells) > cutoff.tol {
        shells += 1;
        if shells > cutoff.max_shell {
            return Err(Error::Truncation {
                remainder: tail(cutoff.max_shell),
                tolerance: cutoff.tol,
                suggested: suggest(|m| tail(m), cutoff.tol),
            });
        }
    }
    let mut s = 0.0;
    let mut g = vec![0.0; k];
    let mut hsum = vec![vec![0.0; k]; k];
    for j in 0..=shells as i64 {
        for_shell(k, j, |m| {
            let shift: Vec<f64> = m.iter().map(|&v| v as f64).collect();
            let img = torus.from_lattice_coords(&shift);
            let v: Vec<f64> = d0.iter().zip(&img).map(|(a, b)| a + b).collect();
            let vv: f64 = v.iter().map(|x| x * x).sum();
            let e = (-(vv / (4.0 * tau) - base)).exp();
            s += e;
            for a in 0..k {
                g[a] += e * (-v[a] / (2.0 * tau));
                for b in 0..k {
                    let delta = if a == b { 1.0 } else { 0.0 };
                    hsum[a][b] += e * (v[a] * v[b] / (4.0 * tau * tau) - delta / (2.0 * tau));
                }
            }
        });
    }
    let grad: Vec<f64> = g.iter().map(|x| x / s).collect();
    let hess = (0..k)
        .map(|a| (0..k).map(|b| hsum[a][b] / s - grad[a] * grad[b]).collect())
        .collect();
    Ok(LogKernel {
        log_value: log_pref - base + s.ln(),
        grad,
        hess,
        remainder: tail(shells),
        shells,
        representation: Representation::Images,
    })
}

/// Dual (Fourier) representation, forced.
pub fn dual_sum(torus: &FlatTorus, d: &[f64], tau: f64, cutoff: &Cutoff) -> Result<LogKernel> {
    let k = torus.dim();
    let dual = torus.dual();
    let sigma = dual.min_stretch();
    let vol = torus.volume();
    let tail = |m: usize| -> f64 {
        let mut total = 0.0;
        let mut j = m + 1;
        loop {
            let xi = sigma * j as f64;
            let w = 2.0 * PI * xi;
            let term = shell_count(k, j) * (1.0 + w + w * w) * (-4.0 * PI * PI * xi * xi * tau).exp() / vol;
            total += term;
            if term < 1e-3 * total.max(1e-300) || j > m + 200 {
                return total;
            }
            j += 1;
        }
    };
    let mut shells = 0;
    while tail(shells) > cutoff.tol {
        shells += 1;
        if shells > cutoff.max_shell {
            return Err(Error::Truncation {
                remainder: tail(cutoff.max_shell),
                tolerance: cutoff.tol,
                suggested: suggest(|m| tail(m), cutoff.tol),
            });
        }
    }
    let mut s = 0.0;
    let mut g = vec![0.0; k];
    let mut hsum = vec![vec![0.0; k]; k];
    for j in 0..=shells as i64 {
        for_shell(k, j, |m| {
            let c: Vec<f64> = m.iter().map(|&v| v as f64).collect();
            let xi = dual.from_lattice_coords(&c);
            let xx: f64 = xi.iter().map(|x| x * x).sum();
            let e = (-4.0 * PI * PI * xx * tau).exp();
            let phase = 2.0 * PI * xi.iter().zip(d).map(|(a, b)| a * b).sum::<f64>();
            let (sn, cs) = phase.sin_cos();
            s += e * cs;
            for a in 0..k {
                g[a] -= e * 2.0 * PI * xi[a] * sn;
                for b in 0..k {
                    hsum[a][b] -= e * 4.0 * PI * PI * xi[a] * xi[b] * cs;
                }
            }
        });
    }
    if !(s > 0.0) {
        return Err(Error::Convergence("dual sum lost positivity".into()));
    }
    let grad: Vec<f64> = g.iter().map(|x| x / s).collect();
    let hess = (0..k)
        .map(|a| (0..k).map(|b| hsum[a][b] / s - grad[a] * grad[b]).collect())
        .collect();
    Ok(LogKernel {
        log_value: (s / vol).ln(),
        grad,
        hess,
        remainder: tail(shells),
        shells,
        representation: Representation::Dual,
    })
}

fn suggest(tail: impl Fn(usize) -> f64, tol: f64) -> usize {
    let mut m = 1;
    while tail(m) > tol && m < 1 << 24 {
        m *= 2;
    }
    m
}

/// Deck-group sum of a cover kernel, with derivatives in the quotient point `y`:
/// `H(x, y) = sum_h K(h(y) - x)`.
pub fn quotient_kernel(
    cover: &FlatTorus,
    deck: &[Isometry],
    x: &[f64],
    y: &[f64],
    tau: f64,
    cutoff: &Cutoff,
) -> Result<LogKernel> {
    let k = cover.dim();
    let mut parts = Vec::with_capacity(deck.len());
    for h in deck {
        let hy = h.apply(y);
        let d: Vec<f64> = hy.iter().zip(x).map(|(a, b)| a - b).collect();
        parts.push((h, lattice_kernel(cover, &d, tau, cutoff)?));
    }
    let top = parts.iter().map(|p| p.1.log_value).fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = parts.iter().map(|p| (p.1.log_value - top).exp()).collect();
    let total: f64 = weights.iter().sum();
    let mut grad = vec![0.0; k];
    let mut second = vec![vec![0.0; k]; k];
    for ((h, lk), w) in parts.iter().zip(&weights) {
        let w = w / total;
        // pull back through the linear part: A^T g and A^T (H + g g^T) A
        let a = &h.linear;
        let gy: Vec<f64> = (0..k).map(|i| (0..k).map(|r| a[r][i] * lk.grad[r]).sum()).collect();
        for i in 0..k {
            grad[i] += w * gy[i];
            for j in 0..k {
                let mut v = 0.0;
                for r in 0..k {
                    for c in 0..k {
                        v += a[r][i] * (lk.hess[r][c] + lk.grad[r] * lk.grad[c]) * a[c][j];
                    }
                }
                second[i][j] += w * v;
            }
        }
    }
    let hess = (0..k)
        .map(|i| (0..k).map(|j| second[i][j] - grad[i] * grad[j]).collect())
        .collect();
    let remainder = parts.iter().map(|p| p.1.remainder).sum();
    let shells = parts.iter().map(|p| p.1.shells).max().unwrap_or(0);
    let representation = parts[0].1.representation;
    Ok(LogKernel {
        log_value: top + total.ln(),
        grad,
        hess,
        remainder,
        shells,
        representation,
    })
}
