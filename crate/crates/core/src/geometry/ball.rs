//! Geodesic balls on the cigar by Dijkstra on a conformal log-polar lattice.

use super::cigar_conformal;
use crate::error::{Error, Result};
use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

/// Depth of the lattice below the tip scale, in units of `s`.
const CAP_DEPTH: f64 = 10.0;
const STENCIL_REACH: i64 = 4;

pub(crate) struct CigarBall {
    pub area: f64,
    /// Coordinate radii spread over the ball.
    pub sample_radii: Vec<f64>,
    pub min_radius: f64,
}

#[derive(PartialEq)]
struct Entry(f64, usize);

impl Eq for Entry {}

impl PartialOrd for Entry {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Entry {
    fn cmp(&self, other: &Self) -> Ordering {
        other.0.total_cmp(&self.0)
    }
}

fn gcd(a: i64, b: i64) -> i64 {
    if b == 0 {
        a.abs()
    } else {
        gcd(b, a % b)
    }
}

/// Area of the geodesic ball `B_t(rho_x, r)` on the cigar.
pub(crate) fn cigar_ball(rho_x: f64, t: f64, r: f64) -> Result<CigarBall> {
    let step = (r / 60.0).clamp(0.005, 0.03);
    let s_lo = 2.0 * t - CAP_DEPTH;
    let tip_root = (2.0 * t).exp();
    let s_x = if rho_x > 0.0 { rho_x.ln() } else { f64::NEG_INFINITY };
    let reach = if rho_x > 0.0 { s_x + r + 1.0 } else { s_lo + r + CAP_DEPTH + 1.0 };
    if !reach.is_finite() || reach > 700.0 {
        return Err(Error::Config("ball extends past the cigar lattice".into()));
    }
    // rows aligned so the base point sits on a node
    let offset = if rho_x > 0.0 {
        let k = ((s_x - s_lo) / step).ceil();
        s_x - k * step
    } else {
        s_lo
    };
    let rows = ((reach - offset) / step).ceil() as usize + 1;
    let cols = ((2.0 * PI) / step).round().max(16.0) as usize;
    let dphi = 2.0 * PI / cols as f64;
    let s_of = |i: usize| offset + i as f64 * step;

    let cap = rows * cols;
    let mut dist = vec![f64::INFINITY; cap + 1];
    let mut heap = BinaryHeap::new();
    // distance from the bottom row to the tip, through the cap disk
    let cap_gap = (s_of(0).exp() / tip_root).asinh();
    let source = if rho_x > 0.0 {
        let i = ((s_x - offset) / step).round() as usize;
        i * cols
    } else {
        cap
    };
    dist[source] = 0.0;
    heap.push(Entry(0.0, source));

    let mut dirs = Vec::new();
    for a in -STENCIL_REACH..=STENCIL_REACH {
        for b in -STENCIL_REACH..=STENCIL_REACH {
            if (a, b) != (0, 0) && gcd(a, b) == 1 {
                dirs.push((a, b));
            }
        }
    }
    let root_b = |s: f64| cigar_conformal(s, t).sqrt();

    while let Some(Entry(d, node)) = heap.pop() {
        if d > dist[node] || d > r {
            continue;
        }
        if node == cap {
            for j in 0..cols {
                let nd = d + cap_gap;
                if nd < dist[j] {
                    dist[j] = nd;
                    heap.push(Entry(nd, j));
                }
            }
            continue;
        }
        let (i, j) = ((node / cols) as i64, (node % cols) as i64);
        if i == 0 && d + cap_gap < dist[cap] {
            dist[cap] = d + cap_gap;
            heap.push(Entry(d + cap_gap, cap));
        }
        for &(a, b) in &dirs {
            let ni = i + a;
            if ni < 0 || ni >= rows as i64 {
                continue;
            }
            let nj = (j + b).rem_euclid(cols as i64);
            let (s0, s1) = (s_of(i as usize), s_of(ni as usize));
            let chord = ((a as f64 * step).powi(2) + (b as f64 * dphi).powi(2)).sqrt();
            let w = (root_b(s0) + 4.0 * root_b(0.5 * (s0 + s1)) + root_b(s1)) / 6.0;
            let nd = d + chord * w;
            let target = ni as usize * cols + nj as usize;
            if nd < dist[target] {
                dist[target] = nd;
                heap.push(Entry(nd, target));
            }
        }
    }

    // exact cell areas: integral of B ds is ln(e^{4t} + e^{2s}) / 2
    let tip = (4.0 * t).exp();
    let antideriv = |s: f64| 0.5 * (tip + (2.0 * s).exp()).ln();
    let mut area = 0.0;
    let mut min_radius = f64::INFINITY;
    let mut radii = Vec::new();
    if dist[cap] <= r {
        area += PI * (2.0 * (s_of(0) - 0.5 * step)).exp() / tip;
        min_radius = 0.0;
    }
    for i in 0..rows {
        let s = s_of(i);
        let cell = dphi * (antideriv(s + 0.5 * step) - antideriv(s - 0.5 * step));
        let inside = (0..cols).filter(|&j| dist[i * cols + j] <= r).count();
        if inside > 0 {
            area += cell * inside as f64;
            min_radius = min_radius.min(s.exp());
            radii.push(s.exp());
        }
    }
    if radii.is_empty() && min_radius.is_infinite() {
        return Err(Error::Config("ball radius below lattice resolution".into()));
    }
    if dist[(rows - 1) * cols..cap].iter().any(|&d| d <= r) {
        return Err(Error::Config("ball reaches the truncation of the cigar lattice".into()));
    }
    Ok(CigarBall {
        area,
        sample_radii: radii,
        min_radius,
    })
}
