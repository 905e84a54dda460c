//! Closed-form ancient Ricci flows and their symmetry-reduced domains.
//!
//! Every flow lives on `(-inf, 0]`. Points are given in the variant's own
//! coordinates: full Euclidean coordinates for the flat variants, the angle
//! along a fixed meridian for the sphere, and the coordinate radius along a
//! fixed ray for the cigar.

mod ball;
mod grid;

pub use grid::{GridSpec, ReducedGrid};

use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Slack allowed on the right end of the time axis.
const TIME_SLACK: f64 = 1e-12;

/// A flat torus `R^k / L` with lattice generated by the rows of `lattice`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct FlatTorus {
    pub lattice: Vec<Vec<f64>>,
}

/// An isometry `x -> linear * x + shift` of a flat torus cover.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Isometry {
    pub linear: Vec<Vec<f64>>,
    pub shift: Vec<f64>,
}

/// The model zoo.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ModelFlow {
    /// Static flat `R^n`.
    EuclideanStatic { dim: usize },
    /// Static flat torus.
    FlatTorus { torus: FlatTorus },
    /// Static `T^k x R^m`.
    FlatProduct { torus: FlatTorus, euclidean_dim: usize },
    /// Static quotient of a flat torus by a finite group of isometries.
    TorusQuotient { cover: FlatTorus, deck: Vec<Isometry> },
    /// `g(t) = 2(n-1)(t_sing - t) g_round`.
    ShrinkingSphere { dim: usize, t_sing: f64 },
    /// `g(t) = (dx^2 + dy^2) / (e^{4t} + x^2 + y^2)`.
    CigarSoliton,
}

/// A point in the variant's coordinates.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
pub struct Point(pub Vec<f64>);

impl Point {
    pub fn origin(dim: usize) -> Self {
        Point(vec![0.0; dim])
    }

    pub fn coords(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for Point {
    fn from(v: Vec<f64>) -> Self {
        Point(v)
    }
}

/// Metric data sufficient to evaluate `g(t)` anywhere.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MetricScale {
    /// `g(t) = scale * g_ref` with `g_ref` the reference metric of the variant.
    Homogeneous { scale: f64 },
    /// Conformally flat: `g(t) = (dx^2 + dy^2) / (tip + rho^2)`.
    Conformal { tip: f64 },
}

impl MetricScale {
    /// Conformal factor at coordinate radius `rho` (homogeneous variants return the scale).
    pub fn factor(&self, rho: f64) -> f64 {
        match *self {
            MetricScale::Homogeneous { scale } => scale,
            MetricScale::Conformal { tip } => 1.0 / (tip + rho * rho),
        }
    }
}

/// Warped-product data of the reduced coordinate `q`:
/// `g = a(q)^2 dq^2 + w(q)^2 g_{S^k}`, with Ricci eigenvalues in an orthonormal frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RadialFrame {
    /// Proper length per unit of `q`.
    pub a: f64,
    /// `a'(q) / a(q)`.
    pub a_log_slope: f64,
    /// `w'(q) / w(q)`; `None` at a pole where `w` vanishes.
    pub w_log_slope: Option<f64>,
    /// Number of tangential directions.
    pub tangential: usize,
    pub ricci_radial: f64,
    pub ricci_tangential: f64,
}

impl RadialFrame {
    /// `|Ric + Hess f - g / (2 tau)|^2` for a radial `f` with coordinate
    /// derivatives `f_q`, `f_qq`.
    pub fn deviation_sq(&self, f_q: f64, f_qq: f64, tau: f64) -> f64 {
        let shrink = 0.5 / tau;
        let radial = (f_qq - self.a_log_slope * f_q) / (self.a * self.a);
        let tangential = match self.w_log_slope {
            Some(slope) => f_q * slope / (self.a * self.a),
            None => radial,
        };
        let r = radial + self.ricci_radial - shrink;
        let t = tangential + self.ricci_tangential - shrink;
        r * r + self.tangential as f64 * t * t
    }

    /// `|grad f|^2` for a radial `f`.
    pub fn grad_sq(&self, f_q: f64) -> f64 {
        let g = f_q / self.a;
        g * g
    }
}

/// Ball volume ratio together with the sampled curvature admissibility flag.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VolumeRatio {
    pub volume: f64,
    pub ratio: f64,
    pub admissible: bool,
    /// Largest `|Rm| r^2` seen over the sampled parabolic cube.
    pub curvature_scale: f64,
    pub samples: usize,
}

/// Area of the unit `k`-sphere.
pub fn unit_sphere_area(k: usize) -> f64 {
    match k {
        0 => 2.0,
        1 => 2.0 * PI,
        _ => 2.0 * PI / (k as f64 - 1.0) * unit_sphere_area(k - 2),
    }
}

/// Volume of the unit ball in `R^n`.
pub fn unit_ball_volume(n: usize) -> f64 {
    if n == 0 {
        1.0
    } else {
        unit_sphere_area(n - 1) / n as f64
    }
}

impl FlatTorus {
    pub fn cube(dim: usize, side: f64) -> Self {
        let lattice = (0..dim)
            .map(|i| (0..dim).map(|j| if i == j { side } else { 0.0 }).collect())
            .collect();
        FlatTorus { lattice }
    }

    pub fn dim(&self) -> usize {
        self.lattice.len()
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.dim();
        if k == 0 {
            return Err(Error::Config("torus lattice is empty".into()));
        }
        if self.lattice.iter().any(|row| row.len() != k) {
            return Err(Error::Config("torus lattice must be square".into()));
        }
        if self.lattice.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::Config("torus lattice has non-finite entries".into()));
        }
        if self.volume() < 1e-12 {
            return Err(Error::Config("torus lattice is singular".into()));
        }
        Ok(())
    }

    /// Basis vector `i` (row `i` of the lattice matrix).
    pub fn basis(&self, i: usize) -> &[f64] {
        &self.lattice[i]
    }

    pub fn volume(&self) -> f64 {
        determinant(&self.lattice).abs()
    }

    /// Lattice coordinates `u` with `x = sum_i u_i b_i`.
    pub fn to_lattice_coords(&self, x: &[f64]) -> Vec<f64> {
        // solve L^T u = x
        let k = self.dim();
        let mut m: Vec<Vec<f64>> = (0..k)
            .map(|r| (0..k).map(|c| self.lattice[c][r]).collect())
            .collect();
        solve_in_place(&mut m, x.to_vec())
    }

    pub fn from_lattice_coords(&self, u: &[f64]) -> Vec<f64> {
        let k = self.dim();
        let mut x = vec![0.0; k];
        for (i, ui) in u.iter().enumerate() {
            for (xj, bij) in x.iter_mut().zip(&self.lattice[i]) {
                *xj += ui * bij;
            }
        }
        x
    }

    /// Shortest representative of `d` modulo the lattice.
    pub fn reduce(&self, d: &[f64]) -> Vec<f64> {
        let k = self.dim();
        let u: Vec<f64> = self
            .to_lattice_coords(d)
            .into_iter()
            .map(|v| v - v.round())
            .collect();
        let base = self.from_lattice_coords(&u);
        let mut best = base.clone();
        let mut best_norm = norm_sq(&base);
        let span = if k <= 3 { 1i64 } else { 0 };
        let mut offsets = vec![-span; k];
        loop {
            if offsets.iter().any(|&o| o != 0) {
                let shift: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
                let cand: Vec<f64> = base
                    .iter()
                    .zip(self.from_lattice_coords(&shift))
                    .map(|(a, b)| a + b)
                    .collect();
                let n = norm_sq(&cand);
                if n < best_norm {
                    best_norm = n;
                    best = cand;
                }
            }
            // odometer increment
            let mut i = 0;
            loop {
                if i == k {
                    return best;
                }
                offsets[i] += 1;
                if offsets[i] > span {
                    offsets[i] = -span;
                    i += 1;
                } else {
                    break;
                }
            }
        }
    }

    pub fn distance(&self, x: &[f64], y: &[f64]) -> f64 {
        let d: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        norm_sq(&self.reduce(&d)).sqrt()
    }

    /// Smallest singular value bound: `|L^T m| >= sigma |m|_inf`.
    pub fn min_stretch(&self) -> f64 {
        // lower bound through the inverse's row sums
        let k = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..k {
            let mut e = vec![0.0; k];
            e[i] = 1.0;
            let col = self.to_lattice_coords(&e);
            worst = worst.max(col.iter().map(|v| v.abs()).sum::<f64>());
        }
        1.0 / worst.max(1e-300)
    }

    /// Dual lattice rows `b*_i` with `b_i . b*_j = delta_ij`.
    pub fn dual(&self) -> FlatTorus {
        let k = self.dim();
        let mut rows = vec![vec![0.0; k]; k];
        for j in 0..k {
            let mut e = vec![0.0; k];
            e[j] = 1.0;
            // solve L u = e_j  -> column j of L^{-1}; row j of dual is column j of L^{-1}
            let mut m = self.lattice.clone();
            let u = solve_in_place(&mut m, e);
            rows[j] = u;
        }
        FlatTorus { lattice: rows }
    }

    /// Shortest nonzero lattice vector length (searched over small coefficients).
    pub fn shortest_vector(&self) -> f64 {
        let k = self.dim();
        let mut best = f64::INFINITY;
        let span = 2i64;
        let mut offsets = vec![-span; k];
        loop {
            if offsets.iter().any(|&o| o != 0) {
                let c: Vec<f64> = offsets.iter().map(|&o| o as f64).collect();
                best = best.min(norm_sq(&self.from_lattice_coords(&c)).sqrt());
            }
            let mut i = 0;
            loop {
                if i == k {
                    return best;
                }
                offsets[i] += 1;
                if offsets[i] > span {
                    offsets[i] = -span;
                    i += 1;
                } else {
                    break;
                }
            }
        }
    }
}

impl Isometry {
    pub fn identity(dim: usize) -> Self {
        Isometry {
            linear: (0..dim)
                .map(|i| (0..dim).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
                .collect(),
            shift: vec![0.0; dim],
        }
    }

    pub fn translation(shift: Vec<f64>) -> Self {
        let mut iso = Isometry::identity(shift.len());
        iso.shift = shift;
        iso
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.linear
            .iter()
            .zip(&self.shift)
            .map(|(row, b)| row.iter().zip(x).map(|(a, v)| a * v).sum::<f64>() + b)
            .collect()
    }

    pub fn compose(&self, inner: &Isometry) -> Isometry {
        let k = self.shift.len();
        let linear = (0..k)
            .map(|i| {
                (0..k)
                    .map(|j| (0..k).map(|l| self.linear[i][l] * inner.linear[l][j]).sum())
                    .collect()
            })
            .collect();
        let shift = self.apply(&inner.shift);
        Isometry { linear, shift }
    }

    fn same_modulo(&self, other: &Isometry, torus: &FlatTorus) -> bool {
        let lin_close = self
            .linear
            .iter()
            .flatten()
            .zip(other.linear.iter().flatten())
            .all(|(a, b)| (a - b).abs() < 1e-9);
        if !lin_close {
            return false;
        }
        let d: Vec<f64> = self.shift.iter().zip(&other.shift).map(|(a, b)| a - b).collect();
        torus
            .to_lattice_coords(&d)
            .iter()
            .all(|u| (u - u.round()).abs() < 1e-9)
    }
}

impl ModelFlow {
    pub fn sphere(dim: usize, t_sing: f64) -> Self {
        ModelFlow::ShrinkingSphere { dim, t_sing }
    }

    pub fn circle(length: f64) -> Self {
        ModelFlow::FlatTorus {
            torus: FlatTorus::cube(1, length),
        }
    }

    /// Checks the structural invariants of the variant.
    pub fn validate(&self) -> Result<()> {
        match self {
            ModelFlow::EuclideanStatic { dim } => {
                if *dim == 0 {
                    return Err(Error::Config("euclidean dimension must be >= 1".into()));
                }
            }
            ModelFlow::FlatTorus { torus } => torus.validate()?,
            ModelFlow::FlatProduct { torus, .. } => torus.validate()?,
            ModelFlow::TorusQuotient { cover, deck } => {
                cover.validate()?;
                validate_deck(cover, deck)?;
            }
            ModelFlow::ShrinkingSphere { dim, t_sing } => {
                if *dim < 2 {
                    return Err(Error::Config("sphere dimension must be >= 2".into()));
                }
                if !(*t_sing > 0.0) {
                    return Err(Error::Config("sphere singular time must be > 0".into()));
                }
            }
            ModelFlow::CigarSoliton => {}
        }
        Ok(())
    }

    /// Manifold dimension.
    pub fn dim(&self) -> usize {
        match self {
            ModelFlow::EuclideanStatic { dim } => *dim,
            ModelFlow::FlatTorus { torus } => torus.dim(),
            ModelFlow::FlatProduct { torus, euclidean_dim } => torus.dim() + euclidean_dim,
            ModelFlow::TorusQuotient { cover, .. } => cover.dim(),
            ModelFlow::ShrinkingSphere { dim, .. } => *dim,
            ModelFlow::CigarSoliton => 2,
        }
    }

    pub fn is_static(&self) -> bool {
        !matches!(self, ModelFlow::ShrinkingSphere { .. } | ModelFlow::CigarSoliton)
    }

    /// Homogeneous variants have kernels independent of the base point.
    pub fn is_homogeneous(&self) -> bool {
        !matches!(self, ModelFlow::CigarSoliton | ModelFlow::TorusQuotient { .. })
    }

    pub fn is_flat(&self) -> bool {
        self.is_static()
    }

    pub fn short_name(&self) -> &'static str {
        match self {
            ModelFlow::EuclideanStatic { .. } => "euclidean",
            ModelFlow::FlatTorus { .. } => "torus",
            ModelFlow::FlatProduct { .. } => "product",
            ModelFlow::TorusQuotient { .. } => "quotient",
            ModelFlow::ShrinkingSphere { .. } => "sphere",
            ModelFlow::CigarSoliton => "cigar",
        }
    }

    pub fn check_time(&self, t: f64) -> Result<()> {
        if !t.is_finite() || t > TIME_SLACK {
            return Err(Error::Domain {
                time: t,
                reason: "flows live on (-inf, 0]".into(),
            });
        }
        if let ModelFlow::ShrinkingSphere { t_sing, .. } = self {
            if t >= *t_sing {
                return Err(Error::Domain {
                    time: t,
                    reason: "at or past the singular time".into(),
                });
            }
        }
        Ok(())
    }

    /// Sphere scale `c(t) = 2(n-1)(t_sing - t)`.
    pub fn sphere_scale(&self, t: f64) -> Option<f64> {
        match self {
            ModelFlow::ShrinkingSphere { dim, t_sing } => {
                Some(2.0 * (*dim as f64 - 1.0) * (t_sing - t))
            }
            _ => None,
        }
    }

    pub fn metric_scale(&self, t: f64) -> Result<MetricScale> {
        self.check_time(t)?;
        Ok(match self {
            ModelFlow::ShrinkingSphere { .. } => MetricScale::Homogeneous {
                scale: self.sphere_scale(t).unwrap(),
            },
            ModelFlow::CigarSoliton => MetricScale::Conformal {
                tip: (4.0 * t).exp(),
            },
            _ => MetricScale::Homogeneous { scale: 1.0 },
        })
    }

    pub fn scalar_curvature(&self, point: &Point, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self {
            ModelFlow::ShrinkingSphere { dim, .. } => {
                let n = *dim as f64;
                n * (n - 1.0) / self.sphere_scale(t).unwrap()
            }
            ModelFlow::CigarSoliton => {
                let rho = cigar_radius(point)?;
                cigar_scalar(rho.ln(), t)
            }
            _ => 0.0,
        })
    }

    /// Largest absolute sectional curvature at the point.
    pub fn curvature_norm(&self, point: &Point, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self {
            ModelFlow::ShrinkingSphere { .. } => 1.0 / self.sphere_scale(t).unwrap(),
            ModelFlow::CigarSoliton => 0.5 * self.scalar_curvature(point, t)?,
            _ => 0.0,
        })
    }

    pub fn volume(&self, t: f64) -> Result<f64> {
        self.check_time(t)?;
        Ok(match self {
            ModelFlow::FlatTorus { torus } => torus.volume(),
            ModelFlow::TorusQuotient { cover, deck } => cover.volume() / deck.len() as f64,
            ModelFlow::ShrinkingSphere { dim, .. } => {
                let c = self.sphere_scale(t).unwrap();
                c.powf(*dim as f64 / 2.0) * unit_sphere_area(*dim)
            }
            _ => f64::INFINITY,
        })
    }

    pub fn geodesic_distance(&self, x: &Point, y: &Point, t: f64) -> Result<f64> {
        self.check_time(t)?;
        let (xs, ys) = (x.coords(), y.coords());
        match self {
            ModelFlow::EuclideanStatic { dim } => {
                expect_dim(xs, *dim)?;
                expect_dim(ys, *dim)?;
                Ok(xs.iter().zip(ys).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            }
            ModelFlow::FlatTorus { torus } => {
                expect_dim(xs, torus.dim())?;
                expect_dim(ys, torus.dim())?;
                Ok(torus.distance(xs, ys))
            }
            ModelFlow::FlatProduct { torus, euclidean_dim } => {
                let k = torus.dim();
                expect_dim(xs, k + euclidean_dim)?;
                expect_dim(ys, k + euclidean_dim)?;
                let dt = torus.distance(&xs[..k], &ys[..k]);
                let de: f64 = xs[k..].iter().zip(&ys[k..]).map(|(a, b)| (a - b).powi(2)).sum();
                Ok((dt * dt + de).sqrt())
            }
            ModelFlow::TorusQuotient { cover, deck } => {
                expect_dim(xs, cover.dim())?;
                expect_dim(ys, cover.dim())?;
                Ok(deck
                    .iter()
                    .map(|h| cover.distance(xs, &h.apply(ys)))
                    .fold(f64::INFINITY, f64::min))
            }
            ModelFlow::ShrinkingSphere { .. } => {
                expect_dim(xs, 1)?;
                expect_dim(ys, 1)?;
                let c = self.sphere_scale(t).unwrap();
                let d = (xs[0] - ys[0]).rem_euclid(2.0 * PI);
                Ok(c.sqrt() * d.min(2.0 * PI - d))
            }
            ModelFlow::CigarSoliton => {
                let (r1, r2) = (cigar_radius(x)?, cigar_radius(y)?);
                let root = (2.0 * t).exp();
                Ok(((r1 / root).asinh() - (r2 / root).asinh()).abs())
            }
        }
    }

    /// Warped-product frame at reduced coordinate `q` and time `t`.
    ///
    /// Reduced coordinates: Euclidean radius, sphere polar angle, circle
    /// coordinate for a one-dimensional torus, cigar log-radius `s = ln rho`.
    pub fn radial_frame(&self, q: f64, t: f64) -> Result<RadialFrame> {
        self.check_time(t)?;
        Ok(match self {
            ModelFlow::EuclideanStatic { dim } => RadialFrame {
                a: 1.0,
                a_log_slope: 0.0,
                w_log_slope: (q > 0.0).then(|| 1.0 / q),
                tangential: dim - 1,
                ricci_radial: 0.0,
                ricci_tangential: 0.0,
            },
            ModelFlow::FlatTorus { torus } if torus.dim() == 1 => RadialFrame {
                a: 1.0,
                a_log_slope: 0.0,
                w_log_slope: Some(0.0),
                tangential: 0,
                ricci_radial: 0.0,
                ricci_tangential: 0.0,
            },
            ModelFlow::ShrinkingSphere { dim, .. } => {
                let c = self.sphere_scale(t).unwrap();
                let s = q.sin();
                let pole = s.abs() < 1e-12;
                let ric = (*dim as f64 - 1.0) / c;
                RadialFrame {
                    a: c.sqrt(),
                    a_log_slope: 0.0,
                    w_log_slope: (!pole).then(|| q.cos() / s),
                    tangential: dim - 1,
                    ricci_radial: ric,
                    ricci_tangential: ric,
                }
            }
            ModelFlow::CigarSoliton => {
                let b = cigar_conformal(q, t);
                let slope = 1.0 - b;
                let k = 0.5 * cigar_scalar(q, t);
                RadialFrame {
                    a: b.sqrt(),
                    a_log_slope: slope,
                    w_log_slope: Some(slope),
                    tangential: 1,
                    ricci_radial: k,
                    ricci_tangential: k,
                }
            }
            other => {
                return Err(Error::Unsupported(format!(
                    "no one-dimensional reduction for {}",
                    other.short_name()
                )))
            }
        })
    }

    /// Static coordinate density of the reduced measure (`dg = factor * density * dq`).
    pub fn reduced_density(&self, q: f64) -> f64 {
        match self {
            ModelFlow::EuclideanStatic { dim } => q.abs().powi(*dim as i32 - 1),
            ModelFlow::ShrinkingSphere { dim, .. } => q.sin().abs().powi(*dim as i32 - 1),
            _ => 1.0,
        }
    }

    /// Time-dependent factor of the reduced measure at coordinate `q`.
    pub fn measure_factor(&self, q: f64, t: f64) -> f64 {
        match self {
            ModelFlow::EuclideanStatic { dim } => unit_sphere_area(dim - 1),
            ModelFlow::ShrinkingSphere { dim, .. } => {
                let c = self.sphere_scale(t).unwrap();
                unit_sphere_area(dim - 1) * c.powf(*dim as f64 / 2.0)
            }
            ModelFlow::CigarSoliton => 2.0 * PI * cigar_conformal(q, t),
            _ => 1.0,
        }
    }

    /// `|Ric + Hess f - g/(2 tau)|^2` at node `index` of a radial potential profile.
    pub fn soliton_deviation_norm(
        &self,
        nodes: &[f64],
        f: &[f64],
        index: usize,
        s: f64,
        tau: f64,
    ) -> Result<f64> {
        if !(tau > 0.0) {
            return Err(Error::Config("tau must be positive".into()));
        }
        let (f_q, f_qq) = radial_derivatives(self, nodes, f, index)?;
        let frame = self.radial_frame(nodes[index], s)?;
        Ok(frame.deviation_sq(f_q, f_qq, tau))
    }

    /// Ball volume ratio `Vol(B_t(x, r)) / r^n` and curvature admissibility on
    /// the parabolic cube `B_t(x, r) x [t - r^2, t]`.
    pub fn volume_ratio(&self, x: &Point, t: f64, r: f64, samples: usize) -> Result<VolumeRatio> {
        self.check_time(t)?;
        if !(r > 0.0) {
            return Err(Error::Config("radius must be positive".into()));
        }
        let n = self.dim();
        let samples = samples.max(2);
        let times: Vec<f64> = (0..samples)
            .map(|i| t - r * r * i as f64 / (samples - 1) as f64)
            .collect();
        let (volume, sup_curv) = match self {
            ModelFlow::EuclideanStatic { dim } => {
                (radial_ball_volume(|q| q.powi(*dim as i32 - 1), r) * unit_sphere_area(dim - 1), 0.0)
            }
            ModelFlow::FlatTorus { torus } => (torus_ball_volume(torus, None, 0, r), 0.0),
            ModelFlow::FlatProduct { torus, euclidean_dim } => {
                (torus_ball_volume(torus, None, *euclidean_dim, r), 0.0)
            }
            ModelFlow::TorusQuotient { cover, deck } => {
                expect_dim(x.coords(), cover.dim())?;
                (torus_ball_volume(cover, Some((deck, x.coords())), 0, r), 0.0)
            }
            ModelFlow::ShrinkingSphere { dim, .. } => {
                let c = self.sphere_scale(t).unwrap();
                let reach = (r / c.sqrt()).min(PI);
                let v = radial_ball_volume(|q| q.sin().powi(*dim as i32 - 1), reach)
                    * unit_sphere_area(dim - 1)
                    * c.powf(*dim as f64 / 2.0);
                let mut sup: f64 = 0.0;
                for &tt in &times {
                    sup = sup.max(self.curvature_norm(x, tt)?);
                }
                (v, sup)
            }
            ModelFlow::CigarSoliton => {
                let rho = cigar_radius(x)?;
                let ball = ball::cigar_ball(rho, t, r)?;
                let mut sup: f64 = 0.0;
                let stride = (ball.sample_radii.len() / samples).max(1);
                let mut probe: Vec<f64> = ball.sample_radii.iter().step_by(stride).copied().collect();
                probe.push(ball.min_radius);
                for &tt in &times {
                    for &q in &probe {
                        sup = sup.max(0.5 * cigar_scalar_rho(q, tt));
                    }
                }
                (ball.area, sup)
            }
        };
        let ratio = volume / r.powi(n as i32);
        let curvature_scale = sup_curv * r * r;
        Ok(VolumeRatio {
            volume,
            ratio,
            admissible: curvature_scale <= 1.0,
            curvature_scale,
            samples,
        })
    }
}

fn validate_deck(cover: &FlatTorus, deck: &[Isometry]) -> Result<()> {
    let k = cover.dim();
    if deck.is_empty() {
        return Err(Error::Config("deck group is empty".into()));
    }
    for h in deck {
        if h.shift.len() != k || h.linear.len() != k || h.linear.iter().any(|r| r.len() != k) {
            return Err(Error::Config("deck isometry has the wrong dimension".into()));
        }
        // orthogonality
        for i in 0..k {
            for j in 0..k {
                let dot: f64 = (0..k).map(|l| h.linear[l][i] * h.linear[l][j]).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                if (dot - want).abs() > 1e-9 {
                    return Err(Error::Config("deck map is not an isometry".into()));
                }
            }
        }
    }
    let id = Isometry::identity(k);
    if !deck.iter().any(|h| h.same_modulo(&id, cover)) {
        return Err(Error::Config("deck group lacks the identity".into()));
    }
    for a in deck {
        for b in deck {
            let ab = a.compose(b);
            if !deck.iter().any(|h| h.same_modulo(&ab, cover)) {
                return Err(Error::Config("deck maps are not closed under composition".into()));
            }
        }
    }
    Ok(())
}

fn expect_dim(xs: &[f64], dim: usize) -> Result<()> {
    if xs.len() != dim {
        return Err(Error::Point(format!("expected {dim} coordinates, got {}", xs.len())));
    }
    Ok(())
}

fn cigar_radius(p: &Point) -> Result<f64> {
    match p.coords() {
        [rho] if *rho >= 0.0 && rho.is_finite() => Ok(*rho),
        _ => Err(Error::Point("cigar points are a single radius rho >= 0".into())),
    }
}

/// `B(s, t) = rho^2 / (e^{4t} + rho^2)` with `s = ln rho`, computed without overflow.
pub fn cigar_conformal(s: f64, t: f64) -> f64 {
    let e = 4.0 * t - 2.0 * s;
    if e > 0.0 {
        let x = (-e).exp();
        x / (1.0 + x)
    } else {
        1.0 / (1.0 + e.exp())
    }
}

/// Cigar scalar curvature `4 e^{4t} / (e^{4t} + rho^2)` at `s = ln rho`.
pub fn cigar_scalar(s: f64, t: f64) -> f64 {
    4.0 * (1.0 - cigar_conformal(s, t))
}

fn cigar_scalar_rho(rho: f64, t: f64) -> f64 {
    let a = (4.0 * t).exp();
    4.0 * a / (a + rho * rho)
}

fn radial_ball_volume(density: impl Fn(f64) -> f64, reach: f64) -> f64 {
    let (x, w) = gauss_legendre(64);
    let panels = 16;
    let mut total = 0.0;
    for p in 0..panels {
        let a = reach * p as f64 / panels as f64;
        let b = reach * (p + 1) as f64 / panels as f64;
        let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
        total += x
            .iter()
            .zip(&w)
            .map(|(xi, wi)| wi * half * density(mid + half * xi))
            .sum::<f64>();
    }
    total
}

/// Ball volume in `T^k x R^m` (m = `extra_dim`), optionally in a quotient by a
/// deck group (the ball is then measured on the cover's fundamental domain and
/// divided by the group order).
fn torus_ball_volume(
    torus: &FlatTorus,
    quotient: Option<(&[Isometry], &[f64])>,
    extra_dim: usize,
    r: f64,
) -> f64 {
    let k = torus.dim();
    let vol = torus.volume();
    // Whole torus inside the ball: exact.
    let far: f64 = {
        let corner: Vec<f64> = torus
            .lattice
            .iter()
            .fold(vec![0.0; k], |acc, b| acc.iter().zip(b).map(|(a, v)| a + 0.5 * v.abs()).collect());
        norm_sq(&corner).sqrt()
    };
    if quotient.is_none() && extra_dim == 0 && r >= far {
        return vol;
    }
    if k == 1 && quotient.is_none() && extra_dim == 0 {
        return (2.0 * r).min(vol);
    }
    let per_axis: usize = match k {
        1 => 20000,
        2 => 600,
        _ => 60,
    };
    let total = per_axis.pow(k as u32);
    let cell = vol / total as f64;
    let origin = quotient.map(|(_, x)| x.to_vec()).unwrap_or_else(|| vec![0.0; k]);
    let mut acc = 0.0;
    let mut idx = vec![0usize; k];
    for _ in 0..total {
        let u: Vec<f64> = idx.iter().map(|&i| (i as f64 + 0.5) / per_axis as f64).collect();
        let y = torus.from_lattice_coords(&u);
        let d = match quotient {
            Some((deck, x)) => deck
                .iter()
                .map(|h| torus.distance(x, &h.apply(&y)))
                .fold(f64::INFINITY, f64::min),
            None => torus.distance(&origin, &y),
        };
        if extra_dim == 0 {
            if d <= r {
                acc += cell;
            }
        } else if d < r {
            let rr = (r * r - d * d).sqrt();
            acc += cell * unit_ball_volume(extra_dim) * rr.powi(extra_dim as i32);
        }
        for i in 0..k {
            idx[i] += 1;
            if idx[i] < per_axis {
                break;
            }
            idx[i] = 0;
        }
    }
    match quotient {
        Some((deck, _)) => acc / deck.len() as f64,
        None => acc,
    }
}

/// Centered derivatives of a radial profile with even reflection at poles.
pub(crate) fn radial_derivatives(
    flow: &ModelFlow,
    nodes: &[f64],
    f: &[f64],
    index: usize,
) -> Result<(f64, f64)> {
    let n = nodes.len();
    if n < 3 || index >= n {
        return Err(Error::Stencil { node: index });
    }
    let pole_at = |q: f64| match flow {
        ModelFlow::EuclideanStatic { .. } => q.abs() < 1e-14,
        ModelFlow::ShrinkingSphere { .. } => q.abs() < 1e-14 || (q - PI).abs() < 1e-12,
        _ => false,
    };
    let mut xs = Vec::with_capacity(5);
    let mut ys = Vec::with_capacity(5);
    for off in -2i64..=2 {
        let j = index as i64 + off;
        if j >= 0 && (j as usize) < n {
            xs.push(nodes[j as usize]);
            ys.push(f[j as usize]);
        } else if j < 0 && pole_at(nodes[0]) {
            let m = (-j) as usize;
            if m < n {
                xs.push(2.0 * nodes[0] - nodes[m]);
                ys.push(f[m]);
            }
        } else if j as usize >= n && pole_at(nodes[n - 1]) {
            let m = 2 * (n - 1) - j as usize;
            xs.push(2.0 * nodes[n - 1] - nodes[m]);
            ys.push(f[m]);
        }
    }
    if xs.len() < 3 {
        return Err(Error::Stencil { node: index });
    }
    if xs.len() < 5 && !(index == 0 || index == n - 1) {
        // interior stencil cut by the boundary without a pole reflection
        if xs.len() < 4 {
            return Err(Error::Stencil { node: index });
        }
    }
    let w = crate::quad::fornberg_weights(nodes[index], &xs, 2);
    Ok((stencil_sum(&w[1], &ys), stencil_sum(&w[2], &ys)))
}

/// `sum w_j y_j`, or zero when it is below the rounding level of the sum.
///
/// On stretched grids the metric factor can amplify rounding noise by many
/// orders of magnitude, so noise is not passed on as a derivative.
pub(crate) fn stencil_sum(w: &[f64], y: &[f64]) -> f64 {
    let (sum, scale) = w
        .iter()
        .zip(y)
        .fold((0.0, 0.0), |(s, a), (wj, yj)| (s + wj * yj, a + (wj * yj).abs()));
    if sum.abs() <= 8.0 * f64::EPSILON * scale {
        0.0
    } else {
        sum
    }
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

fn determinant(m: &[Vec<f64>]) -> f64 {
    let k = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut det = 1.0;
    for c in 0..k {
        let p = (c..k)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        if a[p][c] == 0.0 {
            return 0.0;
        }
        if p != c {
            a.swap(p, c);
            det = -det;
        }
        det *= a[c][c];
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            for cc in c..k {
                a[r][cc] -= f * a[c][cc];
            }
        }
    }
    det
}

fn solve_in_place(a: &mut [Vec<f64>], mut b: Vec<f64>) -> Vec<f64> {
    let k = a.len();
    for c in 0..k {
        let p = (c..k)
            .max_by(|&i, &j| a[i][c].abs().partial_cmp(&a[j][c].abs()).unwrap())
            .unwrap();
        a.swap(p, c);
        b.swap(p, c);
        for r in c + 1..k {
            let f = a[r][c] / a[c][c];
            for cc in c..k {
                a[r][cc] -= f * a[c][cc];
            }
            b[r] -= f * b[c];
        }
    }
    let mut x = vec![0.0; k];
    for r in (0..k).rev() {
        let s: f64 = (r + 1..k).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}
