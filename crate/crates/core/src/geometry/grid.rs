use super::ModelFlow;
use crate::error::{Error, Result};
use crate::quad::gauss_legendre;
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

/// Grid parameters as they appear in a scenario file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Node count (cells for finite-volume grids).
    pub nodes: usize,
    /// Euclidean radial cutoff, or the cigar log-radius cutoff.
    pub truncation: Option<f64>,
    /// Cigar spacing `ds = spacing + growth * |s|`.
    pub spacing: f64,
    pub growth: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec {
            nodes: 512,
            truncation: None,
            spacing: 0.02,
            growth: 0.01,
        }
    }
}

/// One-dimensional symmetry-reduced grid.
///
/// `weights[i]` integrates the variant's static reduced density over the
/// node's cell (or is a quadrature weight when the grid has no cells).
#[derive(Clone, Debug, PartialEq)]
pub struct ReducedGrid {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    /// Cell faces, `nodes.len() + 1` entries; empty for pure quadrature grids.
    pub faces: Vec<f64>,
    pub truncation: Option<f64>,
    /// Period for periodic grids.
    pub period: Option<f64>,
}

impl ReducedGrid {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Node-centred finite-volume grid with the given faces and static density.
    pub fn finite_volume(
        nodes: Vec<f64>,
        faces: Vec<f64>,
        density: impl Fn(f64) -> f64,
        truncation: Option<f64>,
    ) -> Result<Self> {
        if faces.len() != nodes.len() + 1 {
            return Err(Error::Config("face count must be node count + 1".into()));
        }
        let (gx, gw) = gauss_legendre(12);
        let weights = faces
            .windows(2)
            .map(|f| {
                let (mid, half) = (0.5 * (f[0] + f[1]), 0.5 * (f[1] - f[0]));
                gx.iter().zip(&gw).map(|(x, w)| w * half * density(mid + half * x)).sum()
            })
            .collect();
        let grid = ReducedGrid {
            nodes,
            weights,
            faces,
            truncation,
            period: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Uniform periodic grid on `[0, period)` with nodes at `i h`.
    pub fn periodic(period: f64, n: usize) -> Result<Self> {
        if n < 4 || !(period > 0.0) {
            return Err(Error::Config("periodic grid needs >= 4 nodes and a positive period".into()));
        }
        let h = period / n as f64;
        let grid = ReducedGrid {
            nodes: (0..n).map(|i| i as f64 * h).collect(),
            weights: vec![h; n],
            faces: (0..=n).map(|i| (i as f64 - 0.5) * h).collect(),
            truncation: None,
            period: Some(period),
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Pure quadrature grid (no finite-volume cells).
    pub fn quadrature(nodes: Vec<f64>, weights: Vec<f64>, truncation: Option<f64>) -> Result<Self> {
        let grid = ReducedGrid {
            nodes,
            weights,
            faces: Vec::new(),
            truncation,
            period: None,
        };
        grid.validate()?;
        Ok(grid)
    }

    /// Polar-angle grid `theta_i = i pi / cells`, both poles included.
    pub fn sphere(dim: usize, cells: usize) -> Result<Self> {
        if cells < 8 {
            return Err(Error::Config("sphere grid needs at least 8 cells".into()));
        }
        let h = PI / cells as f64;
        let nodes: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let faces = pole_faces(&nodes, PI);
        Self::finite_volume(nodes, faces, |q| q.sin().powi(dim as i32 - 1), None)
    }

    /// Radial grid `r_i = i h` on `[0, r_max]`.
    pub fn euclidean_radial(dim: usize, r_max: f64, cells: usize) -> Result<Self> {
        if cells < 8 || !(r_max > 0.0) {
            return Err(Error::Config("radial grid needs >= 8 cells and r_max > 0".into()));
        }
        let h = r_max / cells as f64;
        let nodes: Vec<f64> = (0..=cells).map(|i| i as f64 * h).collect();
        let faces = pole_faces(&nodes, r_max);
        Self::finite_volume(nodes, faces, |q| q.powi(dim as i32 - 1), Some(r_max))
    }

    /// Graded log-radius grid on `[-s_max, s_max]` with `ds = spacing + growth |s|`.
    pub fn log_radial(s_max: f64, spacing: f64, growth: f64) -> Result<Self> {
        if !(s_max > 0.0 && spacing > 0.0 && growth >= 0.0) {
            return Err(Error::Config("log-radial grid parameters must be positive".into()));
        }
        let mut right = vec![0.0];
        while *right.last().unwrap() < s_max {
            let s: f64 = *right.last().unwrap();
            right.push(s + spacing + growth * s.abs());
        }
        *right.last_mut().unwrap() = s_max;
        let mut nodes: Vec<f64> = right.iter().skip(1).rev().map(|s| -s).collect();
        nodes.extend(right);
        let mut faces = Vec::with_capacity(nodes.len() + 1);
        faces.push(nodes[0]);
        faces.extend(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        faces.push(*nodes.last().unwrap());
        Self::finite_volume(nodes, faces, |_| 1.0, Some(s_max))
    }

    /// Default grid for a flow variant.
    pub fn for_flow(flow: &ModelFlow, spec: &GridSpec) -> Result<Self> {
        match flow {
            ModelFlow::EuclideanStatic { dim } => {
                Self::euclidean_radial(*dim, spec.truncation.unwrap_or(20.0), spec.nodes)
            }
            ModelFlow::FlatTorus { torus } if torus.dim() == 1 => {
                Self::periodic(torus.lattice[0][0].abs(), spec.nodes)
            }
            ModelFlow::ShrinkingSphere { dim, .. } => Self::sphere(*dim, spec.nodes),
            ModelFlow::CigarSoliton => {
                Self::log_radial(spec.truncation.unwrap_or(2500.0), spec.spacing, spec.growth)
            }
            other => Err(Error::Unsupported(format!(
                "no one-dimensional reduced grid for {}",
                other.short_name()
            ))),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes.len() < 2 || self.nodes.len() != self.weights.len() {
            return Err(Error::Config("grid needs >= 2 nodes and one weight per node".into()));
        }
        if self.nodes.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Config("grid nodes must be strictly increasing".into()));
        }
        if self.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Config("grid weights must be finite and nonnegative".into()));
        }
        Ok(())
    }

    /// Smallest node spacing.
    pub fn min_spacing(&self) -> f64 {
        self.nodes
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min)
    }

    /// Node spacing near coordinate `q`.
    pub fn spacing_near(&self, q: f64) -> f64 {
        let i = self.nodes.partition_point(|&x| x < q).clamp(1, self.nodes.len() - 1);
        self.nodes[i] - self.nodes[i - 1]
    }

    /// Halve the spacing of a finite-volume grid (same domain and density).
    pub fn refined(&self, density: impl Fn(f64) -> f64) -> Result<Self> {
        if let Some(period) = self.period {
            return Self::periodic(period, 2 * self.len());
        }
        let mut nodes = Vec::with_capacity(2 * self.len());
        for w in self.nodes.windows(2) {
            nodes.push(w[0]);
            nodes.push(0.5 * (w[0] + w[1]));
        }
        nodes.push(*self.nodes.last().unwrap());
        let first = self.faces.first().copied().unwrap_or(nodes[0]);
        let last = self.faces.last().copied().unwrap_or(*nodes.last().unwrap());
        let mut faces = Vec::with_capacity(nodes.len() + 1);
        faces.push(first);
        faces.extend(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
        faces.push(last);
        Self::finite_volume(nodes, faces, density, self.truncation)
    }
}

fn pole_faces(nodes: &[f64], end: f64) -> Vec<f64> {
    let mut faces = Vec::with_capacity(nodes.len() + 1);
    faces.push(nodes[0]);
    faces.extend(nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])));
    faces.push(end);
    faces
}
