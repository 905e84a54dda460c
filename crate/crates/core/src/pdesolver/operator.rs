//! Lumped finite-volume operators on a symmetry-reduced grid.
//!
//! For each angular mode `m` the weak Laplacian is assembled as a lumped mass
//! `M(t)` and a symmetric stiffness `K(t) = S(t) + m^2 D(t)`, both in the
//! Riemannian measure of the slice `t`.

use crate::error::{Error, Result};
use crate::geometry::{cigar_conformal, unit_sphere_area, ModelFlow, ReducedGrid};
use crate::tridiag::{solve_cyclic, solve_tridiagonal};
use std::f64::consts::PI;

/// Tridiagonal matrix, cyclic when `cyclic` is set.
#[derive(Clone, Debug)]
pub(crate) struct Tridiagonal {
    pub lower: Vec<f64>,
    pub diag: Vec<f64>,
    pub upper: Vec<f64>,
    pub cyclic: bool,
}

impl Tridiagonal {
    pub fn solve(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        if self.cyclic {
            solve_cyclic(&self.lower, &self.diag, &self.upper, rhs)
        } else {
            solve_tridiagonal(&self.lower, &self.diag, &self.upper, rhs)
        }
    }
}

#[derive(Clone, Debug)]
pub(crate) struct ReducedOperator {
    pub flow: ModelFlow,
    pub grid: ReducedGrid,
    pub mode: usize,
    pub absorbing: bool,
    periodic: bool,
    /// Position and coordinate spacing of the face between node `j` and `j + 1`
    /// (for periodic grids the last entry wraps around).
    face_q: Vec<f64>,
    face_dq: Vec<f64>,
}

impl ReducedOperator {
    pub fn new(flow: &ModelFlow, grid: &ReducedGrid, mode: usize) -> Result<Self> {
        grid.validate()?;
        match flow {
            ModelFlow::EuclideanStatic { .. }
            | ModelFlow::ShrinkingSphere { .. }
            | ModelFlow::CigarSoliton => {}
            ModelFlow::FlatTorus { torus } if torus.dim() == 1 => {}
            other => {
                return Err(Error::Unsupported(format!(
                    "the solver handles one-dimensional reductions only, not {}",
                    other.short_name()
                )))
            }
        }
        if mode > 0 && !matches!(flow, ModelFlow::CigarSoliton) {
            return Err(Error::Unsupported("angular modes exist only on the cigar".into()));
        }
        let periodic = grid.period.is_some();
        if matches!(flow, ModelFlow::FlatTorus { .. }) != periodic {
            return Err(Error::Config("the circle needs a periodic grid and only the circle".into()));
        }
        if grid.faces.len() != grid.len() + 1 && !periodic {
            return Err(Error::Config("the solver needs a finite-volume grid".into()));
        }
        let n = grid.len();
        let mut face_q: Vec<f64> = grid.nodes.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect();
        let mut face_dq: Vec<f64> = grid.nodes.windows(2).map(|w| w[1] - w[0]).collect();
        if let Some(period) = grid.period {
            face_q.push(grid.nodes[n - 1] + 0.5 * (period - grid.nodes[n - 1] + grid.nodes[0]));
            face_dq.push(period - grid.nodes[n - 1] + grid.nodes[0]);
        }
        let absorbing = matches!(flow, ModelFlow::EuclideanStatic { .. } | ModelFlow::CigarSoliton);
        Ok(ReducedOperator {
            flow: flow.clone(),
            grid: grid.clone(),
            mode,
            absorbing,
            periodic,
            face_q,
            face_dq,
        })
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    /// `measure * density / a^2` at coordinate `q`: the flux coefficient per unit gradient.
    fn conductance_density(&self, q: f64, t: f64) -> f64 {
        match &self.flow {
            ModelFlow::EuclideanStatic { dim } => unit_sphere_area(dim - 1) * q.abs().powi(*dim as i32 - 1),
            ModelFlow::ShrinkingSphere { dim, .. } => {
                let c = self.flow.sphere_scale(t).unwrap();
                let n = *dim as f64;
                unit_sphere_area(dim - 1) * c.powf(0.5 * n - 1.0) * q.sin().abs().powi(*dim as i32 - 1)
            }
            ModelFlow::CigarSoliton => 2.0 * PI,
            _ => 1.0,
        }
    }

    /// Lumped mass `M_i(t)`.
    pub fn mass(&self, t: f64) -> Vec<f64> {
        match &self.flow {
            ModelFlow::CigarSoliton => self
                .grid
                .nodes
                .iter()
                .zip(&self.grid.weights)
                .map(|(&s, w)| 2.0 * PI * cigar_conformal(s, t) * w)
                .collect(),
            flow => self
                .grid
                .nodes
                .iter()
                .zip(&self.grid.weights)
                .map(|(&q, w)| w * flow.measure_factor(q, t))
                .collect(),
        }
    }

    /// Stiffness `K(t)`, including the absorbing outer boundary.
    pub fn stiffness(&self, t: f64) -> Tridiagonal {
        let n = self.len();
        let mut lower = vec![0.0; n];
        let mut diag = vec![0.0; n];
        let mut upper = vec![0.0; n];
        for (j, (&q, &dq)) in self.face_q.iter().zip(&self.face_dq).enumerate() {
            let k = self.conductance_density(q, t) / dq;
            let (a, b) = (j, (j + 1) % n);
            diag[a] += k;
            diag[b] += k;
            upper[a] -= k;
            lower[b] -= k;
        }
        if self.absorbing {
            let last = n - 1;
            let dq = self.grid.nodes[last] - self.grid.nodes[last - 1];
            diag[last] += self.conductance_density(self.grid.nodes[last], t) / dq;
        }
        if self.mode > 0 {
            let m2 = (self.mode * self.mode) as f64;
            for (d, w) in diag.iter_mut().zip(&self.grid.weights) {
                *d += m2 * 2.0 * PI * w;
            }
        }
        Tridiagonal {
            lower,
            diag,
            upper,
            cyclic: self.periodic,
        }
    }

    /// Rate at which mass leaves through the absorbing boundary for nodal values `x`.
    pub fn outflow(&self, t: f64, x: &[f64]) -> f64 {
        if !self.absorbing {
            return 0.0;
        }
        let last = self.len() - 1;
        let dq = self.grid.nodes[last] - self.grid.nodes[last - 1];
        self.conductance_density(self.grid.nodes[last], t) / dq * x[last]
    }

    /// `M + c K` at time `t`.
    pub fn shifted(&self, t: f64, c: f64) -> (Vec<f64>, Tridiagonal) {
        let m = self.mass(t);
        let mut k = self.stiffness(t);
        for v in k.lower.iter_mut().chain(k.upper.iter_mut()) {
            *v *= c;
        }
        for (d, mi) in k.diag.iter_mut().zip(&m) {
            *d = mi + c * *d;
        }
        (m, k)
    }
}
