//! Two-stage L-stable SDIRK with step-doubling error control.

use super::operator::ReducedOperator;
use crate::error::{Error, Result};
use serde::Serialize;

const GAMMA: f64 = 1.0 - std::f64::consts::FRAC_1_SQRT_2;

/// Which quantity the integrator carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Form {
    /// `v = M H` with `dv/de = -K M^{-1} v` (conjugate equation, mass exact).
    Conservative,
    /// `u` with `M du/de = -K u` (forward heat equation).
    Nodal,
}

/// Maps evolution time `e >= 0` to flow time.
#[derive(Clone, Copy, Debug)]
pub(crate) struct Clock {
    pub origin: f64,
    pub sign: f64,
}

impl Clock {
    pub fn at(&self, e: f64) -> f64 {
        self.origin + self.sign * e
    }
}

/// One angular mode: its operator, carried state and nodal values.
#[derive(Clone, Debug)]
pub(crate) struct Block {
    pub op: ReducedOperator,
    pub y: Vec<f64>,
    pub x: Vec<f64>,
}

/// Step-size controller state, reported with the run.
#[derive(Clone, Debug, Serialize)]
pub struct StepState {
    pub step: f64,
    pub last_error: f64,
    pub steps: usize,
    pub rejections: usize,
    pub positivity_rejections: usize,
    pub min_step: f64,
    pub max_step: f64,
    /// Mass lost through an absorbing boundary.
    pub leakage: f64,
}

pub(crate) struct Integrator {
    pub rtol: f64,
    pub atol: f64,
    pub max_steps: usize,
    pub form: Form,
    pub clock: Clock,
    pub positive: bool,
    /// Modes whose amplitude falls below this fraction of mode 0 are dropped.
    pub drop_tol: f64,
    pub state: StepState,
}

fn stage(op: &ReducedOperator, form: Form, time: f64, hg: f64, z: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (m, a) = op.shifted(time, hg);
    match form {
        Form::Conservative => {
            let x = a.solve(z)?;
            let y = m.iter().zip(&x).map(|(a, b)| a * b).collect();
            Ok((y, x))
        }
        Form::Nodal => {
            let rhs: Vec<f64> = m.iter().zip(z).map(|(a, b)| a * b).collect();
            let y = a.solve(&rhs)?;
            Ok((y.clone(), y))
        }
    }
}

fn sdirk(op: &ReducedOperator, form: Form, clock: Clock, e: f64, h: f64, y: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let (y1, _) = stage(op, form, clock.at(e + GAMMA * h), GAMMA * h, y)?;
    let r = (1.0 - GAMMA) / GAMMA;
    let z2: Vec<f64> = y.iter().zip(&y1).map(|(a, b)| a + r * (b - a)).collect();
    stage(op, form, clock.at(e + h), GAMMA * h, &z2)
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

impl Integrator {
    pub fn new(form: Form, clock: Clock, rtol: f64, atol: f64, h0: f64, max_steps: usize) -> Self {
        Integrator {
            rtol,
            atol,
            max_steps,
            form,
            clock,
            positive: true,
            drop_tol: 0.0,
            state: StepState {
                step: h0,
                last_error: 0.0,
                steps: 0,
                rejections: 0,
                positivity_rejections: 0,
                min_step: f64::INFINITY,
                max_step: 0.0,
                leakage: 0.0,
            },
        }
    }

    /// Advances all blocks from `*e` to `e_end` in lockstep.
    pub fn advance(&mut self, blocks: &mut Vec<Block>, e: &mut f64, e_end: f64) -> Result<()> {
        while *e < e_end * (1.0 - 1e-14) {
            if self.state.steps >= self.max_steps {
                return Err(Error::Convergence(format!(
                    "step limit {} reached at evolution time {e:.6e}",
                    self.max_steps
                )));
            }
            let proposed = self.state.step;
            let last = proposed >= e_end - *e;
            let h = if last { e_end - *e } else { proposed };
            if h < 1e-14 * e.max(1e-300) {
                return Err(Error::Convergence(format!("step size underflow at evolution time {e:.6e}")));
            }
            let scale = max_abs(&blocks[0].y).max(1e-300);
            let mut worst: f64 = 0.0;
            let mut next = Vec::with_capacity(blocks.len());
            let mut failed_positivity = None;
            for (b, block) in blocks.iter().enumerate() {
                let (full, _) = sdirk(&block.op, self.form, self.clock, *e, h, &block.y)?;
                let (mid, _) = sdirk(&block.op, self.form, self.clock, *e, 0.5 * h, &block.y)?;
                let (y2, x2) = sdirk(&block.op, self.form, self.clock, *e + 0.5 * h, 0.5 * h, &mid)?;
                for i in 0..y2.len() {
                    let err = (y2[i] - full[i]).abs() / 3.0;
                    let den = self.atol * scale + self.rtol * y2[i].abs();
                    let r = err / den;
                    worst = if r.is_nan() { f64::INFINITY } else { worst.max(r) };
                }
                if b == 0 && self.positive {
                    let min = x2.iter().copied().fold(f64::INFINITY, f64::min);
                    if !(min >= 0.0) {
                        failed_positivity = Some(min);
                    }
                }
                next.push((y2, x2));
            }
            if let Some(min) = failed_positivity {
                self.state.positivity_rejections += 1;
                self.state.step = 0.25 * h;
                if self.state.positivity_rejections > 200 || self.state.step < 1e-12 * e.max(1e-12) {
                    return Err(Error::Positivity {
                        time: self.clock.at(*e + h),
                        min,
                    });
                }
                continue;
            }
            let factor = if worst == 0.0 { 4.0 } else { (0.9 * worst.powf(-1.0 / 3.0)).clamp(0.2, 4.0) };
            if worst > 1.0 {
                self.state.rejections += 1;
                self.state.step = h * factor;
                continue;
            }
            let t0 = self.clock.at(*e);
            let t1 = self.clock.at(*e + h);
            let out0 = blocks[0].op.outflow(t0, &blocks[0].x);
            for (block, (y, x)) in blocks.iter_mut().zip(next) {
                block.y = y;
                block.x = x;
            }
            let out1 = blocks[0].op.outflow(t1, &blocks[0].x);
            self.state.leakage += 0.5 * h * (out0 + out1);
            *e += h;
            self.state.steps += 1;
            self.state.last_error = worst;
            self.state.min_step = self.state.min_step.min(h);
            self.state.max_step = self.state.max_step.max(h);
            self.state.step = if last { proposed.max(h * factor) } else { h * factor };
            if self.drop_tol > 0.0 && blocks.len() > 1 {
                let reference = max_abs(&blocks[0].x);
                let tol = self.drop_tol;
                let mut k = 1;
                while k < blocks.len() {
                    if max_abs(&blocks[k].x) < tol * reference {
                        blocks.truncate(k);
                        break;
                    }
                    k += 1;
                }
            }
        }
        *e = e_end;
        Ok(())
    }
}
