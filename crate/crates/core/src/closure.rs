//! Closed kinematic loops.
//!
//! A loop is cut open at one connection, which leaves two serial branches
//! from the base frame. The loop closes when both branches agree on a
//! common frame: either the center of a shared module (reached through two
//! different E0 labelings), or the two edge frames of the cut connection.
//!
//! [`solve_loop`] drives the residual to zero by damped least squares over
//! the folding angles of the free modules.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use libm::{atan2, sqrt};
use thiserror::Error;

use crate::geometry::Pose2;
use crate::kinematics::{
    center_transform, center_transform_derivative, edge_transform, edge_transform_derivative,
    outward_edge_frame, relabel_frame, remap_sigma, EdgeIndex, ModuleId, ModuleState,
};
use crate::linalg::{self, Mat3};

pub const CLOSURE_TOL: f64 = 1e-8;
const MAX_ITERATIONS: usize = 100;
const STEP_TOL: f64 = 1e-10;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LoopError {
    #[error("loop branches are empty")]
    EmptyBranches,
    #[error("state index {0} out of range")]
    BadIndex(usize),
    #[error("module {0} is not part of the loop")]
    UnknownModule(ModuleId),
    #[error("no free module has a feasible theta range")]
    EmptyRange,
    #[error("loop cannot close: residual {residual_norm:.3e} after {iterations} iterations")]
    Infeasible {
        residual_norm: f64,
        iterations: usize,
        best: Vec<(ModuleId, f64)>,
    },
}

/// How two branches meet.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Closure {
    /// Both branches end on the frame of module `closing`, entering through
    /// `entry1` and `entry2` (labels in the reference labeling carried by
    /// `states[closing]`). Compared at the module center.
    Center {
        closing: usize,
        entry1: EdgeIndex,
        entry2: EdgeIndex,
    },
    /// Branch 1 ends on the frame of the module owning `edge1`, branch 2 on
    /// the module owning `edge2`; the two outward edge frames must coincide
    /// with opposite orientation.
    Dock {
        edge1: (usize, EdgeIndex),
        edge2: (usize, EdgeIndex),
    },
}

/// Two branches over a shared pool of module states. Each branch step
/// `(i, k)` composes `edge_transform(states[i], k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KinematicLoop {
    pub states: Vec<ModuleState>,
    pub branch1: Vec<(usize, EdgeIndex)>,
    pub branch2: Vec<(usize, EdgeIndex)>,
    pub closure: Closure,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Coupling {
    /// Every free module has its own folding angle.
    Independent,
    /// All free modules share a single folding angle theta.
    EqualTheta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoopSolution {
    /// Solved folding angle theta per free module.
    pub thetas: Vec<(ModuleId, f64)>,
    /// All loop states with the solution applied.
    pub states: Vec<ModuleState>,
    pub residual_norm: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy)]
enum FactorKind {
    Edge(EdgeIndex),
    Outward(EdgeIndex),
    Relabel(EdgeIndex),
    Center,
    Fixed(Pose2),
}

#[derive(Debug, Clone, Copy)]
struct Factor {
    state: usize,
    /// Evaluate on `remap_sigma(states[state], e)` instead of the state.
    remap: Option<EdgeIndex>,
    kind: FactorKind,
}

impl Factor {
    fn local(&self, states: &[ModuleState]) -> ModuleState {
        match self.remap {
            Some(e) => remap_sigma(&states[self.state], e),
            None => states[self.state],
        }
    }

    fn eval(&self, states: &[ModuleState]) -> Mat3 {
        let s = self.local(states);
        let pose = match self.kind {
            FactorKind::Edge(k) => outward_edge_frame(&s, k),
            FactorKind::Outward(k) => outward_edge_frame(&s, k),
            FactorKind::Relabel(k) => relabel_frame(&s, k),
            FactorKind::Center => center_transform(&s),
            FactorKind::Fixed(p) => p,
        };
        pose.to_matrix()
    }

    /// d(eval)/d(sigma of `states[self.state]`).
    fn derivative(&self, states: &[ModuleState]) -> Mat3 {
        let s = self.local(states);
        let chain = match self.remap {
            Some(e) if e.is_adjacent_to_e0() => -1.0,
            _ => 1.0,
        };
        let (value, (dyaw, dx, dy)) = match self.kind {
            FactorKind::Edge(k) => (edge_transform(&s, k), edge_transform_derivative(&s, k)),
            FactorKind::Outward(k) if k == EdgeIndex::E0 => return linalg::ZERO,
            FactorKind::Outward(k) => (edge_transform(&s, k), edge_transform_derivative(&s, k)),
            FactorKind::Relabel(k) if k == EdgeIndex::E0 => return linalg::ZERO,
            // relabel = edge * Rot(pi), and the constant factor passes through
            FactorKind::Relabel(k) => {
                let d = edge_transform_derivative(&s, k);
                let m = linalg::mul(
                    &pose_derivative(&edge_transform(&s, k), d),
                    &Pose2::rotation(PI).to_matrix(),
                );
                return scale(&m, chain);
            }
            FactorKind::Center => (center_transform(&s), center_transform_derivative(&s)),
            FactorKind::Fixed(_) => return linalg::ZERO,
        };
        scale(&pose_derivative(&value, (dyaw, dx, dy)), chain)
    }
}

fn scale(m: &Mat3, f: f64) -> Mat3 {
    let mut out = *m;
    for row in out.iter_mut() {
        for c in row.iter_mut() {
            *c *= f;
        }
    }
    out
}

fn pose_derivative(p: &Pose2, (dyaw, dx, dy): (f64, f64, f64)) -> Mat3 {
    let m = p.to_matrix();
    let (c, s) = (m[0][0], m[1][0]);
    [
        [-s * dyaw, -c * dyaw, dx],
        [c * dyaw, -s * dyaw, dy],
        [0.0, 0.0, 0.0],
    ]
}

impl KinematicLoop {
    fn validate(&self) -> Result<(), LoopError> {
        let n = self.states.len();
        let check = |i: usize| if i < n { Ok(()) } else { Err(LoopError::BadIndex(i)) };
        for &(i, _) in self.branch1.iter().chain(&self.branch2) {
            check(i)?;
        }
        match self.closure {
            Closure::Center { closing, .. } => {
                check(closing)?;
                if self.branch1.is_empty() || self.branch2.is_empty() {
                    return Err(LoopError::EmptyBranches);
                }
            }
            Closure::Dock { edge1, edge2 } => {
                check(edge1.0)?;
                check(edge2.0)?;
            }
        }
        Ok(())
    }

    fn sides(&self) -> (Vec<Factor>, Vec<Factor>) {
        let steps = |b: &[(usize, EdgeIndex)]| -> Vec<Factor> {
            b.iter()
                .map(|&(i, k)| Factor {
                    state: i,
                    remap: None,
                    kind: FactorKind::Edge(k),
                })
                .collect()
        };
        let mut s1 = steps(&self.branch1);
        let mut s2 = steps(&self.branch2);
        match self.closure {
            Closure::Center {
                closing,
                entry1,
                entry2,
            } => {
                for (side, entry) in [(&mut s1, entry1), (&mut s2, entry2)] {
                    // reference E0 as seen from the entry labeling
                    let back = EdgeIndex::E0.back(entry.value());
                    side.push(Factor {
                        state: closing,
                        remap: Some(entry),
                        kind: FactorKind::Relabel(back),
                    });
                    side.push(Factor {
                        state: closing,
                        remap: None,
                        kind: FactorKind::Center,
                    });
                }
            }
            Closure::Dock { edge1, edge2 } => {
                s1.push(Factor {
                    state: edge1.0,
                    remap: None,
                    kind: FactorKind::Outward(edge1.1),
                });
                s2.push(Factor {
                    state: edge2.0,
                    remap: None,
                    kind: FactorKind::Outward(edge2.1),
                });
                s2.push(Factor {
                    state: edge2.0,
                    remap: None,
                    kind: FactorKind::Fixed(Pose2::rotation(PI)),
                });
            }
        }
        (s1, s2)
    }

    /// Length normalization: the side length 2a of the first module.
    fn length_scale(&self) -> f64 {
        self.states.first().map(|s| 2.0 * s.params.a).unwrap_or(1.0)
    }

    fn residual_matrix(&self, states: &[ModuleState]) -> (Mat3, Mat3, Mat3) {
        let (f1, f2) = self.sides();
        let prod = |fs: &[Factor]| {
            fs.iter()
                .fold(linalg::IDENTITY, |acc, f| linalg::mul(&acc, &f.eval(states)))
        };
        let s1 = prod(&f1);
        let s2 = prod(&f2);
        let r = linalg::mul(&linalg::rigid_inverse(&s2), &s1);
        (r, s1, s2)
    }

    /// Scaled residual vector `(yaw, x / 2a, y / 2a)`.
    pub fn residual_vector(&self) -> Result<[f64; 3], LoopError> {
        self.validate()?;
        Ok(self.residual_vector_with(&self.states))
    }

    fn residual_vector_with(&self, states: &[ModuleState]) -> [f64; 3] {
        let (r, _, _) = self.residual_matrix(states);
        let l = self.length_scale();
        [atan2(r[1][0], r[0][0]), r[0][2] / l, r[1][2] / l]
    }

    /// Analytic Jacobian of [`residual_vector`](Self::residual_vector) with
    /// respect to the sigma of each listed state.
    pub fn jacobian(&self, wrt: &[usize]) -> Result<Vec<[f64; 3]>, LoopError> {
        self.validate()?;
        for &i in wrt {
            if i >= self.states.len() {
                return Err(LoopError::BadIndex(i));
            }
        }
        Ok(self.jacobian_with(&self.states, wrt))
    }

    fn jacobian_with(&self, states: &[ModuleState], wrt: &[usize]) -> Vec<[f64; 3]> {
        let (f1, f2) = self.sides();
        let (r, _, s2) = self.residual_matrix(states);
        let s2_inv = linalg::rigid_inverse(&s2);
        let l = self.length_scale();
        let evals1: Vec<Mat3> = f1.iter().map(|f| f.eval(states)).collect();
        let evals2: Vec<Mat3> = f2.iter().map(|f| f.eval(states)).collect();

        let side_derivative = |fs: &[Factor], evals: &[Mat3], j: usize| -> Mat3 {
            let mut total = linalg::ZERO;
            for (pos, f) in fs.iter().enumerate() {
                if f.state != j {
                    continue;
                }
                let d = f.derivative(states);
                if d == linalg::ZERO {
                    continue;
                }
                let prefix = evals[..pos]
                    .iter()
                    .fold(linalg::IDENTITY, |acc, m| linalg::mul(&acc, m));
                let suffix = evals[pos + 1..]
                    .iter()
                    .fold(linalg::IDENTITY, |acc, m| linalg::mul(&acc, m));
                total = linalg::add(&total, &linalg::mul(&linalg::mul(&prefix, &d), &suffix));
            }
            total
        };

        wrt.iter()
            .map(|&j| {
                let d1 = side_derivative(&f1, &evals1, j);
                let d2 = side_derivative(&f2, &evals2, j);
                // dR = S2^-1 (dS1 - dS2 R)
                let dr = linalg::mul(&s2_inv, &linalg::sub(&d1, &linalg::mul(&d2, &r)));
                let (c, s) = (r[0][0], r[1][0]);
                let dyaw = (c * dr[1][0] - s * dr[0][0]) / (c * c + s * s);
                [dyaw, dr[0][2] / l, dr[1][2] / l]
            })
            .collect()
    }
}

/// `compose(invert(branch2), branch1)` as a pose; identity iff the loop
/// closes.
pub fn loop_residual(lp: &KinematicLoop) -> Result<Pose2, LoopError> {
    lp.validate()?;
    let (r, _, _) = lp.residual_matrix(&lp.states);
    Ok(Pose2::from_matrix(&r))
}

fn norm3(v: &[f64; 3]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Solves for the folding angles of `free` modules so that the loop closes,
/// holding the other modules fixed. Angles stay inside each module's theta
/// limits.
pub fn solve_loop(
    lp: &KinematicLoop,
    free: &[ModuleId],
    coupling: Coupling,
) -> Result<LoopSolution, LoopError> {
    lp.validate()?;
    let mut free_idx = Vec::with_capacity(free.len());
    for id in free {
        let i = lp
            .states
            .iter()
            .position(|s| s.id == *id)
            .ok_or(LoopError::UnknownModule(*id))?;
        if !free_idx.contains(&i) {
            free_idx.push(i);
        }
    }

    // variable v -> list of state indices it drives
    let groups: Vec<Vec<usize>> = match coupling {
        Coupling::Independent => free_idx.iter().map(|&i| vec![i]).collect(),
        Coupling::EqualTheta if free_idx.is_empty() => Vec::new(),
        Coupling::EqualTheta => vec![free_idx.clone()],
    };
    let bounds: Vec<(f64, f64)> = groups
        .iter()
        .map(|g| {
            g.iter().fold((f64::NEG_INFINITY, f64::INFINITY), |(lo, hi), &i| {
                let p = &lp.states[i].params;
                (lo.max(p.theta_min), hi.min(p.theta_max))
            })
        })
        .collect();
    if bounds.iter().any(|(lo, hi)| lo > hi) {
        return Err(LoopError::EmptyRange);
    }

    let mut states = lp.states.clone();
    let mut x: Vec<f64> = groups
        .iter()
        .zip(&bounds)
        .map(|(g, &(lo, hi))| {
            let mean = g.iter().map(|&i| states[i].theta()).sum::<f64>() / g.len() as f64;
            mean.clamp(lo, hi)
        })
        .collect();

    let apply = |states: &mut Vec<ModuleState>, x: &[f64]| {
        for (g, &theta) in groups.iter().zip(x) {
            for &i in g {
                states[i].set_theta(theta);
            }
        }
    };
    apply(&mut states, &x);

    let n = x.len();
    let mut r = lp.residual_vector_with(&states);
    let mut cost = r.iter().map(|v| v * v).sum::<f64>();
    let mut lambda = 1e-3;
    let mut iterations = 0;

    while iterations < MAX_ITERATIONS && n > 0 && sqrt(cost) > 1e-15 {
        iterations += 1;
        let jac_sigma = lp.jacobian_with(&states, &free_idx);
        // d r / d x: sum over the states a variable drives, with d sigma / d theta
        let mut jac = vec![[0.0f64; 3]; n];
        for (v, g) in groups.iter().enumerate() {
            for &i in g {
                let col = free_idx.iter().position(|&f| f == i).unwrap();
                let sign = states[i].parity().sign();
                for row in 0..3 {
                    jac[v][row] += sign * jac_sigma[col][row];
                }
            }
        }
        let mut normal = vec![0.0; n * n];
        let mut rhs = vec![0.0; n];
        for a in 0..n {
            for b in 0..n {
                normal[a * n + b] = (0..3).map(|row| jac[a][row] * jac[b][row]).sum();
            }
            normal[a * n + a] += lambda;
            rhs[a] = -(0..3).map(|row| jac[a][row] * r[row]).sum::<f64>();
        }
        let Some(delta) = linalg::solve(normal, rhs, n) else {
            lambda *= 10.0;
            continue;
        };
        let x_new: Vec<f64> = x
            .iter()
            .zip(&delta)
            .zip(&bounds)
            .map(|((xi, di), &(lo, hi))| (xi + di).clamp(lo, hi))
            .collect();
        let step = sqrt(x_new.iter().zip(&x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
        let mut trial = states.clone();
        apply(&mut trial, &x_new);
        let r_new = lp.residual_vector_with(&trial);
        let cost_new = r_new.iter().map(|v| v * v).sum::<f64>();
        if cost_new < cost {
            x = x_new;
            states = trial;
            r = r_new;
            cost = cost_new;
            lambda = (lambda * 0.1).max(1e-12);
            if step < STEP_TOL {
                break;
            }
        } else {
            lambda *= 10.0;
            if lambda > 1e12 || step < STEP_TOL {
                break;
            }
        }
    }

    let residual_norm = norm3(&r);
    let thetas: Vec<(ModuleId, f64)> = free_idx
        .iter()
        .map(|&i| (states[i].id, states[i].theta()))
        .collect();
    if residual_norm < CLOSURE_TOL {
        Ok(LoopSolution {
            thetas,
            states,
            residual_norm,
            iterations,
        })
    } else {
        Err(LoopError::Infeasible {
            residual_norm,
            iterations,
            best: thetas,
        })
    }
}
