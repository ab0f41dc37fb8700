//! Outer solver: damped Jacobi alternation between the two relations.
//! Each sweep solves both inner subproblems at the current pair and blends
//! the answers; convergence is declared only on a certified joint gap.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::gap::{self, GapOptions, GapValue};
use crate::inner::{solve_inner_1, solve_inner_2, InnerParams};
use crate::problem::CoupledProblem;

#[derive(Debug, Clone)]
pub struct OuterParams {
    /// Blend factor for the Jacobi update; 1 is undamped.
    pub alpha: f64,
    pub max_outer: usize,
    /// Certified max of the two primal gaps required to stop.
    pub joint_tol: f64,
    pub seed: u64,
    pub inner: InnerParams,
    /// One restart with alpha halved after an exhausted first attempt.
    pub retry_halved: bool,
    /// Optional a-priori radius; iterates outside it are counted.
    pub invariance: Option<f64>,
}

impl Default for OuterParams {
    fn default() -> Self {
        OuterParams {
            alpha: 0.5,
            max_outer: 500,
            joint_tol: 1e-7,
            seed: 0,
            inner: InnerParams::default(),
            retry_halved: true,
            invariance: None,
        }
    }
}

#[derive(Debug, Clone)]
pub struct IterRecord {
    pub iter: usize,
    pub gap1: f64,
    pub gap2: f64,
    pub step_u: f64,
    pub step_w: f64,
    pub inner_iters: usize,
}

#[derive(Debug, Clone, Default)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    pub inner_iters_total: usize,
    pub invariance_violations: usize,
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub gap1: GapValue,
    pub gap2: GapValue,
    pub outer_iters: usize,
    pub trace: SolveTrace,
}

/// Snapshot between sweeps; feeding it back continues the exact sequence.
#[derive(Debug, Clone)]
pub struct SolverState {
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub iter: usize,
    pub trace: SolveTrace,
}

pub enum DriveResult {
    Converged(Solution),
    Exhausted {
        state: SolverState,
        best_gap: f64,
        best_u: DVector<f64>,
        best_w: DVector<f64>,
    },
}

fn gap_opts(params: &OuterParams) -> GapOptions {
    GapOptions {
        cert_tol: params.joint_tol,
        seed: params.seed,
        ..params.inner.gap.clone()
    }
}

/// Run sweeps until certification, exhaustion of the iteration budget, or
/// an inner-solver breakdown (mapped to exhaustion at the current pair).
pub fn drive(
    p: &CoupledProblem,
    params: &OuterParams,
    resume: Option<SolverState>,
) -> Result<DriveResult> {
    p.validate()?;
    if !(params.alpha > 0.0 && params.alpha <= 1.0) {
        return Err(Error::Input(format!(
            "damping factor must lie in (0, 1], got {}",
            params.alpha
        )));
    }
    let gopts = gap_opts(params);
    let (mut u, mut w, start_iter, mut trace) = match resume {
        Some(s) => (s.u, s.w, s.iter, s.trace),
        None => (p.anchor_u()?, p.anchor_w()?, 0, SolveTrace::default()),
    };
    let mut best: Option<(f64, DVector<f64>, DVector<f64>)> = None;

    let mut k = start_iter;
    loop {
        let (g1, g2) = gap::primal_pair(p, &u, &w, &gopts)?;
        let joint = g1.value.max(g2.value);
        let joint_score = if joint.is_finite() {
            joint
        } else {
            g1.lower_bound.max(g2.lower_bound).max(1e30)
        };
        if best.as_ref().map(|(b, _, _)| joint_score < *b).unwrap_or(true) {
            best = Some((joint_score, u.clone(), w.clone()));
        }
        if let Some(m0) = params.invariance {
            if u.norm() > m0 || w.norm() > m0 {
                trace.invariance_violations += 1;
            }
        }
        if g1.meets(params.joint_tol) && g2.meets(params.joint_tol) {
            return Ok(DriveResult::Converged(Solution {
                u,
                w,
                gap1: g1,
                gap2: g2,
                outer_iters: k,
                trace,
            }));
        }
        if k >= params.max_outer {
            let (best_gap, best_u, best_w) = best.expect("tracked at least once");
            return Ok(DriveResult::Exhausted {
                state: SolverState {
                    u,
                    w,
                    iter: k,
                    trace,
                },
                best_gap,
                best_u,
                best_w,
            });
        }

        let inner1 = solve_inner_1(p, &w, Some(&u), &params.inner);
        let inner2 = solve_inner_2(p, &u, Some(&w), &params.inner);
        let (hat_u, hat_w, inner_iters) = match (inner1, inner2) {
            (Ok(a), Ok(b)) => {
                let n = a.iters + b.iters;
                (a.point, b.point, n)
            }
            (Err(Error::NonConvergence { .. }), _) | (_, Err(Error::NonConvergence { .. })) => {
                let (best_gap, best_u, best_w) = best.expect("tracked at least once");
                return Ok(DriveResult::Exhausted {
                    state: SolverState {
                        u,
                        w,
                        iter: k,
                        trace,
                    },
                    best_gap,
                    best_u,
                    best_w,
                });
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
        };
        let new_u = &u * (1.0 - params.alpha) + &hat_u * params.alpha;
        let new_w = &w * (1.0 - params.alpha) + &hat_w * params.alpha;
        let step_u = (&new_u - &u).norm();
        let step_w = (&new_w - &w).norm();
        u = new_u;
        w = new_w;
        k += 1;
        trace.inner_iters_total += inner_iters;
        trace.records.push(IterRecord {
            iter: k,
            gap1: g1.value,
            gap2: g2.value,
            step_u,
            step_w,
            inner_iters,
        });
    }
}

/// Solve from the anchors; on an exhausted budget retry once with the
/// damping halved before reporting nonconvergence with the best pair.
pub fn solve(p: &CoupledProblem, params: &OuterParams) -> Result<Solution> {
    match drive(p, params, None)? {
        DriveResult::Converged(sol) => Ok(sol),
        DriveResult::Exhausted {
            best_gap,
            best_u,
            best_w,
            state,
        } => {
            if params.retry_halved && params.alpha > 0.05 {
                let retry = OuterParams {
                    alpha: 0.5 * params.alpha,
                    retry_halved: false,
                    ..params.clone()
                };
                match drive(p, &retry, None)? {
                    DriveResult::Converged(sol) => return Ok(sol),
                    DriveResult::Exhausted {
                        best_gap: g2,
                        best_u: u2,
                        best_w: w2,
                        ..
                    } => {
                        let (g, bu, bw) = if g2 < best_gap {
                            (g2, u2, w2)
                        } else {
                            (best_gap, best_u, best_w)
                        };
                        return Err(Error::NonConvergence {
                            outer_iters: state.iter + retry.max_outer,
                            best_gap: g,
                            best_u: bu.as_slice().to_vec(),
                            best_w: bw.as_slice().to_vec(),
                        });
                    }
                }
            }
            Err(Error::NonConvergence {
                outer_iters: state.iter,
                best_gap,
                best_u: best_u.as_slice().to_vec(),
                best_w: best_w.as_slice().to_vec(),
            })
        }
    }
}

/// Continue a previous run from its snapshot.
pub fn continue_from(
    p: &CoupledProblem,
    params: &OuterParams,
    state: SolverState,
) -> Result<DriveResult> {
    drive(p, params, Some(state))
}
