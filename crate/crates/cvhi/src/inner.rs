//! Inner solver: with one variable held fixed, drive the other relation to
//! a certified gap by a proximal fixed-point iteration. Each step
//! linearizes the operator and the bifunction at the current point and
//! solves the resulting strongly convex subproblem exactly.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::functions::Term;
use crate::gap::{self, GapOptions, GapValue};
use crate::optim::{solve_piecewise_prox, PiecewiseProx, Region};
use crate::problem::CoupledProblem;

#[derive(Debug, Clone)]
pub struct InnerParams {
    /// Proximal step; halved when the step norms keep growing.
    pub lambda: f64,
    pub max_iter: usize,
    /// Step norm under which the iteration is declared stationary.
    pub step_tol: f64,
    /// Certified gap at which the subproblem counts as solved.
    pub gap_tol: f64,
    pub gap: GapOptions,
}

impl Default for InnerParams {
    fn default() -> Self {
        InnerParams {
            lambda: 1.0,
            max_iter: 2000,
            step_tol: 1e-10,
            gap_tol: 1e-8,
            gap: GapOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct InnerSolution {
    pub point: DVector<f64>,
    pub gap: GapValue,
    pub iters: usize,
}

fn side_terms(p: &CoupledProblem, first: bool) -> (Vec<Term>, Vec<Term>) {
    let (set, conv) = if first {
        (&p.set_c, &p.psi)
    } else {
        (&p.set_d, &p.theta)
    };
    let mut fin = Vec::new();
    let mut ind = vec![Term::Indicator { set: set.clone() }];
    for t in &conv.terms {
        match t {
            Term::Indicator { set } => ind.push(Term::Indicator { set: set.clone() }),
            other => fin.push(other.clone()),
        }
    }
    (fin, ind)
}

fn solve_side(
    p: &CoupledProblem,
    par: &DVector<f64>,
    start: Option<&DVector<f64>>,
    first: bool,
    params: &InnerParams,
) -> Result<InnerSolution> {
    let (op, rhs, gamma, delta, bif) = if first {
        (&p.op_a, &p.rhs_h, &p.gamma1, &p.delta1, &p.j_fun)
    } else {
        (&p.op_b, &p.rhs_l, &p.gamma2, &p.delta2, &p.h_fun)
    };
    let (fin_terms, ind_terms) = side_terms(p, first);
    let psi_fin = crate::functions::ConvexExtendedFunction::new(fin_terms);
    let feasible = Region::new(
        ind_terms
            .iter()
            .map(|t| match t {
                Term::Indicator { set } => set.clone(),
                _ => unreachable!(),
            })
            .collect(),
        None,
    );

    let x0 = match start {
        Some(x) => x.clone(),
        None => {
            if first {
                p.anchor_u()?
            } else {
                p.anchor_w()?
            }
        }
    };
    let mut x = feasible.project(&x0)?;

    let eval_gap = |x: &DVector<f64>| -> Result<GapValue> {
        let opts = GapOptions {
            cert_tol: params.gap_tol,
            ..params.gap.clone()
        };
        if first {
            gap::primal_gap_1(p, x, par, &opts)
        } else {
            gap::primal_gap_2(p, par, x, &opts)
        }
    };

    let delta_par = delta.apply(par);
    // scale the first step to the operator's stiffness on the region
    let radius = feasible
        .bounding_box()
        .map(|(lo, hi)| lo.norm().max(hi.norm()))
        .unwrap_or(x.norm() + 10.0);
    let lip = op.point_lipschitz(radius.max(1.0));
    let mut lambda = params.lambda.min(1.0 / lip.max(1e-9));
    let mut best: Option<(DVector<f64>, GapValue)> = None;
    let mut prev_step = f64::INFINITY;
    let mut growth_run = 0usize;
    let mut stall_run = 0usize;
    let mut best_score = f64::INFINITY;
    let mut stationary_run = 0usize;
    let mut iters = 0usize;

    for k in 0..=params.max_iter {
        let g = eval_gap(&x)?;
        let better = match &best {
            None => true,
            Some((_, bg)) => {
                g.value < bg.value
                    || (g.value == bg.value && g.lower_bound < bg.lower_bound)
            }
        };
        if better {
            best = Some((x.clone(), g.clone()));
        }
        if g.meets(params.gap_tol) {
            return Ok(InnerSolution {
                point: x,
                gap: g,
                iters,
            });
        }
        // a cycling iterate never improves the gap; shrink the step
        let score = if g.value.is_finite() {
            g.value
        } else {
            g.lower_bound
        };
        if !best_score.is_finite() || score < best_score - 1e-15 * (1.0 + best_score.abs()) {
            best_score = score;
            stall_run = 0;
        } else {
            stall_run += 1;
            if stall_run >= 12 && lambda > 1e-8 {
                lambda *= 0.5;
                stall_run = 0;
            }
        }
        if k == params.max_iter || stationary_run >= 3 {
            break;
        }

        let c = op.eval(par, &x) - rhs;
        // first-order model of the kink from every piece, exact for
        // max-affine bifunctions
        let gx = gamma.apply(&x);
        let mut pieces = Vec::with_capacity(bif.pieces.len());
        let mut offsets = Vec::with_capacity(bif.pieces.len());
        for piece in &bif.pieces {
            offsets.push(piece.value(&delta_par, &gx));
            pieces.push(gamma.apply_transpose(&piece.grad_x(&delta_par, &gx)));
        }
        let out = solve_piecewise_prox(&PiecewiseProx {
            c,
            pieces,
            offsets,
            vbar: x.clone(),
            xbar: x.clone(),
            rho: 1.0 / lambda,
            psi_fin: &psi_fin,
            extra_terms: &ind_terms,
        })?;
        let step = (&out.v - &x).norm();
        if step > prev_step * (1.0 + 1e-12) {
            growth_run += 1;
            if growth_run >= 5 && lambda > 1e-8 {
                lambda *= 0.5;
                growth_run = 0;
            }
        } else {
            growth_run = 0;
        }
        if step <= params.step_tol * (1.0 + x.norm()) {
            stationary_run += 1;
        } else {
            stationary_run = 0;
        }
        prev_step = step;
        x = out.v;
        iters = k + 1;
    }

    let (bx, bg) = best.expect("at least one gap evaluation");
    let (bu, bw) = if first {
        (bx.as_slice().to_vec(), par.as_slice().to_vec())
    } else {
        (par.as_slice().to_vec(), bx.as_slice().to_vec())
    };
    Err(Error::NonConvergence {
        outer_iters: iters,
        best_gap: if bg.value.is_finite() {
            bg.value
        } else {
            bg.lower_bound
        },
        best_u: bu,
        best_w: bw,
    })
}

/// Solve the first relation in u with w fixed.
pub fn solve_inner_1(
    p: &CoupledProblem,
    w: &DVector<f64>,
    start: Option<&DVector<f64>>,
    params: &InnerParams,
) -> Result<InnerSolution> {
    solve_side(p, w, start, true, params)
}

/// Solve the second relation in w with u fixed.
pub fn solve_inner_2(
    p: &CoupledProblem,
    u: &DVector<f64>,
    start: Option<&DVector<f64>>,
    params: &InnerParams,
) -> Result<InnerSolution> {
    solve_side(p, u, start, false, params)
}
