//! Coupled operators T(parameter, point), their growth constants, and the
//! sampled coercivity functional used by the hypothesis audit.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::functions::MaxSmoothBifunction;
use crate::spaces::{spectral_norm, LinearMap};

/// Built-in operator families. `Affine` is P x + K par + a; the gradient
/// family is coeff ||x||^2 x + K par + a (gradient of (coeff/4) ||x||^4
/// plus an affine coupling).
#[derive(Debug, Clone)]
pub enum CoupledOperator {
    Affine {
        p: DMatrix<f64>,
        k: DMatrix<f64>,
        a: DVector<f64>,
    },
    MonotoneGradient {
        coeff: f64,
        k: DMatrix<f64>,
        a: DVector<f64>,
    },
}

impl CoupledOperator {
    pub fn zero(n_out: usize, n_par: usize) -> Self {
        CoupledOperator::Affine {
            p: DMatrix::zeros(n_out, n_out),
            k: DMatrix::zeros(n_out, n_par),
            a: DVector::zeros(n_out),
        }
    }

    pub fn eval(&self, par: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        match self {
            CoupledOperator::Affine { p, k, a } => p * x + k * par + a,
            CoupledOperator::MonotoneGradient { coeff, k, a } => {
                x * (coeff * x.norm_squared()) + k * par + a
            }
        }
    }

    pub fn dims(&self) -> (usize, usize) {
        match self {
            CoupledOperator::Affine { p, k, .. } => (p.nrows(), k.ncols()),
            CoupledOperator::MonotoneGradient { k, a, .. } => (a.len(), k.ncols()),
        }
    }

    /// Linear-growth constant b with ||T(par, x)|| <= b (1 + ||x|| + ||par||).
    /// Defined for the affine family only.
    pub fn growth_constant(&self) -> Result<f64> {
        match self {
            CoupledOperator::Affine { p, k, a } => {
                Ok(spectral_norm(p).max(spectral_norm(k)).max(a.norm()))
            }
            CoupledOperator::MonotoneGradient { .. } => Err(Error::Unsupported(
                "growth constant: operator grows faster than linearly".into(),
            )),
        }
    }

    /// Smallest eigenvalue of the symmetric part of the point block;
    /// nonnegative means the map is monotone in its point argument.
    pub fn sym_part_min_eig(&self) -> Option<f64> {
        match self {
            CoupledOperator::Affine { p, .. } => {
                let sym = (p + p.transpose()) * 0.5;
                let eig = sym.symmetric_eigen();
                Some(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
            }
            CoupledOperator::MonotoneGradient { coeff, .. } => {
                if *coeff >= 0.0 {
                    Some(0.0)
                } else {
                    None
                }
            }
        }
    }

    /// Norm of the coupling block (parameter sensitivity).
    pub fn coupling_norm(&self) -> f64 {
        match self {
            CoupledOperator::Affine { k, .. } => spectral_norm(k),
            CoupledOperator::MonotoneGradient { k, .. } => spectral_norm(k),
        }
    }

    /// Bound on ||T(par, x)|| over ||x|| <= rx, ||par|| <= rp.
    pub fn norm_bound(&self, rp: f64, rx: f64) -> f64 {
        match self {
            CoupledOperator::Affine { p, k, a } => {
                spectral_norm(p) * rx + spectral_norm(k) * rp + a.norm()
            }
            CoupledOperator::MonotoneGradient { coeff, k, a } => {
                coeff.abs() * rx * rx * rx + spectral_norm(k) * rp + a.norm()
            }
        }
    }

    /// Lipschitz bound in the point argument over the same ball.
    pub fn point_lipschitz(&self, rx: f64) -> f64 {
        match self {
            CoupledOperator::Affine { p, .. } => spectral_norm(p),
            CoupledOperator::MonotoneGradient { coeff, .. } => 3.0 * coeff.abs() * rx * rx,
        }
    }
}

/// Declared coercivity profile r(t, s): the instance claims
/// coercivity_value(x, p) >= r(||x||, ||p||).
#[derive(Debug, Clone)]
pub enum CoercivityProfile {
    /// r(t, s) = a t - b s - c
    Linear { a: f64, b: f64, c: f64 },
    /// Sampled table over a (t, s) grid, bilinear between nodes, clamped
    /// outside. For experiments; the bound machinery rejects it.
    UserTable {
        ts: Vec<f64>,
        ss: Vec<f64>,
        values: Vec<Vec<f64>>,
    },
}

impl CoercivityProfile {
    pub fn eval(&self, t: f64, s: f64) -> f64 {
        match self {
            CoercivityProfile::Linear { a, b, c } => a * t - b * s - c,
            CoercivityProfile::UserTable { ts, ss, values } => {
                let it = bracket(ts, t);
                let is = bracket(ss, s);
                let (t0, t1) = (ts[it], ts[it + 1]);
                let (s0, s1) = (ss[is], ss[is + 1]);
                let wt = if t1 > t0 { ((t - t0) / (t1 - t0)).clamp(0.0, 1.0) } else { 0.0 };
                let ws = if s1 > s0 { ((s - s0) / (s1 - s0)).clamp(0.0, 1.0) } else { 0.0 };
                let v00 = values[it][is];
                let v10 = values[it + 1][is];
                let v01 = values[it][is + 1];
                let v11 = values[it + 1][is + 1];
                v00 * (1.0 - wt) * (1.0 - ws)
                    + v10 * wt * (1.0 - ws)
                    + v01 * (1.0 - wt) * ws
                    + v11 * wt * ws
            }
        }
    }
}

fn bracket(grid: &[f64], v: f64) -> usize {
    if grid.len() < 2 {
        return 0;
    }
    let mut i = 0;
    while i + 2 < grid.len() && grid[i + 1] <= v {
        i += 1;
    }
    i
}

/// [<T(p, x), x> - J0(delta p, gamma x; -gamma x)] / ||x||, the radial
/// functional whose lower profiles the audit probes. Errors at x = 0.
pub fn coercivity_value(
    op: &CoupledOperator,
    j: &MaxSmoothBifunction,
    delta: &LinearMap,
    gamma: &LinearMap,
    par: &DVector<f64>,
    x: &DVector<f64>,
) -> Result<f64> {
    let n = x.norm();
    if n == 0.0 {
        return Err(Error::Precondition(
            "coercivity value is undefined at x = 0".into(),
        ));
    }
    let gx = gamma.apply(x);
    let dp = delta.apply(par);
    let jterm = j.clarke_dir(&dp, &gx, &(-&gx));
    Ok((op.eval(par, x).dot(x) - jterm) / n)
}
