//! The coupled problem container: two operators, two bifunctions, two
//! convex functions, two constraint sets, the four structure maps, and the
//! right-hand sides.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::functions::{ConvexExtendedFunction, MaxSmoothBifunction};
use crate::operators::{CoercivityProfile, CoupledOperator};
use crate::spaces::{ConvexSet, LinearMap, SpaceLayout};

/// Tags for the reduced problem classes with dedicated constructors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpecialCaseKind {
    /// J, H parameter-free.
    ParameterFree,
    /// psi = theta = 0.
    PureHemivariational,
    /// J = H = 0 (coupled variational inequalities).
    PureVariational,
    /// theta = 0, H = 0, D the whole space: second relation is an equation.
    MixedEquation,
    /// Everything zero, both sets whole spaces: coupled operator equations.
    OperatorEquations,
    /// Parameter-control form: B blind to its parameter argument.
    ParameterControl,
    /// Single inequality: B = 0, l = 0, theta = 0, H = 0.
    SingleInequality,
}

/// A coupled pair of variational-hemivariational relations:
/// find u in C, w in D with, for all v in C and z in D,
///   <A(w,u), v-u> + J0(d1 w, g1 u; g1(v-u)) + psi(v) - psi(u) >= <h, v-u>
///   <B(u,w), z-w> + H0(d2 u, g2 w; g2(z-w)) + theta(z) - theta(w) >= <l, z-w>
#[derive(Debug, Clone)]
pub struct CoupledProblem {
    pub layout: SpaceLayout,
    pub op_a: CoupledOperator,
    pub op_b: CoupledOperator,
    pub j_fun: MaxSmoothBifunction,
    pub h_fun: MaxSmoothBifunction,
    pub psi: ConvexExtendedFunction,
    pub theta: ConvexExtendedFunction,
    pub set_c: ConvexSet,
    pub set_d: ConvexSet,
    pub gamma1: LinearMap,
    pub gamma2: LinearMap,
    pub delta1: LinearMap,
    pub delta2: LinearMap,
    pub rhs_h: DVector<f64>,
    pub rhs_l: DVector<f64>,
    pub anchor_u0: Option<DVector<f64>>,
    pub anchor_w0: Option<DVector<f64>>,
    pub profile_a: Option<CoercivityProfile>,
    pub profile_b: Option<CoercivityProfile>,
    pub kind: Option<SpecialCaseKind>,
}

impl CoupledProblem {
    /// Dimension and shape consistency. Every field is checked against the
    /// layout; messages name the offending field.
    pub fn validate(&self) -> Result<()> {
        let l = &self.layout;
        let check_map = |name: &str, m: &LinearMap, rows: usize, cols: usize| -> Result<()> {
            if m.rows() != rows || m.cols() != cols {
                return Err(Error::Input(format!(
                    "{name}: expected {rows}x{cols} matrix, got {}x{}",
                    m.rows(),
                    m.cols()
                )));
            }
            Ok(())
        };
        check_map("gamma1", &self.gamma1, l.n_x, l.n_v)?;
        check_map("gamma2", &self.gamma2, l.n_y, l.n_e)?;
        check_map("delta1", &self.delta1, l.n_z1, l.n_e)?;
        check_map("delta2", &self.delta2, l.n_z2, l.n_v)?;

        let (a_out, a_par) = self.op_a.dims();
        if a_out != l.n_v || a_par != l.n_e {
            return Err(Error::Input(format!(
                "a_op: expected blocks for {}-dim points and {}-dim parameters, got ({a_out}, {a_par})",
                l.n_v, l.n_e
            )));
        }
        let (b_out, b_par) = self.op_b.dims();
        if b_out != l.n_e || b_par != l.n_v {
            return Err(Error::Input(format!(
                "b_op: expected blocks for {}-dim points and {}-dim parameters, got ({b_out}, {b_par})",
                l.n_e, l.n_v
            )));
        }
        if self.j_fun.n_p != l.n_z1 || self.j_fun.n_x != l.n_x {
            return Err(Error::Input(format!(
                "j_fun: expected arguments of dimensions ({}, {}), got ({}, {})",
                l.n_z1, l.n_x, self.j_fun.n_p, self.j_fun.n_x
            )));
        }
        if self.h_fun.n_p != l.n_z2 || self.h_fun.n_x != l.n_y {
            return Err(Error::Input(format!(
                "h_fun: expected arguments of dimensions ({}, {}), got ({}, {})",
                l.n_z2, l.n_y, self.h_fun.n_p, self.h_fun.n_x
            )));
        }
        if self.set_c.dim() != l.n_v {
            return Err(Error::Input(format!(
                "set_c: dimension {} does not match n_v = {}",
                self.set_c.dim(),
                l.n_v
            )));
        }
        if self.set_d.dim() != l.n_e {
            return Err(Error::Input(format!(
                "set_d: dimension {} does not match n_e = {}",
                self.set_d.dim(),
                l.n_e
            )));
        }
        if self.rhs_h.len() != l.n_v {
            return Err(Error::Input(format!(
                "rhs_h: length {} does not match n_v = {}",
                self.rhs_h.len(),
                l.n_v
            )));
        }
        if self.rhs_l.len() != l.n_e {
            return Err(Error::Input(format!(
                "rhs_l: length {} does not match n_e = {}",
                self.rhs_l.len(),
                l.n_e
            )));
        }
        if let Some(u0) = &self.anchor_u0 {
            if u0.len() != l.n_v {
                return Err(Error::Input("anchor_u0: wrong length".into()));
            }
            if !self.set_c.contains(u0, 1e-7) {
                return Err(Error::Input("anchor_u0: not a point of set_c".into()));
            }
        }
        if let Some(w0) = &self.anchor_w0 {
            if w0.len() != l.n_e {
                return Err(Error::Input("anchor_w0: wrong length".into()));
            }
            if !self.set_d.contains(w0, 1e-7) {
                return Err(Error::Input("anchor_w0: not a point of set_d".into()));
            }
        }
        Ok(())
    }

    /// Feasible anchor in C (given anchor or projection of the origin).
    pub fn anchor_u(&self) -> Result<DVector<f64>> {
        match &self.anchor_u0 {
            Some(u) => Ok(u.clone()),
            None => self.set_c.project(&DVector::zeros(self.layout.n_v)),
        }
    }

    pub fn anchor_w(&self) -> Result<DVector<f64>> {
        match &self.anchor_w0 {
            Some(w) => Ok(w.clone()),
            None => self.set_d.project(&DVector::zeros(self.layout.n_e)),
        }
    }

    /// An inequality posed over the whole space with no kink and no convex
    /// term collapses to an operator equation: testing against every point
    /// forces the residual to vanish.
    pub fn equation_side(&self, first: bool) -> bool {
        if first {
            matches!(self.set_c, ConvexSet::WholeSpace { .. })
                && self.psi.terms.is_empty()
                && self.j_fun.is_zero()
        } else {
            matches!(self.set_d, ConvexSet::WholeSpace { .. })
                && self.theta.terms.is_empty()
                && self.h_fun.is_zero()
        }
    }
}
