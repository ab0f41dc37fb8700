//! Instance library: the seven structural special cases as checked
//! constructors, a dozen hand-built problems with worked reference
//! solutions, three deliberately broken problems for the falsifiers, and
//! a seeded random generator with controlled coupling strength.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::functions::{ConvexExtendedFunction, MaxSmoothBifunction, Piece, Term};
use crate::numeric::rng_for;
use crate::operators::{CoercivityProfile, CoupledOperator};
use crate::problem::{CoupledProblem, SpecialCaseKind};
use crate::spaces::{spectral_norm, ConvexSet, LinearMap, SpaceLayout};

fn vec(xs: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(xs)
}

fn square_layout(n_v: usize, n_e: usize) -> SpaceLayout {
    SpaceLayout {
        n_v,
        n_e,
        n_x: n_v,
        n_y: n_e,
        n_z1: n_e,
        n_z2: n_v,
    }
}

/// Skeleton with identity trace maps, zero data, and the given sets.
fn base(set_c: ConvexSet, set_d: ConvexSet) -> CoupledProblem {
    let (n_v, n_e) = (set_c.dim(), set_d.dim());
    CoupledProblem {
        layout: square_layout(n_v, n_e),
        op_a: CoupledOperator::zero(n_v, n_e),
        op_b: CoupledOperator::zero(n_e, n_v),
        j_fun: MaxSmoothBifunction::zero(n_e, n_v),
        h_fun: MaxSmoothBifunction::zero(n_v, n_e),
        psi: ConvexExtendedFunction::zero(),
        theta: ConvexExtendedFunction::zero(),
        set_c,
        set_d,
        gamma1: LinearMap::identity(n_v),
        gamma2: LinearMap::identity(n_e),
        delta1: LinearMap::identity(n_e),
        delta2: LinearMap::identity(n_v),
        rhs_h: DVector::zeros(n_v),
        rhs_l: DVector::zeros(n_e),
        anchor_u0: None,
        anchor_w0: None,
        profile_a: None,
        profile_b: None,
        kind: None,
    }
}

fn affine(p: DMatrix<f64>, k: DMatrix<f64>, a: DVector<f64>) -> CoupledOperator {
    CoupledOperator::Affine { p, k, a }
}

fn scalar_op(p: f64, k: f64, a: f64) -> CoupledOperator {
    affine(
        DMatrix::from_element(1, 1, p),
        DMatrix::from_element(1, 1, k),
        vec(&[a]),
    )
}

fn op_is_zero(op: &CoupledOperator) -> bool {
    match op {
        CoupledOperator::Affine { p, k, a } => {
            p.iter().all(|&v| v == 0.0) && k.iter().all(|&v| v == 0.0) && a.iter().all(|&v| v == 0.0)
        }
        CoupledOperator::MonotoneGradient { coeff, k, a } => {
            *coeff == 0.0 && k.iter().all(|&v| v == 0.0) && a.iter().all(|&v| v == 0.0)
        }
    }
}

fn parameter_free(bif: &MaxSmoothBifunction) -> bool {
    bif.pieces.iter().all(|piece| match piece {
        Piece::Affine { g_p, .. } => g_p.iter().all(|&v| v == 0.0),
        Piece::Quadratic { r, g_p, .. } => {
            r.iter().all(|&v| v == 0.0) && g_p.iter().all(|&v| v == 0.0)
        }
    })
}

fn whole(set: &ConvexSet) -> bool {
    matches!(set, ConvexSet::WholeSpace { .. })
}

/// Stamp `kind` onto a problem after checking its zero-pattern. Parts the
/// kind fixes are verified, not silently overwritten, so a contradicting
/// component is an input error rather than a surprise.
pub fn make_special_case(kind: SpecialCaseKind, mut p: CoupledProblem) -> Result<CoupledProblem> {
    let fail = |what: &str| Err(Error::Input(format!("{kind:?}: {what}")));
    match kind {
        SpecialCaseKind::ParameterFree => {
            if !parameter_free(&p.j_fun) || !parameter_free(&p.h_fun) {
                return fail("J and H must not read their parameter slot");
            }
        }
        SpecialCaseKind::PureHemivariational => {
            if !p.psi.is_zero() || !p.theta.is_zero() {
                return fail("psi and theta must be zero");
            }
        }
        SpecialCaseKind::PureVariational => {
            if !p.j_fun.is_zero() || !p.h_fun.is_zero() {
                return fail("J and H must be zero");
            }
        }
        SpecialCaseKind::MixedEquation => {
            if !p.h_fun.is_zero() || !p.theta.is_zero() || !whole(&p.set_d) {
                return fail("second relation must be a bare equation: H = 0, theta = 0, D = E");
            }
        }
        SpecialCaseKind::OperatorEquations => {
            if !p.j_fun.is_zero()
                || !p.h_fun.is_zero()
                || !p.psi.is_zero()
                || !p.theta.is_zero()
                || !whole(&p.set_c)
                || !whole(&p.set_d)
            {
                return fail("both relations must be bare equations on whole spaces");
            }
        }
        SpecialCaseKind::ParameterControl => {
            if p.op_b.coupling_norm() != 0.0 {
                return fail("B must be blind to its parameter argument (K = 0)");
            }
            if !p.theta.is_zero() || !whole(&p.set_d) {
                return fail("control relation needs theta = 0 and D = E");
            }
        }
        SpecialCaseKind::SingleInequality => {
            if !op_is_zero(&p.op_b) || !p.h_fun.is_zero() || !p.theta.is_zero() {
                return fail("second relation must vanish: B = 0, H = 0, theta = 0");
            }
            if p.rhs_l.iter().any(|&v| v != 0.0) {
                return fail("second right-hand side must be zero");
            }
            if p.set_d.diameter().map_or(true, |d| d > 0.0) {
                return fail("D must pin the parameter to a single point");
            }
        }
    }
    p.kind = Some(kind);
    p.validate()?;
    Ok(p)
}

/// Box-constrained coupled pair with solution (1, -0.5): A = u + w/2 - 3/4
/// on C = [0,2], B = w + u/2 on D = [-2,2], both right-hand sides zero.
pub fn coupled_box_1d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[0.0]), vec(&[2.0])).unwrap(),
        ConvexSet::make_box(vec(&[-2.0]), vec(&[2.0])).unwrap(),
    );
    p.op_a = scalar_op(1.0, 0.5, -0.75);
    p.op_b = scalar_op(1.0, 0.5, 0.0);
    p
}

/// No coupling at all; the solver must settle both sides in one sweep.
pub fn decoupled_1d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
    );
    p.op_a = scalar_op(1.0, 0.0, 0.0);
    p.op_b = scalar_op(1.0, 0.0, 0.0);
    p
}

/// Single inequality with A = id, J = |x|, C = [-1,1], h = 0; the kink at
/// the origin absorbs the whole subdifferential, so u* = 0.
pub fn hemi_abs_1d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        ConvexSet::make_box(vec(&[0.0]), vec(&[0.0])).unwrap(),
    );
    p.op_a = scalar_op(1.0, 0.0, 0.0);
    p.j_fun = MaxSmoothBifunction::new(
        1,
        1,
        vec![
            Piece::Affine {
                g_p: vec(&[0.0]),
                g_x: vec(&[1.0]),
                b: 0.0,
            },
            Piece::Affine {
                g_p: vec(&[0.0]),
                g_x: vec(&[-1.0]),
                b: 0.0,
            },
        ],
    )
    .unwrap();
    make_special_case(SpecialCaseKind::SingleInequality, p).unwrap()
}

/// l1 term against a constant drive: 0.3 sits inside the unit
/// subdifferential of |.| at zero, so u* = 0 despite h != 0.
pub fn psi_l1_1d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
    );
    p.op_a = scalar_op(1.0, 0.0, 0.0);
    p.op_b = scalar_op(1.0, 0.0, 0.0);
    p.psi = ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 1.0 }]);
    p.rhs_h = vec(&[0.3]);
    make_special_case(SpecialCaseKind::PureVariational, p).unwrap()
}

/// Drive past the box: the solution parks on the active bound u* = 2.
pub fn box_boundary_1d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[0.0]), vec(&[2.0])).unwrap(),
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
    );
    p.op_a = scalar_op(1.0, 0.0, 0.0);
    p.op_b = scalar_op(1.0, 0.0, 0.0);
    p.rhs_h = vec(&[3.0]);
    p
}

/// Projection VI on the standard triangle: the drive (3/4, 3/4) projects
/// onto the hypotenuse at (1/2, 1/2).
pub fn polytope_2d() -> CoupledProblem {
    let tri = ConvexSet::make_polytope(
        DMatrix::from_row_slice(3, 2, &[-1.0, 0.0, 0.0, -1.0, 1.0, 1.0]),
        vec(&[0.0, 0.0, 1.0]),
    )
    .unwrap();
    let mut p = base(
        tri,
        ConvexSet::make_box(vec(&[-1.0, -1.0]), vec(&[1.0, 1.0])).unwrap(),
    );
    p.op_a = affine(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), DVector::zeros(2));
    p.op_b = affine(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), DVector::zeros(2));
    p.rhs_h = vec(&[0.75, 0.75]);
    p
}

/// Projection VI on the unit disc: u* = (0.6, 0.8) is the scaled drive.
pub fn ball_2d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_ball(DVector::zeros(2), 1.0).unwrap(),
        ConvexSet::make_ball(DVector::zeros(2), 1.0).unwrap(),
    );
    p.op_a = affine(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), DVector::zeros(2));
    p.op_b = affine(DMatrix::identity(2, 2), DMatrix::zeros(2, 2), DVector::zeros(2));
    p.rhs_h = vec(&[1.2, 1.6]);
    p
}

/// Interior 2-D coupled pair; reference solution solved by hand from the
/// two linear systems: u = (5/11, 7/17), w = (4/11, 6/17).
pub fn coupled_2d_mono() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-2.0, -2.0]), vec(&[2.0, 2.0])).unwrap(),
        ConvexSet::make_box(vec(&[-2.0, -2.0]), vec(&[2.0, 2.0])).unwrap(),
    );
    p.op_a = affine(
        DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, 0.25]),
        DVector::zeros(2),
    );
    p.op_b = affine(
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[-0.25, 0.0, 0.0, -0.25]),
        DVector::zeros(2),
    );
    p.rhs_h = vec(&[1.0, 0.5]);
    p.rhs_l = vec(&[0.25, 0.25]);
    p
}

/// Both kinks talk to the other variable: J = |x + 0.3 p|, H mirrored.
/// The only pair stationary on both sides is the origin.
pub fn hemi_coupled_1d() -> CoupledProblem {
    // J(p, x) = |x + 0.3 p| = max over both signs of sign * (x + 0.3 p)
    let kink = |sign: f64| Piece::Affine {
        g_p: vec(&[0.3 * sign]),
        g_x: vec(&[sign]),
        b: 0.0,
    };
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
    );
    p.op_a = scalar_op(1.0, 0.0, 0.0);
    p.op_b = scalar_op(1.0, 0.0, 0.0);
    p.j_fun = MaxSmoothBifunction::new(1, 1, vec![kink(1.0), kink(-1.0)]).unwrap();
    p.h_fun = MaxSmoothBifunction::new(1, 1, vec![kink(1.0), kink(-1.0)]).unwrap();
    make_special_case(SpecialCaseKind::PureHemivariational, p).unwrap()
}

/// Inequality coupled to an equation constraint w = u/2 + 1/5; solving the
/// pair gives (0, 0.2).
pub fn equation_kind_iv() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        ConvexSet::whole(1),
    );
    p.op_a = scalar_op(1.0, -0.5, 0.0);
    p.rhs_h = vec(&[-0.1]);
    p.op_b = scalar_op(1.0, -0.5, -0.2);
    make_special_case(SpecialCaseKind::MixedEquation, p).unwrap()
}

/// Two coupled linear equations, solution (0.4, 0.4); the dense solve is
/// the obvious reference.
pub fn kind_v_linear() -> CoupledProblem {
    let mut p = base(ConvexSet::whole(1), ConvexSet::whole(1));
    p.op_a = scalar_op(1.0, 0.5, 0.0);
    p.op_b = scalar_op(1.0, 0.5, 0.0);
    p.rhs_h = vec(&[0.6]);
    p.rhs_l = vec(&[0.6]);
    make_special_case(SpecialCaseKind::OperatorEquations, p).unwrap()
}

/// Every feature at once in 2-D: non-diagonal A, parameter-aware J, an l1
/// term, a quadratic theta, box against ball. No closed form; the grid
/// oracle supplies the reference.
pub fn mixed_2d_hemi_psi() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.5, -1.5]), vec(&[1.5, 1.5])).unwrap(),
        ConvexSet::make_ball(DVector::zeros(2), 1.5).unwrap(),
    );
    p.op_a = affine(
        DMatrix::from_row_slice(2, 2, &[1.5, 0.25, 0.25, 1.25]),
        DMatrix::from_row_slice(2, 2, &[0.25, 0.0, 0.0, -0.25]),
        vec(&[0.1, -0.2]),
    );
    p.op_b = affine(
        DMatrix::identity(2, 2),
        DMatrix::from_row_slice(2, 2, &[0.0, 0.2, 0.2, 0.0]),
        DVector::zeros(2),
    );
    p.j_fun = MaxSmoothBifunction::new(
        2,
        2,
        vec![
            Piece::Affine {
                g_p: vec(&[0.2, 0.0]),
                g_x: vec(&[0.6, 0.0]),
                b: 0.0,
            },
            Piece::Affine {
                g_p: vec(&[0.0, 0.0]),
                g_x: vec(&[-0.4, 0.3]),
                b: 0.1,
            },
            Piece::Affine {
                g_p: vec(&[0.0, -0.1]),
                g_x: vec(&[0.0, -0.5]),
                b: 0.0,
            },
        ],
    )
    .unwrap();
    p.psi = ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 0.1 }]);
    p.theta = ConvexExtendedFunction::new(vec![Term::Quadratic {
        q_mat: DMatrix::from_diagonal_element(2, 2, 0.1),
        q_vec: DVector::zeros(2),
        c: 0.0,
    }]);
    p.rhs_h = vec(&[0.4, -0.3]);
    p.rhs_l = vec(&[0.1, 0.2]);
    p
}

/// A = -u is not pseudomonotone on [-1,1]; the solution set splits into
/// the three isolated points {-1, 0, 1}.
pub fn non_pseudomonotone_1d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
    );
    p.op_a = scalar_op(-1.0, 0.0, 0.0);
    p.op_b = scalar_op(1.0, 0.0, 0.0);
    p
}

/// A vanishes identically while the right-hand side does not: 0 = 1 on
/// the whole line has no solution and no coercivity trend.
pub fn non_coercive_1d() -> CoupledProblem {
    let mut p = base(ConvexSet::whole(1), ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap());
    p.op_a = scalar_op(0.0, 0.0, 0.0);
    p.op_b = scalar_op(1.0, 0.0, 0.0);
    p.rhs_h = vec(&[1.0]);
    p
}

/// Coupling twice as strong as the diagonal on both sides: the bound
/// machinery must refuse (slope product 4), and from the chosen anchors
/// the damped sweeps cycle without certifying.
pub fn coupling_dominated_1d() -> CoupledProblem {
    let mut p = base(
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
    );
    p.op_a = scalar_op(1.0, 2.0, 0.0);
    p.op_b = scalar_op(1.0, 2.0, 0.0);
    p.anchor_u0 = Some(vec(&[0.8]));
    p.anchor_w0 = Some(vec(&[0.8]));
    p
}

pub fn library() -> Vec<(&'static str, CoupledProblem)> {
    vec![
        ("coupled_box_1d", coupled_box_1d()),
        ("decoupled_1d", decoupled_1d()),
        ("hemi_abs_1d", hemi_abs_1d()),
        ("psi_l1_1d", psi_l1_1d()),
        ("box_boundary_1d", box_boundary_1d()),
        ("polytope_2d", polytope_2d()),
        ("ball_2d", ball_2d()),
        ("coupled_2d_mono", coupled_2d_mono()),
        ("hemi_coupled_1d", hemi_coupled_1d()),
        ("equation_kind_iv", equation_kind_iv()),
        ("kind_v_linear", kind_v_linear()),
        ("mixed_2d_hemi_psi", mixed_2d_hemi_psi()),
    ]
}

pub fn pathological() -> Vec<(&'static str, CoupledProblem)> {
    vec![
        ("non_pseudomonotone_1d", non_pseudomonotone_1d()),
        ("non_coercive_1d", non_coercive_1d()),
        ("coupling_dominated_1d", coupling_dominated_1d()),
    ]
}

/// Worked solution for a library instance, if it has a closed form.
pub fn reference_solution(name: &str) -> Option<(DVector<f64>, DVector<f64>)> {
    let pair = match name {
        "coupled_box_1d" => (vec(&[1.0]), vec(&[-0.5])),
        "decoupled_1d" => (vec(&[0.0]), vec(&[0.0])),
        "hemi_abs_1d" => (vec(&[0.0]), vec(&[0.0])),
        "psi_l1_1d" => (vec(&[0.0]), vec(&[0.0])),
        "box_boundary_1d" => (vec(&[2.0]), vec(&[0.0])),
        "polytope_2d" => (vec(&[0.5, 0.5]), vec(&[0.0, 0.0])),
        "ball_2d" => (vec(&[0.6, 0.8]), vec(&[0.0, 0.0])),
        "coupled_2d_mono" => (
            vec(&[5.0 / 11.0, 7.0 / 17.0]),
            vec(&[4.0 / 11.0, 6.0 / 17.0]),
        ),
        "hemi_coupled_1d" => (vec(&[0.0]), vec(&[0.0])),
        "equation_kind_iv" => (vec(&[0.0]), vec(&[0.2])),
        "kind_v_linear" => (vec(&[0.4]), vec(&[0.4])),
        _ => return None,
    };
    Some(pair)
}

fn random_unit(rng: &mut impl Rng, dim: usize) -> DVector<f64> {
    loop {
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-3 {
            return v / n;
        }
    }
}

fn random_spd(rng: &mut impl Rng, dim: usize) -> (DMatrix<f64>, f64) {
    let raw = DMatrix::from_fn(dim, dim, |_, _| rng.random_range(-1.0..1.0));
    let q = raw.qr().q();
    let eigs: Vec<f64> = (0..dim).map(|_| rng.random_range(1.0..2.0)).collect();
    let lam_min = eigs.iter().cloned().fold(f64::INFINITY, f64::min);
    let m = &q * DMatrix::from_diagonal(&DVector::from_vec(eigs)) * q.transpose();
    // symmetrize away the last rounding
    ((&m + m.transpose()) * 0.5, lam_min)
}

fn random_coupling(rng: &mut impl Rng, rows: usize, cols: usize, target: f64) -> DMatrix<f64> {
    if target == 0.0 {
        return DMatrix::zeros(rows, cols);
    }
    let raw = DMatrix::from_fn(rows, cols, |_, _| rng.random_range(-1.0..1.0));
    let s = spectral_norm(&raw);
    raw * (target / s)
}

fn random_pieces(
    rng: &mut impl Rng,
    n_p: usize,
    n_x: usize,
    count: usize,
) -> MaxSmoothBifunction {
    if count == 0 {
        return MaxSmoothBifunction::zero(n_p, n_x);
    }
    let pieces = (0..count)
        .map(|_| Piece::Affine {
            g_p: random_unit(rng, n_p) * rng.random_range(0.1..1.0),
            g_x: random_unit(rng, n_x) * rng.random_range(0.1..1.0),
            b: rng.random_range(-0.3..0.3),
        })
        .collect();
    MaxSmoothBifunction::new(n_p, n_x, pieces).unwrap()
}

/// Seeded generator: symmetric PD diagonal blocks with eigenvalues in
/// [1,2], coupling blocks scaled to kappa * lambda_min, max-affine kinks
/// with unit-bounded gradients, boxes holding the origin, and honest
/// coercivity profiles attached. Every instance passes the audit.
pub fn random_instance(
    seed: u64,
    dims: (usize, usize),
    pieces: usize,
    kappa: f64,
) -> Result<CoupledProblem> {
    let (n_v, n_e) = dims;
    if n_v == 0 || n_e == 0 {
        return Err(Error::Input("random instance needs nonzero dimensions".into()));
    }
    if !(0.0..1.0).contains(&kappa) {
        return Err(Error::Input(format!(
            "coupling strength must lie in [0,1), got {kappa}"
        )));
    }
    let mut rng = rng_for(seed, &[0x9e4]);
    let (p_a, lam_a) = random_spd(&mut rng, n_v);
    let (p_b, lam_b) = random_spd(&mut rng, n_e);
    let k_a = random_coupling(&mut rng, n_v, n_e, kappa * lam_a);
    let k_b = random_coupling(&mut rng, n_e, n_v, kappa * lam_b);
    let a_a = DVector::from_fn(n_v, |_, _| rng.random_range(-0.3..0.3));
    let a_b = DVector::from_fn(n_e, |_, _| rng.random_range(-0.3..0.3));

    let lo_c = DVector::from_fn(n_v, |_, _| -rng.random_range(0.5..2.0));
    let hi_c = DVector::from_fn(n_v, |_, _| rng.random_range(0.5..2.0));
    let lo_d = DVector::from_fn(n_e, |_, _| -rng.random_range(0.5..2.0));
    let hi_d = DVector::from_fn(n_e, |_, _| rng.random_range(0.5..2.0));

    let mut p = base(
        ConvexSet::make_box(lo_c, hi_c)?,
        ConvexSet::make_box(lo_d, hi_d)?,
    );
    p.op_a = affine(p_a, k_a, a_a.clone());
    p.op_b = affine(p_b, k_b, a_b.clone());
    p.j_fun = random_pieces(&mut rng, n_e, n_v, pieces);
    p.h_fun = random_pieces(&mut rng, n_v, n_e, pieces);
    p.rhs_h = DVector::from_fn(n_v, |_, _| rng.random_range(-0.5..0.5));
    p.rhs_l = DVector::from_fn(n_e, |_, _| rng.random_range(-0.5..0.5));
    p.profile_a = Some(CoercivityProfile::Linear {
        a: lam_a,
        b: kappa * lam_a,
        c: a_a.norm() + p.j_fun.grad_bound(0.0, 0.0),
    });
    p.profile_b = Some(CoercivityProfile::Linear {
        a: lam_b,
        b: kappa * lam_b,
        c: a_b.norm() + p.h_fun.grad_bound(0.0, 0.0),
    });
    p.validate()?;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gap::{self, GapOptions};
    use crate::hypotheses;

    #[test]
    fn reference_solutions_certify() {
        let opts = GapOptions::default();
        for (name, p) in library() {
            let Some((u, w)) = reference_solution(name) else {
                continue;
            };
            let (g1, g2) = gap::primal_pair(&p, &u, &w, &opts)
                .unwrap_or_else(|e| panic!("{name}: {e}"));
            assert!(
                g1.certified && g1.value.abs() <= 1e-7,
                "{name}: gap1 = {:?}",
                g1
            );
            assert!(
                g2.certified && g2.value.abs() <= 1e-7,
                "{name}: gap2 = {:?}",
                g2
            );
        }
    }

    #[test]
    fn special_case_patterns_are_enforced() {
        // a nonzero J contradicts the pure variational pattern
        let bad = make_special_case(SpecialCaseKind::PureVariational, hemi_coupled_1d());
        assert!(matches!(bad, Err(Error::Input(_))));

        // parameter-free tag on a parameter-aware J
        let bad = make_special_case(SpecialCaseKind::ParameterFree, hemi_coupled_1d());
        assert!(matches!(bad, Err(Error::Input(_))));

        // the same J with its parameter column zeroed passes
        let mut ok = coupled_box_1d();
        ok.j_fun = MaxSmoothBifunction::new(
            1,
            1,
            vec![
                Piece::Affine {
                    g_p: vec(&[0.0]),
                    g_x: vec(&[0.5]),
                    b: 0.0,
                },
                Piece::Affine {
                    g_p: vec(&[0.0]),
                    g_x: vec(&[-0.5]),
                    b: 0.0,
                },
            ],
        )
        .unwrap();
        let tagged = make_special_case(SpecialCaseKind::ParameterFree, ok).unwrap();
        assert_eq!(tagged.kind, Some(SpecialCaseKind::ParameterFree));
    }

    #[test]
    fn control_kind_fixes_the_parameter_side() {
        // B blind to u, D the whole space: w settles at 0.2 and the first
        // relation reduces to a plain VI at that parameter
        let mut p = base(
            ConvexSet::make_box(vec(&[0.0]), vec(&[2.0])).unwrap(),
            ConvexSet::whole(1),
        );
        p.op_a = scalar_op(1.0, 0.5, -0.75);
        p.op_b = scalar_op(1.0, 0.0, -0.2);
        let p = make_special_case(SpecialCaseKind::ParameterControl, p).unwrap();
        let opts = GapOptions::default();
        let u = vec(&[0.65]);
        let w = vec(&[0.2]);
        let (g1, g2) = gap::primal_pair(&p, &u, &w, &opts).unwrap();
        assert!(g1.certified && g1.value.abs() <= 1e-7);
        assert!(g2.certified && g2.value.abs() <= 1e-7);

        let coupled = make_special_case(SpecialCaseKind::ParameterControl, coupled_box_1d());
        assert!(matches!(coupled, Err(Error::Input(_))));
    }

    #[test]
    fn kind_v_matches_the_dense_solve() {
        let p = kind_v_linear();
        // [1 0.5; 0.5 1] [u; w] = [0.6; 0.6]
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]);
        let sol = m.lu().solve(&vec(&[0.6, 0.6])).unwrap();
        let (u_ref, w_ref) = reference_solution("kind_v_linear").unwrap();
        assert!((sol[0] - u_ref[0]).abs() <= 1e-12);
        assert!((sol[1] - w_ref[0]).abs() <= 1e-12);
        let (g1, g2) = gap::primal_pair(
            &p,
            &vec(&[sol[0]]),
            &vec(&[sol[1]]),
            &GapOptions::default(),
        )
        .unwrap();
        assert!(g1.certified && g1.value.abs() <= 1e-7);
        assert!(g2.certified && g2.value.abs() <= 1e-7);
    }

    #[test]
    fn variational_gap_matches_a_kink_free_reformulation() {
        // kind iii: the gap must coincide with the hand-rolled VI gap
        // max_v <b, v-u> - psi(v) + psi(u) at every probe point
        let p = psi_l1_1d();
        let opts = GapOptions::default();
        for k in 0..100 {
            let u = -1.0 + 2.0 * (k as f64) / 99.0;
            let b = 0.3 - u;
            let hand = [-1.0_f64, 0.0, 1.0, u]
                .iter()
                .map(|&v| b * (v - u) - v.abs() + u.abs())
                .fold(f64::NEG_INFINITY, f64::max);
            let g = gap::primal_gap_1(&p, &vec(&[u]), &vec(&[0.0]), &opts).unwrap();
            assert!(g.certified, "u = {u}");
            assert!((g.value - hand).abs() <= 1e-9, "u = {u}: {} vs {hand}", g.value);
        }
    }

    #[test]
    fn generator_is_deterministic_and_sound() {
        let a = random_instance(7, (2, 2), 3, 0.3).unwrap();
        let b = random_instance(7, (2, 2), 3, 0.3).unwrap();
        match (&a.op_a, &b.op_a) {
            (CoupledOperator::Affine { p: pa, .. }, CoupledOperator::Affine { p: pb, .. }) => {
                assert_eq!(pa, pb);
            }
            _ => panic!("generator must build affine operators"),
        }
        let rep = hypotheses::audit(&a, 0).unwrap();
        assert!(rep.all_consistent, "audit: {rep:?}");
        let bound = hypotheses::solution_bound(&a).unwrap();
        assert!(bound.slope_product < 1.0);
        assert!(bound.r_solution.is_finite());
    }

    #[test]
    fn zero_coupling_decouples() {
        let p = random_instance(3, (2, 1), 2, 0.0).unwrap();
        assert_eq!(p.op_a.coupling_norm(), 0.0);
        assert_eq!(p.op_b.coupling_norm(), 0.0);
    }

    #[test]
    fn seeded_suite_smoke() {
        for seed in 1..=10 {
            let p = random_instance(seed, (2, 2), 3, 0.4).unwrap();
            p.validate().unwrap();
            hypotheses::solution_bound(&p)
                .unwrap_or_else(|e| panic!("seed {seed}: {e}"));
        }
    }

    #[test]
    fn pathological_instances_misbehave_as_designed() {
        let (_, non_pm) = &pathological()[0];
        let rep = hypotheses::audit(non_pm, 0).unwrap();
        assert!(rep.op_a.pseudomonotone_witness.is_some());

        let (_, flat) = &pathological()[1];
        let rep = hypotheses::audit(flat, 0).unwrap();
        assert!(!rep.op_a.coercivity.trend_ok);

        let (_, dominated) = &pathological()[2];
        assert!(matches!(
            hypotheses::solution_bound(dominated),
            Err(Error::NoFiniteBound(_))
        ));
    }
}
