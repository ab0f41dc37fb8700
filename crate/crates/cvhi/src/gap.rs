//! Gap functions for the two relations. The primal gaps are concave and
//! come with a certified upper/lower bracket; the Minty gaps move the
//! operator and bifunction base points with the probe and are reported as
//! best-found lower bounds only.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::functions::{ConvexExtendedFunction, Term};
use crate::optim::{
    maximize_black_box, maximize_concave, ConcaveMaxProblem, MaxOptions, Region,
};
use crate::problem::CoupledProblem;
use crate::spaces::ConvexSet;

/// Feasibility slack accepted on the evaluation point itself.
pub const FEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone)]
pub struct GapOptions {
    /// Bracket width required to call a value certified, and the threshold
    /// under which a search-ball boundary hit is still conclusive.
    pub cert_tol: f64,
    /// Radius of the ball around the evaluation point used when the
    /// feasible set is unbounded.
    pub search_radius: f64,
    pub multi_start: usize,
    pub ascent_iters: usize,
    pub seed: u64,
}

impl Default for GapOptions {
    fn default() -> Self {
        GapOptions {
            cert_tol: 1e-9,
            search_radius: 1e3,
            multi_start: 8,
            ascent_iters: 200,
            seed: 0,
        }
    }
}

/// One gap evaluation. `value` is the certified upper bound when one
/// exists (infinite when a search-ball boundary hit leaves the supremum
/// unresolved); `lower_bound` is always attained by `witness`. On an
/// equation side the bracket is exact (`value` is the residual scaled by
/// the search radius, `certified` always holds) and `equation_residual`
/// carries the residual itself; every tolerance decision goes through the
/// residual there, since the scaled supremum grows with an arbitrary
/// radius choice. Compare through `meets` / `exceeds`, not `value`.
#[derive(Debug, Clone)]
pub struct GapValue {
    pub value: f64,
    pub lower_bound: f64,
    pub upper_bound: Option<f64>,
    pub witness: DVector<f64>,
    pub certified: bool,
    pub unbounded: bool,
    pub equation_residual: Option<f64>,
}

impl GapValue {
    /// The side is conclusively solved at `tol`: certified, and the
    /// decisive quantity (value, or residual on an equation side) is at
    /// or below it.
    pub fn meets(&self, tol: f64) -> bool {
        self.certified
            && match self.equation_residual {
                Some(r) => r <= tol,
                None => self.value <= tol,
            }
    }

    /// The side is conclusively not solved at `tol`: even the attained
    /// lower bound (residual on an equation side) lies above it.
    pub fn exceeds(&self, tol: f64) -> bool {
        match self.equation_residual {
            Some(r) => r > tol,
            None => self.lower_bound > tol,
        }
    }
}

#[derive(Debug, Clone)]
pub struct GapReport {
    pub primal1: GapValue,
    pub primal2: GapValue,
    pub minty1: GapValue,
    pub minty2: GapValue,
}

impl GapReport {
    pub fn max_primal(&self) -> f64 {
        self.primal1.value.max(self.primal2.value)
    }
}

pub(crate) fn split_indicators(
    f: &ConvexExtendedFunction,
) -> (ConvexExtendedFunction, Vec<ConvexSet>) {
    let mut fin = Vec::new();
    let mut sets = Vec::new();
    for t in &f.terms {
        match t {
            Term::Indicator { set } => sets.push(set.clone()),
            other => fin.push(other.clone()),
        }
    }
    (ConvexExtendedFunction::new(fin), sets)
}

fn check_point(
    name: &str,
    x: &DVector<f64>,
    dim: usize,
    set: &ConvexSet,
    extra: &[ConvexSet],
) -> Result<()> {
    if x.len() != dim {
        return Err(Error::Input(format!(
            "{name}: length {} does not match the {dim}-dim space",
            x.len()
        )));
    }
    if !set.contains(x, FEAS_TOL) {
        return Err(Error::Precondition(format!(
            "{name}: not feasible within {FEAS_TOL:e}"
        )));
    }
    for s in extra {
        if !s.contains(x, FEAS_TOL) {
            return Err(Error::Precondition(format!(
                "{name}: outside the domain of the convex term"
            )));
        }
    }
    Ok(())
}

/// Data of one relation, mapped into its own space so both sides share one
/// code path.
struct Side {
    b: DVector<f64>,
    pieces: Vec<DVector<f64>>,
    anchor: DVector<f64>,
    psi_fin: ConvexExtendedFunction,
    psi_anchor: f64,
    region: Region,
}

fn build_side(p: &CoupledProblem, u: &DVector<f64>, w: &DVector<f64>, first: bool, opts: &GapOptions) -> Result<Side> {
    let (anchor, par, set, conv, op, rhs) = if first {
        (u, w, &p.set_c, &p.psi, &p.op_a, &p.rhs_h)
    } else {
        (w, u, &p.set_d, &p.theta, &p.op_b, &p.rhs_l)
    };
    let (psi_fin, extra_sets) = split_indicators(conv);
    check_point(
        if first { "u" } else { "w" },
        anchor,
        if first { p.layout.n_v } else { p.layout.n_e },
        set,
        &extra_sets,
    )?;
    // the certificate is conditional on an admissible parameter
    let (par_set, par_conv) = if first {
        (&p.set_d, &p.theta)
    } else {
        (&p.set_c, &p.psi)
    };
    let (_, par_extra) = split_indicators(par_conv);
    check_point(
        if first { "w" } else { "u" },
        par,
        if first { p.layout.n_e } else { p.layout.n_v },
        par_set,
        &par_extra,
    )?;
    let b = rhs - op.eval(par, anchor);
    let (gamma, delta, bif) = if first {
        (&p.gamma1, &p.delta1, &p.j_fun)
    } else {
        (&p.gamma2, &p.delta2, &p.h_fun)
    };
    let sub = bif.clarke_subdiff(&delta.apply(par), &gamma.apply(anchor));
    let pieces: Vec<DVector<f64>> = sub
        .vertices
        .iter()
        .map(|xi| gamma.apply_transpose(xi))
        .collect();
    let mut sets = vec![set.clone()];
    sets.extend(extra_sets);
    let search = if sets.iter().any(|s| s.is_bounded()) {
        None
    } else {
        Some((anchor.clone(), opts.search_radius))
    };
    let psi_anchor = psi_fin.eval(anchor);
    Ok(Side {
        b,
        pieces,
        anchor: anchor.clone(),
        psi_fin,
        psi_anchor,
        region: Region::new(sets, search),
    })
}

fn primal_gap_side(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    first: bool,
    opts: &GapOptions,
) -> Result<GapValue> {
    let side = build_side(p, u, w, first, opts)?;
    if p.equation_side(first) {
        // supremum of <b, v - x> over the search ball, in closed form; the
        // bracket is exact, and the residual is the decisive quantity
        let res = side.b.norm();
        let value = res * opts.search_radius;
        let witness = if res > 0.0 {
            &side.anchor + (opts.search_radius / res) * &side.b
        } else {
            side.anchor.clone()
        };
        return Ok(GapValue {
            value,
            lower_bound: value,
            upper_bound: Some(value),
            witness,
            certified: true,
            unbounded: false,
            equation_residual: Some(res),
        });
    }
    let prob = ConcaveMaxProblem {
        b: side.b,
        pieces: side.pieces,
        anchor: side.anchor,
        psi_fin: &side.psi_fin,
        psi_anchor: side.psi_anchor,
        region: side.region,
    };
    let max_opts = MaxOptions {
        cert_tol: opts.cert_tol,
        multi_start: opts.multi_start,
        ascent_iters: opts.ascent_iters,
        seed: opts.seed.wrapping_add(if first { 0 } else { 1 }),
        ..MaxOptions::default()
    };
    let out = maximize_concave(&prob, &max_opts)?;
    let unbounded = out.boundary_hit
        && out.ub.map(|ub| ub > opts.cert_tol).unwrap_or(true);
    Ok(GapValue {
        value: if unbounded {
            f64::INFINITY
        } else {
            out.ub.unwrap_or(out.lb)
        },
        lower_bound: out.lb,
        upper_bound: out.ub,
        witness: out.arg,
        certified: !unbounded && out.certified,
        unbounded,
        equation_residual: None,
    })
}

pub fn primal_gap_1(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    opts: &GapOptions,
) -> Result<GapValue> {
    primal_gap_side(p, u, w, true, opts)
}

pub fn primal_gap_2(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    opts: &GapOptions,
) -> Result<GapValue> {
    primal_gap_side(p, u, w, false, opts)
}

fn minty_gap_side(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    first: bool,
    opts: &GapOptions,
) -> Result<GapValue> {
    let side = build_side(p, u, w, first, opts)?;
    let (gamma, delta, bif, op, rhs, par) = if first {
        (&p.gamma1, &p.delta1, &p.j_fun, &p.op_a, &p.rhs_h, w)
    } else {
        (&p.gamma2, &p.delta2, &p.h_fun, &p.op_b, &p.rhs_l, u)
    };
    let anchor = side.anchor.clone();
    let psi_anchor = side.psi_anchor;
    let psi_fin = side.psi_fin.clone();
    let dp = delta.apply(par);
    let objective = |x: &DVector<f64>| -> f64 {
        let d = x - &anchor;
        rhs.dot(&d) - op.eval(par, x).dot(&d)
            - bif.clarke_dir(&dp, &gamma.apply(x), &gamma.apply(&d))
            - psi_fin.eval(x)
            + psi_anchor
    };
    let dim = anchor.len();
    let grid_axes = if dim <= 4 {
        Some(((2_000f64).powf(1.0 / dim as f64).ceil() as usize).clamp(2, 2_000))
    } else {
        None
    };
    let starts = [side.region.project(&anchor)?];
    let max_opts = MaxOptions {
        cert_tol: opts.cert_tol,
        multi_start: opts.multi_start,
        ascent_iters: opts.ascent_iters,
        seed: opts.seed.wrapping_add(if first { 2 } else { 3 }),
        ..MaxOptions::default()
    };
    let (witness, lb) =
        maximize_black_box(objective, &side.region, &starts, &max_opts, grid_axes)?;
    let boundary = side
        .region
        .search
        .as_ref()
        .map(|(c, r)| (&witness - c).norm() >= 0.999 * r)
        .unwrap_or(false);
    Ok(GapValue {
        value: lb,
        lower_bound: lb,
        upper_bound: None,
        witness,
        certified: false,
        unbounded: boundary,
        equation_residual: None,
    })
}

pub fn minty_gap_1(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    opts: &GapOptions,
) -> Result<GapValue> {
    minty_gap_side(p, u, w, true, opts)
}

pub fn minty_gap_2(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    opts: &GapOptions,
) -> Result<GapValue> {
    minty_gap_side(p, u, w, false, opts)
}

/// Both primal gaps; the solver's convergence check.
pub fn primal_pair(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    opts: &GapOptions,
) -> Result<(GapValue, GapValue)> {
    Ok((
        primal_gap_side(p, u, w, true, opts)?,
        primal_gap_side(p, u, w, false, opts)?,
    ))
}

/// All four gaps at once.
pub fn report(
    p: &CoupledProblem,
    u: &DVector<f64>,
    w: &DVector<f64>,
    opts: &GapOptions,
) -> Result<GapReport> {
    Ok(GapReport {
        primal1: primal_gap_side(p, u, w, true, opts)?,
        primal2: primal_gap_side(p, u, w, false, opts)?,
        minty1: minty_gap_side(p, u, w, true, opts)?,
        minty2: minty_gap_side(p, u, w, false, opts)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{MaxSmoothBifunction, Piece};
    use crate::operators::CoupledOperator;
    use crate::spaces::{LinearMap, SpaceLayout};
    use nalgebra::DMatrix;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x])
    }

    /// One-dimensional problem in u with a trivial second relation.
    fn toy_problem(
        op_a: CoupledOperator,
        j_fun: MaxSmoothBifunction,
        psi: ConvexExtendedFunction,
        set_c: ConvexSet,
        rhs_h: f64,
    ) -> CoupledProblem {
        let layout = SpaceLayout {
            n_v: 1,
            n_e: 1,
            n_x: 1,
            n_y: 1,
            n_z1: 1,
            n_z2: 1,
        };
        CoupledProblem {
            layout,
            op_a,
            op_b: CoupledOperator::Affine {
                p: DMatrix::identity(1, 1),
                k: DMatrix::zeros(1, 1),
                a: DVector::zeros(1),
            },
            j_fun,
            h_fun: MaxSmoothBifunction::zero(1, 1),
            psi,
            theta: ConvexExtendedFunction::zero(),
            set_c,
            set_d: ConvexSet::make_box(vec1(-2.0), vec1(2.0)).unwrap(),
            gamma1: LinearMap::identity(1),
            gamma2: LinearMap::identity(1),
            delta1: LinearMap::identity(1),
            delta2: LinearMap::identity(1),
            rhs_h: vec1(rhs_h),
            rhs_l: DVector::zeros(1),
            anchor_u0: None,
            anchor_w0: None,
            profile_a: None,
            profile_b: None,
            kind: None,
        }
    }

    fn affine_1d(p: f64, a: f64) -> CoupledOperator {
        CoupledOperator::Affine {
            p: DMatrix::from_element(1, 1, p),
            k: DMatrix::zeros(1, 1),
            a: vec1(a),
        }
    }

    #[test]
    fn primal_gap_vanishes_at_solution() {
        // A(u) = u - 1 on C = [0, 2]: solution u = 1
        let p = toy_problem(
            affine_1d(1.0, -1.0),
            MaxSmoothBifunction::zero(1, 1),
            ConvexExtendedFunction::zero(),
            ConvexSet::make_box(vec1(0.0), vec1(2.0)).unwrap(),
            0.0,
        );
        let g = primal_gap_1(&p, &vec1(1.0), &vec1(0.0), &GapOptions::default()).unwrap();
        assert!(g.certified);
        assert!(g.value.abs() <= 1e-12, "value = {}", g.value);
        assert!(g.lower_bound >= -1e-12);
    }

    #[test]
    fn primal_gap_measures_violation() {
        // same problem at u = 0: gap = max over [0,2] of v = 2
        let p = toy_problem(
            affine_1d(1.0, -1.0),
            MaxSmoothBifunction::zero(1, 1),
            ConvexExtendedFunction::zero(),
            ConvexSet::make_box(vec1(0.0), vec1(2.0)).unwrap(),
            0.0,
        );
        let g = primal_gap_1(&p, &vec1(0.0), &vec1(0.0), &GapOptions::default()).unwrap();
        assert!(g.certified);
        assert!((g.value - 2.0).abs() <= 1e-10, "value = {}", g.value);
        assert!((g.witness[0] - 2.0).abs() <= 1e-10);
    }

    #[test]
    fn hemivariational_term_balances_at_zero() {
        // A = 0, J(p, x) = |x| on C = [-1, 1]: u = 0 is a solution; the
        // kink needs the dual mixture to certify
        let j = MaxSmoothBifunction::new(
            1,
            1,
            vec![
                Piece::Affine {
                    g_p: DVector::zeros(1),
                    g_x: vec1(1.0),
                    b: 0.0,
                },
                Piece::Affine {
                    g_p: DVector::zeros(1),
                    g_x: vec1(-1.0),
                    b: 0.0,
                },
            ],
        )
        .unwrap();
        let p = toy_problem(
            CoupledOperator::zero(1, 1),
            j,
            ConvexExtendedFunction::zero(),
            ConvexSet::make_box(vec1(-1.0), vec1(1.0)).unwrap(),
            0.0,
        );
        let g = primal_gap_1(&p, &vec1(0.0), &vec1(0.0), &GapOptions::default()).unwrap();
        assert!(g.certified);
        assert!(g.value.abs() <= 1e-10, "value = {}", g.value);

        // off the kink only one piece is active and u = 0.5 violates
        let g2 = primal_gap_1(&p, &vec1(0.5), &vec1(0.0), &GapOptions::default()).unwrap();
        assert!(g2.certified);
        assert!((g2.value - 1.5).abs() <= 1e-10, "value = {}", g2.value);
        assert!((g2.witness[0] + 1.0).abs() <= 1e-10);
    }

    #[test]
    fn minty_gap_frozen_values() {
        let p = toy_problem(
            affine_1d(1.0, -1.0),
            MaxSmoothBifunction::zero(1, 1),
            ConvexExtendedFunction::zero(),
            ConvexSet::make_box(vec1(0.0), vec1(2.0)).unwrap(),
            0.0,
        );
        let opts = GapOptions::default();
        let g = minty_gap_1(&p, &vec1(1.0), &vec1(0.0), &opts).unwrap();
        assert!(!g.certified);
        assert!(g.value.abs() <= 1e-9, "value = {}", g.value);
        // at u = 0 the map x -> -(x-1)x peaks at x = 1/2 with value 1/4
        let g2 = minty_gap_1(&p, &vec1(0.0), &vec1(0.0), &opts).unwrap();
        assert!((g2.value - 0.25).abs() <= 1e-6, "value = {}", g2.value);
        assert!((g2.witness[0] - 0.5).abs() <= 1e-3);
    }

    #[test]
    fn whole_space_side_reports_equation_residual() {
        // C = R with no kink and no convex term is the equation A(u) = h;
        // the gap over the search ball is exactly residual * radius and the
        // residual itself decides certification
        let p = toy_problem(
            affine_1d(1.0, 0.0),
            MaxSmoothBifunction::zero(1, 1),
            ConvexExtendedFunction::zero(),
            ConvexSet::whole(1),
            0.2,
        );
        let opts = GapOptions {
            cert_tol: 1e-7,
            ..GapOptions::default()
        };
        let at_sol = primal_gap_1(&p, &vec1(0.2), &vec1(0.0), &opts).unwrap();
        assert!(at_sol.certified, "gap = {:?}", at_sol.value);
        assert_eq!(at_sol.equation_residual, Some(0.0));
        assert!(at_sol.meets(1e-7));
        assert!(!at_sol.unbounded);

        let away = primal_gap_1(&p, &vec1(0.0), &vec1(0.0), &opts).unwrap();
        assert!(away.certified);
        assert!(!away.meets(1e-7));
        assert!(!away.unbounded);
        assert_eq!(away.equation_residual, Some(0.2));
        assert!((away.value - 0.2 * opts.search_radius).abs() <= 1e-9);
        assert!(away.exceeds(1e-7));
        assert!(away.lower_bound > 1.0);
    }

    #[test]
    fn psi_l1_shifts_the_balance_point() {
        // A(u) = u, h = 0.3, psi = |.|: 0 solves since |h| <= 1
        let p = toy_problem(
            affine_1d(1.0, 0.0),
            MaxSmoothBifunction::zero(1, 1),
            ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 1.0 }]),
            ConvexSet::make_box(vec1(-2.0), vec1(2.0)).unwrap(),
            0.3,
        );
        let g = primal_gap_1(&p, &vec1(0.0), &vec1(0.0), &GapOptions::default()).unwrap();
        assert!(g.certified);
        assert!(g.value.abs() <= 1e-12, "value = {}", g.value);
    }

    #[test]
    fn second_relation_mirrors_first() {
        // B(w) = w + 0.5 on D = [-2, 2]: w = -0.5 zeroes the gap
        let p = toy_problem(
            affine_1d(1.0, -1.0),
            MaxSmoothBifunction::zero(1, 1),
            ConvexExtendedFunction::zero(),
            ConvexSet::make_box(vec1(0.0), vec1(2.0)).unwrap(),
            0.0,
        );
        let mut p = p;
        p.op_b = CoupledOperator::Affine {
            p: DMatrix::identity(1, 1),
            k: DMatrix::zeros(1, 1),
            a: vec1(0.5),
        };
        let g = primal_gap_2(&p, &vec1(1.0), &vec1(-0.5), &GapOptions::default()).unwrap();
        assert!(g.certified);
        assert!(g.value.abs() <= 1e-12, "value = {}", g.value);
        let g_bad = primal_gap_2(&p, &vec1(1.0), &vec1(1.0), &GapOptions::default()).unwrap();
        assert!(g_bad.value > 1.0);
    }

    #[test]
    fn gap_against_grid_oracle() {
        // J = max(2x + 1, -x + 1) shifted to vanish at 0 via its own value:
        // direct grid maximization of the gap integrand must agree
        let j = MaxSmoothBifunction::new(
            1,
            1,
            vec![
                Piece::Affine {
                    g_p: vec1(0.5),
                    g_x: vec1(2.0),
                    b: 0.0,
                },
                Piece::Affine {
                    g_p: DVector::zeros(1),
                    g_x: vec1(-1.0),
                    b: 0.0,
                },
            ],
        )
        .unwrap();
        let psi = ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 0.25 }]);
        let p = toy_problem(
            affine_1d(1.0, -0.4),
            j.clone(),
            psi.clone(),
            ConvexSet::make_box(vec1(-1.5), vec1(2.0)).unwrap(),
            0.1,
        );
        let u = vec1(0.3);
        let w = vec1(0.7);
        let g = primal_gap_1(&p, &u, &w, &GapOptions::default()).unwrap();

        // oracle: dense scan of Phi(v)
        let b = 0.1 - (0.3 - 0.4);
        let mut best = f64::NEG_INFINITY;
        let n = 700_000;
        for k in 0..=n {
            let v = -1.5 + 3.5 * k as f64 / n as f64;
            let d = v - 0.3;
            let phi = b * d - j.clarke_dir(&vec1(0.7), &u, &vec1(d)) - psi.eval(&vec1(v))
                + psi.eval(&u);
            best = best.max(phi);
        }
        assert!(g.certified);
        assert!(
            (g.value - best).abs() <= 1e-5,
            "engine {} vs grid {}",
            g.value,
            best
        );
        assert!(g.value >= best - 1e-12, "upper bound must dominate the scan");
    }

    #[test]
    fn infeasible_point_is_rejected() {
        let p = toy_problem(
            affine_1d(1.0, -1.0),
            MaxSmoothBifunction::zero(1, 1),
            ConvexExtendedFunction::zero(),
            ConvexSet::make_box(vec1(0.0), vec1(2.0)).unwrap(),
            0.0,
        );
        let err = primal_gap_1(&p, &vec1(3.0), &vec1(0.0), &GapOptions::default());
        assert!(matches!(err, Err(Error::Precondition(_))));
        let err2 = primal_gap_1(&p, &vec1(1.0), &vec1(5.0), &GapOptions::default());
        assert!(matches!(err2, Err(Error::Precondition(_))));
    }

    #[test]
    fn brackets_are_ordered_and_nonnegative_on_feasible_points() {
        // random affine/kink problems, feasible probes: lb <= ub, lb >= -eps,
        // and certification implies a tight bracket
        use rand::Rng;
        let mut rng = crate::numeric::rng_for(7, &[0x9a9]);
        for _ in 0..40 {
            let slope: f64 = rng.random_range(0.2..2.0);
            let shift: f64 = rng.random_range(-1.0..1.0);
            let weight: f64 = rng.random_range(0.0..0.8);
            let gx: f64 = rng.random_range(-1.5..1.5);
            let j = MaxSmoothBifunction::new(
                1,
                1,
                vec![
                    Piece::Affine {
                        g_p: DVector::zeros(1),
                        g_x: vec1(gx),
                        b: 0.0,
                    },
                    Piece::Affine {
                        g_p: DVector::zeros(1),
                        g_x: vec1(-1.0),
                        b: 0.0,
                    },
                ],
            )
            .unwrap();
            let p = toy_problem(
                affine_1d(slope, shift),
                j,
                ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight }]),
                ConvexSet::make_box(vec1(-2.0), vec1(2.0)).unwrap(),
                rng.random_range(-0.5..0.5),
            );
            let u = vec1(rng.random_range(-2.0..2.0));
            let w = vec1(rng.random_range(-2.0..2.0));
            let g = primal_gap_1(&p, &u, &w, &GapOptions::default()).unwrap();
            let ub = g.upper_bound.expect("structured path should bracket");
            assert!(g.lower_bound >= -1e-10, "gap must be nonnegative");
            assert!(ub >= g.lower_bound - 1e-12);
            assert!(g.certified, "bracket {} .. {}", g.lower_bound, ub);
            assert!((ub - g.lower_bound) <= 1e-9);
        }
    }
}
