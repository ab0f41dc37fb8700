//! Structural hypothesis checks: growth and coercivity audits with
//! numerical probes, an a-priori bound on any solution pair derived from
//! the coercivity profiles, the invariance radius used by the solver
//! diagnostics, and a falsifier that hunts for pseudomonotonicity
//! violations.

use nalgebra::DVector;
use rand::Rng;

use crate::error::{Error, Result};
use crate::functions::MaxSmoothBifunction;
use crate::numeric::rng_for;
use crate::operators::{coercivity_value, CoercivityProfile, CoupledOperator};
use crate::problem::CoupledProblem;
use crate::spaces::{ConvexSet, LinearMap};

const PROBE_TS: [f64; 4] = [1.0, 10.0, 100.0, 1_000.0];
const PROBE_SS: [f64; 3] = [0.0, 1.0, 10.0];
/// Relative slack allowed between a declared profile and the probe floor.
const PROFILE_MARGIN: f64 = 0.05;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProfileSource {
    Given,
    Derived,
    Missing,
}

#[derive(Debug, Clone)]
pub struct CoercivityProbe {
    pub t: f64,
    pub s: f64,
    pub measured: f64,
    pub declared: Option<f64>,
    pub witness_x: DVector<f64>,
    pub witness_par: DVector<f64>,
}

#[derive(Debug, Clone)]
pub struct CoercivityAudit {
    pub source: ProfileSource,
    pub probes: Vec<CoercivityProbe>,
    /// Declared profile stays below every probe floor (up to the margin).
    pub consistent: bool,
    pub worst_margin: f64,
    /// The probe floor grows along the t ladder, the trend the coercivity
    /// hypothesis predicts. Reported, never enforced.
    pub trend_ok: bool,
}

#[derive(Debug, Clone)]
pub struct PseudoWitness {
    pub parameter: DVector<f64>,
    pub x: DVector<f64>,
    pub y: DVector<f64>,
    pub premise: f64,
    pub conclusion: f64,
}

#[derive(Debug, Clone)]
pub struct OperatorAudit {
    pub growth_constant: Option<f64>,
    pub growth_sampled_ok: bool,
    pub monotone_min_eig: Option<f64>,
    pub pseudomonotone_by_construction: bool,
    pub pseudomonotone_witness: Option<PseudoWitness>,
    pub coercivity: CoercivityAudit,
}

#[derive(Debug, Clone)]
pub struct HypothesisReport {
    pub op_a: OperatorAudit,
    pub op_b: OperatorAudit,
    pub j_growth: f64,
    pub h_growth: f64,
    pub psi_minorant: (f64, f64),
    pub theta_minorant: (f64, f64),
    pub slope_product: Option<f64>,
    pub all_consistent: bool,
}

/// A-priori bound data: any solution pair obeys ||u|| <= t_star,
/// ||w|| <= s_star; r_solution pads the box and invariance_radius is the
/// level the damped sweeps cannot escape.
#[derive(Debug, Clone)]
pub struct SolutionBound {
    pub t_star: f64,
    pub s_star: f64,
    pub r_solution: f64,
    pub slope_product: f64,
    pub invariance_radius: f64,
}

/// Linear coercivity data (a, b, c) for one side, from the declared
/// profile or derived from the operator and bifunction structure.
fn side_profile(p: &CoupledProblem, first: bool) -> Result<(f64, f64, f64, ProfileSource)> {
    let (op, bif, gamma, delta, profile) = if first {
        (&p.op_a, &p.j_fun, &p.gamma1, &p.delta1, &p.profile_a)
    } else {
        (&p.op_b, &p.h_fun, &p.gamma2, &p.delta2, &p.profile_b)
    };
    if let Some(pr) = profile {
        return match pr {
            CoercivityProfile::Linear { a, b, c } => Ok((*a, *b, *c, ProfileSource::Given)),
            CoercivityProfile::UserTable { .. } => Err(Error::Unsupported(
                "solution bound needs a linear coercivity profile".into(),
            )),
        };
    }
    let lam = match op.sym_part_min_eig() {
        Some(v) if matches!(op, CoupledOperator::Affine { .. }) => v,
        _ => {
            return Err(Error::NoFiniteBound(
                "no coercivity profile given and none derivable for this operator".into(),
            ))
        }
    };
    let gn = gamma.op_norm();
    let dn = delta.op_norm();
    let all_affine = bif.grad_bound(0.0, 0.0) == bif.grad_bound(1e6, 1e6);
    let (a, b, c) = if all_affine {
        // gradients of affine pieces are constant: tight profile
        let g = bif.grad_bound(0.0, 0.0);
        (
            lam,
            op.coupling_norm(),
            op.eval(&DVector::zeros(delta.cols()), &DVector::zeros(gamma.cols()))
                .norm()
                + g * gn,
        )
    } else {
        let cj = bif.growth_constant();
        (
            lam - cj * gn * gn,
            op.coupling_norm() + cj * gn * dn,
            op.eval(&DVector::zeros(delta.cols()), &DVector::zeros(gamma.cols()))
                .norm()
                + cj * gn,
        )
    };
    if a <= 0.0 {
        return Err(Error::NoFiniteBound(format!(
            "derived coercivity slope {a:.6} is not positive"
        )));
    }
    Ok((a, b, c, ProfileSource::Derived))
}

struct SideBound {
    a: f64,
    q_s: f64,
    q_0: f64,
    p_s: f64,
    p_0: f64,
}

impl SideBound {
    /// Largest t allowed by a t^2 - q(s) t - p(s) <= 0.
    fn t_max(&self, s: f64) -> f64 {
        let q = self.q_s * s + self.q_0;
        let p = (self.p_s * s + self.p_0).max(0.0);
        (q + (q * q + 4.0 * self.a * p).sqrt()) / (2.0 * self.a)
    }
}

fn side_bound(p: &CoupledProblem, first: bool) -> Result<SideBound> {
    let (a, b_prof, c_prof, _) = side_profile(p, first)?;
    let (op, bif, gamma, delta, conv, rhs, anchor) = if first {
        (
            &p.op_a,
            &p.j_fun,
            &p.gamma1,
            &p.delta1,
            &p.psi,
            &p.rhs_h,
            p.anchor_u()?,
        )
    } else {
        (
            &p.op_b,
            &p.h_fun,
            &p.gamma2,
            &p.delta2,
            &p.theta,
            &p.rhs_l,
            p.anchor_w()?,
        )
    };
    let n0 = anchor.norm();
    let b_op = if n0 > 0.0 { op.growth_constant()? } else { 0.0 };
    let cj = bif.growth_constant();
    let gn = gamma.op_norm();
    let dn = delta.op_norm();
    let (alpha, beta) = conv.minorant();
    let psi0 = conv.eval(&anchor);
    if !psi0.is_finite() {
        return Err(Error::Precondition(
            "anchor lies outside the domain of the convex term".into(),
        ));
    }
    let hn = rhs.norm();
    Ok(SideBound {
        a,
        q_s: b_prof,
        q_0: c_prof + alpha + hn + b_op * n0 + cj * gn * gn * n0,
        p_s: b_op * n0 + cj * gn * dn * n0,
        p_0: b_op * n0 + cj * gn * n0 + psi0 + beta + hn * n0,
    })
}

pub fn solution_bound(p: &CoupledProblem) -> Result<SolutionBound> {
    let side_a = side_bound(p, true)?;
    let side_b = side_bound(p, false)?;
    let slope_product = (side_a.q_s / side_a.a) * (side_b.q_s / side_b.a);
    if slope_product >= 1.0 {
        return Err(Error::NoFiniteBound(format!(
            "coupling slopes multiply to {slope_product:.6} >= 1; the profiles do not close"
        )));
    }
    let mut t = 0.0f64;
    for _ in 0..10_000 {
        let next = side_a.t_max(side_b.t_max(t));
        if !next.is_finite() || next > 1e12 {
            return Err(Error::NoFiniteBound(
                "fixed-point iteration for the bound diverged".into(),
            ));
        }
        if (next - t).abs() <= 1e-12 * (1.0 + next) {
            t = next;
            break;
        }
        t = next;
    }
    let t_star = t;
    let s_star = side_b.t_max(t_star);

    // invariance: the level both per-side bounds map into itself
    let mut m = t_star.max(s_star);
    for _ in 0..10_000 {
        let next = side_a.t_max(m).max(side_b.t_max(m));
        if !next.is_finite() || next > 1e12 {
            return Err(Error::NoFiniteBound(
                "fixed-point iteration for the invariance level diverged".into(),
            ));
        }
        if (next - m).abs() <= 1e-12 * (1.0 + next) {
            m = next;
            break;
        }
        m = next.max(m);
    }
    let r_solution = 1.1 * t_star.max(s_star);
    Ok(SolutionBound {
        t_star,
        s_star,
        r_solution,
        slope_product,
        invariance_radius: (1.1 * m).max(r_solution),
    })
}

pub fn invariance_radius(p: &CoupledProblem) -> Result<f64> {
    Ok(solution_bound(p)?.invariance_radius)
}

/// Deterministic candidate points of a set: projected origin, axis support
/// points, low-dimensional corners, then seeded feasible samples.
fn candidate_points(
    set: &ConvexSet,
    seed: u64,
    tag: u64,
    samples: usize,
) -> Result<Vec<DVector<f64>>> {
    let dim = set.dim();
    let mut out: Vec<DVector<f64>> = Vec::new();
    let push = |v: DVector<f64>, out: &mut Vec<DVector<f64>>| {
        if !out.iter().any(|q| (q - &v).norm() <= 1e-12) {
            out.push(v);
        }
    };
    push(set.project(&DVector::zeros(dim))?, &mut out);
    if set.is_bounded() {
        for i in 0..dim {
            for sgn in [1.0, -1.0] {
                let mut e = DVector::zeros(dim);
                e[i] = sgn;
                push(set.support_point(&e)?, &mut out);
            }
        }
        for corner in set.corners(3) {
            push(corner, &mut out);
        }
    }
    let (lo, hi) = match set.bounding_box() {
        Some(bb) => bb,
        None => (
            DVector::from_element(dim, -10.0),
            DVector::from_element(dim, 10.0),
        ),
    };
    let mut rng = rng_for(seed, &[0x9d0, tag]);
    for _ in 0..samples {
        let x = DVector::from_fn(dim, |i, _| rng.random_range(lo[i]..=hi[i]));
        push(set.project(&x)?, &mut out);
    }
    Ok(out)
}

/// Hunt for a pair x, y in the set with <T(par, x), y - x> >= 0 but
/// <T(par, y), y - x> < 0. The first violating pair in the deterministic
/// candidate order is returned.
pub fn falsify_pseudomonotone(
    op: &CoupledOperator,
    set: &ConvexSet,
    parameters: &[DVector<f64>],
    seed: u64,
    samples: usize,
) -> Result<Option<PseudoWitness>> {
    let points = candidate_points(set, seed, 0x7031, samples)?;
    for par in parameters {
        let values: Vec<DVector<f64>> = points.iter().map(|x| op.eval(par, x)).collect();
        for (ix, x) in points.iter().enumerate() {
            for (iy, y) in points.iter().enumerate() {
                if ix == iy {
                    continue;
                }
                let d = y - x;
                let premise = values[ix].dot(&d);
                if premise >= -1e-12 {
                    let conclusion = values[iy].dot(&d);
                    if conclusion < -1e-9 {
                        return Ok(Some(PseudoWitness {
                            parameter: par.clone(),
                            x: x.clone(),
                            y: y.clone(),
                            premise,
                            conclusion,
                        }));
                    }
                }
            }
        }
    }
    Ok(None)
}

fn unit_dirs(dim: usize, seed: u64, tag: u64, extra: usize) -> Vec<DVector<f64>> {
    let mut dirs = Vec::new();
    for i in 0..dim {
        for sgn in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[i] = sgn;
            dirs.push(e);
        }
    }
    let mut rng = rng_for(seed, &[0xd1b, tag]);
    let mut added = 0;
    while added < extra {
        let v = DVector::from_fn(dim, |_, _| rng.random_range(-1.0..1.0));
        let n = v.norm();
        if n > 1e-6 {
            dirs.push(v / n);
            added += 1;
        }
    }
    dirs
}

fn coercivity_audit(
    op: &CoupledOperator,
    bif: &MaxSmoothBifunction,
    gamma: &LinearMap,
    delta: &LinearMap,
    profile: &Option<CoercivityProfile>,
    derived: Option<(f64, f64, f64)>,
    seed: u64,
    tag: u64,
) -> CoercivityAudit {
    let dim = gamma.cols();
    let par_dim = delta.cols();
    let x_dirs = unit_dirs(dim, seed, tag, 16);
    let par_dirs = unit_dirs(par_dim, seed, tag ^ 1, 6);
    let declared = |t: f64, s: f64| -> Option<f64> {
        match (profile, derived) {
            (Some(pr), _) => Some(pr.eval(t, s)),
            (None, Some((a, b, c))) => Some(a * t - b * s - c),
            (None, None) => None,
        }
    };
    let mut probes = Vec::new();
    let mut consistent = true;
    let mut worst_margin = f64::NEG_INFINITY;
    for &t in &PROBE_TS {
        for &s in &PROBE_SS {
            let mut measured = f64::INFINITY;
            let mut wx = DVector::zeros(dim);
            let mut wp = DVector::zeros(par_dim);
            let par_set: &[DVector<f64>] = if s == 0.0 {
                std::slice::from_ref(&par_dirs[0])
            } else {
                &par_dirs
            };
            for pd in par_set {
                let par = pd * s;
                for xd in &x_dirs {
                    let x = xd * t;
                    if let Ok(v) = coercivity_value(op, bif, delta, gamma, &par, &x) {
                        if v < measured {
                            measured = v;
                            wx = x;
                            wp = par.clone();
                        }
                    }
                }
            }
            let decl = declared(t, s);
            if let Some(r) = decl {
                let margin = r - measured;
                worst_margin = worst_margin.max(margin);
                if margin > PROFILE_MARGIN * (1.0 + r.abs()) {
                    consistent = false;
                }
            }
            probes.push(CoercivityProbe {
                t,
                s,
                measured,
                declared: decl,
                witness_x: wx,
                witness_par: wp,
            });
        }
    }
    // floor of the measured values along the t ladder at fixed s
    let mut trend_ok = true;
    for (si, _) in PROBE_SS.iter().enumerate() {
        for ti in 1..PROBE_TS.len() {
            let prev = probes[(ti - 1) * PROBE_SS.len() + si].measured;
            let cur = probes[ti * PROBE_SS.len() + si].measured;
            if cur <= prev + 1e-9 {
                trend_ok = false;
            }
        }
    }
    let source = match (profile, derived) {
        (Some(_), _) => ProfileSource::Given,
        (None, Some(_)) => ProfileSource::Derived,
        (None, None) => ProfileSource::Missing,
    };
    CoercivityAudit {
        source,
        probes,
        consistent,
        worst_margin: if worst_margin.is_finite() {
            worst_margin
        } else {
            0.0
        },
        trend_ok,
    }
}

fn operator_audit(p: &CoupledProblem, first: bool, seed: u64) -> Result<OperatorAudit> {
    let (op, bif, gamma, delta, set, other_set, profile) = if first {
        (
            &p.op_a,
            &p.j_fun,
            &p.gamma1,
            &p.delta1,
            &p.set_c,
            &p.set_d,
            &p.profile_a,
        )
    } else {
        (
            &p.op_b,
            &p.h_fun,
            &p.gamma2,
            &p.delta2,
            &p.set_d,
            &p.set_c,
            &p.profile_b,
        )
    };
    let growth = op.growth_constant().ok();
    let mut growth_sampled_ok = true;
    if let Some(b) = growth {
        let mut rng = rng_for(seed, &[0x90a, first as u64]);
        let (nx, np) = (gamma.cols(), delta.cols());
        for _ in 0..1_000 {
            let scale = 10f64.powf(rng.random_range(-1.0..3.0));
            let x = DVector::from_fn(nx, |_, _| rng.random_range(-1.0..1.0)) * scale;
            let par = DVector::from_fn(np, |_, _| rng.random_range(-1.0..1.0)) * scale;
            let lhs = op.eval(&par, &x).norm();
            if lhs > b * (1.0 + x.norm() + par.norm()) * (1.0 + 1e-9) {
                growth_sampled_ok = false;
                break;
            }
        }
    }
    let min_eig = op.sym_part_min_eig();
    let by_construction = match op {
        CoupledOperator::Affine { .. } => min_eig.map(|v| v >= -1e-12).unwrap_or(false),
        CoupledOperator::MonotoneGradient { coeff, .. } => *coeff >= 0.0,
    };
    let witness = if by_construction {
        None
    } else {
        let anchors = {
            let mut v = vec![DVector::zeros(delta.cols())];
            let other_anchor = other_set.project(&DVector::zeros(delta.cols()))?;
            if other_anchor.norm() > 0.0 {
                v.push(other_anchor);
            }
            v
        };
        falsify_pseudomonotone(op, set, &anchors, seed, 24)?
    };
    let derived = if profile.is_none() {
        side_profile(p, first)
            .ok()
            .map(|(a, b, c, _)| (a, b, c))
    } else {
        None
    };
    Ok(OperatorAudit {
        growth_constant: growth,
        growth_sampled_ok,
        monotone_min_eig: min_eig,
        pseudomonotone_by_construction: by_construction,
        pseudomonotone_witness: witness,
        coercivity: coercivity_audit(
            op,
            bif,
            gamma,
            delta,
            profile,
            derived,
            seed,
            first as u64,
        ),
    })
}

pub fn audit(p: &CoupledProblem, seed: u64) -> Result<HypothesisReport> {
    p.validate()?;
    let op_a = operator_audit(p, true, seed)?;
    let op_b = operator_audit(p, false, seed)?;
    let slope_product = match (side_profile(p, true), side_profile(p, false)) {
        (Ok((aa, ba, _, _)), Ok((ab, bb, _, _))) => Some((ba / aa) * (bb / ab)),
        _ => None,
    };
    let all_consistent = op_a.growth_sampled_ok
        && op_b.growth_sampled_ok
        && op_a.coercivity.consistent
        && op_b.coercivity.consistent
        && op_a.pseudomonotone_witness.is_none()
        && op_b.pseudomonotone_witness.is_none();
    Ok(HypothesisReport {
        op_a,
        op_b,
        j_growth: p.j_fun.growth_constant(),
        h_growth: p.h_fun.growth_constant(),
        psi_minorant: p.psi.minorant(),
        theta_minorant: p.theta.minorant(),
        slope_product,
        all_consistent,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::functions::{ConvexExtendedFunction, Piece};
    use crate::spaces::SpaceLayout;
    use nalgebra::DMatrix;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x])
    }

    fn coupled_1d(ka: f64, aa: f64, kb: f64, ab: f64) -> CoupledProblem {
        CoupledProblem {
            layout: SpaceLayout {
                n_v: 1,
                n_e: 1,
                n_x: 1,
                n_y: 1,
                n_z1: 1,
                n_z2: 1,
            },
            op_a: CoupledOperator::Affine {
                p: DMatrix::identity(1, 1),
                k: DMatrix::from_element(1, 1, ka),
                a: vec1(aa),
            },
            op_b: CoupledOperator::Affine {
                p: DMatrix::identity(1, 1),
                k: DMatrix::from_element(1, 1, kb),
                a: vec1(ab),
            },
            j_fun: MaxSmoothBifunction::zero(1, 1),
            h_fun: MaxSmoothBifunction::zero(1, 1),
            psi: ConvexExtendedFunction::zero(),
            theta: ConvexExtendedFunction::zero(),
            set_c: ConvexSet::make_box(vec1(0.0), vec1(2.0)).unwrap(),
            set_d: ConvexSet::make_box(vec1(-2.0), vec1(2.0)).unwrap(),
            gamma1: LinearMap::identity(1),
            gamma2: LinearMap::identity(1),
            delta1: LinearMap::identity(1),
            delta2: LinearMap::identity(1),
            rhs_h: vec1(0.0),
            rhs_l: vec1(0.0),
            anchor_u0: None,
            anchor_w0: None,
            profile_a: None,
            profile_b: None,
            kind: None,
        }
    }

    #[test]
    fn bound_closes_for_weak_coupling() {
        // A = u + 0.5 w - 0.75, B = w + 0.5 u: derived profiles give
        // T_A(s) = 0.5 s + 0.75 and T_B(t) = 0.5 t, so t* = 1, s* = 0.5
        let p = coupled_1d(0.5, -0.75, 0.5, 0.0);
        let b = solution_bound(&p).unwrap();
        assert!((b.t_star - 1.0).abs() <= 1e-9, "t* = {}", b.t_star);
        assert!((b.s_star - 0.5).abs() <= 1e-9, "s* = {}", b.s_star);
        assert!((b.r_solution - 1.1).abs() <= 1e-9);
        assert!((b.slope_product - 0.25).abs() <= 1e-12);
        // the known solution (1, -0.5) sits inside the padded radius
        assert!(1.0 <= b.r_solution && 0.5 <= b.r_solution);
        // invariance level: G(m) = max(0.5 m + 0.75, 0.5 m) fixes at 1.5
        assert!((b.invariance_radius - 1.65).abs() <= 1e-9);
    }

    #[test]
    fn dominant_coupling_has_no_finite_bound() {
        let p = coupled_1d(2.0, 0.0, 2.0, 0.0);
        match solution_bound(&p) {
            Err(Error::NoFiniteBound(msg)) => assert!(msg.contains("4.0")),
            other => panic!("expected NoFiniteBound, got {other:?}"),
        }
    }

    #[test]
    fn reverse_operator_is_falsified_at_the_first_pair() {
        // A(u) = -u on [-1, 1]: x = 0, y = 1 violates pseudomonotonicity
        let op = CoupledOperator::Affine {
            p: DMatrix::from_element(1, 1, -1.0),
            k: DMatrix::zeros(1, 1),
            a: DVector::zeros(1),
        };
        let set = ConvexSet::make_box(vec1(-1.0), vec1(1.0)).unwrap();
        let par = [DVector::zeros(1)];
        let w = falsify_pseudomonotone(&op, &set, &par, 0, 24)
            .unwrap()
            .expect("violation must be found");
        assert!(w.x[0].abs() <= 1e-9);
        assert!((w.y[0] - 1.0).abs() <= 1e-9);
        assert!(w.premise.abs() <= 1e-9);
        assert!((w.conclusion + 1.0).abs() <= 1e-9);
        // the witness reproduces from scratch
        let again = falsify_pseudomonotone(&op, &set, &par, 0, 24)
            .unwrap()
            .unwrap();
        assert!((again.x[0] - w.x[0]).abs() <= 1e-9);
        assert!((again.y[0] - w.y[0]).abs() <= 1e-9);
    }

    #[test]
    fn monotone_operator_passes_by_construction() {
        let p = coupled_1d(0.5, -0.75, 0.5, 0.0);
        let rep = audit(&p, 0).unwrap();
        assert!(rep.op_a.pseudomonotone_by_construction);
        assert!(rep.op_a.pseudomonotone_witness.is_none());
        assert!(rep.op_a.growth_sampled_ok);
        assert_eq!(rep.op_a.coercivity.source, ProfileSource::Derived);
        assert!(rep.op_a.coercivity.consistent);
        assert!(rep.op_a.coercivity.trend_ok);
        assert!(rep.all_consistent);
        assert!((rep.slope_product.unwrap() - 0.25).abs() <= 1e-12);
    }

    #[test]
    fn flat_operator_reports_a_flat_trend() {
        let mut p = coupled_1d(0.0, 0.0, 0.0, 0.0);
        p.op_a = CoupledOperator::Affine {
            p: DMatrix::zeros(1, 1),
            k: DMatrix::zeros(1, 1),
            a: DVector::zeros(1),
        };
        let rep = audit(&p, 0).unwrap();
        assert!(!rep.op_a.coercivity.trend_ok);
        // zero slope cannot produce a derived profile
        assert_eq!(rep.op_a.coercivity.source, ProfileSource::Missing);
    }

    #[test]
    fn declared_profile_is_checked_against_probes() {
        let mut p = coupled_1d(0.5, -0.75, 0.5, 0.0);
        // honest claim: a = 1, b = 0.5, c = 0.75
        p.profile_a = Some(CoercivityProfile::Linear {
            a: 1.0,
            b: 0.5,
            c: 0.75,
        });
        let rep = audit(&p, 0).unwrap();
        assert_eq!(rep.op_a.coercivity.source, ProfileSource::Given);
        assert!(rep.op_a.coercivity.consistent);
        assert!(rep.op_a.coercivity.worst_margin <= 0.0 + 1e-9);

        // inflated claim: the probes must reject it
        p.profile_a = Some(CoercivityProfile::Linear {
            a: 3.0,
            b: 0.0,
            c: 0.0,
        });
        let rep2 = audit(&p, 0).unwrap();
        assert!(!rep2.op_a.coercivity.consistent);
        assert!(!rep2.all_consistent);
    }

    #[test]
    fn probe_witnesses_reproduce_their_values() {
        let p = coupled_1d(0.5, -0.75, 0.5, 0.0);
        let rep = audit(&p, 0).unwrap();
        for probe in &rep.op_a.coercivity.probes {
            let v = coercivity_value(
                &p.op_a,
                &p.j_fun,
                &p.delta1,
                &p.gamma1,
                &probe.witness_par,
                &probe.witness_x,
            )
            .unwrap();
            assert!((v - probe.measured).abs() <= 1e-9);
        }
    }

    #[test]
    fn bifunction_growth_feeds_the_bound() {
        // J = |x| tightens nothing here but must not break the bound
        let mut p = coupled_1d(0.5, -0.75, 0.5, 0.0);
        p.j_fun = MaxSmoothBifunction::new(
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
        let b = solution_bound(&p).unwrap();
        // affine pieces shift the derived offset by g_max = 1:
        // T_A(s) = 0.5 s + 1.75, T_B(t) = 0.5 t, t* = 1.75 / 0.75
        assert!((b.t_star - 1.75 / 0.75).abs() <= 1e-9, "t* = {}", b.t_star);
    }
}
