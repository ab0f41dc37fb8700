//! Brute-force reference: enumerate the whole grid over both feasible
//! regions, screen each pair with a cheap lower bound on the primal gaps,
//! and certify the survivors with the full bracket machinery. The solver
//! is never consulted, so oracle hits are an independent route to the
//! solution set.

use std::collections::HashSet;

use nalgebra::DVector;
use rand::Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::functions::{ConvexExtendedFunction, MaxSmoothBifunction, Piece};
use crate::gap::{self, split_indicators, GapOptions};
use crate::numeric::rng_for;
use crate::operators::CoupledOperator;
use crate::optim::Region;
use crate::problem::CoupledProblem;
use crate::spaces::LinearMap;

#[derive(Debug, Clone)]
pub struct OracleOptions {
    /// Requested nodes per axis; lowered automatically until the pair grid
    /// fits `max_cells`.
    pub nodes_per_axis: usize,
    pub max_cells: usize,
    /// Half-width of the scan box on axes no set bounds.
    pub radius: f64,
    /// Acceptance threshold; `None` derives 'scale * step * Lipschitz'.
    pub accept_tol: Option<f64>,
    pub accept_scale: f64,
    /// Clip the scan boxes to (center_u, center_w) +- half-width per axis:
    /// a localized re-certification window around a candidate pair.
    pub window: Option<(DVector<f64>, DVector<f64>, f64)>,
    pub gap: GapOptions,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions {
            nodes_per_axis: 41,
            max_cells: 2_000_000,
            radius: 10.0,
            accept_tol: None,
            accept_scale: 10.0,
            window: None,
            gap: GapOptions::default(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OracleGrid {
    pub per_axis: usize,
    pub nodes_u: usize,
    pub nodes_w: usize,
    pub h_max: f64,
    pub accept_tol: f64,
    pub lipschitz: f64,
    pub screened_out: usize,
    pub certified_checked: usize,
}

#[derive(Debug, Clone)]
pub struct OracleHit {
    pub u: DVector<f64>,
    pub w: DVector<f64>,
    pub gap1: f64,
    pub gap2: f64,
}

#[derive(Debug, Clone)]
pub struct OracleOutcome {
    pub hits: Vec<OracleHit>,
    pub grid: OracleGrid,
    /// Pairs the screen let through that the certifier could not decide.
    pub near_misses: usize,
}

/// One side's cheap gap lower bound: the exact objective evaluated at a
/// fixed feasible candidate list, with the kink term maximized over all
/// pieces (a minorant of the active-piece max, so rejections are sound).
struct Screen<'a> {
    op: &'a CoupledOperator,
    bif: &'a MaxSmoothBifunction,
    gamma: &'a LinearMap,
    delta: &'a LinearMap,
    rhs: &'a DVector<f64>,
    cands: Vec<DVector<f64>>,
    psi_at: Vec<f64>,
    fixed_forms: Option<Vec<DVector<f64>>>,
}

impl<'a> Screen<'a> {
    fn build(
        op: &'a CoupledOperator,
        bif: &'a MaxSmoothBifunction,
        gamma: &'a LinearMap,
        delta: &'a LinearMap,
        rhs: &'a DVector<f64>,
        psi_fin: &ConvexExtendedFunction,
        region: &Region,
        lo: &DVector<f64>,
        hi: &DVector<f64>,
        seed: u64,
        tag: u64,
    ) -> Result<Self> {
        let dim = lo.len();
        let mut cands: Vec<DVector<f64>> = Vec::new();
        let push = |v: DVector<f64>, cands: &mut Vec<DVector<f64>>| {
            if !cands.iter().any(|q| (q - &v).norm() <= 1e-12) {
                cands.push(v);
            }
        };
        push(region.project(&DVector::zeros(dim))?, &mut cands);
        for c in region.corners(3) {
            push(region.project(&c)?, &mut cands);
        }
        for i in 0..dim {
            for sgn in [1.0, -1.0] {
                let mut e = DVector::zeros(dim);
                e[i] = sgn * if hi[i] > lo[i] { hi[i] - lo[i] } else { 1.0 };
                let probe = region.project(&(&cands[0] + e))?;
                push(probe, &mut cands);
            }
        }
        let mut rng = rng_for(seed, &[0x0a7c, tag]);
        for _ in 0..8 {
            let x = DVector::from_fn(dim, |i, _| rng.random_range(lo[i]..=hi[i]));
            push(region.project(&x)?, &mut cands);
        }
        let psi_at = cands.iter().map(|v| psi_fin.eval(v)).collect();
        let all_affine = bif
            .pieces
            .iter()
            .all(|p| matches!(p, Piece::Affine { .. }));
        let fixed_forms = all_affine.then(|| {
            let z = DVector::zeros(bif.n_p.max(1));
            let zx = DVector::zeros(bif.n_x.max(1));
            bif.pieces
                .iter()
                .map(|p| gamma.apply_transpose(&p.grad_x(&z, &zx)))
                .collect()
        });
        Ok(Screen {
            op,
            bif,
            gamma,
            delta,
            rhs,
            cands,
            psi_at,
            fixed_forms,
        })
    }

    fn gap_lb(&self, par: &DVector<f64>, x: &DVector<f64>, psi_x: f64) -> f64 {
        let b = self.rhs - self.op.eval(par, x);
        let owned_forms: Vec<DVector<f64>>;
        let forms: &[DVector<f64>] = match &self.fixed_forms {
            Some(f) => f,
            None => {
                let gp = self.delta.apply(par);
                let gx = self.gamma.apply(x);
                owned_forms = self
                    .bif
                    .pieces
                    .iter()
                    .map(|p| self.gamma.apply_transpose(&p.grad_x(&gp, &gx)))
                    .collect();
                &owned_forms
            }
        };
        let mut best = 0.0_f64;
        for (v, &psi_v) in self.cands.iter().zip(&self.psi_at) {
            let d = v - x;
            let mut val = b.dot(&d) - psi_v + psi_x;
            if !forms.is_empty() {
                val -= forms
                    .iter()
                    .map(|a| a.dot(&d))
                    .fold(f64::NEG_INFINITY, f64::max);
            }
            best = best.max(val);
        }
        best
    }
}

fn scan_box(
    region: &Region,
    dim: usize,
    radius: f64,
) -> (DVector<f64>, DVector<f64>) {
    let (mut lo, mut hi) = region.bounding_box().unwrap_or_else(|| {
        (
            DVector::from_element(dim, f64::NEG_INFINITY),
            DVector::from_element(dim, f64::INFINITY),
        )
    });
    for i in 0..dim {
        if !lo[i].is_finite() {
            lo[i] = -radius;
        }
        if !hi[i].is_finite() {
            hi[i] = radius;
        }
    }
    (lo, hi)
}

/// Cartesian grid over the box, every node projected into the region,
/// exact duplicates dropped. A pinned point becomes an exact node on
/// every axis: clipping a window at a set boundary redistributes the
/// nodes, and near parameter-side kinks the acceptable set can be a
/// sliver only the pin itself hits.
fn grid_points(
    region: &Region,
    lo: &DVector<f64>,
    hi: &DVector<f64>,
    per_axis: usize,
    pin: Option<&DVector<f64>>,
) -> Result<(Vec<DVector<f64>>, f64)> {
    let dim = lo.len();
    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(dim);
    let mut h_max = 0.0_f64;
    for i in 0..dim {
        let span = hi[i] - lo[i];
        if span <= 1e-12 {
            axes.push(vec![0.5 * (lo[i] + hi[i])]);
        } else {
            let n = per_axis.max(2);
            let h = span / (n - 1) as f64;
            h_max = h_max.max(h);
            let mut ax: Vec<f64> = (0..n).map(|k| lo[i] + h * k as f64).collect();
            if let Some(c) = pin {
                if c[i] >= lo[i] && c[i] <= hi[i] && !ax.iter().any(|v| v.to_bits() == c[i].to_bits()) {
                    ax.push(c[i]);
                    ax.sort_by(f64::total_cmp);
                }
            }
            axes.push(ax);
        }
    }
    let mut seen: HashSet<Vec<u64>> = HashSet::new();
    let mut out = Vec::new();
    let mut idx = vec![0usize; dim];
    loop {
        let x = DVector::from_fn(dim, |i, _| axes[i][idx[i]]);
        let p = region.project(&x)?;
        let key: Vec<u64> = p.iter().map(|v| v.to_bits()).collect();
        if seen.insert(key) {
            out.push(p);
        }
        let mut carry = 0;
        while carry < dim {
            idx[carry] += 1;
            if idx[carry] < axes[carry].len() {
                break;
            }
            idx[carry] = 0;
            carry += 1;
        }
        if carry == dim {
            break;
        }
    }
    Ok((out, h_max))
}

/// Joint Lipschitz estimate for one side's gap as a function of the pair,
/// over the scan boxes. Deliberately generous; it only scales the grid
/// acceptance threshold.
#[allow(clippy::too_many_arguments)]
fn side_lipschitz(
    op: &CoupledOperator,
    bif: &MaxSmoothBifunction,
    gamma: &LinearMap,
    delta: &LinearMap,
    rhs: &DVector<f64>,
    psi_fin: &ConvexExtendedFunction,
    rx: f64,
    rp: f64,
    diam: f64,
) -> f64 {
    let gn = gamma.op_norm();
    let dn = delta.op_norm();
    let g0 = bif.grad_bound(dn * rp, gn * rx);
    let gvx = bif.grad_bound(dn * rp, gn * rx + 1.0) - g0;
    let gvp = bif.grad_bound(dn * rp + 1.0, gn * rx) - g0;
    let bmax = rhs.norm() + op.norm_bound(rp, rx);
    let lpsi = psi_fin.lipschitz_on(rx, gamma.cols());
    op.point_lipschitz(rx) * diam
        + bmax
        + g0 * gn
        + gvx * gn * gn * diam
        + lpsi
        + op.coupling_norm() * diam
        + gvp * dn * gn * diam
}

pub fn enumerate_solutions(p: &CoupledProblem, opts: &OracleOptions) -> Result<OracleOutcome> {
    p.validate()?;
    let axes = p.layout.n_v + p.layout.n_e;
    if axes > 6 {
        return Err(Error::Budget(format!(
            "grid oracle handles at most 6 axes, got {axes}"
        )));
    }
    let mut per_axis = opts.nodes_per_axis.max(2);
    while per_axis > 2 && (per_axis as f64).powi(axes as i32) > opts.max_cells as f64 {
        per_axis -= 1;
    }

    let (psi_fin, psi_sets) = split_indicators(&p.psi);
    let (theta_fin, theta_sets) = split_indicators(&p.theta);
    let mut u_sets = vec![p.set_c.clone()];
    u_sets.extend(psi_sets);
    let mut w_sets = vec![p.set_d.clone()];
    w_sets.extend(theta_sets);
    let region_u = Region::new(u_sets, None);
    let region_w = Region::new(w_sets, None);

    let (mut lo_u, mut hi_u) = scan_box(&region_u, p.layout.n_v, opts.radius);
    let (mut lo_w, mut hi_w) = scan_box(&region_w, p.layout.n_e, opts.radius);
    if let Some((cu, cw, hw)) = &opts.window {
        if cu.len() != p.layout.n_v || cw.len() != p.layout.n_e || *hw <= 0.0 {
            return Err(Error::Precondition(
                "oracle window must match the space dimensions with a positive half-width".into(),
            ));
        }
        for i in 0..p.layout.n_v {
            lo_u[i] = lo_u[i].max(cu[i] - hw);
            hi_u[i] = hi_u[i].min(cu[i] + hw);
        }
        for i in 0..p.layout.n_e {
            lo_w[i] = lo_w[i].max(cw[i] - hw);
            hi_w[i] = hi_w[i].min(cw[i] + hw);
        }
    }
    let (pin_u, pin_w) = match &opts.window {
        Some((cu, cw, _)) => (Some(cu), Some(cw)),
        None => (None, None),
    };
    let (nodes_u, h_u) = grid_points(&region_u, &lo_u, &hi_u, per_axis, pin_u)?;
    let (nodes_w, h_w) = grid_points(&region_w, &lo_w, &hi_w, per_axis, pin_w)?;
    let h_max = h_u.max(h_w);

    let ru = lo_u.norm().max(hi_u.norm());
    let rw = lo_w.norm().max(hi_w.norm());
    let diam_u = (&hi_u - &lo_u).norm();
    let diam_w = (&hi_w - &lo_w).norm();
    let lip = side_lipschitz(
        &p.op_a, &p.j_fun, &p.gamma1, &p.delta1, &p.rhs_h, &psi_fin, ru, rw, diam_u,
    )
    .max(side_lipschitz(
        &p.op_b, &p.h_fun, &p.gamma2, &p.delta2, &p.rhs_l, &theta_fin, rw, ru, diam_w,
    ));
    let accept_tol = opts
        .accept_tol
        .unwrap_or(opts.accept_scale * h_max * lip)
        .max(10.0 * opts.gap.cert_tol);

    let screen1 = Screen::build(
        &p.op_a, &p.j_fun, &p.gamma1, &p.delta1, &p.rhs_h, &psi_fin, &region_u, &lo_u, &hi_u,
        opts.gap.seed, 0,
    )?;
    let screen2 = Screen::build(
        &p.op_b, &p.h_fun, &p.gamma2, &p.delta2, &p.rhs_l, &theta_fin, &region_w, &lo_w, &hi_w,
        opts.gap.seed, 1,
    )?;
    let psi_u: Vec<f64> = nodes_u.iter().map(|v| psi_fin.eval(v)).collect();
    let theta_w: Vec<f64> = nodes_w.iter().map(|v| theta_fin.eval(v)).collect();

    let nw = nodes_w.len();
    let total = nodes_u.len() * nw;
    let pass: Vec<bool> = (0..total)
        .into_par_iter()
        .map(|t| {
            let (iu, iw) = (t / nw, t % nw);
            let u = &nodes_u[iu];
            let w = &nodes_w[iw];
            screen1.gap_lb(w, u, psi_u[iu]) <= accept_tol
                && screen2.gap_lb(u, w, theta_w[iw]) <= accept_tol
        })
        .collect();
    let survivors: Vec<usize> = (0..total).filter(|&t| pass[t]).collect();
    let screened_out = total - survivors.len();

    let checks: Vec<(usize, Result<(gap::GapValue, gap::GapValue)>)> = survivors
        .par_iter()
        .map(|&t| {
            let (iu, iw) = (t / nw, t % nw);
            (t, gap::primal_pair(p, &nodes_u[iu], &nodes_w[iw], &opts.gap))
        })
        .collect();

    let mut hits = Vec::new();
    let mut near_misses = 0usize;
    for (t, res) in checks {
        let (iu, iw) = (t / nw, t % nw);
        match res {
            Ok((g1, g2)) => {
                let worst = g1.value.max(g2.value);
                if g1.certified && g2.certified && worst <= accept_tol {
                    hits.push(OracleHit {
                        u: nodes_u[iu].clone(),
                        w: nodes_w[iw].clone(),
                        gap1: g1.value,
                        gap2: g2.value,
                    });
                } else if g1.lower_bound > accept_tol || g2.lower_bound > accept_tol {
                    // decisively rejected, the screen was just optimistic
                } else {
                    near_misses += 1;
                }
            }
            Err(_) => near_misses += 1,
        }
    }
    Ok(OracleOutcome {
        hits,
        grid: OracleGrid {
            per_axis,
            nodes_u: nodes_u.len(),
            nodes_w: nodes_w.len(),
            h_max,
            accept_tol,
            lipschitz: lip,
            screened_out,
            certified_checked: survivors.len(),
        },
        near_misses,
    })
}

#[derive(Debug, Clone)]
pub struct SolutionSetProbes {
    pub nonempty: bool,
    pub within_bound: Option<bool>,
    pub clusters: usize,
    /// Cluster centroids recertify: limits of near-solutions stay
    /// near-solutions, the numerical face of a closed solution set.
    pub centroids_certified: bool,
    pub max_centroid_gap: f64,
}

pub fn solution_set_probes(
    p: &CoupledProblem,
    out: &OracleOutcome,
    opts: &OracleOptions,
    bound: Option<f64>,
) -> Result<SolutionSetProbes> {
    let nonempty = !out.hits.is_empty();
    let within_bound = bound.map(|r| {
        out.hits
            .iter()
            .all(|h| h.u.norm() <= r + 1e-9 && h.w.norm() <= r + 1e-9)
    });
    // single-linkage clusters at three grid steps
    let link = (3.0 * out.grid.h_max).max(1e-9);
    let n = out.hits.len();
    let mut owner: Vec<usize> = (0..n).collect();
    fn root(owner: &mut Vec<usize>, mut i: usize) -> usize {
        while owner[i] != i {
            owner[i] = owner[owner[i]];
            i = owner[i];
        }
        i
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let du = (&out.hits[i].u - &out.hits[j].u).norm();
            let dw = (&out.hits[i].w - &out.hits[j].w).norm();
            if du.max(dw) <= link {
                let (ri, rj) = (root(&mut owner, i), root(&mut owner, j));
                if ri != rj {
                    owner[ri] = rj;
                }
            }
        }
    }
    let mut reps: Vec<usize> = (0..n).filter(|&i| root(&mut owner, i) == i).collect();
    reps.sort_unstable();
    let mut centroids_certified = true;
    let mut max_centroid_gap = 0.0_f64;
    for &r in &reps {
        let members: Vec<usize> = (0..n).filter(|&i| root(&mut owner, i) == r).collect();
        let k = members.len() as f64;
        let mut cu = DVector::zeros(p.layout.n_v);
        let mut cw = DVector::zeros(p.layout.n_e);
        for &i in &members {
            cu += &out.hits[i].u;
            cw += &out.hits[i].w;
        }
        cu /= k;
        cw /= k;
        let (g1, g2) = gap::primal_pair(p, &cu, &cw, &opts.gap)?;
        let worst = g1.value.max(g2.value);
        max_centroid_gap = max_centroid_gap.max(worst);
        if !(g1.certified && g2.certified && worst <= out.grid.accept_tol) {
            centroids_certified = false;
        }
    }
    Ok(SolutionSetProbes {
        nonempty,
        within_bound,
        clusters: reps.len(),
        centroids_certified,
        max_centroid_gap,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::CoupledOperator;
    use crate::spaces::{ConvexSet, SpaceLayout};
    use nalgebra::DMatrix;

    fn vec1(x: f64) -> DVector<f64> {
        DVector::from_column_slice(&[x])
    }

    fn coupled_1d() -> CoupledProblem {
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
                k: DMatrix::from_element(1, 1, 0.5),
                a: vec1(-0.75),
            },
            op_b: CoupledOperator::Affine {
                p: DMatrix::identity(1, 1),
                k: DMatrix::from_element(1, 1, 0.5),
                a: vec1(0.0),
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
    fn grid_finds_the_known_solution_cluster() {
        let p = coupled_1d();
        // (1, -0.5) lies on this grid; a tight explicit threshold keeps
        // the accepted cluster to the immediate neighborhood
        let opts = OracleOptions {
            nodes_per_axis: 81,
            accept_tol: Some(2e-3),
            ..OracleOptions::default()
        };
        let out = enumerate_solutions(&p, &opts).unwrap();
        assert!(!out.hits.is_empty());
        for h in &out.hits {
            assert!((h.u[0] - 1.0).abs() <= 3.0 * out.grid.h_max + 1e-9);
            assert!((h.w[0] + 0.5).abs() <= 3.0 * out.grid.h_max + 1e-9);
        }
        assert_eq!(out.near_misses, 0);
        // the screen must carry most of the load
        assert!(out.grid.screened_out > out.grid.certified_checked);
        let probes = solution_set_probes(&p, &out, &opts, Some(1.5)).unwrap();
        assert!(probes.nonempty);
        assert_eq!(probes.within_bound, Some(true));
        assert_eq!(probes.clusters, 1);
        assert!(probes.centroids_certified);
    }

    #[test]
    fn default_threshold_never_misses_the_solution_node() {
        // auto mode trades sharpness for completeness: the on-grid
        // solution must be among the hits
        let p = coupled_1d();
        let opts = OracleOptions {
            nodes_per_axis: 81,
            ..OracleOptions::default()
        };
        let out = enumerate_solutions(&p, &opts).unwrap();
        assert!(out
            .hits
            .iter()
            .any(|h| (h.u[0] - 1.0).abs() <= 1e-12 && (h.w[0] + 0.5).abs() <= 1e-12));
    }

    #[test]
    fn oracle_is_deterministic_across_runs() {
        let p = coupled_1d();
        let opts = OracleOptions {
            nodes_per_axis: 41,
            ..OracleOptions::default()
        };
        let a = enumerate_solutions(&p, &opts).unwrap();
        let b = enumerate_solutions(&p, &opts).unwrap();
        assert_eq!(a.hits.len(), b.hits.len());
        for (x, y) in a.hits.iter().zip(&b.hits) {
            assert_eq!(x.u[0].to_bits(), y.u[0].to_bits());
            assert_eq!(x.w[0].to_bits(), y.w[0].to_bits());
        }
    }

    #[test]
    fn unsolvable_equation_yields_no_hits() {
        // 0 = 1 on the whole line has no solution; every grid node must be
        // rejected decisively, not parked as a near miss
        let mut p = coupled_1d();
        p.op_a = CoupledOperator::Affine {
            p: DMatrix::zeros(1, 1),
            k: DMatrix::zeros(1, 1),
            a: vec1(0.0),
        };
        p.set_c = ConvexSet::whole(1);
        p.rhs_h = vec1(1.0);
        p.op_b = CoupledOperator::Affine {
            p: DMatrix::identity(1, 1),
            k: DMatrix::zeros(1, 1),
            a: vec1(0.0),
        };
        let out = enumerate_solutions(&p, &OracleOptions::default()).unwrap();
        assert!(out.hits.is_empty());
        assert_eq!(out.near_misses, 0);
        assert!(!solution_set_probes(&p, &out, &OracleOptions::default(), None)
            .unwrap()
            .nonempty);
    }

    #[test]
    fn grid_shrinks_to_fit_the_cell_budget() {
        let p = coupled_1d();
        let opts = OracleOptions {
            nodes_per_axis: 2_001,
            max_cells: 10_000,
            ..OracleOptions::default()
        };
        let out = enumerate_solutions(&p, &opts).unwrap();
        assert!(out.grid.per_axis <= 100);
        assert!(out.grid.nodes_u * out.grid.nodes_w <= 10_000);
        assert!(!out.hits.is_empty());
    }
}
