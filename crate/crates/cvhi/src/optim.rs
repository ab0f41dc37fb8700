//! Shared optimization kernels behind the gap functions and the inner
//! solver: feasible-region projection, exact structured linear-minus-convex
//! maximization with upper/lower bracket certificates, a strongly convex
//! piecewise subproblem engine with a primal-dual gap certificate, and a
//! derivative-free multi-start maximizer for the nonconcave probes.

use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::error::{Error, Result};
use crate::functions::{prox_sum, ConvexExtendedFunction, Term};
use crate::numeric::{golden_min, linear_l1_min, lex_less, plq1d_min, project_simplex, rng_for};
use crate::spaces::ConvexSet;

const REGION_DYKSTRA_CYCLES: usize = 5_000;
const REGION_DYKSTRA_TOL: f64 = 1e-13;

/// Intersection of constraint sets, with an optional search ball that
/// callers attach when the underlying set is unbounded.
#[derive(Debug, Clone)]
pub struct Region {
    sets: Vec<ConvexSet>,
    pub search: Option<(DVector<f64>, f64)>,
}

impl Region {
    pub fn new(sets: Vec<ConvexSet>, search: Option<(DVector<f64>, f64)>) -> Self {
        Region { sets, search }
    }

    fn items(&self) -> Vec<ConvexSet> {
        let mut out = self.sets.clone();
        if let Some((c, r)) = &self.search {
            out.push(ConvexSet::Ball {
                center: c.clone(),
                radius: *r,
            });
        }
        out
    }

    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let items = self.items();
        match items.len() {
            0 => Ok(x.clone()),
            1 => items[0].project(x),
            _ => {
                // Dykstra alternating projections onto the intersection
                let mut y = x.clone();
                let mut corr = vec![DVector::<f64>::zeros(x.len()); items.len()];
                let scale = 1.0 + x.norm();
                let mut change = f64::INFINITY;
                for _ in 0..REGION_DYKSTRA_CYCLES {
                    let before = y.clone();
                    for (s, c) in items.iter().zip(corr.iter_mut()) {
                        let z = &y + &*c;
                        let p = s.project(&z)?;
                        *c = z - &p;
                        y = p;
                    }
                    change = (&y - &before).norm();
                    if change <= REGION_DYKSTRA_TOL * scale {
                        return Ok(y);
                    }
                }
                Err(Error::Numerical {
                    context: "region projection (Dykstra)".into(),
                    residual: change,
                })
            }
        }
    }

    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        self.sets.iter().all(|s| s.contains(x, tol))
            && self
                .search
                .as_ref()
                .map(|(c, r)| (x - c).norm() <= r + tol)
                .unwrap_or(true)
    }

    /// Product-of-intervals description when every member set is separable
    /// and no search ball is attached; None otherwise.
    pub fn intervals(&self) -> Option<Vec<(f64, f64)>> {
        if self.search.is_some() {
            return None;
        }
        let dim = self.dim()?;
        let mut iv = vec![(f64::NEG_INFINITY, f64::INFINITY); dim];
        for s in &self.sets {
            let si = s.separable_intervals()?;
            for i in 0..dim {
                iv[i].0 = iv[i].0.max(si[i].0);
                iv[i].1 = iv[i].1.min(si[i].1);
            }
        }
        Some(iv)
    }

    pub fn dim(&self) -> Option<usize> {
        self.sets
            .first()
            .map(|s| s.dim())
            .or_else(|| self.search.as_ref().map(|(c, _)| c.len()))
    }

    /// The single ball equivalent of this region, when it is one.
    fn as_ball(&self) -> Option<(DVector<f64>, f64)> {
        let bounded: Vec<&ConvexSet> =
            self.sets.iter().filter(|s| s.is_bounded()).collect();
        match (bounded.len(), &self.search) {
            (0, Some((c, r))) => Some((c.clone(), *r)),
            (1, None) => match bounded[0] {
                ConvexSet::Ball { center, radius } => Some((center.clone(), *radius)),
                _ => None,
            },
            _ => None,
        }
    }

    fn as_polytope(&self) -> Option<&ConvexSet> {
        if self.search.is_some() || self.sets.len() != 1 {
            return None;
        }
        match &self.sets[0] {
            p @ ConvexSet::Polytope { .. } => Some(p),
            _ => None,
        }
    }

    pub fn diameter(&self) -> Option<f64> {
        let mut best: Option<f64> = self.search.as_ref().map(|(_, r)| 2.0 * r);
        for s in &self.sets {
            if let Some(d) = s.diameter() {
                best = Some(best.map_or(d, |b| b.min(d)));
            }
        }
        best
    }

    pub fn bounding_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        let dim = self.dim()?;
        let mut lo = DVector::from_element(dim, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(dim, f64::INFINITY);
        let mut any = false;
        let mut fold = |(bl, bh): (DVector<f64>, DVector<f64>)| {
            for i in 0..dim {
                lo[i] = lo[i].max(bl[i]);
                hi[i] = hi[i].min(bh[i]);
            }
        };
        for s in &self.sets {
            if let Some(bb) = s.bounding_box() {
                fold(bb);
                any = true;
            }
        }
        if let Some((c, r)) = &self.search {
            fold((c.map(|v| v - r), c.map(|v| v + r)));
            any = true;
        }
        if any {
            Some((lo, hi))
        } else {
            None
        }
    }

    pub fn corners(&self, max_dim: usize) -> Vec<DVector<f64>> {
        if self.sets.len() == 1 && self.search.is_none() {
            self.sets[0].corners(max_dim)
        } else {
            Vec::new()
        }
    }

    fn indicator_terms(&self) -> Vec<Term> {
        self.items()
            .into_iter()
            .map(|set| Term::Indicator { set })
            .collect()
    }
}

/// max over the region of <g, v - anchor> - psi_fin(v) + psi_fin(anchor).
/// `exact` reports whether the value is the true maximum (up to machine
/// arithmetic) rather than a candidate lower bound.
pub struct LinearMinusConvexMax {
    pub value: f64,
    pub arg: DVector<f64>,
    pub exact: bool,
}

/// Exact paths: separable psi over an interval product; a ball region with
/// zero psi; a polytope region with zero psi (vertex scan). Anything else
/// falls back to support-point candidates and is flagged inexact.
pub fn linear_minus_convex_max(
    g: &DVector<f64>,
    anchor: &DVector<f64>,
    psi_fin: &ConvexExtendedFunction,
    psi_anchor: f64,
    region: &Region,
) -> Result<LinearMinusConvexMax> {
    let dim = g.len();
    let offset = psi_anchor - g.dot(anchor);

    if let (Some(parts), Some(iv)) = (psi_fin.separable(dim), region.intervals()) {
        let mut p = parts;
        p.clip(&iv);
        if p.lo.iter().zip(&p.hi).all(|(l, h)| l.is_finite() && h.is_finite()) {
            let mut arg = DVector::zeros(dim);
            for i in 0..dim {
                arg[i] = if p.quad[i] > 0.0 {
                    plq1d_min(p.quad[i], g[i] - p.lin[i], p.l1[i], p.lo[i], p.hi[i])
                } else {
                    linear_l1_min(p.lin[i] - g[i], p.l1[i], p.lo[i], p.hi[i])
                };
            }
            let value = g.dot(&arg) - psi_fin.eval(&arg) + offset;
            return Ok(LinearMinusConvexMax {
                value,
                arg,
                exact: true,
            });
        }
    }
    if psi_fin.is_zero() || psi_fin.terms.is_empty() {
        if let Some((center, radius)) = region.as_ball() {
            let gn = g.norm();
            let arg = if gn > 1e-300 {
                &center + g * (radius / gn)
            } else {
                center.clone()
            };
            return Ok(LinearMinusConvexMax {
                value: g.dot(&arg) + offset,
                arg,
                exact: true,
            });
        }
        if let Some(poly) = region.as_polytope() {
            let arg = poly.support_point(g)?;
            return Ok(LinearMinusConvexMax {
                value: g.dot(&arg) + offset,
                arg,
                exact: true,
            });
        }
    }
    if let (Some((center, radius)), Some((q_tot, q_lin))) =
        (region.as_ball(), psi_fin.quadratic_total(dim))
    {
        if let Some(arg) = ball_quadratic_max(g, &q_tot, &q_lin, &center, radius) {
            return Ok(LinearMinusConvexMax {
                value: g.dot(&arg) - psi_fin.eval(&arg) + offset,
                arg,
                exact: true,
            });
        }
    }
    // inexact fallback: a handful of feasible candidates
    let diam = region.diameter().unwrap_or(1.0);
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut consider = |v: DVector<f64>| {
        let val = g.dot(&v) - psi_fin.eval(&v) + offset;
        if val.is_finite() && best.as_ref().map(|(b, _)| val > *b).unwrap_or(true) {
            best = Some((val, v));
        }
    };
    consider(region.project(anchor)?);
    consider(region.project(&(anchor + g * (diam / (1.0 + g.norm()))))?);
    for corner in region.corners(3) {
        consider(corner);
    }
    let (value, arg) = best.ok_or_else(|| Error::Numerical {
        context: "linear-minus-convex maximization".into(),
        residual: f64::NAN,
    })?;
    Ok(LinearMinusConvexMax {
        value,
        arg,
        exact: false,
    })
}

/// argmax over ||v - center|| <= radius of <g, v> - (1/2) v'Qv - q'v for
/// symmetric positive semidefinite Q. The stationarity system
/// (Q + nu I)(v - center) = -(Q center + q - g) with nu >= 0 reduces to a
/// scalar secular equation in nu, monotone after eigendecomposition; flat
/// directions (zero eigenvalue, zero component) take the minimal-norm
/// choice. None when Q fails the semidefiniteness check.
fn ball_quadratic_max(
    g: &DVector<f64>,
    q_mat: &DMatrix<f64>,
    q_vec: &DVector<f64>,
    center: &DVector<f64>,
    radius: f64,
) -> Option<DVector<f64>> {
    let eig = q_mat.clone().symmetric_eigen();
    let scale = eig.eigenvalues.amax().max(1.0);
    if eig.eigenvalues.min() < -1e-9 * scale {
        return None;
    }
    let lam: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
    let w = q_mat * center + q_vec - g;
    let wt = eig.eigenvectors.transpose() * &w;
    let den_tiny = 1e-13 * scale;
    let wt_tiny = 1e-12 * (1.0 + wt.amax());
    let sq_norm = |nu: f64| -> f64 {
        let mut s = 0.0;
        for (i, &l) in lam.iter().enumerate() {
            let den = l + nu;
            if den <= den_tiny {
                if wt[i].abs() <= wt_tiny {
                    continue;
                }
                return f64::INFINITY;
            }
            s += (wt[i] / den) * (wt[i] / den);
        }
        s
    };
    let r2 = radius * radius;
    let nu_star = if sq_norm(0.0) <= r2 {
        0.0
    } else {
        let (mut lo, mut hi) = (0.0, w.norm() / radius + 1.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if sq_norm(mid) > r2 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        hi
    };
    let mut dt = DVector::zeros(lam.len());
    for (i, &l) in lam.iter().enumerate() {
        let den = l + nu_star;
        dt[i] = if den <= den_tiny { 0.0 } else { -wt[i] / den };
    }
    Some(center + &eig.eigenvectors * dt)
}

/// Options for the certified concave maximizer.
#[derive(Debug, Clone)]
pub struct MaxOptions {
    pub cert_tol: f64,
    pub multi_start: usize,
    pub ascent_iters: usize,
    pub seed: u64,
    pub grid_fallback_dims: usize,
    pub grid_budget: usize,
}

impl Default for MaxOptions {
    fn default() -> Self {
        MaxOptions {
            cert_tol: 1e-7,
            multi_start: 8,
            ascent_iters: 200,
            seed: 0,
            grid_fallback_dims: 4,
            grid_budget: 200_000,
        }
    }
}

/// Concave objective Phi(v) = <b, v-anchor> - max_j <a_j, v-anchor>
///                            - psi_fin(v) + psi_fin(anchor)
/// maximized over a bounded region (indicator parts of psi already folded
/// into the region by the caller).
pub struct ConcaveMaxProblem<'a> {
    pub b: DVector<f64>,
    pub pieces: Vec<DVector<f64>>,
    pub anchor: DVector<f64>,
    pub psi_fin: &'a ConvexExtendedFunction,
    pub psi_anchor: f64,
    pub region: Region,
}

pub struct MaxOutcome {
    pub lb: f64,
    pub ub: Option<f64>,
    pub arg: DVector<f64>,
    pub certified: bool,
    pub boundary_hit: bool,
}

impl<'a> ConcaveMaxProblem<'a> {
    pub fn eval(&self, v: &DVector<f64>) -> f64 {
        let d = v - &self.anchor;
        let maxterm = self
            .pieces
            .iter()
            .map(|a| a.dot(&d))
            .fold(f64::NEG_INFINITY, f64::max);
        self.b.dot(&d)
            - if self.pieces.is_empty() { 0.0 } else { maxterm }
            - self.psi_fin.eval(v)
            + self.psi_anchor
    }

    fn supergradient(&self, v: &DVector<f64>) -> DVector<f64> {
        let d = v - &self.anchor;
        let mut best = 0usize;
        let mut best_val = f64::NEG_INFINITY;
        for (j, a) in self.pieces.iter().enumerate() {
            let val = a.dot(&d);
            if val > best_val {
                best_val = val;
                best = j;
            }
        }
        let mut g = &self.b - self.psi_fin.subgradient(v);
        if !self.pieces.is_empty() {
            g -= &self.pieces[best];
        }
        g
    }

    /// Mixture coefficient for the dual bound: g(mu) = b - sum_j mu_j a_j.
    fn mixture(&self, mu: &[f64]) -> DVector<f64> {
        let mut g = self.b.clone();
        for (a, &m) in self.pieces.iter().zip(mu) {
            g -= a * m;
        }
        g
    }

    fn dual_bound(&self, mu: &[f64]) -> Result<LinearMinusConvexMax> {
        linear_minus_convex_max(
            &self.mixture(mu),
            &self.anchor,
            self.psi_fin,
            self.psi_anchor,
            &self.region,
        )
    }
}

/// Multi-start projected supergradient ascent with a per-piece/dual upper
/// bound. Exact structured paths close the bracket to machine precision;
/// otherwise a Lipschitz grid sweep (dims <= grid_fallback_dims) tightens
/// it as far as the budget allows.
pub fn maximize_concave(prob: &ConcaveMaxProblem, opts: &MaxOptions) -> Result<MaxOutcome> {
    let dim = prob.anchor.len();
    let m = prob.pieces.len();
    let diam = prob.region.diameter().ok_or_else(|| {
        Error::Precondition("concave maximization needs a bounded region".into())
    })?;

    // ---- lower bound: candidates ----
    let mut best_val = f64::NEG_INFINITY;
    let mut best_arg = prob.anchor.clone();
    let consider = |v: DVector<f64>, best_val: &mut f64, best_arg: &mut DVector<f64>| {
        let val = prob.eval(&v);
        if val.is_finite() && (val > *best_val || (*best_val == f64::NEG_INFINITY)) {
            *best_val = val;
            *best_arg = v;
        }
    };
    let anchor_feas = prob.region.project(&prob.anchor)?;
    consider(anchor_feas.clone(), &mut best_val, &mut best_arg);

    let mut dual_evals: Vec<(Vec<f64>, LinearMinusConvexMax)> = Vec::new();
    let mut all_exact = true;
    for j in 0..m {
        let mut mu = vec![0.0; m];
        mu[j] = 1.0;
        let sol = prob.dual_bound(&mu)?;
        all_exact &= sol.exact;
        consider(sol.arg.clone(), &mut best_val, &mut best_arg);
        dual_evals.push((mu, sol));
    }
    if m == 0 {
        // no piecewise part: the single dual evaluation is the supremum
        let sol = prob.dual_bound(&[])?;
        all_exact &= sol.exact;
        consider(sol.arg.clone(), &mut best_val, &mut best_arg);
        dual_evals.push((Vec::new(), sol));
    }
    for i in 0..dim {
        for sgn in [1.0, -1.0] {
            let mut e = DVector::zeros(dim);
            e[i] = sgn * diam;
            consider(
                prob.region.project(&(&prob.anchor + &e))?,
                &mut best_val,
                &mut best_arg,
            );
        }
    }
    for corner in prob.region.corners(3) {
        consider(corner, &mut best_val, &mut best_arg);
    }
    let mut rng = rng_for(opts.seed, &[0x6a70]);
    let (blo, bhi) = prob.region.bounding_box().ok_or_else(|| {
        Error::Precondition("concave maximization needs a bounded region".into())
    })?;
    let n_random = opts.multi_start.saturating_sub(2 * dim.min(3)).max(2);
    for _ in 0..n_random {
        let x = DVector::from_fn(dim, |i, _| rng.random_range(blo[i]..=bhi[i]));
        consider(prob.region.project(&x)?, &mut best_val, &mut best_arg);
    }

    // ---- upper bound: min over dual mixtures, tightened only while the
    // bracket is open ----
    let mut ub: Option<f64> = None;
    if all_exact {
        let mut best_ub = dual_evals
            .iter()
            .map(|(_, s)| s.value)
            .fold(f64::INFINITY, f64::min);
        if best_ub - best_val > opts.cert_tol {
            if m == 2 {
                let mut eval_mu = |t: f64| -> f64 {
                    prob.dual_bound(&[1.0 - t, t])
                        .map(|s| s.value)
                        .unwrap_or(f64::INFINITY)
                };
                let (t_star, v_star) = golden_min(&mut eval_mu, 0.0, 1.0, 120);
                best_ub = best_ub.min(v_star);
                if let Ok(sol) = prob.dual_bound(&[1.0 - t_star, t_star]) {
                    consider(sol.arg, &mut best_val, &mut best_arg);
                }
            } else if m >= 3 && m <= 7 {
                // the dual value is convex in mu and stays convex under
                // partial minimization over simplex slices, so nested
                // golden sections reach its global minimum; dual maximizers
                // feed the lower bound along the way
                let iters = match m {
                    3 => 64,
                    4 => 44,
                    5 => 26,
                    _ => 14,
                };
                let mut sound = true;
                let mut dual_best: Option<(f64, DVector<f64>)> = None;
                let mut eval = |mu: &[f64]| -> f64 {
                    match prob.dual_bound(mu) {
                        Ok(sol) if sol.exact => {
                            let phi = prob.eval(&sol.arg);
                            if phi.is_finite()
                                && dual_best.as_ref().map(|(b, _)| phi > *b).unwrap_or(true)
                            {
                                dual_best = Some((phi, sol.arg));
                            }
                            sol.value
                        }
                        _ => {
                            sound = false;
                            f64::INFINITY
                        }
                    }
                };
                let mut prefix = Vec::with_capacity(m);
                let v = simplex_golden_min(&mut prefix, 1.0, m, iters, &mut eval);
                if sound {
                    best_ub = best_ub.min(v);
                }
                if let Some((_, arg)) = dual_best {
                    consider(arg, &mut best_val, &mut best_arg);
                }
            }
        }
        ub = Some(best_ub);
    }
    let open = |ub: &Option<f64>, lb: f64| match ub {
        Some(u) => u - lb > opts.cert_tol,
        None => true,
    };

    // ---- ascent refinement (projected supergradient, step a/sqrt(k)) ----
    if open(&ub, best_val) {
        let a0 = diam / 10.0;
        let mut v = best_arg.clone();
        for k in 1..=opts.ascent_iters {
            let g = prob.supergradient(&v);
            let gn = g.norm();
            if gn <= 1e-14 {
                break;
            }
            let step = a0 / (k as f64).sqrt();
            v = prob.region.project(&(&v + g * (step / gn)))?;
            consider(v.clone(), &mut best_val, &mut best_arg);
        }
    }

    // ---- prox polish closes degenerate ties for m <= 2 ----
    if ub.is_some() && m <= 2 && open(&ub, best_val) {
        let rho = (opts.cert_tol / (diam * diam + 1.0)).max(1e-14);
        let neg_b = -&prob.b;
        let sets = prob.region.indicator_terms();
        let polish = solve_piecewise_prox(&PiecewiseProx {
            c: neg_b,
            pieces: prob.pieces.clone(),
            offsets: Vec::new(),
            vbar: prob.anchor.clone(),
            xbar: best_arg.clone(),
            rho,
            psi_fin: prob.psi_fin,
            extra_terms: &sets,
        });
        if let Ok(out) = polish {
            consider(out.v, &mut best_val, &mut best_arg);
        }
    }

    // ---- Lipschitz grid fallback ----
    if open(&ub, best_val) && dim <= opts.grid_fallback_dims {
        let lip = {
            let radius = bhi.norm().max(blo.norm());
            prob.b.norm()
                + prob
                    .pieces
                    .iter()
                    .map(|a| a.norm())
                    .fold(0.0, f64::max)
                + prob.psi_fin.lipschitz_on(radius, dim)
        };
        let per_axis = ((opts.grid_budget as f64).powf(1.0 / dim as f64).floor() as usize).max(2);
        let mut h: f64 = 0.0;
        let axes: Vec<Vec<f64>> = (0..dim)
            .map(|i| {
                let n = per_axis;
                let width = bhi[i] - blo[i];
                h = h.max(width / (n - 1) as f64);
                (0..n).map(|k| blo[i] + width * k as f64 / (n - 1) as f64).collect()
            })
            .collect();
        let mut idx = vec![0usize; dim];
        let mut grid_best = f64::NEG_INFINITY;
        loop {
            let z = DVector::from_fn(dim, |i, _| axes[i][idx[i]]);
            let p = prob.region.project(&z)?;
            let val = prob.eval(&p);
            if val > grid_best {
                grid_best = val;
                if val > best_val {
                    best_val = val;
                    best_arg = p;
                }
            }
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < axes[carry].len() {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == dim {
                    break;
                }
            }
            if carry == dim {
                break;
            }
        }
        // projections of grid nodes form an (h sqrt(d) / 2)-net of the region
        let cover = lip * h * (dim as f64).sqrt() / 2.0;
        let grid_ub = grid_best + cover;
        ub = Some(match ub {
            Some(u) => u.min(grid_ub),
            None => grid_ub,
        });
    }

    let boundary_hit = prob
        .region
        .search
        .as_ref()
        .map(|(c, r)| (&best_arg - c).norm() >= 0.999 * r)
        .unwrap_or(false);
    let certified = ub.map(|u| u - best_val <= opts.cert_tol).unwrap_or(false);
    Ok(MaxOutcome {
        lb: best_val,
        ub,
        arg: best_arg,
        certified,
        boundary_hit,
    })
}

/// Nested golden-section minimization over {mu >= 0, sum mu = total}: golden
/// over each leading coordinate, recursing on the remaining mass. Sound for
/// convex objectives, where every slice minimum is convex in the coordinate
/// held fixed.
fn simplex_golden_min(
    prefix: &mut Vec<f64>,
    total: f64,
    m: usize,
    iters: usize,
    eval: &mut dyn FnMut(&[f64]) -> f64,
) -> f64 {
    if prefix.len() + 1 == m {
        prefix.push(total.max(0.0));
        let v = eval(prefix);
        prefix.pop();
        return v;
    }
    let mut g = |t: f64| -> f64 {
        prefix.push(t.clamp(0.0, total));
        let v = simplex_golden_min(prefix, (total - t).max(0.0), m, iters, eval);
        prefix.pop();
        v
    };
    golden_min(&mut g, 0.0, total, iters).1
}

/// Strongly convex structured subproblem
///   min_v <c, v> + max_j (<a_j, v - vbar> + offset_j) + psi_fin(v)
///         + extra indicator terms + (rho/2) ||v - xbar||^2.
/// Empty `offsets` means all zero.
pub struct PiecewiseProx<'a> {
    pub c: DVector<f64>,
    pub pieces: Vec<DVector<f64>>,
    pub offsets: Vec<f64>,
    pub vbar: DVector<f64>,
    pub xbar: DVector<f64>,
    pub rho: f64,
    pub psi_fin: &'a ConvexExtendedFunction,
    pub extra_terms: &'a [Term],
}

pub struct ProxOutcome {
    pub v: DVector<f64>,
    pub objective: f64,
    pub pd_gap: f64,
}

impl<'a> PiecewiseProx<'a> {
    fn offset(&self, j: usize) -> f64 {
        self.offsets.get(j).copied().unwrap_or(0.0)
    }

    fn primal_value(&self, v: &DVector<f64>) -> f64 {
        let d = v - &self.vbar;
        let maxterm = self
            .pieces
            .iter()
            .enumerate()
            .map(|(j, a)| a.dot(&d) + self.offset(j))
            .fold(f64::NEG_INFINITY, f64::max);
        self.c.dot(v)
            + if self.pieces.is_empty() { 0.0 } else { maxterm }
            + self.psi_fin.eval(v)
            + 0.5 * self.rho * (v - &self.xbar).norm_squared()
    }

    /// Inner minimizer for a fixed mixture mu, via the prox of
    /// psi + indicators at the shifted point.
    fn v_of_mu(&self, mu: &[f64]) -> Result<DVector<f64>> {
        let mut lin = self.c.clone();
        for (a, &m) in self.pieces.iter().zip(mu) {
            lin += a * m;
        }
        let point = &self.xbar - lin / self.rho;
        let mut terms: Vec<&Term> = self.psi_fin.terms.iter().collect();
        for t in self.extra_terms {
            terms.push(t);
        }
        prox_sum(&terms, &point, 1.0 / self.rho, &[])
    }

    fn dual_value(&self, mu: &[f64], v: &DVector<f64>) -> f64 {
        let d = v - &self.vbar;
        let mut mixed = 0.0;
        for (j, (a, &m)) in self.pieces.iter().zip(mu).enumerate() {
            mixed += m * (a.dot(&d) + self.offset(j));
        }
        self.c.dot(v)
            + mixed
            + self.psi_fin.eval(v)
            + 0.5 * self.rho * (v - &self.xbar).norm_squared()
    }
}

pub fn solve_piecewise_prox(p: &PiecewiseProx) -> Result<ProxOutcome> {
    let m = p.pieces.len();
    if p.rho <= 0.0 {
        return Err(Error::Precondition(
            "piecewise prox engine needs rho > 0".into(),
        ));
    }
    if !p.offsets.is_empty() && p.offsets.len() != m {
        return Err(Error::Precondition(
            "piece offsets must be absent or match the piece count".into(),
        ));
    }
    let finish = |mu: Vec<f64>, p: &PiecewiseProx| -> Result<ProxOutcome> {
        let v = p.v_of_mu(&mu)?;
        let primal = p.primal_value(&v);
        let dual = p.dual_value(&mu, &v);
        Ok(ProxOutcome {
            objective: primal,
            pd_gap: primal - dual,
            v,
        })
    };
    match m {
        0 => finish(Vec::new(), p),
        1 => finish(vec![1.0], p),
        2 => {
            // phi'(t) = <a2 - a1, v(t) - vbar> + off2 - off1 is
            // nonincreasing; bisect
            let dir = &p.pieces[1] - &p.pieces[0];
            let doff = p.offset(1) - p.offset(0);
            let slope = |t: f64, p: &PiecewiseProx| -> Result<f64> {
                let v = p.v_of_mu(&[1.0 - t, t])?;
                Ok(dir.dot(&(&v - &p.vbar)) + doff)
            };
            let s0 = slope(0.0, p)?;
            let s1 = slope(1.0, p)?;
            let t_star = if s0 <= 0.0 {
                0.0
            } else if s1 >= 0.0 {
                1.0
            } else {
                let (mut lo, mut hi) = (0.0f64, 1.0f64);
                for _ in 0..64 {
                    let mid = 0.5 * (lo + hi);
                    if slope(mid, p)? > 0.0 {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                0.5 * (lo + hi)
            };
            finish(vec![1.0 - t_star, t_star], p)
        }
        _ => {
            // FISTA over the simplex on the dual
            let a_mat = DMatrix::from_fn(p.c.len(), m, |r, j| p.pieces[j][r]);
            let smax = crate::spaces::spectral_norm(&a_mat);
            let lip = (smax * smax / p.rho).max(1e-12);
            let mut mu = vec![1.0 / m as f64; m];
            let mut mu_prev = mu.clone();
            let mut tk = 1.0f64;
            let mut best: Option<ProxOutcome> = None;
            for it in 0..5_000 {
                let beta = if it == 0 {
                    0.0
                } else {
                    let tn = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
                    let b = (tk - 1.0) / tn;
                    tk = tn;
                    b
                };
                let z: Vec<f64> = mu
                    .iter()
                    .zip(&mu_prev)
                    .map(|(&a, &b)| a + beta * (a - b))
                    .collect();
                let vz = p.v_of_mu(&z)?;
                let grad: Vec<f64> = p
                    .pieces
                    .iter()
                    .enumerate()
                    .map(|(j, a)| a.dot(&(&vz - &p.vbar)) + p.offset(j))
                    .collect();
                let stepped: Vec<f64> = z
                    .iter()
                    .zip(&grad)
                    .map(|(&zi, &gi)| zi + gi / lip)
                    .collect();
                mu_prev = mu;
                mu = project_simplex(&stepped);
                if it % 16 == 0 || it == 4_999 {
                    let out = finish(mu.clone(), p)?;
                    let good = out.pd_gap
                        <= 1e-12 * (1.0 + out.objective.abs());
                    let better = best
                        .as_ref()
                        .map(|b| out.pd_gap < b.pd_gap)
                        .unwrap_or(true);
                    if better {
                        best = Some(out);
                    }
                    if good {
                        break;
                    }
                }
            }
            best.ok_or_else(|| Error::Numerical {
                context: "piecewise prox engine".into(),
                residual: f64::NAN,
            })
        }
    }
}

/// Derivative-free multi-start maximizer for nonconcave objectives
/// (numerical-gradient ascent with backtracking plus an optional coarse
/// grid sweep). Returns the best point found; a heuristic lower bound.
pub fn maximize_black_box<F: Fn(&DVector<f64>) -> f64>(
    f: F,
    region: &Region,
    starts: &[DVector<f64>],
    opts: &MaxOptions,
    grid_axes: Option<usize>,
) -> Result<(DVector<f64>, f64)> {
    let dim = region.dim().ok_or_else(|| {
        Error::Precondition("black-box maximization needs a nonempty region".into())
    })?;
    let (blo, bhi) = region.bounding_box().ok_or_else(|| {
        Error::Precondition("black-box maximization needs a bounded region".into())
    })?;
    let diam = region.diameter().unwrap_or(1.0);
    let mut best_val = f64::NEG_INFINITY;
    let mut best_arg: Option<DVector<f64>> = None;
    let consider = |v: DVector<f64>, best_val: &mut f64, best_arg: &mut Option<DVector<f64>>| {
        let val = f(&v);
        if val.is_finite() && val > *best_val {
            *best_val = val;
            *best_arg = Some(v);
        } else if best_arg.is_none() && val.is_finite() {
            *best_val = val;
            *best_arg = Some(v);
        }
    };
    let mut seeds: Vec<DVector<f64>> = starts.to_vec();
    let mut rng = rng_for(opts.seed, &[0xb1ac]);
    for _ in 0..opts.multi_start {
        let x = DVector::from_fn(dim, |i, _| rng.random_range(blo[i]..=bhi[i]));
        seeds.push(region.project(&x)?);
    }
    if let Some(n_axis) = grid_axes {
        let n = n_axis.max(2);
        let mut idx = vec![0usize; dim];
        loop {
            let z = DVector::from_fn(dim, |i, _| {
                blo[i] + (bhi[i] - blo[i]) * idx[i] as f64 / (n - 1) as f64
            });
            consider(region.project(&z)?, &mut best_val, &mut best_arg);
            let mut carry = 0;
            loop {
                idx[carry] += 1;
                if idx[carry] < n {
                    break;
                }
                idx[carry] = 0;
                carry += 1;
                if carry == dim {
                    break;
                }
            }
            if carry == dim {
                break;
            }
        }
    }
    for s in seeds {
        let mut v = region.project(&s)?;
        consider(v.clone(), &mut best_val, &mut best_arg);
        let mut step = diam / 4.0;
        for _ in 0..opts.ascent_iters.min(120) {
            // central-difference gradient
            let h = 1e-6 * (1.0 + v.norm());
            let mut g = DVector::zeros(dim);
            for i in 0..dim {
                let mut vp = v.clone();
                let mut vm = v.clone();
                vp[i] += h;
                vm[i] -= h;
                g[i] = (f(&region.project(&vp)?) - f(&region.project(&vm)?)) / (2.0 * h);
            }
            let gn = g.norm();
            if gn <= 1e-12 {
                break;
            }
            let mut improved = false;
            let cur = f(&v);
            let mut t = step;
            for _ in 0..20 {
                let cand = region.project(&(&v + &g * (t / gn)))?;
                if f(&cand) > cur + 1e-15 {
                    v = cand;
                    improved = true;
                    break;
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
            step = (t * 2.0).min(diam / 4.0);
            consider(v.clone(), &mut best_val, &mut best_arg);
        }
    }
    let arg = best_arg.ok_or_else(|| Error::Numerical {
        context: "black-box maximization".into(),
        residual: f64::NAN,
    })?;
    Ok((arg, best_val))
}

/// Deterministic argmax reduction: larger value wins, ties go to the
/// lexicographically smaller argument.
pub fn reduce_max(items: Vec<(DVector<f64>, f64)>) -> Option<(DVector<f64>, f64)> {
    let mut best: Option<(DVector<f64>, f64)> = None;
    for (arg, val) in items {
        best = match best {
            None => Some((arg, val)),
            Some((ba, bv)) => {
                if val > bv || (val == bv && lex_less(&arg, &ba)) {
                    Some((arg, val))
                } else {
                    Some((ba, bv))
                }
            }
        };
    }
    best
}
