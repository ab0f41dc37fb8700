//! Finite-dimensional space layout, linear maps between the six spaces,
//! and the constraint-set catalogue with Euclidean projections.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::lex_less;

/// Dimensions of the six spaces a coupled problem lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpaceLayout {
    pub n_v: usize,
    pub n_e: usize,
    pub n_x: usize,
    pub n_y: usize,
    pub n_z1: usize,
    pub n_z2: usize,
}

/// Dense linear map between two of the layout's spaces.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearMap {
    mat: DMatrix<f64>,
}

impl LinearMap {
    pub fn new(mat: DMatrix<f64>) -> Self {
        LinearMap { mat }
    }

    pub fn identity(n: usize) -> Self {
        LinearMap {
            mat: DMatrix::identity(n, n),
        }
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        LinearMap {
            mat: DMatrix::zeros(rows, cols),
        }
    }

    pub fn rows(&self) -> usize {
        self.mat.nrows()
    }

    pub fn cols(&self) -> usize {
        self.mat.ncols()
    }

    pub fn apply(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.mat * x
    }

    pub fn apply_transpose(&self, y: &DVector<f64>) -> DVector<f64> {
        self.mat.transpose() * y
    }

    /// Spectral norm (largest singular value).
    pub fn op_norm(&self) -> f64 {
        if self.mat.is_empty() {
            return 0.0;
        }
        self.mat.clone().svd(false, false).singular_values[0]
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.mat
    }
}

pub fn spectral_norm(m: &DMatrix<f64>) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().svd(false, false).singular_values[0]
}

const FEAS_TOL: f64 = 1e-9;
const PROJ_STATIONARITY: f64 = 1e-12;
const PROJ_MAX_ITERS: usize = 10_000;

/// Constraint sets. Polytopes are required to be nonempty and bounded;
/// vertex data is enumerated once at construction and reused for support
/// points and warm starts.
#[derive(Debug, Clone)]
pub enum ConvexSet {
    Box {
        lo: DVector<f64>,
        hi: DVector<f64>,
    },
    Ball {
        center: DVector<f64>,
        radius: f64,
    },
    Polytope {
        a: DMatrix<f64>,
        b: DVector<f64>,
        vertices: Vec<DVector<f64>>,
    },
    WholeSpace {
        dim: usize,
    },
}

impl ConvexSet {
    pub fn make_box(lo: DVector<f64>, hi: DVector<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::Input("box: lo and hi lengths differ".into()));
        }
        for i in 0..lo.len() {
            if lo[i] > hi[i] {
                return Err(Error::Input(format!(
                    "box: lo[{i}] = {} exceeds hi[{i}] = {}",
                    lo[i], hi[i]
                )));
            }
        }
        Ok(ConvexSet::Box { lo, hi })
    }

    pub fn make_ball(center: DVector<f64>, radius: f64) -> Result<Self> {
        if !(radius >= 0.0) {
            return Err(Error::Input(format!("ball: radius {radius} is negative")));
        }
        Ok(ConvexSet::Ball { center, radius })
    }

    /// Builds {x : Ax <= b}. Enumerates vertices (all d-row active sets),
    /// rejects empty or unbounded data: boundedness is probed by projecting
    /// far points along the +/- coordinate axes and seeded directions and
    /// checking that the projections stay inside the vertex hull radius.
    pub fn make_polytope(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        let (rows, d) = (a.nrows(), a.ncols());
        if rows != b.len() {
            return Err(Error::Input(format!(
                "polytope: A has {rows} rows but b has {} entries",
                b.len()
            )));
        }
        if d == 0 || rows < d {
            return Err(Error::Input(
                "polytope: need at least dim(A) rows for a bounded set".into(),
            ));
        }
        let combos = n_choose_k(rows, d);
        if combos > 2_000_000 {
            return Err(Error::Budget(format!(
                "polytope vertex enumeration needs {combos} candidate active sets"
            )));
        }
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        let mut idx: Vec<usize> = (0..d).collect();
        loop {
            // solve the d x d active system for this row subset
            let sub_a = DMatrix::from_fn(d, d, |r, c| a[(idx[r], c)]);
            let sub_b = DVector::from_fn(d, |r, _| b[idx[r]]);
            if let Some(x) = sub_a.lu().solve(&sub_b) {
                let resid = &a * &x - &b;
                let scale = 1.0 + x.norm();
                if resid.iter().all(|&r| r <= FEAS_TOL * scale) {
                    let dup = vertices
                        .iter()
                        .any(|v| (v - &x).norm() <= 1e-9 * (1.0 + x.norm()));
                    if !dup {
                        vertices.push(x);
                    }
                }
            }
            if !next_combination(&mut idx, rows) {
                break;
            }
        }
        if vertices.is_empty() {
            return Err(Error::Input(
                "polytope: no feasible vertex found (empty or unbounded data)".into(),
            ));
        }
        vertices.sort_by(|p, q| {
            if lex_less(p, q) {
                std::cmp::Ordering::Less
            } else if lex_less(q, p) {
                std::cmp::Ordering::Greater
            } else {
                std::cmp::Ordering::Equal
            }
        });
        let set = ConvexSet::Polytope { a, b, vertices };
        set.probe_polytope_bounded()?;
        Ok(set)
    }

    fn probe_polytope_bounded(&self) -> Result<()> {
        let (verts, d) = match self {
            ConvexSet::Polytope { a, vertices, .. } => (vertices, a.ncols()),
            _ => unreachable!(),
        };
        let hull_radius = verts.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let mut dirs: Vec<DVector<f64>> = Vec::new();
        for i in 0..d {
            let mut e = DVector::zeros(d);
            e[i] = 1.0;
            dirs.push(e.clone());
            dirs.push(-e);
        }
        let mut rng = crate::numeric::rng_for(0xB0B, &[d as u64]);
        for _ in 0..8 {
            let g = DVector::from_fn(d, |_, _| {
                use rand::Rng;
                rng.random_range(-1.0..1.0)
            });
            if g.norm() > 1e-12 {
                dirs.push(g.normalize());
            }
        }
        let far = 1.0e6 * (1.0 + hull_radius);
        for g in dirs {
            let p = self.project(&(&g * far))?;
            if p.norm() > hull_radius + 1e-3 * (1.0 + hull_radius) {
                return Err(Error::Input(
                    "polytope: unbounded recession direction detected".into(),
                ));
            }
        }
        Ok(())
    }

    pub fn whole(dim: usize) -> Self {
        ConvexSet::WholeSpace { dim }
    }

    pub fn dim(&self) -> usize {
        match self {
            ConvexSet::Box { lo, .. } => lo.len(),
            ConvexSet::Ball { center, .. } => center.len(),
            ConvexSet::Polytope { a, .. } => a.ncols(),
            ConvexSet::WholeSpace { dim } => *dim,
        }
    }

    pub fn is_bounded(&self) -> bool {
        !matches!(self, ConvexSet::WholeSpace { .. })
    }

    /// Euclidean projection. Boxes clamp, balls rescale radially, polytopes
    /// run an accelerated projected-gradient ascent on the dual QP
    /// (cap 10^4 iterations, 1e-10 stationarity).
    pub fn project(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(x)?;
        match self {
            ConvexSet::Box { lo, hi } => {
                Ok(DVector::from_fn(lo.len(), |i, _| x[i].clamp(lo[i], hi[i])))
            }
            ConvexSet::Ball { center, radius } => {
                let d = x - center;
                let n = d.norm();
                if n <= *radius {
                    Ok(x.clone())
                } else {
                    Ok(center + d * (*radius / n))
                }
            }
            ConvexSet::WholeSpace { .. } => Ok(x.clone()),
            ConvexSet::Polytope { a, b, .. } => project_polytope(a, b, x),
        }
    }

    /// Membership via projection distance.
    pub fn contains(&self, x: &DVector<f64>, tol: f64) -> bool {
        match self.project(x) {
            Ok(p) => (x - &p).norm() <= tol,
            Err(_) => false,
        }
    }

    /// argmax_{y in S} <g, y>. Errors on unbounded sets. Ties on boxes take
    /// the upper corner; polytopes scan vertices in lexicographic order and
    /// keep the first maximizer.
    pub fn support_point(&self, g: &DVector<f64>) -> Result<DVector<f64>> {
        self.check_dim(g)?;
        match self {
            ConvexSet::Box { lo, hi } => Ok(DVector::from_fn(lo.len(), |i, _| {
                if g[i] >= 0.0 {
                    hi[i]
                } else {
                    lo[i]
                }
            })),
            ConvexSet::Ball { center, radius } => {
                let n = g.norm();
                if n <= 1e-300 {
                    Ok(center.clone())
                } else {
                    Ok(center + g * (*radius / n))
                }
            }
            ConvexSet::Polytope { vertices, .. } => {
                let mut best = &vertices[0];
                let mut best_val = g.dot(best);
                for v in &vertices[1..] {
                    let val = g.dot(v);
                    if val > best_val {
                        best_val = val;
                        best = v;
                    }
                }
                Ok(best.clone())
            }
            ConvexSet::WholeSpace { .. } => Err(Error::Unbounded(
                "support point on the whole space".into(),
            )),
        }
    }

    /// Axis-aligned bounding box, when one exists.
    pub fn bounding_box(&self) -> Option<(DVector<f64>, DVector<f64>)> {
        match self {
            ConvexSet::Box { lo, hi } => Some((lo.clone(), hi.clone())),
            ConvexSet::Ball { center, radius } => Some((
                center.map(|c| c - radius),
                center.map(|c| c + radius),
            )),
            ConvexSet::Polytope { vertices, .. } => {
                let d = vertices[0].len();
                let mut lo = vertices[0].clone();
                let mut hi = vertices[0].clone();
                for v in vertices {
                    for i in 0..d {
                        lo[i] = lo[i].min(v[i]);
                        hi[i] = hi[i].max(v[i]);
                    }
                }
                Some((lo, hi))
            }
            ConvexSet::WholeSpace { .. } => None,
        }
    }

    pub fn diameter(&self) -> Option<f64> {
        match self {
            ConvexSet::Ball { radius, .. } => Some(2.0 * radius),
            _ => self.bounding_box().map(|(lo, hi)| (hi - lo).norm()),
        }
    }

    /// Per-coordinate intervals when the set is a product of intervals.
    pub fn separable_intervals(&self) -> Option<Vec<(f64, f64)>> {
        match self {
            ConvexSet::Box { lo, hi } => {
                Some((0..lo.len()).map(|i| (lo[i], hi[i])).collect())
            }
            ConvexSet::WholeSpace { dim } => {
                Some(vec![(f64::NEG_INFINITY, f64::INFINITY); *dim])
            }
            _ => None,
        }
    }

    pub fn vertices(&self) -> Option<&[DVector<f64>]> {
        match self {
            ConvexSet::Polytope { vertices, .. } => Some(vertices),
            _ => None,
        }
    }

    /// Corner points for boxes in low dimension; used as gap warm starts.
    pub fn corners(&self, max_dim: usize) -> Vec<DVector<f64>> {
        match self {
            ConvexSet::Box { lo, hi } if lo.len() <= max_dim => {
                let d = lo.len();
                (0..(1usize << d))
                    .map(|mask| {
                        DVector::from_fn(d, |i, _| {
                            if mask >> i & 1 == 1 {
                                hi[i]
                            } else {
                                lo[i]
                            }
                        })
                    })
                    .collect()
            }
            ConvexSet::Polytope { vertices, .. } => vertices.clone(),
            _ => Vec::new(),
        }
    }

    fn check_dim(&self, x: &DVector<f64>) -> Result<()> {
        if x.len() != self.dim() {
            return Err(Error::Input(format!(
                "set of dimension {} given a vector of length {}",
                self.dim(),
                x.len()
            )));
        }
        Ok(())
    }
}

/// Dual accelerated projected gradient for min ||y - x||^2 s.t. Ay <= b.
/// y(l) = x - A^T l; stops on dual stationarity and primal feasibility.
fn project_polytope(a: &DMatrix<f64>, b: &DVector<f64>, x: &DVector<f64>) -> Result<DVector<f64>> {
    // feasible already?
    let slack = a * x - b;
    let scale = 1.0 + x.norm();
    if slack.iter().all(|&s| s <= FEAS_TOL * 0.01 * scale) {
        return Ok(x.clone());
    }
    let m = a.nrows();
    let lip = {
        let n = spectral_norm(a);
        (n * n).max(1e-12)
    };
    let mut lam = DVector::zeros(m);
    let mut lam_prev = lam.clone();
    let mut tk = 1.0f64;
    let mut best_resid = f64::INFINITY;
    for it in 0..PROJ_MAX_ITERS {
        let beta = if it == 0 {
            0.0
        } else {
            let t_next = 0.5 * (1.0 + (1.0 + 4.0 * tk * tk).sqrt());
            let b = (tk - 1.0) / t_next;
            tk = t_next;
            b
        };
        let z = &lam + (&lam - &lam_prev) * beta;
        let y = x - a.transpose() * &z;
        let grad = a * &y - b; // dual ascent direction
        let mut lam_next = &z + &grad / lip;
        lam_next.iter_mut().for_each(|v| {
            if *v < 0.0 {
                *v = 0.0;
            }
        });
        lam_prev = lam;
        lam = lam_next;

        let y_cur = x - a.transpose() * &lam;
        let g_cur = a * &y_cur - b;
        let mut stat: f64 = 0.0;
        for i in 0..m {
            let step = (lam[i] + g_cur[i] / lip).max(0.0) - lam[i];
            stat = stat.max(step.abs() * lip);
        }
        let feas = g_cur.iter().fold(0.0f64, |acc, &s| acc.max(s.max(0.0)));
        best_resid = best_resid.min(stat.max(feas));
        if stat <= PROJ_STATIONARITY * (1.0 + lam.norm()) && feas <= 1e-10 * scale {
            return Ok(y_cur);
        }
    }
    Err(Error::Numerical {
        context: "polytope projection".into(),
        residual: best_resid,
    })
}

fn n_choose_k(n: usize, k: usize) -> u128 {
    let mut out: u128 = 1;
    for i in 0..k {
        out = out * (n - i) as u128 / (i + 1) as u128;
        if out > u128::from(u64::MAX) {
            return out;
        }
    }
    out
}

fn next_combination(idx: &mut [usize], n: usize) -> bool {
    let k = idx.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if idx[i] < n - (k - i) {
            idx[i] += 1;
            for j in i + 1..k {
                idx[j] = idx[j - 1] + 1;
            }
            return true;
        }
    }
    false
}
