//! Convex extended-valued functions with proximal access, and locally
//! Lipschitz bifunctions given as maxima of smooth pieces together with
//! their generalized directional derivative and subdifferential.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::numeric::plq1d_min;
use crate::spaces::{spectral_norm, ConvexSet};

pub const ACTIVITY_TOL: f64 = 1e-9;
const DYKSTRA_MAX_CYCLES: usize = 5_000;
const DYKSTRA_TOL: f64 = 1e-13;

/// One additive term of a convex extended-valued function.
#[derive(Debug, Clone)]
pub enum Term {
    Zero,
    /// (1/2) x'Qx + q'x + c with Q symmetric positive semidefinite.
    Quadratic {
        q_mat: DMatrix<f64>,
        q_vec: DVector<f64>,
        c: f64,
    },
    /// weight * ||x||_1
    WeightedL1 { weight: f64 },
    /// weight * ||x||_2
    NormL2 { weight: f64 },
    /// 0 on the set, +inf outside.
    Indicator { set: ConvexSet },
}

/// Proper convex lower semicontinuous function built as a finite sum of
/// terms. Evaluation, proximal map, and affine minorant constants.
#[derive(Debug, Clone)]
pub struct ConvexExtendedFunction {
    pub terms: Vec<Term>,
}

impl ConvexExtendedFunction {
    pub fn zero() -> Self {
        ConvexExtendedFunction { terms: Vec::new() }
    }

    pub fn new(terms: Vec<Term>) -> Self {
        ConvexExtendedFunction { terms }
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| matches!(t, Term::Zero))
    }

    /// Evaluate; +inf outside indicator sets (membership tol 1e-9).
    pub fn eval(&self, x: &DVector<f64>) -> f64 {
        let mut v = 0.0;
        for t in &self.terms {
            match t {
                Term::Zero => {}
                Term::Quadratic { q_mat, q_vec, c } => {
                    v += 0.5 * x.dot(&(q_mat * x)) + q_vec.dot(x) + c;
                }
                Term::WeightedL1 { weight } => {
                    v += weight * x.iter().map(|t| t.abs()).sum::<f64>();
                }
                Term::NormL2 { weight } => v += weight * x.norm(),
                Term::Indicator { set } => {
                    if !set.contains(x, ACTIVITY_TOL) {
                        return f64::INFINITY;
                    }
                }
            }
        }
        v
    }

    /// Proximal map argmin_y f(y) + (1/(2 lambda)) ||y - x||^2.
    /// Single terms and fully separable sums are exact; general sums run
    /// cyclic Dykstra splitting over the term proxes.
    pub fn prox(&self, x: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
        prox_sum(&self.terms.iter().collect::<Vec<_>>(), x, lambda, &[])
    }

    /// Constants (alpha, beta) with f(x) >= -alpha ||x|| - beta, summed
    /// over terms.
    pub fn minorant(&self) -> (f64, f64) {
        let mut alpha = 0.0;
        let mut beta = 0.0;
        for t in &self.terms {
            if let Term::Quadratic { q_vec, c, .. } = t {
                // (1/2) x'Qx >= 0 for PSD Q, so f >= q'x + c >= -||q|| ||x|| + c
                alpha += q_vec.norm();
                beta += (-c).max(0.0);
            }
            // L1, L2, indicators and zero are nonnegative: contribute (0, 0)
        }
        (alpha, beta)
    }

    /// A deterministic subgradient selection at x (0 picked at kinks).
    /// Indicator terms contribute nothing; callers keep iterates feasible.
    pub fn subgradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(x.len());
        for t in &self.terms {
            match t {
                Term::Zero | Term::Indicator { .. } => {}
                Term::Quadratic { q_mat, q_vec, .. } => g += q_mat * x + q_vec,
                Term::WeightedL1 { weight } => {
                    for i in 0..x.len() {
                        g[i] += weight * sign0(x[i]);
                    }
                }
                Term::NormL2 { weight } => {
                    let n = x.norm();
                    if n > 1e-300 {
                        g += x * (*weight / n);
                    }
                }
            }
        }
        g
    }

    /// Lipschitz constant of the finite part on a ball of the given radius
    /// (indicators excluded; fold their sets into the feasible region).
    pub fn lipschitz_on(&self, radius: f64, dim: usize) -> f64 {
        let mut lip = 0.0;
        for t in &self.terms {
            match t {
                Term::Zero | Term::Indicator { .. } => {}
                Term::Quadratic { q_mat, q_vec, .. } => {
                    lip += spectral_norm(q_mat) * radius + q_vec.norm();
                }
                Term::WeightedL1 { weight } => lip += weight * (dim as f64).sqrt(),
                Term::NormL2 { weight } => lip += weight,
            }
        }
        lip
    }

    pub fn indicator_sets(&self) -> Vec<&ConvexSet> {
        self.terms
            .iter()
            .filter_map(|t| match t {
                Term::Indicator { set } => Some(set),
                _ => None,
            })
            .collect()
    }

    /// Separable description (per-coordinate quadratic/linear/l1 and bounds)
    /// when every term factors over coordinates. NormL2 counts only in
    /// dimension one, full quadratics only when diagonal.
    pub fn separable(&self, dim: usize) -> Option<SeparableParts> {
        let mut parts = SeparableParts::zeros(dim);
        for t in &self.terms {
            match t {
                Term::Zero => {}
                Term::WeightedL1 { weight } => {
                    parts.l1.iter_mut().for_each(|w| *w += weight);
                }
                Term::NormL2 { weight } => {
                    if dim == 1 {
                        parts.l1[0] += weight;
                    } else {
                        return None;
                    }
                }
                Term::Quadratic { q_mat, q_vec, c } => {
                    for r in 0..dim {
                        for col in 0..dim {
                            if r != col && q_mat[(r, col)].abs() > 0.0 {
                                return None;
                            }
                        }
                    }
                    for i in 0..dim {
                        parts.quad[i] += q_mat[(i, i)];
                        parts.lin[i] += q_vec[i];
                    }
                    parts.constant += c;
                }
                Term::Indicator { set } => {
                    let iv = set.separable_intervals()?;
                    for i in 0..dim {
                        parts.lo[i] = parts.lo[i].max(iv[i].0);
                        parts.hi[i] = parts.hi[i].min(iv[i].1);
                    }
                }
            }
        }
        Some(parts)
    }

    /// Total (Q, q) when the finite part is purely quadratic; None as soon
    /// as any other kind of term contributes.
    pub fn quadratic_total(&self, dim: usize) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let mut q_tot = DMatrix::zeros(dim, dim);
        let mut lin = DVector::zeros(dim);
        for t in &self.terms {
            match t {
                Term::Zero => {}
                Term::Quadratic { q_mat, q_vec, .. } => {
                    if q_mat.nrows() != dim || q_mat.ncols() != dim || q_vec.len() != dim {
                        return None;
                    }
                    q_tot += q_mat;
                    lin += q_vec;
                }
                _ => return None,
            }
        }
        Some((q_tot, lin))
    }
}

fn sign0(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Coordinate-wise data of a separable convex function:
/// sum_i [ (quad_i/2) t^2 + lin_i t + l1_i |t| + I_[lo_i, hi_i](t) ] + const.
#[derive(Debug, Clone)]
pub struct SeparableParts {
    pub quad: Vec<f64>,
    pub lin: Vec<f64>,
    pub l1: Vec<f64>,
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub constant: f64,
}

impl SeparableParts {
    pub fn zeros(dim: usize) -> Self {
        SeparableParts {
            quad: vec![0.0; dim],
            lin: vec![0.0; dim],
            l1: vec![0.0; dim],
            lo: vec![f64::NEG_INFINITY; dim],
            hi: vec![f64::INFINITY; dim],
            constant: 0.0,
        }
    }

    /// Intersect the bounds with another interval product.
    pub fn clip(&mut self, iv: &[(f64, f64)]) {
        for i in 0..self.lo.len() {
            self.lo[i] = self.lo[i].max(iv[i].0);
            self.hi[i] = self.hi[i].min(iv[i].1);
        }
    }
}

/// Prox of a single term.
fn prox_term(term: &Term, x: &DVector<f64>, lambda: f64) -> Result<DVector<f64>> {
    match term {
        Term::Zero => Ok(x.clone()),
        Term::WeightedL1 { weight } => {
            let w = weight * lambda;
            Ok(x.map(|t| crate::numeric::soft(t, w)))
        }
        Term::NormL2 { weight } => {
            let n = x.norm();
            let w = weight * lambda;
            if n <= w {
                Ok(DVector::zeros(x.len()))
            } else {
                Ok(x * (1.0 - w / n))
            }
        }
        Term::Indicator { set } => set.project(x),
        Term::Quadratic { q_mat, q_vec, .. } => {
            // solve (I + lambda Q) y = x - lambda q
            let n = x.len();
            let lhs = DMatrix::identity(n, n) + q_mat * lambda;
            let rhs = x - q_vec * lambda;
            lhs.lu().solve(&rhs).ok_or_else(|| Error::Numerical {
                context: "quadratic prox solve".into(),
                residual: f64::NAN,
            })
        }
    }
}

/// Prox of a sum of terms plus extra indicator sets, by exact dispatch when
/// possible and cyclic Dykstra splitting otherwise.
pub fn prox_sum(
    terms: &[&Term],
    x: &DVector<f64>,
    lambda: f64,
    extra_sets: &[&ConvexSet],
) -> Result<DVector<f64>> {
    let dim = x.len();
    let mut active: Vec<&Term> = terms
        .iter()
        .copied()
        .filter(|t| !matches!(t, Term::Zero))
        .collect();
    let owned_indicators: Vec<Term> = extra_sets
        .iter()
        .map(|s| Term::Indicator { set: (*s).clone() })
        .collect();
    for t in &owned_indicators {
        active.push(t);
    }
    if active.is_empty() {
        return Ok(x.clone());
    }
    if active.len() == 1 {
        return prox_term(active[0], x, lambda);
    }
    // fully separable sum: exact per-coordinate solve
    let f = ConvexExtendedFunction::new(active.iter().map(|t| (*t).clone()).collect());
    if let Some(parts) = f.separable(dim) {
        let mut y = DVector::zeros(dim);
        let rho = 1.0 / lambda;
        for i in 0..dim {
            let a2 = rho + parts.quad[i];
            let m = rho * x[i] - parts.lin[i];
            if a2 <= 0.0 {
                return Err(Error::Input(
                    "quadratic term is not positive semidefinite".into(),
                ));
            }
            y[i] = plq1d_min(a2, m, parts.l1[i], parts.lo[i], parts.hi[i]);
        }
        return Ok(y);
    }
    // Dykstra splitting over the term proxes
    let n_terms = active.len();
    let mut y = x.clone();
    let mut corrections = vec![DVector::<f64>::zeros(dim); n_terms];
    let scale = 1.0 + x.norm();
    let mut last_cycle_change = f64::INFINITY;
    for _ in 0..DYKSTRA_MAX_CYCLES {
        let y_before = y.clone();
        for (t, corr) in active.iter().zip(corrections.iter_mut()) {
            let z = &y + &*corr;
            let y_new = prox_term(t, &z, lambda)?;
            *corr = z - &y_new;
            y = y_new;
        }
        last_cycle_change = (&y - &y_before).norm();
        if last_cycle_change <= DYKSTRA_TOL * scale {
            return Ok(y);
        }
    }
    Err(Error::Numerical {
        context: "composite prox (Dykstra splitting)".into(),
        residual: last_cycle_change,
    })
}

/// One smooth piece of a max-of-smooth bifunction (p, x) -> phi(p, x).
#[derive(Debug, Clone)]
pub enum Piece {
    /// <g_p, p> + <g_x, x> + b
    Affine {
        g_p: DVector<f64>,
        g_x: DVector<f64>,
        b: f64,
    },
    /// (1/2) x'Qx + x'Rp + <g_x, x> + <g_p, p> + b
    Quadratic {
        q: DMatrix<f64>,
        r: DMatrix<f64>,
        g_x: DVector<f64>,
        g_p: DVector<f64>,
        b: f64,
    },
}

impl Piece {
    pub(crate) fn value(&self, p: &DVector<f64>, x: &DVector<f64>) -> f64 {
        match self {
            Piece::Affine { g_p, g_x, b } => g_p.dot(p) + g_x.dot(x) + b,
            Piece::Quadratic { q, r, g_x, g_p, b } => {
                0.5 * x.dot(&(q * x)) + x.dot(&(r * p)) + g_x.dot(x) + g_p.dot(p) + b
            }
        }
    }

    pub(crate) fn grad_x(&self, p: &DVector<f64>, x: &DVector<f64>) -> DVector<f64> {
        match self {
            Piece::Affine { g_x, .. } => g_x.clone(),
            Piece::Quadratic { q, r, g_x, .. } => q * x + r * p + g_x,
        }
    }

    fn growth(&self) -> f64 {
        match self {
            Piece::Affine { g_x, .. } => g_x.norm(),
            Piece::Quadratic { q, r, g_x, .. } => {
                spectral_norm(q).max(spectral_norm(r)).max(g_x.norm())
            }
        }
    }
}

/// Locally Lipschitz bifunction J(p, x) = max_i phi_i(p, x) with smooth
/// pieces; regular in x, so the generalized directional derivative is the
/// max of active-piece gradients and the subdifferential their hull.
#[derive(Debug, Clone)]
pub struct MaxSmoothBifunction {
    pub n_p: usize,
    pub n_x: usize,
    pub pieces: Vec<Piece>,
    pub activity_tol: f64,
}

impl MaxSmoothBifunction {
    pub fn new(n_p: usize, n_x: usize, pieces: Vec<Piece>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Input("max-of-smooth needs at least one piece".into()));
        }
        for (i, piece) in pieces.iter().enumerate() {
            let (lp, lx) = match piece {
                Piece::Affine { g_p, g_x, .. } => (g_p.len(), g_x.len()),
                Piece::Quadratic { q, r, g_x, g_p, .. } => {
                    if q.nrows() != n_x || q.ncols() != n_x || r.nrows() != n_x {
                        return Err(Error::Input(format!(
                            "piece {i}: quadratic blocks do not match dimension {n_x}"
                        )));
                    }
                    (g_p.len().max(r.ncols()), g_x.len())
                }
            };
            if lp != n_p || lx != n_x {
                return Err(Error::Input(format!(
                    "piece {i}: expected gradients of lengths ({n_p}, {n_x}), got ({lp}, {lx})"
                )));
            }
        }
        Ok(MaxSmoothBifunction {
            n_p,
            n_x,
            pieces,
            activity_tol: ACTIVITY_TOL,
        })
    }

    /// The zero bifunction (single all-zero affine piece).
    pub fn zero(n_p: usize, n_x: usize) -> Self {
        MaxSmoothBifunction {
            n_p,
            n_x,
            pieces: vec![Piece::Affine {
                g_p: DVector::zeros(n_p),
                g_x: DVector::zeros(n_x),
                b: 0.0,
            }],
            activity_tol: ACTIVITY_TOL,
        }
    }

    pub fn is_zero(&self) -> bool {
        self.pieces.iter().all(|p| match p {
            Piece::Affine { g_p, g_x, b } => {
                g_p.norm() == 0.0 && g_x.norm() == 0.0 && *b == 0.0
            }
            _ => false,
        })
    }

    pub fn eval(&self, p: &DVector<f64>, x: &DVector<f64>) -> f64 {
        self.pieces
            .iter()
            .map(|piece| piece.value(p, x))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn active_indices(&self, p: &DVector<f64>, x: &DVector<f64>) -> Vec<usize> {
        let vals: Vec<f64> = self.pieces.iter().map(|piece| piece.value(p, x)).collect();
        let vmax = vals.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        vals.iter()
            .enumerate()
            .filter(|(_, &v)| v >= vmax - self.activity_tol)
            .map(|(i, _)| i)
            .collect()
    }

    /// Generalized directional derivative at (p, x) in direction d
    /// (with respect to x): max over active pieces of <grad phi_i, d>.
    pub fn clarke_dir(&self, p: &DVector<f64>, x: &DVector<f64>, d: &DVector<f64>) -> f64 {
        self.active_indices(p, x)
            .into_iter()
            .map(|i| self.pieces[i].grad_x(p, x).dot(d))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    /// Generalized subdifferential at (p, x): convex hull of the active
    /// gradients, returned by its vertex list.
    pub fn clarke_subdiff(&self, p: &DVector<f64>, x: &DVector<f64>) -> SubdifferentialPolytope {
        let mut vertices: Vec<DVector<f64>> = Vec::new();
        for i in self.active_indices(p, x) {
            let g = self.pieces[i].grad_x(p, x);
            if !vertices.iter().any(|v| (v - &g).norm() <= 1e-14) {
                vertices.push(g);
            }
        }
        SubdifferentialPolytope { vertices }
    }

    /// Growth constant c with ||xi|| <= c (1 + ||x|| + ||p||) for every
    /// subgradient xi; exact from the piece data.
    pub fn growth_constant(&self) -> f64 {
        self.pieces.iter().map(|p| p.growth()).fold(0.0, f64::max)
    }

    /// Upper bound on ||grad_x phi_i|| over ||x|| <= rx, ||p|| <= rp.
    pub fn grad_bound(&self, rp: f64, rx: f64) -> f64 {
        self.pieces
            .iter()
            .map(|p| match p {
                Piece::Affine { g_x, .. } => g_x.norm(),
                Piece::Quadratic { q, r, g_x, .. } => {
                    spectral_norm(q) * rx + spectral_norm(r) * rp + g_x.norm()
                }
            })
            .fold(0.0, f64::max)
    }
}

/// Convex hull of finitely many subgradients, as produced by
/// `clarke_subdiff`.
#[derive(Debug, Clone)]
pub struct SubdifferentialPolytope {
    pub vertices: Vec<DVector<f64>>,
}

impl SubdifferentialPolytope {
    /// Support function max_{xi in hull} <xi, d> (max over vertices).
    pub fn support(&self, d: &DVector<f64>) -> f64 {
        self.vertices
            .iter()
            .map(|v| v.dot(d))
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::rng_for;
    use rand::Rng;

    fn vec(v: &[f64]) -> DVector<f64> {
        DVector::from_column_slice(v)
    }

    fn abs_1d() -> MaxSmoothBifunction {
        MaxSmoothBifunction::new(
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
        .unwrap()
    }

    fn two_affine() -> MaxSmoothBifunction {
        // max(2x + 1, -x + 1)
        MaxSmoothBifunction::new(
            1,
            1,
            vec![
                Piece::Affine {
                    g_p: vec(&[0.0]),
                    g_x: vec(&[2.0]),
                    b: 1.0,
                },
                Piece::Affine {
                    g_p: vec(&[0.0]),
                    g_x: vec(&[-1.0]),
                    b: 1.0,
                },
            ],
        )
        .unwrap()
    }

    /// Finite-difference upper-limit oracle for the directional derivative:
    /// max difference quotient over jittered base points (step 1e-5,
    /// jitter 1e-4).
    fn fd_clarke_oracle(
        j: &MaxSmoothBifunction,
        p: &DVector<f64>,
        x: &DVector<f64>,
        d: &DVector<f64>,
    ) -> f64 {
        let mut rng = rng_for(99, &[17]);
        let lam = 1e-5;
        let mut best = f64::NEG_INFINITY;
        for k in 0..400 {
            let xj = if k == 0 {
                x.clone()
            } else {
                x + DVector::from_fn(x.len(), |_, _| rng.random_range(-1e-4..1e-4))
            };
            let q = (j.eval(p, &(&xj + d * lam)) - j.eval(p, &xj)) / lam;
            best = best.max(q);
        }
        best
    }

    #[test]
    fn eval_examples() {
        let a = abs_1d();
        assert_eq!(a.eval(&vec(&[0.0]), &vec(&[-2.0])), 2.0);
        let t = two_affine();
        assert_eq!(t.eval(&vec(&[0.0]), &vec(&[0.0])), 1.0);
    }

    #[test]
    fn clarke_dir_at_kink_both_pieces() {
        let a = abs_1d();
        let p = vec(&[0.0]);
        let zero = vec(&[0.0]);
        for d in [1.0, -1.0, 0.5] {
            let got = a.clarke_dir(&p, &zero, &vec(&[d]));
            assert!((got - d.abs()).abs() < 1e-15);
        }
    }

    #[test]
    fn clarke_dir_smooth_point() {
        // (1/2) x^2 as a single quadratic piece, at x = 3, d = 2 -> 6
        let j = MaxSmoothBifunction::new(
            1,
            1,
            vec![Piece::Quadratic {
                q: DMatrix::from_row_slice(1, 1, &[1.0]),
                r: DMatrix::zeros(1, 1),
                g_x: vec(&[0.0]),
                g_p: vec(&[0.0]),
                b: 0.0,
            }],
        )
        .unwrap();
        let got = j.clarke_dir(&vec(&[0.0]), &vec(&[3.0]), &vec(&[2.0]));
        assert!((got - 6.0).abs() < 1e-12);
    }

    #[test]
    fn clarke_dir_matches_fd_oracle_at_two_piece_kink() {
        let t = two_affine();
        let p = vec(&[0.0]);
        let zero = vec(&[0.0]);
        // oracle first
        let o_plus = fd_clarke_oracle(&t, &p, &zero, &vec(&[1.0]));
        let o_minus = fd_clarke_oracle(&t, &p, &zero, &vec(&[-1.0]));
        assert!((o_plus - 2.0).abs() < 1e-3);
        assert!((o_minus - 1.0).abs() < 1e-3);
        // frozen values
        assert!((t.clarke_dir(&p, &zero, &vec(&[1.0])) - 2.0).abs() < 1e-15);
        assert!((t.clarke_dir(&p, &zero, &vec(&[-1.0])) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn subdiff_vertices_at_kinks() {
        let a = abs_1d();
        let sd = a.clarke_subdiff(&vec(&[0.0]), &vec(&[0.0]));
        let mut vals: Vec<f64> = sd.vertices.iter().map(|v| v[0]).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(vals, vec![-1.0, 1.0]);

        let t = two_affine();
        let sd = t.clarke_subdiff(&vec(&[0.0]), &vec(&[0.0]));
        let mut vals: Vec<f64> = sd.vertices.iter().map(|v| v[0]).collect();
        vals.sort_by(|x, y| x.partial_cmp(y).unwrap());
        assert_eq!(vals, vec![-1.0, 2.0]);
    }

    fn random_maxsmooth(rng: &mut impl Rng, n_p: usize, n_x: usize) -> MaxSmoothBifunction {
        let k = rng.random_range(1..=6);
        let pieces = (0..k)
            .map(|_| Piece::Affine {
                g_p: DVector::from_fn(n_p, |_, _| rng.random_range(-1.0..1.0)),
                g_x: DVector::from_fn(n_x, |_, _| rng.random_range(-1.0..1.0)),
                b: rng.random_range(-1.0..1.0),
            })
            .collect();
        MaxSmoothBifunction::new(n_p, n_x, pieces).unwrap()
    }

    #[test]
    fn directional_derivative_calculus_invariants() {
        let mut rng = rng_for(5, &[1]);
        for _ in 0..200 {
            let n_x = rng.random_range(1..=5);
            let n_p = rng.random_range(1..=3);
            let j = random_maxsmooth(&mut rng, n_p, n_x);
            let p = DVector::from_fn(n_p, |_, _| rng.random_range(-2.0..2.0));
            let x = DVector::from_fn(n_x, |_, _| rng.random_range(-2.0..2.0));
            let d1 = DVector::from_fn(n_x, |_, _| rng.random_range(-2.0..2.0));
            let d2 = DVector::from_fn(n_x, |_, _| rng.random_range(-2.0..2.0));
            // zero direction
            assert_eq!(j.clarke_dir(&p, &x, &DVector::zeros(n_x)), 0.0);
            // positive homogeneity, exact for these scalings
            let base = j.clarke_dir(&p, &x, &d1);
            for lam in [0.0, 0.5, 2.0, 10.0] {
                let got = j.clarke_dir(&p, &x, &(&d1 * lam));
                assert!((got - lam * base).abs() <= 1e-12 * (1.0 + base.abs() * lam));
            }
            // subadditivity
            let sum = j.clarke_dir(&p, &x, &(&d1 + &d2));
            assert!(sum <= base + j.clarke_dir(&p, &x, &d2) + 1e-12);
            // support-function identity
            let sd = j.clarke_subdiff(&p, &x);
            assert!((sd.support(&d1) - base).abs() <= 1e-12 * (1.0 + base.abs()));
            // growth
            let c = j.growth_constant();
            for v in &sd.vertices {
                assert!(v.norm() <= c * (1.0 + x.norm() + p.norm()) + 1e-12);
            }
        }
    }

    #[test]
    fn prox_examples() {
        // soft threshold: L1 weight 1, x = 2, lambda = 1 -> 1
        let f = ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 1.0 }]);
        let y = f.prox(&vec(&[2.0]), 1.0).unwrap();
        assert!((y[0] - 1.0).abs() < 1e-14);
        // zero function: identity
        let z = ConvexExtendedFunction::zero();
        assert_eq!(z.prox(&vec(&[-3.5]), 2.0).unwrap()[0], -3.5);
        // L1 + box indicator, 1-d, x = -3, lambda = 1 -> 0
        let f = ConvexExtendedFunction::new(vec![
            Term::WeightedL1 { weight: 1.0 },
            Term::Indicator {
                set: ConvexSet::make_box(vec(&[0.0]), vec(&[10.0])).unwrap(),
            },
        ]);
        let y = f.prox(&vec(&[-3.0]), 1.0).unwrap();
        assert!(y[0].abs() < 1e-12);
    }

    /// 1-d grid oracle for the prox of L1 + box: scan t over the box.
    #[test]
    fn prox_composite_matches_grid_oracle() {
        let f = ConvexExtendedFunction::new(vec![
            Term::WeightedL1 { weight: 1.0 },
            Term::Indicator {
                set: ConvexSet::make_box(vec(&[0.0]), vec(&[10.0])).unwrap(),
            },
        ]);
        let x = -3.0;
        let lambda = 1.0;
        let mut best_t = 0.0;
        let mut best = f64::INFINITY;
        let mut t = 0.0f64;
        while t <= 10.0 {
            let v = t.abs() + (t - x) * (t - x) / (2.0 * lambda);
            if v < best {
                best = v;
                best_t = t;
            }
            t += 1e-4;
        }
        let y = f.prox(&vec(&[x]), lambda).unwrap();
        assert!((y[0] - best_t).abs() <= 1e-4);
    }

    #[test]
    fn prox_optimality_residual() {
        // f(prox) + (1/2l)||prox - x||^2 <= f(z) + (1/2l)||z - x||^2 for
        // sampled z, i.e. directional optimality up to 1e-8
        let sets: Vec<ConvexExtendedFunction> = vec![
            ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 0.7 }]),
            ConvexExtendedFunction::new(vec![
                Term::NormL2 { weight: 0.4 },
                Term::Quadratic {
                    q_mat: DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]),
                    q_vec: vec(&[0.3, -0.2]),
                    c: 0.1,
                },
            ]),
            ConvexExtendedFunction::new(vec![
                Term::WeightedL1 { weight: 0.5 },
                Term::Indicator {
                    set: ConvexSet::make_ball(vec(&[0.0, 0.0]), 1.0).unwrap(),
                },
            ]),
        ];
        let mut rng = rng_for(21, &[4]);
        for f in &sets {
            for _ in 0..20 {
                let x = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
                let lambda = rng.random_range(0.1..2.0);
                let y = f.prox(&x, lambda).unwrap();
                let fy = f.eval(&y) + (&y - &x).norm_squared() / (2.0 * lambda);
                for _ in 0..100 {
                    let d = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
                    let z = &y + &d * rng.random_range(0.0..0.5);
                    let fz = f.eval(&z) + (&z - &x).norm_squared() / (2.0 * lambda);
                    assert!(fz >= fy - 1e-8);
                }
            }
        }
    }

    #[test]
    fn minorant_examples() {
        assert_eq!(ConvexExtendedFunction::zero().minorant(), (0.0, 0.0));
        let l1 = ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 3.0 }]);
        assert_eq!(l1.minorant(), (0.0, 0.0));
        let q = ConvexExtendedFunction::new(vec![Term::Quadratic {
            q_mat: DMatrix::zeros(1, 1),
            q_vec: vec(&[1.0]),
            c: 0.0,
        }]);
        assert_eq!(q.minorant(), (1.0, 0.0));
    }

    #[test]
    fn minorant_is_sound_on_samples() {
        let mut rng = rng_for(31, &[9]);
        let f = ConvexExtendedFunction::new(vec![
            Term::Quadratic {
                q_mat: DMatrix::from_row_slice(2, 2, &[1.0, 0.2, 0.2, 0.8]),
                q_vec: vec(&[-0.5, 1.5]),
                c: -0.3,
            },
            Term::WeightedL1 { weight: 0.2 },
        ]);
        let (alpha, beta) = f.minorant();
        for _ in 0..10_000 {
            let x = DVector::from_fn(2, |_, _| rng.random_range(-50.0..50.0));
            assert!(f.eval(&x) >= -alpha * x.norm() - beta - 1e-10);
        }
    }

    #[test]
    fn eval_examples_from_catalogue() {
        let l1 = ConvexExtendedFunction::new(vec![Term::WeightedL1 { weight: 1.0 }]);
        assert_eq!(l1.eval(&vec(&[3.0, -4.0])), 7.0);
        let ind = ConvexExtendedFunction::new(vec![Term::Indicator {
            set: ConvexSet::make_box(vec(&[-1.0]), vec(&[1.0])).unwrap(),
        }]);
        assert_eq!(ind.eval(&vec(&[2.0])), f64::INFINITY);
        let q = ConvexExtendedFunction::new(vec![Term::Quadratic {
            q_mat: DMatrix::identity(2, 2),
            q_vec: vec(&[0.0, 0.0]),
            c: 0.0,
        }]);
        assert_eq!(q.eval(&vec(&[1.0, 2.0])), 2.5);
    }

    #[test]
    fn finite_difference_consistency_single_active_piece() {
        // at points where exactly one piece is active (within 1e-3 margin),
        // the fd quotient matches clarke_dir to 1e-3
        let mut rng = rng_for(41, &[2]);
        let mut checked = 0;
        while checked < 200 {
            let j = random_maxsmooth(&mut rng, 1, 2);
            let p = vec(&[rng.random_range(-1.0..1.0)]);
            let x = DVector::from_fn(2, |_, _| rng.random_range(-2.0..2.0));
            let vals: Vec<f64> = j.pieces.iter().map(|pc| pc.value(&p, &x)).collect();
            let mut sorted = vals.clone();
            sorted.sort_by(|a, b| b.partial_cmp(a).unwrap());
            if sorted.len() > 1 && sorted[0] - sorted[1] < 1e-3 {
                continue;
            }
            let d = DVector::from_fn(2, |_, _| rng.random_range(-1.0..1.0));
            let lam = 1e-5;
            let quot = (j.eval(&p, &(&x + &d * lam)) - j.eval(&p, &x)) / lam;
            let cd = j.clarke_dir(&p, &x, &d);
            assert!((quot - cd).abs() <= 1e-3);
            checked += 1;
        }
    }
}
