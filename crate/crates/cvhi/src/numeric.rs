//! Small shared numeric kernels: deterministic seeding, simplex projection,
//! golden-section search, lexicographic comparison.

use nalgebra::DVector;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// splitmix64 step; used to derive independent stream seeds from a base seed
/// and a handful of tags so that resumed runs replay bit-identically.
pub fn splitmix64(state: u64) -> u64 {
    let mut z = state.wrapping_add(0x9e3779b97f4a7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Deterministic RNG for a (seed, tag...) coordinate. Streams with different
/// tags are independent; the same tags always give the same stream.
pub fn rng_for(seed: u64, tags: &[u64]) -> ChaCha8Rng {
    let mut s = splitmix64(seed ^ 0x6a09e667f3bcc908);
    for &t in tags {
        s = splitmix64(s ^ t);
    }
    ChaCha8Rng::seed_from_u64(s)
}

/// Euclidean projection onto the probability simplex {m >= 0, sum m = 1}.
pub fn project_simplex(v: &[f64]) -> Vec<f64> {
    let n = v.len();
    let mut u: Vec<f64> = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut css = 0.0;
    let mut rho = 0;
    let mut theta = 0.0;
    for (i, &ui) in u.iter().enumerate() {
        css += ui;
        let t = (css - 1.0) / (i as f64 + 1.0);
        if ui - t > 0.0 {
            rho = i + 1;
            theta = t;
        }
    }
    if rho == 0 {
        // all mass collapses onto the largest coordinate
        let mut out = vec![0.0; n];
        let imax = v
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap_or(0);
        out[imax] = 1.0;
        return out;
    }
    v.iter().map(|&vi| (vi - theta).max(0.0)).collect()
}

/// Golden-section minimization of a unimodal (convex) scalar function on
/// [lo, hi]. Returns (argmin, min). 96 shrinks take the bracket below
/// 1e-20 * (hi - lo), i.e. to machine precision on desk-scale intervals.
pub fn golden_min<F: FnMut(f64) -> f64>(mut f: F, lo: f64, hi: f64, iters: usize) -> (f64, f64) {
    const INVPHI: f64 = 0.618_033_988_749_894_9;
    let (mut a, mut b) = (lo, hi);
    let mut x1 = b - INVPHI * (b - a);
    let mut x2 = a + INVPHI * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..iters {
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - INVPHI * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + INVPHI * (b - a);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (a + b);
    let fm = f(xm);
    if f1 <= f2 && f1 <= fm {
        (x1, f1)
    } else if f2 <= fm {
        (x2, f2)
    } else {
        (xm, fm)
    }
}

/// Lexicographic order on coordinate vectors; used to break value ties
/// deterministically in parallel reductions.
pub fn lex_less(a: &DVector<f64>, b: &DVector<f64>) -> bool {
    for i in 0..a.len().min(b.len()) {
        if a[i] < b[i] {
            return true;
        }
        if a[i] > b[i] {
            return false;
        }
    }
    a.len() < b.len()
}

/// Soft-threshold scalar: argmin_t  w|t| + (1/2)(t - m)^2.
pub fn soft(m: f64, w: f64) -> f64 {
    if m > w {
        m - w
    } else if m < -w {
        m + w
    } else {
        0.0
    }
}

/// Exact minimizer of (a2/2) t^2 - m t + w |t| over [lo, hi], a2 > 0.
/// The objective is convex and unimodal, so clamping the free minimizer
/// is exact.
pub fn plq1d_min(a2: f64, m: f64, w: f64, lo: f64, hi: f64) -> f64 {
    debug_assert!(a2 > 0.0);
    (soft(m, w) / a2).clamp(lo, hi)
}

/// Exact minimizer of c t + w |t| over [lo, hi] (no quadratic part).
/// Piecewise linear, so the minimum sits at an endpoint or at 0.
/// Ties go to the smaller t.
pub fn linear_l1_min(c: f64, w: f64, lo: f64, hi: f64) -> f64 {
    let val = |t: f64| c * t + w * t.abs();
    let mut cands = [lo, 0.0, hi];
    cands.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut best_t = lo;
    let mut best = val(lo);
    for &t in &cands {
        if t < lo || t > hi {
            continue;
        }
        let v = val(t);
        if v < best {
            best = v;
            best_t = t;
        }
    }
    best_t
}
