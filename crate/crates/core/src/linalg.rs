//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMat = DMatrix<C64>;
pub type CVec = DVector<C64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Full singular value decomposition with singular values sorted descending.
/// Wide matrices are padded with zero rows so that the right factor is square.
pub struct FullSvd {
    pub u: CMat,
    pub s: Vec<f64>,
    /// Rows are right singular vectors (conjugated), as returned by nalgebra.
    pub v_t: CMat,
}

pub fn full_svd(a: &CMat) -> FullSvd {
    let (m, n) = a.shape();
    let padded = if m < n {
        let mut p = CMat::zeros(n, n);
        p.view_mut((0, 0), (m, n)).copy_from(a);
        p
    } else {
        a.clone()
    };
    let svd = padded.svd(true, true);
    let u = svd.u.unwrap();
    let v_t = svd.v_t.unwrap();
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&i, &j| svd.singular_values[j].partial_cmp(&svd.singular_values[i]).unwrap());
    let s = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = CMat::from_fn(u.nrows(), order.len(), |r, k| u[(r, order[k])]);
    let v_t = CMat::from_fn(order.len(), v_t.ncols(), |k, col| v_t[(order[k], col)]);
    FullSvd { u, s, v_t }
}

/// Orthonormal basis (columns) of the right nullspace, using a singular value
/// threshold relative to the largest one.
pub fn nullspace(a: &CMat, rel_tol: f64) -> CMat {
    let n = a.ncols();
    if a.nrows() == 0 {
        return CMat::identity(n, n);
    }
    let svd = full_svd(a);
    let smax = svd.s.first().copied().unwrap_or(0.0).max(f64::MIN_POSITIVE);
    let rank = svd.s.iter().take(a.nrows().min(n)).filter(|&&s| s > rel_tol * smax).count();
    nullspace_of_rank(&svd, rank, n)
}

/// The last `dim` right singular vectors.
pub fn smallest_right_vectors(a: &CMat, dim: usize) -> (CMat, Vec<f64>) {
    let n = a.ncols();
    let svd = full_svd(a);
    let basis = nullspace_of_rank(&svd, n - dim, n);
    (basis, svd.s)
}

fn nullspace_of_rank(svd: &FullSvd, rank: usize, n: usize) -> CMat {
    CMat::from_fn(n, n - rank, |r, k| svd.v_t[(rank + k, r)].conj())
}

/// Singular values sorted descending; the list has min(rows, cols) entries.
pub fn singular_values(a: &CMat) -> Vec<f64> {
    let mut s: Vec<f64> = a.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|x, y| y.partial_cmp(x).unwrap());
    s
}

pub fn numeric_rank(a: &CMat, rel_tol: f64) -> usize {
    let s = singular_values(a);
    let smax = s.first().copied().unwrap_or(0.0);
    s.iter().filter(|&&v| v > rel_tol * smax).count()
}

/// Least-squares solution with singular values below `rel_tol·s_max` discarded.
pub fn lstsq(a: &CMat, b: &CVec, rel_tol: f64) -> CVec {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    svd.solve(b, rel_tol * smax).expect("svd factors requested")
}

/// Square solve by LU, falling back to least squares if singular.
pub fn solve(a: &CMat, b: &CVec) -> CVec {
    match a.clone().lu().solve(b) {
        Some(x) if x.iter().all(|v| v.re.is_finite() && v.im.is_finite()) => x,
        _ => lstsq(a, b, 1e-14),
    }
}

/// Orthonormalize the columns of `a` (Hermitian inner product), dropping
/// columns that are dependent to `tol`.
pub fn orthonormalize(a: &CMat, tol: f64) -> CMat {
    let mut cols: Vec<CVec> = Vec::new();
    for j in 0..a.ncols() {
        let mut v = a.column(j).into_owned();
        for _ in 0..2 {
            for q in &cols {
                let p = q.dotc(&v);
                v -= q * p;
            }
        }
        let nv = v.norm();
        if nv > tol {
            cols.push(v / C64::new(nv, 0.0));
        }
    }
    if cols.is_empty() {
        return CMat::zeros(a.nrows(), 0);
    }
    CMat::from_columns(&cols)
}

/// Orthonormal basis for the Hermitian orthogonal complement of the column span.
pub fn complement(a: &CMat) -> CMat {
    let n = a.nrows();
    if a.ncols() == 0 {
        return CMat::identity(n, n);
    }
    nullspace(&a.adjoint(), 1e-12)
}

pub fn hstack(blocks: &[&CMat]) -> CMat {
    let rows = blocks[0].nrows();
    let cols: usize = blocks.iter().map(|b| b.ncols()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((0, at), (rows, b.ncols())).copy_from(*b);
        at += b.ncols();
    }
    out
}

pub fn vstack(blocks: &[&CMat]) -> CMat {
    let cols = blocks.iter().map(|b| b.ncols()).max().unwrap_or(0);
    let rows: usize = blocks.iter().map(|b| b.nrows()).sum();
    let mut out = CMat::zeros(rows, cols);
    let mut at = 0;
    for b in blocks {
        out.view_mut((at, 0), (b.nrows(), b.ncols())).copy_from(*b);
        at += b.nrows();
    }
    out
}

pub fn max_abs(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Scalar λ minimizing ‖a − λ b‖ and the relative residual ‖a − λ b‖/‖a‖.
pub fn fit_scalar(a: &[C64], b: &[C64]) -> (C64, f64) {
    let num: C64 = a.iter().zip(b).map(|(x, y)| y.conj() * x).sum();
    let den: f64 = b.iter().map(|y| y.norm_sqr()).sum();
    let lambda = if den > 0.0 { num / den } else { ZERO };
    let res: f64 = a.iter().zip(b).map(|(x, y)| (x - lambda * y).norm_sqr()).sum::<f64>().sqrt();
    let na = vec_norm(a);
    (lambda, if na > 0.0 { res / na } else { res })
}
