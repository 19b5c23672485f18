//! Small dense linear algebra: vector helpers, a symmetric Jacobi
//! eigensolver and a one-sided Jacobi SVD.
//!
//! Collections here are tiny on one side (K <= a few dozen weight sets) and
//! wide on the other (p parameters), so the SVD works directly on the K
//! rows; no p x p object is ever formed.

use alloc::vec;
use alloc::vec::Vec;

use crate::model::Matrix;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    libm::sqrt(dot(a, a))
}

pub fn norm1(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).sum()
}

pub fn norm_inf(a: &[f64]) -> f64 {
    a.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

/// `y += scale * x`
pub fn axpy(y: &mut [f64], x: &[f64], scale: f64) {
    debug_assert_eq!(y.len(), x.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += scale * xi;
    }
}

pub fn scale(a: &mut [f64], s: f64) {
    for v in a.iter_mut() {
        *v *= s;
    }
}

/// Result of [`svd_rows`]: `mat = U S V^T` with only `S` and the rows of
/// `V^T` retained.
#[derive(Debug, Clone)]
pub struct RowSvd {
    /// Singular values, descending; length equals the row count.
    pub singular_values: Vec<f64>,
    /// Right singular vectors as rows, aligned with `singular_values`.
    /// Rows whose singular value is (numerically) zero are zero vectors.
    pub right_vectors: Matrix,
    /// Number of numerically non-zero singular values.
    pub rank: usize,
}

const SVD_SWEEP_LIMIT: usize = 64;
const SVD_ORTH_TOL: f64 = 1e-14;
const RANK_REL_TOL: f64 = 1e-12;

/// Exact full SVD of a short-and-wide matrix (`k` rows, `k <= cols`),
/// by one-sided Jacobi rotations applied to the rows.
///
/// Rotations are swept over row pairs until all pairs are mutually
/// orthogonal; the row norms are then the singular values and the
/// normalised rows the right singular vectors. Each vector's sign is fixed
/// by making its largest-magnitude coordinate positive so component
/// identity is reproducible run to run.
pub fn svd_rows(mat: &Matrix) -> RowSvd {
    let k = mat.rows();
    let mut work = mat.clone();

    for _sweep in 0..SVD_SWEEP_LIMIT {
        let mut rotated = false;
        for i in 0..k {
            for j in (i + 1)..k {
                let (a, b, c) = {
                    let ri = work.row(i);
                    let rj = work.row(j);
                    (dot(ri, ri), dot(rj, rj), dot(ri, rj))
                };
                if c.abs() <= SVD_ORTH_TOL * libm::sqrt(a * b) || c == 0.0 {
                    continue;
                }
                rotated = true;
                // Jacobi rotation zeroing <r_i, r_j>
                let zeta = (b - a) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let cos = 1.0 / libm::sqrt(1.0 + t * t);
                let sin = cos * t;
                for col in 0..work.cols() {
                    let vi = work.get(i, col);
                    let vj = work.get(j, col);
                    work.set(i, col, cos * vi - sin * vj);
                    work.set(j, col, sin * vi + cos * vj);
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = (0..k).map(|i| norm2(work.row(i))).collect();
    order.sort_by(|&a, &b| norms[b].partial_cmp(&norms[a]).unwrap());

    let sigma_max = norms[order[0]];
    let mut singular_values = Vec::with_capacity(k);
    let mut right = Matrix::zeros(k, mat.cols());
    let mut rank = 0;
    for (out_row, &src) in order.iter().enumerate() {
        let s = norms[src];
        singular_values.push(s);
        if sigma_max > 0.0 && s > RANK_REL_TOL * sigma_max {
            rank += 1;
            let inv = 1.0 / s;
            // sign convention: largest-magnitude coordinate positive
            let (mut best_c, mut best_v) = (0, 0.0f64);
            for c in 0..mat.cols() {
                let v = work.get(src, c);
                if v.abs() > best_v.abs() {
                    best_v = v;
                    best_c = c;
                }
            }
            let _ = best_c;
            let flip = if best_v < 0.0 { -1.0 } else { 1.0 };
            for c in 0..mat.cols() {
                right.set(out_row, c, work.get(src, c) * inv * flip);
            }
        }
    }

    RowSvd {
        singular_values,
        right_vectors: right,
        rank,
    }
}

/// Eigendecomposition of a symmetric matrix by the cyclic Jacobi method.
/// Returns eigenvalues in descending order with matching eigenvector rows.
pub fn sym_eigen(mat: &Matrix) -> (Vec<f64>, Matrix) {
    let n = mat.rows();
    assert_eq!(n, mat.cols(), "matrix must be square");
    let mut a = mat.clone();
    // eigenvector accumulator, starts as identity
    let mut v = Matrix::zeros(n, n);
    for i in 0..n {
        v.set(i, i, 1.0);
    }

    for _sweep in 0..SVD_SWEEP_LIMIT {
        let mut off = 0.0;
        for i in 0..n {
            for j in (i + 1)..n {
                off += a.get(i, j).abs();
            }
        }
        if off < 1e-13 {
            break;
        }
        for p in 0..n {
            for q in (p + 1)..n {
                let apq = a.get(p, q);
                if apq.abs() < 1e-300 {
                    continue;
                }
                let app = a.get(p, p);
                let aqq = a.get(q, q);
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + libm::sqrt(1.0 + zeta * zeta));
                let c = 1.0 / libm::sqrt(1.0 + t * t);
                let s = c * t;
                for k in 0..n {
                    let akp = a.get(k, p);
                    let akq = a.get(k, q);
                    a.set(k, p, c * akp - s * akq);
                    a.set(k, q, s * akp + c * akq);
                }
                for k in 0..n {
                    let apk = a.get(p, k);
                    let aqk = a.get(q, k);
                    a.set(p, k, c * apk - s * aqk);
                    a.set(q, k, s * apk + c * aqk);
                }
                for k in 0..n {
                    let vkp = v.get(p, k);
                    let vkq = v.get(q, k);
                    v.set(p, k, c * vkp - s * vkq);
                    v.set(q, k, s * vkp + c * vkq);
                }
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| a.get(y, y).partial_cmp(&a.get(x, x)).unwrap());
    let eigenvalues: Vec<f64> = order.iter().map(|&i| a.get(i, i)).collect();
    let mut vectors = Matrix::zeros(n, n);
    for (row, &src) in order.iter().enumerate() {
        for k in 0..n {
            vectors.set(row, k, v.get(src, k));
        }
    }
    (eigenvalues, vectors)
}

/// `mat * x` for a square row-major matrix given as a flat slice.
pub fn mat_vec(mat: &Matrix, x: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; mat.rows()];
    for (o, row) in out.iter_mut().zip(mat.iter_rows()) {
        *o = dot(row, x);
    }
    out
}
