//! Dense linear-algebra helpers shared by the learners and evaluators.
//!
//! Eigenpairs are always returned in non-increasing eigenvalue order with the
//! largest-magnitude entry of each eigenvector made positive, so results are
//! comparable across runs.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;

use crate::math::{abs, sqrt};
use crate::rng::{self, Purpose};

/// Gram problems up to this size are solved densely; larger ones use Lanczos.
pub const DENSE_GRAM_LIMIT: usize = 256;

/// Eigenvalues below this fraction of the largest one count as zero.
pub const RANK_TOL: f64 = 1e-12;

/// Eigenpairs of a symmetric matrix, sorted by non-increasing eigenvalue.
#[derive(Debug, Clone)]
pub struct SymEigen {
    pub values: Vec<f64>,
    /// One eigenvector per column.
    pub vectors: DMatrix<f64>,
}

impl SymEigen {
    /// Keeps the first `k` pairs.
    pub fn truncate(mut self, k: usize) -> Self {
        let k = k.min(self.values.len());
        self.values.truncate(k);
        self.vectors = self.vectors.columns(0, k).into_owned();
        self
    }

    /// Number of eigenvalues above `RANK_TOL * max(values)`.
    pub fn numerical_rank(&self) -> usize {
        let top = self.values.first().copied().unwrap_or(0.0);
        if top <= 0.0 {
            return 0;
        }
        self.values.iter().filter(|&&v| v > RANK_TOL * top).count()
    }
}

/// Full eigendecomposition of the symmetric matrix `a`.
pub fn sym_eigen(a: DMatrix<f64>) -> SymEigen {
    let n = a.nrows();
    if n == 0 {
        return SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(0, 0),
        };
    }
    let eig = a.symmetric_eigen();
    let values: Vec<f64> = eig.eigenvalues.iter().copied().collect();
    canonicalize(values, eig.eigenvectors)
}

/// Eigenvalues only, non-increasing.
pub fn sym_eigenvalues(a: DMatrix<f64>) -> Vec<f64> {
    if a.nrows() == 0 {
        return Vec::new();
    }
    let mut v: Vec<f64> = a.symmetric_eigenvalues().iter().copied().collect();
    v.sort_by(|a, b| b.partial_cmp(a).unwrap_or(Ordering::Equal));
    v
}

/// Top `k` eigenpairs of a symmetric PSD-ish matrix, choosing dense or
/// Lanczos by size.
pub fn top_k_symmetric(a: &DMatrix<f64>, k: usize) -> SymEigen {
    if a.nrows() <= DENSE_GRAM_LIMIT {
        sym_eigen(a.clone()).truncate(k)
    } else {
        lanczos_top_k(a, k, 1e-11)
    }
}

/// Sorts eigenpairs, fixes signs and breaks ties deterministically.
fn canonicalize(values: Vec<f64>, vectors: DMatrix<f64>) -> SymEigen {
    let n = vectors.nrows();
    let mut cols: Vec<(f64, DVector<f64>)> = values
        .into_iter()
        .zip(vectors.column_iter())
        .map(|(v, c)| (v, fix_sign(c.into_owned())))
        .collect();
    let scale = cols
        .iter()
        .fold(0.0f64, |m, (v, _)| m.max(abs(*v)))
        .max(1.0);
    let tie = 1e-12 * scale;
    cols.sort_by(|(va, ca), (vb, cb)| {
        if abs(va - vb) <= tie {
            lexicographic(ca, cb)
        } else {
            vb.partial_cmp(va).unwrap_or(Ordering::Equal)
        }
    });
    let mut out = DMatrix::zeros(n, cols.len());
    let mut vals = Vec::with_capacity(cols.len());
    for (j, (v, c)) in cols.into_iter().enumerate() {
        vals.push(v);
        out.set_column(j, &c);
    }
    SymEigen {
        values: vals,
        vectors: out,
    }
}

fn lexicographic(a: &DVector<f64>, b: &DVector<f64>) -> Ordering {
    for (x, y) in a.iter().zip(b.iter()) {
        match y.partial_cmp(x) {
            Some(Ordering::Equal) | None => continue,
            Some(o) => return o,
        }
    }
    Ordering::Equal
}

/// Flips `v` so that its largest-magnitude entry is positive.
pub fn fix_sign(mut v: DVector<f64>) -> DVector<f64> {
    let mut best = 0usize;
    let mut best_abs = -1.0;
    for (i, x) in v.iter().enumerate() {
        if abs(*x) > best_abs {
            best_abs = abs(*x);
            best = i;
        }
    }
    if !v.is_empty() && v[best] < 0.0 {
        v.neg_mut();
    }
    v
}

/// In-place modified Gram-Schmidt with one reorthogonalization pass.
///
/// Columns that collapse numerically are replaced by the first canonical basis
/// vector that survives orthogonalization. Returns how many were replaced.
pub fn orthonormalize(q: &mut DMatrix<f64>) -> usize {
    let (m, k) = q.shape();
    let mut replaced = 0;
    for j in 0..k {
        let original = q.column(j).norm();
        for _ in 0..2 {
            for i in 0..j {
                let d = q.column(i).dot(&q.column(j));
                let (ci, mut cj) = q.columns_range_pair_mut(i, j);
                cj.axpy(-d, &ci, 1.0);
            }
        }
        let norm = q.column(j).norm();
        if norm > 1e-10 * original.max(f64::MIN_POSITIVE) && norm > 0.0 && norm.is_finite() {
            q.column_mut(j).scale_mut(1.0 / norm);
            continue;
        }
        replaced += 1;
        for e in 0..m {
            let mut cand = DVector::zeros(m);
            cand[e] = 1.0;
            for _ in 0..2 {
                for i in 0..j {
                    let d = q.column(i).dot(&cand);
                    cand.axpy(-d, &q.column(i), 1.0);
                }
            }
            let nn = cand.norm();
            if nn > 1e-6 {
                q.set_column(j, &(cand / nn));
                break;
            }
        }
    }
    replaced
}

/// Largest absolute entry of `QᵀQ − I`.
pub fn orthonormality_error(q: &DMatrix<f64>) -> f64 {
    let g = q.transpose() * q;
    let mut worst = 0.0f64;
    for i in 0..g.nrows() {
        for j in 0..g.ncols() {
            let target = if i == j { 1.0 } else { 0.0 };
            worst = worst.max(abs(g[(i, j)] - target));
        }
    }
    worst
}

/// Orthogonal polar factor of a square matrix. The flag is set when the
/// smallest singular value is numerically zero, in which case the factor is
/// one valid completion, `left · rightᵀ` from the SVD.
///
/// Otherwise the factor comes from the scaled Newton iteration
/// `X ← (γX + X⁻ᵀ/γ)/2`. The SVD alone can be off by ~1e-6 when two
/// singular values nearly coincide.
pub fn polar_factor(a: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let k = a.nrows();
    if k == 0 {
        return (DMatrix::zeros(0, 0), false);
    }
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    let degenerate = smax <= 0.0 || smin <= 1e-12 * smax;
    let fallback = svd.u.expect("requested U") * svd.v_t.expect("requested Vᵀ");
    if degenerate || smin <= 1e-8 * smax {
        return (fallback, degenerate);
    }
    let mut x = a.clone();
    for _ in 0..100 {
        let Some(inv) = x.clone().try_inverse() else {
            return (fallback, false);
        };
        let gamma = sqrt(inv.norm() / x.norm());
        let next = (&x * gamma + inv.transpose() / gamma) * 0.5;
        let step = (&next - &x).norm();
        x = next;
        if step <= 1e-15 * sqrt(k as f64) {
            break;
        }
    }
    (x, false)
}

/// Top-`k` eigenpairs of a symmetric matrix by Lanczos with full
/// reorthogonalization. The Krylov space grows until every wanted Ritz pair
/// has residual at most `tol · |θ₁|`, or reaches the full dimension.
pub fn lanczos_top_k(a: &DMatrix<f64>, k: usize, tol: f64) -> SymEigen {
    let n = a.nrows();
    let k = k.min(n);
    if n == 0 || k == 0 {
        return SymEigen {
            values: Vec::new(),
            vectors: DMatrix::zeros(n, 0),
        };
    }
    let mut rng = rng::substream(0x01a4_c205, Purpose::Diagnostics);
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut alpha: Vec<f64> = Vec::new();
    // beta[j] couples basis[j] and basis[j+1]; a zero marks a restart.
    let mut beta: Vec<f64> = Vec::new();
    let anorm = a.iter().fold(0.0f64, |m, x| m.max(abs(*x))) * n as f64;

    let random_unit = |rng: &mut rng::Rng, basis: &[DVector<f64>]| -> Option<DVector<f64>> {
        for _ in 0..8 {
            let mut v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            reorthogonalize(&mut v, basis);
            let nv = v.norm();
            if nv > 1e-8 {
                return Some(v / nv);
            }
        }
        None
    };

    let mut target = n.min((2 * k + 20).max(40));
    let mut next = random_unit(&mut rng, &basis);
    loop {
        while basis.len() < target {
            let Some(v) = next.take() else { break };
            let mut w = a * &v;
            let al = w.dot(&v);
            w.axpy(-al, &v, 1.0);
            if let (Some(prev), Some(&b)) = (basis.last(), beta.last()) {
                if b != 0.0 {
                    w.axpy(-b, prev, 1.0);
                }
            }
            basis.push(v);
            alpha.push(al);
            reorthogonalize(&mut w, &basis);
            let b = w.norm();
            if basis.len() == n {
                break;
            }
            if b > 1e-10 * anorm.max(f64::MIN_POSITIVE) {
                beta.push(b);
                next = Some(w / b);
            } else {
                beta.push(0.0);
                next = random_unit(&mut rng, &basis);
            }
        }
        let dim = basis.len();
        let mut t = DMatrix::zeros(dim, dim);
        for j in 0..dim {
            t[(j, j)] = alpha[j];
            if j + 1 < dim {
                t[(j, j + 1)] = beta[j];
                t[(j + 1, j)] = beta[j];
            }
        }
        let ritz = sym_eigen(t);
        let last_beta = if dim < n && next.is_some() {
            beta.get(dim - 1).copied().unwrap_or(0.0)
        } else {
            0.0
        };
        let kk = k.min(dim);
        let top = abs(ritz.values[0]).max(f64::MIN_POSITIVE);
        let converged = (0..kk).all(|i| abs(last_beta * ritz.vectors[(dim - 1, i)]) <= tol * top);
        if (converged && kk == k) || dim >= n || next.is_none() {
            let mut vecs = DMatrix::zeros(n, kk);
            for i in 0..kk {
                let mut y = DVector::zeros(n);
                for (j, b) in basis.iter().enumerate() {
                    y.axpy(ritz.vectors[(j, i)], b, 1.0);
                }
                let ny = y.norm();
                vecs.set_column(i, &(y / ny));
            }
            let values = ritz.values[..kk].to_vec();
            return canonicalize(values, vecs);
        }
        target = n.min(dim * 2);
    }
}

fn reorthogonalize(w: &mut DVector<f64>, basis: &[DVector<f64>]) {
    for _ in 0..2 {
        for b in basis {
            let d = b.dot(w);
            w.axpy(-d, b, 1.0);
        }
    }
}

/// Frobenius norm of `P_a − P_b` for the orthogonal projectors onto the column
/// spans of two orthonormal matrices.
pub fn projector_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let pa = a * a.transpose();
    let pb = b * b.transpose();
    (pa - pb).norm()
}

/// Copies the lower triangle onto the upper one.
pub fn symmetrize_from_lower(a: &mut DMatrix<f64>) {
    let n = a.nrows();
    for j in 0..n {
        for i in 0..j {
            a[(i, j)] = a[(j, i)];
        }
    }
}

/// Row-major `n × d` block as a column-major nalgebra matrix.
pub fn from_rows(data: &[f64], n: usize, d: usize) -> DMatrix<f64> {
    DMatrix::from_row_slice(n, d, data)
}

/// Euclidean norm helper for slices.
pub fn norm(x: &[f64]) -> f64 {
    sqrt(x.iter().map(|v| v * v).sum::<f64>())
}

/// `vec![0; n]` without the macro noise at call sites.
pub(crate) fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spd(n: usize, seed: u64) -> DMatrix<f64> {
        let mut r = rng::substream(seed, Purpose::Synthetic);
        let a = DMatrix::from_fn(n, n, |_, _| r.random::<f64>() - 0.5);
        &a * a.transpose()
    }

    #[test]
    fn eigenpairs_sorted_and_sign_fixed() {
        let e = sym_eigen(spd(6, 1));
        for w in e.values.windows(2) {
            assert!(w[0] >= w[1]);
        }
        for c in e.vectors.column_iter() {
            let (idx, _) = c.iter().enumerate().fold((0, -1.0), |(bi, bv), (i, v)| {
                if abs(*v) > bv {
                    (i, abs(*v))
                } else {
                    (bi, bv)
                }
            });
            assert!(c[idx] > 0.0);
        }
    }

    #[test]
    fn lanczos_matches_dense() {
        let a = spd(120, 4);
        let dense = sym_eigen(a.clone()).truncate(5);
        let lz = lanczos_top_k(&a, 5, 1e-12);
        for i in 0..5 {
            assert!(abs(dense.values[i] - lz.values[i]) < 1e-9 * dense.values[0]);
        }
        assert!(projector_distance(&dense.vectors, &lz.vectors) < 1e-7);
    }

    #[test]
    fn lanczos_handles_low_rank() {
        // rank-2 matrix: Krylov space breaks down after two steps
        let u = DMatrix::from_fn(50, 2, |i, j| ((i + 1) * (j + 2)) as f64 % 7.0 - 3.0);
        let a = &u * u.transpose();
        let lz = lanczos_top_k(&a, 4, 1e-12);
        let dense = sym_eigen(a.clone());
        assert!(abs(lz.values[0] - dense.values[0]) < 1e-9 * dense.values[0]);
        assert!(abs(lz.values[1] - dense.values[1]) < 1e-9 * dense.values[0]);
        assert!(abs(lz.values[2]) < 1e-8 * dense.values[0]);
        assert!(orthonormality_error(&lz.vectors) < 1e-8);
    }

    #[test]
    fn mgs_orthonormalizes_and_repairs() {
        let mut q = DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 2.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let replaced = orthonormalize(&mut q);
        assert_eq!(replaced, 2);
        assert!(orthonormality_error(&q) < 1e-14);
    }

    #[test]
    fn polar_factor_is_orthogonal() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.5, 3.0]);
        let (r, degenerate) = polar_factor(&a);
        assert!(!degenerate);
        assert!(orthonormality_error(&r) < 1e-14);
        let h = r.transpose() * &a;
        assert!((&h - h.transpose()).norm() < 1e-14);
    }

    #[test]
    fn polar_factor_is_accurate_with_close_singular_values() {
        // Singular values 1, 0.99921, 0.58171; nalgebra's SVD reconstructs
        // this matrix only to ~2e-6.
        let a = DMatrix::from_column_slice(
            3,
            3,
            &[
                -0.646101755728171,
                -0.19968971886416526,
                0.732038491620092,
                0.05304361745876604,
                -0.6247839987397923,
                -0.20283606782327468,
                0.6685934212728932,
                -0.4649827986298527,
                0.49604235521739626,
            ],
        );
        let (r, degenerate) = polar_factor(&a);
        assert!(!degenerate);
        assert!(orthonormality_error(&r) < 1e-14);
        let h = r.transpose() * &a;
        assert!((&h - h.transpose()).norm() < 1e-14);
        assert!(h.symmetric_eigenvalues().iter().all(|&v| v > 0.0));
    }
}
