//! Test-only reference implementations. Nothing here calls into the crate's
//! linear algebra.
#![allow(dead_code)]

use nalgebra::DMatrix;

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// decreasing eigenvalue. Columns of the returned matrix are eigenvectors.
pub fn jacobi_eigen(a: &DMatrix<f64>) -> (Vec<f64>, DMatrix<f64>) {
    let n = a.nrows();
    let mut a = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    for _sweep in 0..100 {
        let mut off = 0.0;
        for p in 0..n {
            for q in p + 1..n {
                off += a[(p, q)] * a[(p, q)];
            }
        }
        let scale: f64 = a.iter().map(|x| x * x).sum::<f64>().max(f64::MIN_POSITIVE);
        if off <= 1e-32 * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[(k, p)];
                    let akq = a[(k, q)];
                    a[(k, p)] = c * akp - s * akq;
                    a[(k, q)] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[(p, k)];
                    let aqk = a[(q, k)];
                    a[(p, k)] = c * apk - s * aqk;
                    a[(q, k)] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(j, j)].partial_cmp(&a[(i, i)]).unwrap());
    let vals = order.iter().map(|&i| a[(i, i)]).collect();
    let vecs = DMatrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    (vals, vecs)
}

/// Orthogonal projector onto the first `k` columns of `v`.
pub fn projector(v: &DMatrix<f64>, k: usize) -> DMatrix<f64> {
    let u = v.columns(0, k);
    u * u.transpose()
}

/// Frobenius distance between the projectors onto two column spans, after
/// orthonormalizing each by Gram–Schmidt.
pub fn span_distance(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let pa = projector(&gram_schmidt(a), a.ncols());
    let pb = projector(&gram_schmidt(b), b.ncols());
    (pa - pb).norm()
}

pub fn gram_schmidt(a: &DMatrix<f64>) -> DMatrix<f64> {
    let mut q = a.clone();
    for j in 0..q.ncols() {
        for _ in 0..2 {
            for i in 0..j {
                let d = q.column(i).dot(&q.column(j));
                let qi = q.column(i).into_owned();
                q.column_mut(j).axpy(-d, &qi, 1.0);
            }
        }
        let n = q.column(j).norm();
        q.column_mut(j).scale_mut(1.0 / n);
    }
    q
}

/// `exp(−‖x − y‖² / (2σ²))`.
pub fn rbf(x: &[f64], y: &[f64], sigma2: f64) -> f64 {
    let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    (-d2 / (2.0 * sigma2)).exp()
}

/// Kernel matrix of row-major points under the rbf kernel.
pub fn rbf_gram(rows: &[f64], d: usize, sigma2: f64) -> DMatrix<f64> {
    let n = rows.len() / d;
    DMatrix::from_fn(n, n, |i, j| {
        rbf(&rows[i * d..(i + 1) * d], &rows[j * d..(j + 1) * d], sigma2)
    })
}

/// Deterministic xorshift stream for test inputs.
pub struct Xorshift(pub u64);

impl Xorshift {
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.0;
        x ^= x << 13;
        x ^= x >> 7;
        x ^= x << 17;
        self.0 = x;
        x
    }

    /// Uniform in `[-1, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 / (1u64 << 52) as f64 - 1.0
    }

    pub fn below(&mut self, n: usize) -> usize {
        (self.next_u64() % n as u64) as usize
    }

    /// Approximately standard normal (sum of 12 uniforms on [0,1), centered).
    pub fn normal(&mut self) -> f64 {
        (0..12).map(|_| (self.uniform() + 1.0) / 2.0).sum::<f64>() - 6.0
    }
}

/// Brute-force κ: evaluates the two-term objective at every `h`.
pub fn kappa_brute(eigs: &[f64], b_k: f64, k: usize, m: usize) -> (f64, usize) {
    let mut best = (f64::INFINITY, 0);
    for h in 0..=eigs.len() {
        let tail: f64 = eigs[h..].iter().sum();
        let v = b_k * h as f64 / m as f64 + ((k as f64 / m as f64) * tail).sqrt();
        if v < best.0 {
            best = (v, h);
        }
    }
    best
}
