//! Batch subspace learners.
//!
//! [`rf_erm`] eigendecomposes the empirical feature covariance built by a
//! [`CovarianceAccumulator`]. [`exact_erm`] and [`nystrom_erm`] work on the
//! exact kernel matrix of the training points (in full or through landmarks)
//! and return a [`GramModel`] that can be evaluated out of sample.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{check_dim, invalid, Error, Result};
use crate::kernelmap::{kernel_gram, kernel_matrix, KernelSpec};
use crate::linalg;
use crate::math::sqrt;
use crate::rng::{self, Purpose};

/// Which algorithm produced a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Learner {
    RfOja,
    RfErm,
    ExactErm,
    Nystrom,
}

impl Learner {
    pub const ALL: [Learner; 4] = [
        Learner::RfOja,
        Learner::RfErm,
        Learner::ExactErm,
        Learner::Nystrom,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Learner::RfOja => "rf_oja",
            Learner::RfErm => "rf_erm",
            Learner::ExactErm => "exact_erm",
            Learner::Nystrom => "nystrom",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Learner::ALL.into_iter().find(|l| l.name() == s)
    }

    /// Whether the learner works in random-feature space.
    pub fn uses_features(&self) -> bool {
        matches!(self, Learner::RfOja | Learner::RfErm)
    }
}

/// Provenance and status flags carried by a [`SubspaceModel`].
#[derive(Debug, Clone, PartialEq)]
pub struct ModelMeta {
    pub learner: Learner,
    pub n_seen: usize,
    pub m: usize,
    /// Requested rank; the basis may hold fewer columns when rank deficient.
    pub k: usize,
    pub seed: u64,
    /// Oja stopped before the end of its warm-up phase.
    pub incomplete: bool,
    pub rank_deficient: bool,
    /// Samples rejected for non-finite entries.
    pub skipped: usize,
}

/// Rank-k subspace of feature space with per-direction Rayleigh quotients.
#[derive(Debug, Clone)]
pub struct SubspaceModel {
    /// `m × k`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// `uᵢᵀ Ĉ uᵢ`, non-increasing.
    pub rayleigh: Vec<f64>,
    pub meta: ModelMeta,
}

impl SubspaceModel {
    pub fn m(&self) -> usize {
        self.basis.nrows()
    }

    pub fn rank(&self) -> usize {
        self.basis.ncols()
    }

    /// `U·Uᵀ`.
    pub fn projector(&self) -> DMatrix<f64> {
        &self.basis * self.basis.transpose()
    }

    /// Reorders columns so the Rayleigh quotients are non-increasing.
    pub(crate) fn sort_by_rayleigh(
        basis: DMatrix<f64>,
        rayleigh: Vec<f64>,
    ) -> (DMatrix<f64>, Vec<f64>) {
        let mut order: Vec<usize> = (0..rayleigh.len()).collect();
        order.sort_by(|&a, &b| {
            rayleigh[b]
                .partial_cmp(&rayleigh[a])
                .unwrap_or(core::cmp::Ordering::Equal)
        });
        let mut out = DMatrix::zeros(basis.nrows(), order.len());
        let mut vals = Vec::with_capacity(order.len());
        for (j, &o) in order.iter().enumerate() {
            out.set_column(j, &basis.column(o));
            vals.push(rayleigh[o]);
        }
        (out, vals)
    }
}

/// Running `Σ z zᵀ` over feature vectors. Mergeable, so a stream can be
/// sharded across accumulators.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    sum: DMatrix<f64>,
    count: usize,
    skipped: usize,
}

impl CovarianceAccumulator {
    pub fn new(m: usize) -> Self {
        CovarianceAccumulator {
            sum: DMatrix::zeros(m, m),
            count: 0,
            skipped: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.sum.nrows()
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn skipped(&self) -> usize {
        self.skipped
    }

    pub fn sum(&self) -> &DMatrix<f64> {
        &self.sum
    }

    /// `sum / count`, or `None` before the first sample.
    pub fn mean(&self) -> Option<DMatrix<f64>> {
        (self.count > 0).then(|| &self.sum / self.count as f64)
    }

    /// Rank-1 update with `z`. Non-finite vectors are rejected and counted.
    pub fn accumulate(&mut self, z: &[f64]) -> Result<()> {
        check_dim(self.dim(), z.len())?;
        if z.iter().any(|v| !v.is_finite()) {
            self.skipped += 1;
            return Ok(());
        }
        let v = DVector::from_column_slice(z);
        self.sum.ger(1.0, &v, &v, 1.0);
        self.count += 1;
        Ok(())
    }

    /// Adds every column of `block` (`m × b`) in one matrix product. Columns
    /// with non-finite entries are skipped.
    pub fn accumulate_batch(&mut self, block: &DMatrix<f64>) -> Result<()> {
        check_dim(self.dim(), block.nrows())?;
        let bad: Vec<usize> = block
            .column_iter()
            .enumerate()
            .filter(|(_, c)| c.iter().any(|v| !v.is_finite()))
            .map(|(j, _)| j)
            .collect();
        let owned;
        let good = if bad.is_empty() {
            block
        } else {
            owned = block.clone().remove_columns_at(&bad);
            &owned
        };
        if good.ncols() > 0 {
            self.sum.gemm(1.0, good, &good.transpose(), 1.0);
            let n = self.sum.nrows();
            for j in 0..n {
                for i in 0..j {
                    let v = 0.5 * (self.sum[(i, j)] + self.sum[(j, i)]);
                    self.sum[(i, j)] = v;
                    self.sum[(j, i)] = v;
                }
            }
        }
        self.count += good.ncols();
        self.skipped += bad.len();
        Ok(())
    }

    /// Sum of two accumulators over the same feature dimension.
    pub fn merge(mut self, other: &CovarianceAccumulator) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(invalid(alloc::format!(
                "cannot merge accumulators of dimension {} and {}",
                self.dim(),
                other.dim()
            )));
        }
        self.sum += &other.sum;
        self.count += other.count;
        self.skipped += other.skipped;
        Ok(self)
    }
}

/// Top-`k` eigenvectors of the empirical feature covariance.
///
/// When fewer than `k` eigenvalues clear the numerical-rank threshold the
/// model holds only those directions and is flagged rank deficient.
pub fn rf_erm(acc: &CovarianceAccumulator, k: usize, seed: u64) -> Result<SubspaceModel> {
    let m = acc.dim();
    if k == 0 || k > m {
        return Err(invalid(alloc::format!("rank {k} must lie in 1..={m}")));
    }
    if acc.count() < k {
        return Err(invalid(alloc::format!(
            "need at least {k} samples, have {}",
            acc.count()
        )));
    }
    let mean = acc.mean().expect("count checked above");
    let eig = linalg::sym_eigen(mean);
    let rank = eig.numerical_rank().min(k);
    let eig = eig.truncate(rank);
    Ok(SubspaceModel {
        basis: eig.vectors,
        rayleigh: eig.values,
        meta: ModelMeta {
            learner: Learner::RfErm,
            n_seen: acc.count(),
            m,
            k,
            seed,
            incomplete: false,
            rank_deficient: rank < k,
            skipped: acc.skipped(),
        },
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GramKind {
    ExactErm,
    Nystrom,
}

/// Kernel PCA solution over a stored training set: eigenvectors of the
/// (possibly Nyström-approximated) kernel matrix.
#[derive(Debug, Clone)]
pub struct GramModel {
    pub spec: KernelSpec,
    /// Training inputs, row-major `n_tr × d`.
    pub train_points: Vec<f64>,
    /// `n_tr × k`, unit-norm orthogonal columns.
    pub coefficients: DMatrix<f64>,
    /// Kernel-matrix eigenvalues, non-increasing and positive.
    pub gram_eigenvalues: Vec<f64>,
    pub kind: GramKind,
    /// Indices into the training rows (Nyström only).
    pub landmarks: Option<Vec<usize>>,
    /// Requested rank.
    pub k: usize,
    pub rank_deficient: bool,
}

impl GramModel {
    pub fn n_train(&self) -> usize {
        self.coefficients.nrows()
    }

    pub fn rank(&self) -> usize {
        self.coefficients.ncols()
    }
}

/// Default refusal threshold for building an `n × n` kernel matrix.
pub const DEFAULT_GRAM_CAP: usize = 10_000;

/// Exact kernel PCA: top-`k` eigenpairs of the training kernel matrix.
pub fn exact_erm(spec: &KernelSpec, train: &[f64], k: usize) -> Result<GramModel> {
    exact_erm_capped(spec, train, k, DEFAULT_GRAM_CAP)
}

/// [`exact_erm`] with an explicit cap on the number of training points.
pub fn exact_erm_capped(
    spec: &KernelSpec,
    train: &[f64],
    k: usize,
    cap: usize,
) -> Result<GramModel> {
    let n = rows_of(spec, train)?;
    if n > cap {
        return Err(Error::ResourceLimit {
            what: "exact kernel matrix size n_tr",
            requested: n,
            cap,
        });
    }
    check_rank(k, n)?;
    let kmat = kernel_gram(spec, train)?;
    let eig = linalg::top_k_symmetric(&kmat, k);
    let rank = eig.numerical_rank().min(k);
    let eig = eig.truncate(rank);
    Ok(GramModel {
        spec: *spec,
        train_points: train.to_vec(),
        coefficients: eig.vectors,
        gram_eigenvalues: eig.values,
        kind: GramKind::ExactErm,
        landmarks: None,
        k,
        rank_deficient: rank < k,
    })
}

/// Nyström kernel PCA with `p` uniformly sampled landmarks.
///
/// With `C = K(train, L)` and `W = K(L, L)`, the approximation
/// `K̃ = C·W⁺·Cᵀ = B·Bᵀ` (`B = C·W^{+1/2}`) is diagonalized through the small
/// `BᵀB`; eigenvectors of `K̃` are mapped back as `B·e / √σ`.
pub fn nystrom_erm(
    spec: &KernelSpec,
    train: &[f64],
    p: usize,
    k: usize,
    seed: u64,
) -> Result<GramModel> {
    let n = rows_of(spec, train)?;
    check_rank(k, n)?;
    if p < k || p > n {
        return Err(invalid(alloc::format!(
            "landmark count {p} must satisfy k ({k}) <= p <= n_tr ({n})"
        )));
    }
    let d = spec.dim;
    let mut rng = rng::substream(seed, Purpose::Landmarks);
    let mut landmarks = rng::permutation(n, &mut rng);
    landmarks.truncate(p);
    let mut lrows = Vec::with_capacity(p * d);
    for &i in &landmarks {
        lrows.extend_from_slice(&train[i * d..(i + 1) * d]);
    }
    let c = kernel_matrix(spec, train, &lrows)?;
    let w = kernel_gram(spec, &lrows)?;

    let weig = linalg::sym_eigen(w);
    let wmax = weig.values.first().copied().unwrap_or(0.0);
    let keep: Vec<usize> = (0..weig.values.len())
        .filter(|&i| weig.values[i] > 1e-10 * wmax)
        .collect();
    let mut inv_root = DMatrix::zeros(p, keep.len());
    for (j, &i) in keep.iter().enumerate() {
        let s = 1.0 / sqrt(weig.values[i]);
        inv_root.set_column(j, &(weig.vectors.column(i) * s));
    }
    let b = c * inv_root;
    let small = b.transpose() * &b;
    let eig = linalg::sym_eigen(small);
    let rank = eig.numerical_rank().min(k);
    let mut coefficients = DMatrix::zeros(n, rank);
    for i in 0..rank {
        let col = &b * eig.vectors.column(i) / sqrt(eig.values[i]);
        coefficients.set_column(i, &linalg::fix_sign(col));
    }
    Ok(GramModel {
        spec: *spec,
        train_points: train.to_vec(),
        coefficients,
        gram_eigenvalues: eig.values[..rank].to_vec(),
        kind: GramKind::Nystrom,
        landmarks: Some(landmarks),
        k,
        rank_deficient: rank < k,
    })
}

fn rows_of(spec: &KernelSpec, rows: &[f64]) -> Result<usize> {
    spec.validate()?;
    if rows.is_empty() || !rows.len().is_multiple_of(spec.dim) {
        return Err(invalid(
            "training block must hold at least one complete row",
        ));
    }
    Ok(rows.len() / spec.dim)
}

fn check_rank(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(invalid(alloc::format!("rank {k} must lie in 1..={n}")));
    }
    Ok(())
}
