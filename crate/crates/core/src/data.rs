//! In-memory datasets, the synthetic generator with a known covariance, seeded
//! splits, and seeded streams over a dataset.
//!
//! File readers live in the std companion crate; everything here is pure.

use alloc::string::{String, ToString};
use alloc::vec::Vec;

use nalgebra::DMatrix;
use rand::Rng as _;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::kernelmap::FeatureMap;
use crate::linalg;
use crate::math::sqrt;
use crate::rng::{self, Purpose};

/// Affine map applied to the raw values at load time: `stored = raw·scale + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalization {
    pub scale: f64,
    pub offset: f64,
}

impl Normalization {
    pub const IDENTITY: Normalization = Normalization {
        scale: 1.0,
        offset: 0.0,
    };
}

/// `n × d` points stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    points: Vec<f64>,
    n: usize,
    d: usize,
    pub normalization: Normalization,
    pub column_names: Option<Vec<String>>,
}

impl Dataset {
    pub fn from_rows(name: impl Into<String>, points: Vec<f64>, d: usize) -> Result<Self> {
        if d == 0 {
            return Err(invalid("dataset dimension must be at least 1"));
        }
        if points.is_empty() || !points.len().is_multiple_of(d) {
            return Err(invalid("dataset must hold at least one complete row"));
        }
        if let Some(pos) = points.iter().position(|v| !v.is_finite()) {
            return Err(invalid(alloc::format!(
                "non-finite value at row {}, column {}",
                pos / d,
                pos % d
            )));
        }
        let n = points.len() / d;
        Ok(Dataset {
            name: name.into(),
            points,
            n,
            d,
            normalization: Normalization::IDENTITY,
            column_names: None,
        })
    }

    pub fn with_normalization(mut self, normalization: Normalization) -> Self {
        self.normalization = normalization;
        self
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Self {
        self.column_names = Some(names);
        self
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.points[i * self.d..(i + 1) * self.d]
    }

    /// All points, row-major.
    pub fn as_rows(&self) -> &[f64] {
        &self.points
    }

    /// Rows `range` as one contiguous row-major block.
    pub fn rows(&self, range: core::ops::Range<usize>) -> &[f64] {
        &self.points[range.start * self.d..range.end * self.d]
    }

    /// New dataset made of the listed rows, in order.
    pub fn select(&self, indices: &[usize], name: impl Into<String>) -> Result<Dataset> {
        let mut pts = Vec::with_capacity(indices.len() * self.d);
        for &i in indices {
            if i >= self.n {
                return Err(invalid("row index out of range"));
            }
            pts.extend_from_slice(self.row(i));
        }
        let mut out = Dataset::from_rows(name, pts, self.d)?;
        out.normalization = self.normalization;
        out.column_names = self.column_names.clone();
        Ok(out)
    }

    /// Points as an `n × d` nalgebra matrix.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        linalg::from_rows(&self.points, self.n, self.d)
    }
}

/// Samples drawn from `N(0, Q·diag(λ)·Qᵀ)` together with the generating `Q`.
#[derive(Debug, Clone)]
pub struct SyntheticData {
    pub dataset: Dataset,
    /// Orthogonal `d × d`; column `j` is the eigenvector for `eigenvalues[j]`.
    pub rotation: DMatrix<f64>,
    pub eigenvalues: Vec<f64>,
}

impl SyntheticData {
    /// `Q·diag(λ)·Qᵀ`.
    pub fn population_covariance(&self) -> DMatrix<f64> {
        let d = self.eigenvalues.len();
        let scaled = DMatrix::from_fn(d, d, |i, j| self.rotation[(i, j)] * self.eigenvalues[j]);
        scaled * self.rotation.transpose()
    }

    /// Orthonormal basis of the top-`k` population eigenspace. Fails when the
    /// eigengap `λ_k − λ_{k+1}` is zero, since that subspace is not defined.
    pub fn top_subspace(&self, k: usize) -> Result<DMatrix<f64>> {
        let d = self.eigenvalues.len();
        if k == 0 || k > d {
            return Err(invalid("subspace rank must lie in 1..=d"));
        }
        if k < d && self.eigenvalues[k - 1] <= self.eigenvalues[k] {
            return Err(Error::Degenerate(alloc::format!(
                "eigengap λ_{} − λ_{} is zero",
                k,
                k + 1
            )));
        }
        Ok(self.rotation.columns(0, k).into_owned())
    }
}

/// Seeded random orthogonal `d × d` matrix (orthonormalized Gaussian).
pub fn random_orthogonal(d: usize, rng: &mut rng::Rng) -> DMatrix<f64> {
    let mut q = DMatrix::from_fn(d, d, |_, _| StandardNormal.sample(rng));
    linalg::orthonormalize(&mut q);
    q
}

/// Gaussian samples with a prescribed covariance spectrum under a seeded
/// random rotation. Zero eigenvalues are allowed (degenerate directions);
/// negative, non-finite or increasing spectra are rejected.
pub fn synth_gaussian_spectrum(
    d: usize,
    n: usize,
    eigenvalues: &[f64],
    seed: u64,
) -> Result<SyntheticData> {
    if d == 0 || n == 0 {
        return Err(invalid(
            "synthetic dimension and sample count must be positive",
        ));
    }
    if eigenvalues.len() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: eigenvalues.len(),
        });
    }
    if eigenvalues.iter().any(|v| !v.is_finite() || *v < 0.0) {
        return Err(invalid("eigenvalues must be finite and non-negative"));
    }
    if eigenvalues.windows(2).any(|w| w[1] > w[0]) {
        return Err(invalid("eigenvalues must be non-increasing"));
    }
    if eigenvalues[0] <= 0.0 {
        return Err(invalid("at least one eigenvalue must be positive"));
    }
    let mut rng = rng::substream(seed, Purpose::Synthetic);
    let rotation = random_orthogonal(d, &mut rng);
    let root: Vec<f64> = eigenvalues.iter().map(|v| sqrt(*v)).collect();
    let mut pts = Vec::with_capacity(n * d);
    let mut g = alloc::vec![0.0; d];
    for _ in 0..n {
        for (gi, r) in g.iter_mut().zip(&root) {
            let s: f64 = StandardNormal.sample(&mut rng);
            *gi = s * r;
        }
        for i in 0..d {
            let mut acc = 0.0;
            for (j, gj) in g.iter().enumerate() {
                acc += rotation[(i, j)] * gj;
            }
            pts.push(acc);
        }
    }
    let dataset = Dataset::from_rows(alloc::format!("synthetic-d{d}"), pts, d)?;
    Ok(SyntheticData {
        dataset,
        rotation,
        eigenvalues: eigenvalues.to_vec(),
    })
}

/// Disjoint train/tune/test index sets drawn from one seeded permutation.
pub fn split_indices(n: usize, sizes: [usize; 3], seed: u64) -> Result<[Vec<usize>; 3]> {
    let total: usize = sizes.iter().sum();
    if total > n {
        return Err(invalid(alloc::format!(
            "split sizes sum to {total} but the dataset has {n} rows"
        )));
    }
    let mut rng = rng::substream(seed, Purpose::Split);
    let perm = rng::permutation(n, &mut rng);
    let a = perm[..sizes[0]].to_vec();
    let b = perm[sizes[0]..sizes[0] + sizes[1]].to_vec();
    let c = perm[sizes[0] + sizes[1]..total].to_vec();
    Ok([a, b, c])
}

/// Seeded train/tune/test split. Empty parts are not representable as a
/// [`Dataset`], so every size must be at least one.
pub fn split(
    dataset: &Dataset,
    sizes: [usize; 3],
    seed: u64,
) -> Result<(Dataset, Dataset, Dataset)> {
    if sizes.contains(&0) {
        return Err(invalid("every split must hold at least one row"));
    }
    let [a, b, c] = split_indices(dataset.len(), sizes, seed)?;
    let base = dataset.name.to_string();
    Ok((
        dataset.select(&a, alloc::format!("{base}/train"))?,
        dataset.select(&b, alloc::format!("{base}/tune"))?,
        dataset.select(&c, alloc::format!("{base}/test"))?,
    ))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamMode {
    /// Each row exactly once, in seeded-permutation order.
    SinglePass,
    /// Uniform draws with replacement; never ends.
    WithReplacement,
}

/// Seeded order over the rows of a dataset.
#[derive(Debug, Clone)]
pub struct StreamSource<'a> {
    dataset: &'a Dataset,
    mode: StreamMode,
    order: Vec<usize>,
    cursor: usize,
    rng: rng::Rng,
}

impl<'a> StreamSource<'a> {
    pub fn new(dataset: &'a Dataset, seed: u64, mode: StreamMode) -> Self {
        let mut rng = rng::substream(seed, Purpose::Shuffle);
        let order = match mode {
            StreamMode::SinglePass => rng::permutation(dataset.len(), &mut rng),
            StreamMode::WithReplacement => Vec::new(),
        };
        StreamSource {
            dataset,
            mode,
            order,
            cursor: 0,
            rng,
        }
    }

    pub fn dataset(&self) -> &'a Dataset {
        self.dataset
    }

    pub fn position(&self) -> usize {
        self.cursor
    }

    /// Composes the source with a feature map.
    pub fn features(self, map: &'a FeatureMap) -> FeatureStream<'a> {
        FeatureStream { source: self, map }
    }
}

impl Iterator for StreamSource<'_> {
    type Item = usize;

    fn next(&mut self) -> Option<usize> {
        let idx = match self.mode {
            StreamMode::SinglePass => *self.order.get(self.cursor)?,
            StreamMode::WithReplacement => self.rng.random_range(0..self.dataset.len()),
        };
        self.cursor += 1;
        Some(idx)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        match self.mode {
            StreamMode::SinglePass => {
                let left = self.order.len() - self.cursor.min(self.order.len());
                (left, Some(left))
            }
            StreamMode::WithReplacement => (usize::MAX, None),
        }
    }
}

/// Feature vectors `z(x_π(t))` in stream order.
#[derive(Debug, Clone)]
pub struct FeatureStream<'a> {
    source: StreamSource<'a>,
    map: &'a FeatureMap,
}

impl Iterator for FeatureStream<'_> {
    type Item = Vec<f64>;

    fn next(&mut self) -> Option<Vec<f64>> {
        let idx = self.source.next()?;
        let row = self.source.dataset.row(idx);
        Some(
            self.map
                .transform(row)
                .expect("dataset and feature map dimensions agree"),
        )
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.source.size_hint()
    }
}
