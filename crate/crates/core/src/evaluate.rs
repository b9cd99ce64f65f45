//! Held-out evaluation of learned subspaces against the exact kernel.
//!
//! A feature-space basis `U` is lifted to functions on the evaluation sample:
//! after Procrustes alignment to the top eigenvectors of the held-out feature
//! covariance `Ĉ`, direction `i` becomes `fᵢ = Zᵀuᵢ / √(uᵢᵀĈuᵢ)`, which has
//! unit empirical `L²` norm. The captured variance is then
//! `Σᵢ fᵢᵀ K fᵢ / n²`, directly comparable with the exact kernel PCA
//! objective (top-k eigenvalue mass of `K/n` on its own training set).

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::batchpca::{GramModel, SubspaceModel};
use crate::error::{check_dim, invalid, Error, Result};
use crate::kernelmap::{kernel_gram, kernel_matrix, sample_feature_map, FeatureMap, KernelSpec};
use crate::linalg::{self, SymEigen, RANK_TOL};
use crate::math::{abs, sqrt};
use crate::rng::{self, Purpose};

/// Default cap on the number of evaluation points (the kernel matrix is
/// `n_e × n_e`).
pub const DEFAULT_EVAL_CAP: usize = 4000;

/// Cached held-out quantities: features `Z` (`m × n_e`), kernel matrix `K`,
/// covariance `Ĉ = Z·Zᵀ/n_e` and its eigendecomposition.
#[derive(Debug, Clone)]
pub struct EvalSet {
    pub spec: KernelSpec,
    pub points: Vec<f64>,
    pub features: DMatrix<f64>,
    pub kernel: DMatrix<f64>,
    pub cov: DMatrix<f64>,
    cov_eigen: SymEigen,
}

impl EvalSet {
    pub fn len(&self) -> usize {
        self.kernel.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn m(&self) -> usize {
        self.features.nrows()
    }

    /// Eigenpairs of `Ĉ`.
    pub fn cov_eigen(&self) -> &SymEigen {
        &self.cov_eigen
    }

    /// Top-`k` eigenvalue mass of `K/n_e`, computed from `Ĉ`'s spectrum when
    /// the kernel is realized exactly, otherwise from `K` directly.
    pub fn kernel_top_mass(&self, k: usize) -> f64 {
        let eig = linalg::top_k_symmetric(&self.kernel, k);
        eig.values.iter().sum::<f64>() / self.len() as f64
    }
}

/// Builds an [`EvalSet`] for `points` (row-major) under `map`.
pub fn build_eval_set(spec: &KernelSpec, map: &FeatureMap, points: &[f64]) -> Result<EvalSet> {
    build_eval_set_capped(spec, map, points, DEFAULT_EVAL_CAP)
}

/// [`build_eval_set`] with an explicit size cap.
pub fn build_eval_set_capped(
    spec: &KernelSpec,
    map: &FeatureMap,
    points: &[f64],
    cap: usize,
) -> Result<EvalSet> {
    let n = eval_rows(spec, map, points)?;
    if n > cap {
        return Err(Error::ResourceLimit {
            what: "evaluation set size n_e",
            requested: n,
            cap,
        });
    }
    let kernel = kernel_gram(spec, points)?;
    EvalSet::with_kernel(spec, map, points, kernel)
}

impl EvalSet {
    /// Builds an evaluation set reusing a precomputed kernel matrix of the
    /// same points (the kernel does not depend on the feature map).
    pub fn with_kernel(
        spec: &KernelSpec,
        map: &FeatureMap,
        points: &[f64],
        kernel: DMatrix<f64>,
    ) -> Result<EvalSet> {
        let n = eval_rows(spec, map, points)?;
        if kernel.shape() != (n, n) {
            return Err(invalid(
                "kernel matrix shape does not match the evaluation points",
            ));
        }
        let features = map.transform_rows(points)?;
        let cov = covariance_of(&features);
        let cov_eigen = linalg::sym_eigen(cov.clone());
        Ok(EvalSet {
            spec: *spec,
            points: points.to_vec(),
            features,
            kernel,
            cov,
            cov_eigen,
        })
    }

    /// Evaluation set for a kernel realized exactly by the given features
    /// (`m × n_e`): `K = ZᵀZ`. Used for finite-dimensional checks.
    pub fn from_exact_features(
        spec: &KernelSpec,
        points: &[f64],
        features: DMatrix<f64>,
    ) -> Result<EvalSet> {
        let n = features.ncols();
        if n == 0 {
            return Err(invalid("evaluation set must hold at least one point"));
        }
        let mut kernel = features.transpose() * &features;
        for j in 0..n {
            for i in 0..j {
                let v = 0.5 * (kernel[(i, j)] + kernel[(j, i)]);
                kernel[(i, j)] = v;
                kernel[(j, i)] = v;
            }
        }
        let cov = covariance_of(&features);
        let cov_eigen = linalg::sym_eigen(cov.clone());
        Ok(EvalSet {
            spec: *spec,
            points: points.to_vec(),
            features,
            kernel,
            cov,
            cov_eigen,
        })
    }
}

fn eval_rows(spec: &KernelSpec, map: &FeatureMap, points: &[f64]) -> Result<usize> {
    check_dim(spec.dim, map.input_dim())?;
    if points.is_empty() || !points.len().is_multiple_of(spec.dim) {
        return Err(invalid(
            "evaluation set must hold at least one complete row",
        ));
    }
    Ok(points.len() / spec.dim)
}

fn covariance_of(features: &DMatrix<f64>) -> DMatrix<f64> {
    let n = features.ncols() as f64;
    let mut cov = features * features.transpose() / n;
    linalg::symmetrize_from_lower(&mut cov);
    cov
}

/// Objective value together with the number of directions that survived the
/// near-singularity check.
#[derive(Debug, Clone, PartialEq)]
pub struct ObjectiveReport {
    pub value: f64,
    pub effective_rank: usize,
    /// Indices of dropped directions.
    pub dropped: Vec<usize>,
}

/// Rotation `R*` minimizing `‖U·R − target‖_F` over orthogonal `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alignment {
    pub rotation: DMatrix<f64>,
    /// `Uᵀ·target` was rank deficient; `rotation` is one valid completion.
    pub degenerate: bool,
}

/// Orthogonal Procrustes: polar factor of `Uᵀ·target`.
pub fn procrustes_align(u: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<Alignment> {
    if u.shape() != target.shape() {
        return Err(invalid("procrustes operands must have equal shapes"));
    }
    let (rotation, degenerate) = linalg::polar_factor(&u.tr_mul(target));
    Ok(Alignment {
        rotation,
        degenerate,
    })
}

/// Held-out captured variance of a feature-space subspace, measured with the
/// exact kernel.
pub fn lifted_objective(model: &SubspaceModel, eval: &EvalSet) -> Result<ObjectiveReport> {
    lifted_objective_basis(&model.basis, eval)
}

/// [`lifted_objective`] on a bare orthonormal basis.
pub fn lifted_objective_basis(basis: &DMatrix<f64>, eval: &EvalSet) -> Result<ObjectiveReport> {
    check_dim(eval.m(), basis.nrows())?;
    let k = basis.ncols();
    if k == 0 {
        return Err(invalid("basis has no columns"));
    }
    let reference = eval.cov_eigen.vectors.columns(0, k).into_owned();
    let align = procrustes_align(basis, &reference)?;
    let aligned = basis * align.rotation;
    let (kept, dropped) = normalized_directions(&aligned, eval)?;
    let n = eval.len() as f64;
    // F = Zᵀ·U·S^{-1/2}: columns are the lifted functions on the eval points.
    let f = eval.features.tr_mul(&kept);
    let kf = &eval.kernel * &f;
    let value = f.dot(&kf) / (n * n);
    Ok(ObjectiveReport {
        value,
        effective_rank: kept.ncols(),
        dropped,
    })
}

/// Scales each column `u` by `1/√(uᵀĈu)`, dropping directions whose
/// quotient is below `RANK_TOL · λ_max(Ĉ)`.
fn normalized_directions(u: &DMatrix<f64>, eval: &EvalSet) -> Result<(DMatrix<f64>, Vec<usize>)> {
    let lmax = eval.cov_eigen.values.first().copied().unwrap_or(0.0);
    let cu = &eval.cov * u;
    let mut cols = Vec::new();
    let mut dropped = Vec::new();
    for i in 0..u.ncols() {
        let s = u.column(i).dot(&cu.column(i));
        if s > RANK_TOL * lmax && s > 0.0 {
            cols.push(u.column(i) / sqrt(s));
        } else {
            dropped.push(i);
        }
    }
    if cols.is_empty() {
        return Err(Error::Degenerate(alloc::string::String::from(
            "every direction has a vanishing held-out variance",
        )));
    }
    Ok((DMatrix::from_columns(&cols), dropped))
}

/// Out-of-sample kernel PCA objective of a Gram-based model on `points`:
/// `(1/n_e)·Σᵢ ‖K_cross·aᵢ‖² / σᵢ`.
pub fn erm_objective(model: &GramModel, points: &[f64]) -> Result<ObjectiveReport> {
    if points.is_empty() || !points.len().is_multiple_of(model.spec.dim) {
        return Err(invalid(
            "evaluation block must hold at least one complete row",
        ));
    }
    let cross = kernel_matrix(&model.spec, points, &model.train_points)?;
    erm_objective_with_cross(model, &cross)
}

/// [`erm_objective`] given the `n_e × n_tr` cross-kernel matrix; only its
/// first `n_tr` columns are used, so a wider matrix over a longer prefix of
/// the same training stream can be shared between checkpoints.
pub fn erm_objective_with_cross(
    model: &GramModel,
    cross: &DMatrix<f64>,
) -> Result<ObjectiveReport> {
    let ntr = model.n_train();
    if cross.ncols() < ntr {
        return Err(Error::DimensionMismatch {
            expected: ntr,
            got: cross.ncols(),
        });
    }
    let ne = cross.nrows();
    let block = cross.columns(0, ntr);
    let top = model.gram_eigenvalues.first().copied().unwrap_or(0.0);
    let mut value = 0.0;
    let mut dropped = Vec::new();
    let mut kept = 0;
    for (i, &sigma) in model.gram_eigenvalues.iter().enumerate() {
        if !(sigma > RANK_TOL * top && sigma > 0.0) {
            dropped.push(i);
            continue;
        }
        let proj = block * model.coefficients.column(i);
        value += proj.norm_squared() / sigma;
        kept += 1;
    }
    Ok(ObjectiveReport {
        value: value / ne as f64,
        effective_rank: kept,
        dropped,
    })
}

/// `‖G − I‖_F` with `G_ij = uᵢᵀĈuⱼ / √(uᵢᵀĈuᵢ · uⱼᵀĈuⱼ)` on the model's own
/// columns. Zero exactly when the lifted directions are orthonormal in the
/// empirical `L²` geometry.
pub fn gram_deviation(model: &SubspaceModel, eval: &EvalSet) -> Result<f64> {
    check_dim(eval.m(), model.m())?;
    gram_deviation_cov(&model.basis, &eval.cov)
}

/// [`gram_deviation`] against an arbitrary covariance (e.g. a known
/// population covariance).
pub fn gram_deviation_cov(basis: &DMatrix<f64>, cov: &DMatrix<f64>) -> Result<f64> {
    check_dim(cov.nrows(), basis.nrows())?;
    let lmax = linalg::sym_eigenvalues(cov.clone())
        .first()
        .copied()
        .unwrap_or(0.0);
    let g = basis.tr_mul(&(cov * basis));
    normalized_deviation(&g, lmax)
}

/// Gram-model analogue of [`gram_deviation`]: the same normalized Gram
/// matrix built from the out-of-sample projections `K_cross·aᵢ` on the
/// evaluation points. `cross` follows [`erm_objective_with_cross`].
pub fn gram_deviation_cross(model: &GramModel, cross: &DMatrix<f64>) -> Result<f64> {
    let ntr = model.n_train();
    if cross.ncols() < ntr {
        return Err(Error::DimensionMismatch {
            expected: ntr,
            got: cross.ncols(),
        });
    }
    let proj = cross.columns(0, ntr) * &model.coefficients;
    let g = proj.tr_mul(&proj);
    let top = (0..g.nrows()).fold(0.0f64, |acc, i| acc.max(g[(i, i)]));
    normalized_deviation(&g, top)
}

fn normalized_deviation(g: &DMatrix<f64>, top: f64) -> Result<f64> {
    let keep: Vec<usize> = (0..g.nrows())
        .filter(|&i| g[(i, i)] > RANK_TOL * top && g[(i, i)] > 0.0)
        .collect();
    if keep.is_empty() {
        return Err(Error::Degenerate(alloc::string::String::from(
            "every direction has a vanishing held-out variance",
        )));
    }
    let mut dev = 0.0;
    for &i in &keep {
        for &j in &keep {
            let gij = g[(i, j)] / sqrt(g[(i, i)] * g[(j, j)]);
            let target = if i == j { 1.0 } else { 0.0 };
            dev += (gij - target) * (gij - target);
        }
    }
    Ok(sqrt(dev))
}

/// `k − ‖refᵀ·U‖_F²`, the squared Frobenius sine distance between the two
/// column spans.
pub fn subspace_error(basis: &DMatrix<f64>, reference: &DMatrix<f64>) -> Result<f64> {
    if basis.shape() != reference.shape() {
        return Err(invalid("subspace operands must have equal shapes"));
    }
    let k = basis.ncols() as f64;
    Ok((k - reference.tr_mul(basis).norm_squared()).max(0.0))
}

/// Estimated spectrum of the fourth-moment operator and the derived κ.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumDiagnostics {
    /// Non-increasing, non-negative estimates of `λ_j(C′)`.
    pub cprime_eigenvalues: Vec<f64>,
    /// Empirical `L²` spectrum of the kernel integral operator.
    pub l2_eigenvalues: Vec<f64>,
    /// `√E⟨z_ω, z_ω′⟩⁴` over distinct draws.
    pub fourth_moment_root: f64,
    pub b_k: Option<f64>,
    pub kappa: Option<f64>,
    pub argmin_h: Option<usize>,
    /// `λ̂_{j+1}/λ̂_j` over the significant part of the `C′` spectrum.
    pub decay_ratios: Vec<f64>,
    pub k: usize,
    /// Feature budget the κ scan was evaluated at.
    pub m_budget: usize,
}

impl SpectrumDiagnostics {
    /// `λ̂₂/λ̂₁` of the `C′` spectrum.
    pub fn leading_decay_ratio(&self) -> Option<f64> {
        self.decay_ratios.first().copied()
    }

    /// Smallest feature budget `m` whose κ is at most `target`, searched over
    /// `1..=limit`. `None` when κ is undefined or never gets that small.
    pub fn feature_budget_for(&self, target: f64, limit: usize) -> Option<usize> {
        let b_k = self.b_k?;
        let eval = |m: usize| kappa_scan(&self.cprime_eigenvalues, b_k, self.k, m).0;
        if eval(limit) > target {
            return None;
        }
        let (mut lo, mut hi) = (1usize, limit);
        while lo < hi {
            let mid = lo + (hi - lo) / 2;
            if eval(mid) <= target {
                hi = mid;
            } else {
                lo = mid + 1;
            }
        }
        Some(lo)
    }
}

/// `min_h { B_k·h/m + √((k/m)·Σ_{j>h} λ_j) }` over `h = 0..=len`, returning the
/// minimum and the smallest minimizing `h`.
pub fn kappa_scan(eigenvalues: &[f64], b_k: f64, k: usize, m: usize) -> (f64, usize) {
    let len = eigenvalues.len();
    let mut tail = alloc::vec![0.0; len + 1];
    for j in (0..len).rev() {
        tail[j] = tail[j + 1] + eigenvalues[j].max(0.0);
    }
    let (k, m) = (k as f64, m as f64);
    let mut best = (f64::INFINITY, 0usize);
    for (h, t) in tail.iter().enumerate() {
        let v = b_k * h as f64 / m + sqrt(k / m * t);
        if v < best.0 {
            best = (v, h);
        }
    }
    best
}

/// Fourth-moment diagnostics from single-feature evaluations.
///
/// `values` is `M × N`: row `a` holds `z_{ω_a}(x_q)` over the sample. With
/// `s_ab = ⟨z_a, z_b⟩_ρ̂`, the matrix `H = (s_ab²)` is the Gram matrix of the
/// rank-one operators `z_a ⊗ z_a`; the eigenvalues of the centered `H`
/// divided by `M` estimate the spectrum of their covariance `C′`. The `L²`
/// spectrum used for `B_k` comes from `s/M`, its numerator from the
/// off-diagonal `s_ab` (pairs of distinct draws).
pub fn fourth_moment_from_features(
    values: &DMatrix<f64>,
    k: usize,
    m_budget: usize,
) -> Result<SpectrumDiagnostics> {
    let (mm, nn) = values.shape();
    if mm < 2 || nn < 2 {
        return Err(invalid(
            "need at least two feature draws and two data points",
        ));
    }
    if k == 0 || m_budget == 0 {
        return Err(invalid("k and the feature budget must be positive"));
    }
    let mut s = values * values.transpose() / nn as f64;
    linalg::symmetrize_from_lower(&mut s);
    let h = s.map(|v| v * v);
    let mean_row: Vec<f64> = (0..mm).map(|a| h.row(a).sum() / mm as f64).collect();
    let grand = mean_row.iter().sum::<f64>() / mm as f64;
    let centered = DMatrix::from_fn(mm, mm, |a, b| h[(a, b)] - mean_row[a] - mean_row[b] + grand);
    let h_scale = h.iter().fold(0.0f64, |acc, v| acc.max(abs(*v)));
    let s_scale = s.iter().fold(0.0f64, |acc, v| acc.max(abs(*v)));
    let cprime = clip_spectrum(linalg::sym_eigenvalues(centered), mm as f64, h_scale);
    let l2 = clip_spectrum(linalg::sym_eigenvalues(s.clone()), mm as f64, s_scale);

    let mut fourth = 0.0;
    for b in 0..mm {
        for a in 0..mm {
            if a != b {
                let v = s[(a, b)] * s[(a, b)];
                fourth += v * v;
            }
        }
    }
    fourth /= (mm * (mm - 1)) as f64;
    let fourth_moment_root = sqrt(fourth);
    let at = |i: usize| l2.get(i).copied().unwrap_or(0.0);
    let gap = at(k - 1) - at(k);
    let l2_top = at(0);
    let b_k = (gap > RANK_TOL * l2_top && gap > 0.0).then(|| fourth_moment_root / gap);
    let (kappa, argmin_h) = match b_k {
        Some(b) => {
            let (kv, hv) = kappa_scan(&cprime, b, k, m_budget);
            (Some(kv), Some(hv))
        }
        None => (None, None),
    };
    let top = cprime.first().copied().unwrap_or(0.0);
    let significant: Vec<f64> = cprime
        .iter()
        .copied()
        .filter(|&v| v > 1e-10 * top && v > 0.0)
        .collect();
    let decay_ratios = significant.windows(2).map(|w| w[1] / w[0]).collect();
    Ok(SpectrumDiagnostics {
        cprime_eigenvalues: cprime,
        l2_eigenvalues: l2,
        fourth_moment_root,
        b_k,
        kappa,
        argmin_h,
        decay_ratios,
        k,
        m_budget,
    })
}

/// Divides by `M` and zeroes entries below the rank threshold, taken
/// relative to the largest matrix entry `scale` (a bound on the spectral
/// radius over `M`, so round-off of an all-zero spectrum is also caught).
fn clip_spectrum(mut vals: Vec<f64>, draws: f64, scale: f64) -> Vec<f64> {
    vals.iter_mut().for_each(|v| *v /= draws);
    let floor = RANK_TOL * scale.max(vals.first().copied().unwrap_or(0.0));
    vals.iter_mut().for_each(|v| {
        if *v <= floor {
            *v = 0.0;
        }
    });
    vals
}

/// Fourth-moment diagnostics for the random Fourier features of `spec` on the
/// row-major sample `points`, with `m_draws` fresh single-feature draws.
pub fn fourth_moment_spectrum(
    spec: &KernelSpec,
    points: &[f64],
    m_draws: usize,
    k: usize,
    m_budget: usize,
    seed: u64,
) -> Result<SpectrumDiagnostics> {
    let values = probe_features(
        &ProbeFamily::Fourier(*spec),
        points,
        spec.dim,
        m_draws,
        seed,
    )?;
    fourth_moment_from_features(&values, k, m_budget)
}

/// Feature families for the fourth-moment diagnostic.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProbeFamily {
    /// `√2·cos(ω·x + b)` with ω from the kernel's spectral density.
    Fourier(KernelSpec),
    /// `z ≡ c` on every point; `C′ = 0`.
    Constant(f64),
    /// `z_ω(x) = ω·x` with standard normal ω (the linear kernel). With `μ` the
    /// eigenvalues of the sample second-moment matrix, `C′` has eigenvalues
    /// `2μᵢμⱼ`, `i ≤ j`, so `λ̂₂/λ̂₁ = μ₂/μ₁`.
    Linear,
    /// `z = √N·e_J` with `J` cycling through `classes` point indices, so each
    /// class gets the same number of draws. `C′` has `classes − 1` eigenvalues
    /// equal to `1/classes` and zeros elsewhere.
    Indicator { classes: usize },
    /// `z = ψ₀ + Σ_{j=1..levels} εⱼ·√(scale·αʲ)·ψⱼ` with Rademacher signs and
    /// orthonormal `ψ` in `L²(ρ̂)`. The leading `C′` eigenvalues are
    /// `2·scale·αʲ` (cross terms are `O(scale²)`), a geometric decay with
    /// ratio `α`.
    SignedStar {
        alpha: f64,
        levels: usize,
        scale: f64,
    },
}

/// Evaluates `m_draws` members of `family` on the `N` points of `points`
/// (row-major, dimension `d`), returning an `m_draws × N` matrix.
pub fn probe_features(
    family: &ProbeFamily,
    points: &[f64],
    d: usize,
    m_draws: usize,
    seed: u64,
) -> Result<DMatrix<f64>> {
    if d == 0 || points.is_empty() || !points.len().is_multiple_of(d) {
        return Err(invalid("probe sample must hold at least one complete row"));
    }
    let n = points.len() / d;
    let mut rng = rng::substream(seed, Purpose::Diagnostics);
    match *family {
        ProbeFamily::Fourier(spec) => {
            check_dim(spec.dim, d)?;
            let map = sample_feature_map(spec, m_draws, rng.random::<u64>())?;
            let z = map.transform_rows(points)?;
            Ok(z.transpose() * sqrt(m_draws as f64))
        }
        ProbeFamily::Constant(c) => Ok(DMatrix::from_element(m_draws, n, c)),
        ProbeFamily::Linear => {
            let w = DMatrix::from_fn(m_draws, d, |_, _| rng.sample::<f64, _>(StandardNormal));
            Ok(w * DMatrix::from_column_slice(d, n, points))
        }
        ProbeFamily::Indicator { classes } => {
            if classes == 0 || classes > n {
                return Err(invalid("indicator classes must lie in 1..=N"));
            }
            let root = sqrt(n as f64);
            Ok(DMatrix::from_fn(m_draws, n, |a, q| {
                if q == a % classes {
                    root
                } else {
                    0.0
                }
            }))
        }
        ProbeFamily::SignedStar {
            alpha,
            levels,
            scale,
        } => {
            if !(alpha > 0.0 && alpha < 1.0 && scale > 0.0) || levels + 1 > n {
                return Err(invalid(
                    "signed-star family needs 0 < alpha < 1, scale > 0, levels < N",
                ));
            }
            let mut psi = DMatrix::from_fn(n, levels + 1, |_, _| rng.random::<f64>() - 0.5);
            psi.set_column(0, &DVector::from_element(n, 1.0));
            linalg::orthonormalize(&mut psi);
            psi *= sqrt(n as f64);
            let amps: Vec<f64> = (1..=levels)
                .map(|j| sqrt(scale * libm::pow(alpha, j as f64)))
                .collect();
            let mut out = DMatrix::zeros(m_draws, n);
            for a in 0..m_draws {
                let mut row = psi.column(0).into_owned();
                for (j, amp) in amps.iter().enumerate() {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    row.axpy(sign * amp, &psi.column(j + 1), 1.0);
                }
                out.set_row(a, &row.transpose());
            }
            Ok(out)
        }
    }
}

/// Largest absolute asymmetry of a square matrix.
pub fn asymmetry(a: &DMatrix<f64>) -> f64 {
    let n = a.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..j {
            worst = worst.max(abs(a[(i, j)] - a[(j, i)]));
        }
    }
    worst
}
