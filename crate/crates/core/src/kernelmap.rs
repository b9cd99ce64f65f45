//! Shift-invariant kernels and their random Fourier feature maps.
//!
//! Each family is paired with its spectral density: frequencies are drawn
//! from it and every feature is `√(2/m)·cos(ωᵢ·x + bᵢ)` with a uniform phase,
//! so a single feature function `√2·cos(ω·x + b)` is bounded by `τ = √2`.

use alloc::vec::Vec;
use core::f64::consts::{PI, SQRT_2};

use nalgebra::{DMatrix, DVector};
use rand::Rng as _;
use rand_distr::{Cauchy, Distribution, Exp1, Normal};

use crate::error::{check_dim, invalid, Result};
use crate::math::{abs, cos, exp, sqrt};
use crate::rng::{self, Purpose};

/// Supported kernel families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum KernelFamily {
    /// `exp(−‖x−y‖²/(2σ²))`
    Rbf,
    /// `exp(−‖x−y‖₁/σ)`
    Laplacian,
    /// `∏ⱼ 1/(1 + (xⱼ−yⱼ)²/σ²)`
    Cauchy,
}

impl KernelFamily {
    pub fn name(&self) -> &'static str {
        match self {
            KernelFamily::Rbf => "rbf",
            KernelFamily::Laplacian => "laplacian",
            KernelFamily::Cauchy => "cauchy",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "rbf" | "gaussian" => Some(KernelFamily::Rbf),
            "laplacian" => Some(KernelFamily::Laplacian),
            "cauchy" => Some(KernelFamily::Cauchy),
            _ => None,
        }
    }
}

/// A normalized shift-invariant kernel on `ℝ^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KernelSpec {
    pub family: KernelFamily,
    /// Length scale σ in input units.
    pub bandwidth: f64,
    pub dim: usize,
}

impl KernelSpec {
    pub fn new(family: KernelFamily, bandwidth: f64, dim: usize) -> Result<Self> {
        let spec = KernelSpec {
            family,
            bandwidth,
            dim,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// RBF kernel given σ² rather than σ.
    pub fn rbf_from_variance(sigma2: f64, dim: usize) -> Result<Self> {
        if !(sigma2.is_finite() && sigma2 > 0.0) {
            return Err(invalid(
                "rbf bandwidth variance must be positive and finite",
            ));
        }
        Self::new(KernelFamily::Rbf, sqrt(sigma2), dim)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth.is_finite() && self.bandwidth > 0.0) {
            return Err(invalid("kernel bandwidth must be positive and finite"));
        }
        if self.dim == 0 {
            return Err(invalid("kernel input dimension must be at least 1"));
        }
        Ok(())
    }
}

/// Sampled random Fourier features `z: ℝᵈ → ℝᵐ`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub spec: KernelSpec,
    /// `m × d`, one frequency per row.
    pub frequencies: DMatrix<f64>,
    /// Phases in `[0, 2π)`.
    pub phases: Vec<f64>,
    pub m: usize,
    /// Bound on a single (unscaled) feature function, `√2`.
    pub tau: f64,
    pub seed: u64,
}

/// Draws `m` frequencies from the spectral density of `spec` and `m` uniform
/// phases. Deterministic in `seed`.
pub fn sample_feature_map(spec: KernelSpec, m: usize, seed: u64) -> Result<FeatureMap> {
    spec.validate()?;
    if m == 0 {
        return Err(invalid("number of random features must be at least 1"));
    }
    let d = spec.dim;
    let scale = 1.0 / spec.bandwidth;
    let mut rng = rng::substream(seed, Purpose::Features);
    let mut draws = Vec::with_capacity(m * d);
    match spec.family {
        KernelFamily::Rbf => {
            let normal = Normal::new(0.0, scale).map_err(|_| invalid("bad rbf scale"))?;
            draws.extend((0..m * d).map(|_| normal.sample(&mut rng)));
        }
        KernelFamily::Laplacian => {
            let cauchy = Cauchy::new(0.0, scale).map_err(|_| invalid("bad laplacian scale"))?;
            draws.extend((0..m * d).map(|_| cauchy.sample(&mut rng)));
        }
        KernelFamily::Cauchy => {
            draws.extend((0..m * d).map(|_| {
                let e: f64 = Exp1.sample(&mut rng);
                if rng.random::<bool>() {
                    e * scale
                } else {
                    -e * scale
                }
            }));
        }
    }
    let frequencies = DMatrix::from_row_slice(m, d, &draws);
    let phases = (0..m).map(|_| rng.random::<f64>() * 2.0 * PI).collect();
    Ok(FeatureMap {
        spec,
        frequencies,
        phases,
        m,
        tau: SQRT_2,
        seed,
    })
}

impl FeatureMap {
    pub fn input_dim(&self) -> usize {
        self.spec.dim
    }

    fn amplitude(&self) -> f64 {
        sqrt(2.0 / self.m as f64)
    }

    /// `z(x)`.
    pub fn transform(&self, x: &[f64]) -> Result<Vec<f64>> {
        let mut out = crate::linalg::zeros(self.m);
        self.transform_into(x, &mut out)?;
        Ok(out)
    }

    /// `z(x)` written into `out` (length `m`).
    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) -> Result<()> {
        check_dim(self.spec.dim, x.len())?;
        check_dim(self.m, out.len())?;
        let proj = &self.frequencies * DVector::from_column_slice(x);
        let a = self.amplitude();
        for ((o, p), b) in out.iter_mut().zip(proj.iter()).zip(&self.phases) {
            *o = a * cos(p + b);
        }
        Ok(())
    }

    /// Transforms a row-major block of points; column `q` of the result is
    /// `z(x_q)`.
    pub fn transform_rows(&self, rows: &[f64]) -> Result<DMatrix<f64>> {
        let d = self.spec.dim;
        if !rows.len().is_multiple_of(d) {
            return Err(invalid(
                "row block length is not a multiple of the input dimension",
            ));
        }
        let n = rows.len() / d;
        let x = DMatrix::from_column_slice(d, n, rows);
        let mut z = &self.frequencies * x;
        let a = self.amplitude();
        for mut col in z.column_iter_mut() {
            for (v, b) in col.iter_mut().zip(&self.phases) {
                *v = a * cos(*v + b);
            }
        }
        Ok(z)
    }

    /// Unscaled single feature `√2·cos(ωᵢ·x + bᵢ)`; bounded by `tau`.
    pub fn feature(&self, i: usize, x: &[f64]) -> Result<f64> {
        check_dim(self.spec.dim, x.len())?;
        if i >= self.m {
            return Err(invalid("feature index out of range"));
        }
        let dot: f64 = self
            .frequencies
            .row(i)
            .iter()
            .zip(x)
            .map(|(w, v)| w * v)
            .sum();
        Ok(SQRT_2 * cos(dot + self.phases[i]))
    }
}

/// Exact kernel value.
pub fn exact_kernel(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    check_dim(spec.dim, x.len())?;
    check_dim(spec.dim, y.len())?;
    Ok(kernel_unchecked(spec, x, y))
}

fn kernel_unchecked(spec: &KernelSpec, x: &[f64], y: &[f64]) -> f64 {
    let s = spec.bandwidth;
    match spec.family {
        KernelFamily::Rbf => {
            let d2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            exp(-d2 / (2.0 * s * s))
        }
        KernelFamily::Laplacian => {
            let d1: f64 = x.iter().zip(y).map(|(a, b)| abs(a - b)).sum();
            exp(-d1 / s)
        }
        KernelFamily::Cauchy => x
            .iter()
            .zip(y)
            .map(|(a, b)| 1.0 / (1.0 + (a - b) * (a - b) / (s * s)))
            .product(),
    }
}

/// `⟨z(x), z(y)⟩`.
pub fn approx_kernel(map: &FeatureMap, x: &[f64], y: &[f64]) -> Result<f64> {
    let zx = map.transform(x)?;
    let zy = map.transform(y)?;
    Ok(zx.iter().zip(&zy).map(|(a, b)| a * b).sum())
}

/// Cross kernel matrix between two row-major point blocks: entry `(p, q)` is
/// `k(a_p, b_q)`.
pub fn kernel_matrix(spec: &KernelSpec, a: &[f64], b: &[f64]) -> Result<DMatrix<f64>> {
    let d = spec.dim;
    if !a.len().is_multiple_of(d) || !b.len().is_multiple_of(d) {
        return Err(invalid(
            "row block length is not a multiple of the input dimension",
        ));
    }
    let (na, nb) = (a.len() / d, b.len() / d);
    match spec.family {
        KernelFamily::Rbf => {
            let am = DMatrix::from_column_slice(d, na, a);
            let bm = DMatrix::from_column_slice(d, nb, b);
            let g = am.transpose() * &bm;
            let sa: Vec<f64> = am.column_iter().map(|c| c.norm_squared()).collect();
            let sb: Vec<f64> = bm.column_iter().map(|c| c.norm_squared()).collect();
            let denom = 2.0 * spec.bandwidth * spec.bandwidth;
            Ok(DMatrix::from_fn(na, nb, |p, q| {
                let d2 = (sa[p] + sb[q] - 2.0 * g[(p, q)]).max(0.0);
                exp(-d2 / denom)
            }))
        }
        _ => Ok(DMatrix::from_fn(na, nb, |p, q| {
            kernel_unchecked(spec, &a[p * d..(p + 1) * d], &b[q * d..(q + 1) * d])
        })),
    }
}

/// Symmetric kernel matrix of one point block, exactly symmetric with unit
/// diagonal.
pub fn kernel_gram(spec: &KernelSpec, a: &[f64]) -> Result<DMatrix<f64>> {
    let mut k = kernel_matrix(spec, a, a)?;
    let n = k.nrows();
    for j in 0..n {
        k[(j, j)] = 1.0;
        for i in 0..j {
            let v = 0.5 * (k[(i, j)] + k[(j, i)]);
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    Ok(k)
}
