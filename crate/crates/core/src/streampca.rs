//! Oja's algorithm over a stream of feature vectors.
//!
//! Each step applies `Q ← orth(Q + η·z·(zᵀQ))` without forming `z·zᵀ`, so a
//! step costs `O(mk + mk²)`. The step size follows a three-phase schedule:
//! constant during warm-up, constant for `T1` steps, then decaying as
//! `1/(gap·(t − T0))`.
//!
//! The schedule is stated for samples with `E‖z‖² ≈ 1`; other streams are
//! handled by dividing every rate by the pilot's mean `‖z‖²`. The gap is
//! estimated twice: from a short pilot to size the warm-up, then from the
//! covariance of all warm-up samples for the later phases.

use alloc::collections::VecDeque;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};

use crate::batchpca::{CovarianceAccumulator, Learner, ModelMeta, SubspaceModel};
use crate::error::{check_dim, invalid, Result};
use crate::linalg;
use crate::math::ceil;
use crate::rng::{self, Purpose};

/// Resolved learning-rate schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OjaConfig {
    pub k: usize,
    /// Warm-up steps.
    pub t0: usize,
    /// Mid-phase steps.
    pub t1: usize,
    pub c_warm: f64,
    pub c_mid: f64,
    pub c_decay: f64,
    /// Estimate of `λ_k − λ_{k+1}` of the covariance of `z/√scale`.
    pub gap_estimate: f64,
    /// Sample scale `s`: the schedule is the one for `z/√s`, so every rate is
    /// divided by `s`. 1 for features with `E‖z‖² ≈ 1`, such as random
    /// Fourier features.
    pub scale: f64,
    /// Upper bound on `η_t·s`.
    pub eta_max: f64,
    pub seed: u64,
}

impl OjaConfig {
    /// Default schedule for a stream of `n` samples:
    /// `T0 = max(200, 4k⌈1/gap²⌉)` and `T1 = ⌈1/gap²⌉`, both capped at `n/4`,
    /// with unit constants.
    pub fn with_defaults(k: usize, n: Option<usize>, gap: f64, seed: u64) -> Result<Self> {
        if !(gap.is_finite() && gap > 0.0) {
            return Err(invalid("eigengap estimate must be positive and finite"));
        }
        let inv_gap2 = ceil(1.0 / (gap * gap));
        let inv_gap2 = if inv_gap2 > 1e15 {
            1e15 as usize
        } else {
            inv_gap2 as usize
        };
        let cap = n.map(|n| n / 4).unwrap_or(usize::MAX);
        let t0 = (4 * k).saturating_mul(inv_gap2).max(200).min(cap);
        let t1 = inv_gap2.min(cap);
        let cfg = OjaConfig {
            k,
            t0,
            t1,
            c_warm: 1.0,
            c_mid: 1.0,
            c_decay: 1.0,
            gap_estimate: gap,
            scale: 1.0,
            eta_max: f64::INFINITY,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(invalid("oja rank k must be at least 1"));
        }
        for (name, v) in [
            ("c_warm", self.c_warm),
            ("c_mid", self.c_mid),
            ("c_decay", self.c_decay),
            ("gap_estimate", self.gap_estimate),
            ("scale", self.scale),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(invalid(alloc::format!(
                    "{name} must be positive and finite"
                )));
            }
        }
        if self.eta_max.is_nan() || self.eta_max <= 0.0 {
            return Err(invalid("eta_max must be positive"));
        }
        Ok(())
    }
}

/// Step size `η_t` for step `t ≥ 1`.
pub fn learning_rate(config: &OjaConfig, t: usize) -> f64 {
    let gap = config.gap_estimate;
    let (t0, t1) = (config.t0, config.t1);
    let eta = if t <= t0 {
        config.c_warm / (gap * t0 as f64)
    } else if t <= t0 + t1 {
        config.c_mid / (gap * gap * t1 as f64)
    } else {
        config.c_decay / (gap * (t - t0) as f64)
    };
    eta.min(config.eta_max) / config.scale
}

/// Current Oja iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct OjaState {
    /// `m × k`, orthonormal columns.
    pub basis: DMatrix<f64>,
    /// Accepted updates so far.
    pub step: usize,
    /// Rejected (non-finite) samples.
    pub skipped: usize,
}

/// Orthonormalized `m × k` Gaussian matrix.
pub fn init_oja(m: usize, k: usize, seed: u64) -> Result<OjaState> {
    if k == 0 || k > m {
        return Err(invalid(alloc::format!("oja rank {k} must lie in 1..={m}")));
    }
    let mut rng = rng::substream(seed, Purpose::OjaInit);
    let mut basis = DMatrix::from_fn(m, k, |_, _| StandardNormal.sample(&mut rng));
    linalg::orthonormalize(&mut basis);
    Ok(OjaState {
        basis,
        step: 0,
        skipped: 0,
    })
}

/// One Oja update. Returns `false` and leaves the basis untouched when `z` has
/// non-finite entries.
pub fn oja_step(state: &mut OjaState, z: &[f64], eta: f64) -> Result<bool> {
    check_dim(state.basis.nrows(), z.len())?;
    if z.iter().any(|v| !v.is_finite()) {
        state.skipped += 1;
        return Ok(false);
    }
    let z = DVector::from_column_slice(z);
    let w = state.basis.tr_mul(&z);
    state.basis.ger(eta, &z, &w, 1.0);
    linalg::orthonormalize(&mut state.basis);
    state.step += 1;
    Ok(true)
}

/// Learner-level knobs for [`OjaLearner`] and [`run_oja`].
#[derive(Debug, Clone, PartialEq)]
pub struct OjaOptions {
    pub k: usize,
    pub seed: u64,
    pub t0: Option<usize>,
    pub t1: Option<usize>,
    /// Warm-up constant; `max(1, 4·ln m)` when absent.
    pub c_warm: Option<f64>,
    /// Mid-phase constant; `c_decay·gap` when absent, which makes the
    /// mid-phase rate meet the decay rate at `t = T0 + T1`.
    pub c_mid: Option<f64>,
    pub c_decay: f64,
    /// Common multiplier on all three constants.
    pub rate_factor: f64,
    /// Cap on `η_t·scale`.
    pub eta_max: f64,
    /// Known eigengap, in the units of `z/√scale`; estimated when absent.
    pub gap_estimate: Option<f64>,
    /// Sample scale; defaults to the pilot's mean `‖z‖²` when the gap is
    /// estimated and to 1 when it is given.
    pub scale: Option<f64>,
    /// Samples used for the provisional gap that sizes the warm-up.
    pub pilot: usize,
    /// Re-estimate the gap from the covariance of all warm-up samples once
    /// warm-up ends, and use it for the later phases.
    pub refine_gap: bool,
    /// Trailing window for the Rayleigh quotients.
    pub rayleigh_window: usize,
    /// Total stream length, when known; caps `T0` and `T1` at a quarter of it.
    pub stream_len: Option<usize>,
}

impl OjaOptions {
    pub fn new(k: usize, seed: u64) -> Self {
        OjaOptions {
            k,
            seed,
            t0: None,
            t1: None,
            c_warm: None,
            c_mid: None,
            c_decay: 4.0,
            rate_factor: 1.0,
            eta_max: 0.5,
            gap_estimate: None,
            scale: None,
            pilot: 200,
            refine_gap: true,
            rayleigh_window: 1000,
            stream_len: None,
        }
    }

    /// Multiplies every phase constant by `factor`.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.rate_factor *= factor;
        self
    }

    fn resolve(&self, gap: f64, scale: f64, m: usize) -> Result<OjaConfig> {
        let mut cfg = OjaConfig::with_defaults(self.k, self.stream_len, gap, self.seed)?;
        cfg.scale = scale;
        cfg.eta_max = self.eta_max;
        if let Some(t0) = self.t0 {
            cfg.t0 = t0;
        }
        if let Some(t1) = self.t1 {
            cfg.t1 = t1;
        }
        cfg.c_warm = self.rate_factor
            * self
                .c_warm
                .unwrap_or_else(|| (4.0 * libm::log(m as f64)).max(1.0));
        cfg.c_mid = self.rate_factor * self.c_mid.unwrap_or(self.c_decay * gap);
        cfg.c_decay = self.rate_factor * self.c_decay;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replaces the gap (and the default `T1`) after warm-up; `T0` stays.
    fn refine(&self, cfg: &OjaConfig, gap: f64) -> Result<OjaConfig> {
        let fresh = OjaConfig::with_defaults(self.k, self.stream_len, gap, self.seed)?;
        let mut out = *cfg;
        out.gap_estimate = gap;
        out.t1 = self.t1.unwrap_or(fresh.t1);
        if self.c_mid.is_none() {
            out.c_mid = self.rate_factor * self.c_decay * gap;
        }
        out.validate()?;
        Ok(out)
    }
}

/// Eigengap `λ_k − λ_{k+1}` of an accumulated covariance, floored at
/// `1e-6·λ₁`.
fn covariance_gap(acc: &CovarianceAccumulator, k: usize) -> Result<f64> {
    let cov = acc
        .mean()
        .ok_or_else(|| invalid("cannot estimate an eigengap from an empty sample"))?;
    let vals = linalg::top_k_symmetric(&cov, (k + 1).min(cov.nrows())).values;
    let at = |i: usize| vals.get(i).copied().unwrap_or(0.0).max(0.0);
    let top = at(0);
    if top <= 0.0 {
        return Err(invalid("warm-up samples are all zero"));
    }
    Ok((at(k - 1) - at(k)).max(1e-6 * top))
}

/// Eigengap `λ_k − λ_{k+1}` of the empirical covariance of `samples`,
/// computed through the `n × n` Gram matrix. Floored at `1e-6·λ₁`.
pub fn estimate_gap(samples: &[Vec<f64>], k: usize) -> Result<f64> {
    if samples.is_empty() {
        return Err(invalid("cannot estimate an eigengap from an empty sample"));
    }
    let n = samples.len();
    let gram = DMatrix::from_fn(n, n, |i, j| {
        samples[i]
            .iter()
            .zip(&samples[j])
            .map(|(a, b)| a * b)
            .sum::<f64>()
            / n as f64
    });
    let vals = linalg::sym_eigenvalues(gram);
    let top = vals.first().copied().unwrap_or(0.0).max(0.0);
    let at = |i: usize| vals.get(i).copied().unwrap_or(0.0).max(0.0);
    let gap = at(k - 1) - at(k);
    let floor = 1e-6 * top;
    if top <= 0.0 {
        return Err(invalid("pilot samples are all zero"));
    }
    Ok(gap.max(floor))
}

/// Warm-up samples are added to the covariance in blocks of this many, one
/// matrix product per block.
const WARMUP_BLOCK: usize = 128;

fn flush_block(acc: &mut CovarianceAccumulator, block: &mut Vec<f64>, m: usize) -> Result<()> {
    if !block.is_empty() {
        acc.accumulate_batch(&DMatrix::from_column_slice(m, block.len() / m, block))?;
        block.clear();
    }
    Ok(())
}

/// Streaming RF-Oja learner. Samples are pushed one at a time; a model can be
/// snapshotted at any point without disturbing the iterate.
#[derive(Debug, Clone)]
pub struct OjaLearner {
    options: OjaOptions,
    m: usize,
    state: OjaState,
    config: Option<OjaConfig>,
    pilot: Vec<Vec<f64>>,
    warmup: Option<CovarianceAccumulator>,
    /// Warm-up samples not yet folded into `warmup`, column-major.
    warmup_block: Vec<f64>,
    window: VecDeque<Vec<f64>>,
    seen: usize,
}

impl OjaLearner {
    pub fn new(options: OjaOptions, m: usize) -> Result<Self> {
        let state = init_oja(m, options.k, options.seed)?;
        let config = match options.gap_estimate {
            Some(g) => Some(options.resolve(g, options.scale.unwrap_or(1.0), m)?),
            None => None,
        };
        if options.rayleigh_window == 0 {
            return Err(invalid("rayleigh window must be at least 1"));
        }
        let warmup = (options.gap_estimate.is_none() && options.refine_gap)
            .then(|| CovarianceAccumulator::new(m));
        Ok(OjaLearner {
            options,
            m,
            state,
            config,
            pilot: Vec::new(),
            warmup,
            warmup_block: Vec::new(),
            window: VecDeque::new(),
            seen: 0,
        })
    }

    pub fn state(&self) -> &OjaState {
        &self.state
    }

    /// Schedule in use, once resolved.
    pub fn config(&self) -> Option<&OjaConfig> {
        self.config.as_ref()
    }

    pub fn samples_seen(&self) -> usize {
        self.seen
    }

    pub fn push(&mut self, z: &[f64]) -> Result<()> {
        check_dim(self.m, z.len())?;
        self.seen += 1;
        if z.iter().all(|v| v.is_finite()) {
            if self.window.len() == self.options.rayleigh_window {
                self.window.pop_front();
            }
            self.window.push_back(z.to_vec());
        }
        if self.config.is_none() {
            if z.iter().all(|v| v.is_finite()) {
                self.pilot.push(z.to_vec());
            } else {
                self.state.skipped += 1;
            }
            if self.pilot.len() >= self.options.pilot.max(self.options.k + 1) {
                self.resolve_schedule()?;
            }
            return Ok(());
        }
        self.apply(z)
    }

    fn apply(&mut self, z: &[f64]) -> Result<()> {
        let cfg = self
            .config
            .expect("schedule resolved before applying steps");
        let eta = learning_rate(&cfg, self.state.step + 1);
        let accepted = oja_step(&mut self.state, z, eta)?;
        if let Some(acc) = self.warmup.as_mut() {
            if accepted {
                self.warmup_block.extend_from_slice(z);
                if self.warmup_block.len() >= WARMUP_BLOCK * self.m {
                    flush_block(acc, &mut self.warmup_block, self.m)?;
                }
            }
            if self.state.step >= cfg.t0 {
                let mut acc = self.warmup.take().expect("checked above");
                flush_block(&mut acc, &mut self.warmup_block, self.m)?;
                if acc.count() > self.options.k {
                    let gap = covariance_gap(&acc, self.options.k)? / cfg.scale;
                    self.config = Some(self.options.refine(&cfg, gap)?);
                }
            }
        }
        Ok(())
    }

    fn resolve_schedule(&mut self) -> Result<()> {
        let scale = match self.options.scale {
            Some(s) => s,
            None => {
                let total: f64 = self
                    .pilot
                    .iter()
                    .map(|z| z.iter().map(|v| v * v).sum::<f64>())
                    .sum();
                total / self.pilot.len() as f64
            }
        };
        if !(scale.is_finite() && scale > 0.0) {
            return Err(invalid("pilot samples are all zero"));
        }
        let gap = estimate_gap(&self.pilot, self.options.k.min(self.pilot.len()))? / scale;
        self.config = Some(self.options.resolve(gap, scale, self.m)?);
        let pilot = core::mem::take(&mut self.pilot);
        for z in &pilot {
            self.apply(z)?;
        }
        Ok(())
    }

    /// Current model; Rayleigh quotients come from the trailing window.
    /// Before the pilot is complete this is the initial basis, flagged
    /// incomplete; the schedule is left untouched either way.
    pub fn snapshot(&self) -> Result<SubspaceModel> {
        if self.window.is_empty() {
            return Err(invalid("oja learner has not seen any finite sample"));
        }
        let incomplete = match &self.config {
            Some(cfg) => self.state.step < cfg.t0,
            None => true,
        };
        let w = self.window.len();
        let zt = DMatrix::from_fn(w, self.m, |i, j| self.window[i][j]);
        let proj = zt * &self.state.basis;
        let rayleigh: Vec<f64> = proj
            .column_iter()
            .map(|c| c.norm_squared() / w.max(1) as f64)
            .collect();
        let (basis, rayleigh) = SubspaceModel::sort_by_rayleigh(self.state.basis.clone(), rayleigh);
        Ok(SubspaceModel {
            basis,
            rayleigh,
            meta: ModelMeta {
                learner: Learner::RfOja,
                n_seen: self.seen,
                m: self.m,
                k: self.options.k,
                seed: self.options.seed,
                incomplete,
                rank_deficient: false,
                skipped: self.state.skipped,
            },
        })
    }

    /// Ends the stream: a pilot that never filled up still sets the schedule
    /// and is replayed, then the final model is returned.
    pub fn finish(mut self) -> Result<SubspaceModel> {
        if self.config.is_none() {
            if self.pilot.is_empty() {
                return Err(invalid("oja learner has not seen any finite sample"));
            }
            self.resolve_schedule()?;
        }
        self.snapshot()
    }
}

/// Runs Oja over a whole stream. The stream length, when the iterator reports
/// it exactly, caps the default warm-up and mid-phase lengths.
pub fn run_oja<I, V>(stream: I, mut options: OjaOptions, m: usize) -> Result<SubspaceModel>
where
    I: IntoIterator<Item = V>,
    V: AsRef<[f64]>,
{
    let iter = stream.into_iter();
    if options.stream_len.is_none() {
        if let (lo, Some(hi)) = iter.size_hint() {
            if lo == hi {
                options.stream_len = Some(hi);
            }
        }
    }
    let mut learner = OjaLearner::new(options, m)?;
    for z in iter {
        learner.push(z.as_ref())?;
    }
    if learner.samples_seen() == 0 {
        return Err(invalid("empty stream"));
    }
    learner.finish()
}
