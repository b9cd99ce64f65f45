//! Experiment configuration: a TOML file with a fixed schema.
//!
//! ```toml
//! m = 750
//! k = 10
//! learners = ["rf_oja", "rf_erm", "exact_erm", "nystrom"]
//! checkpoints = [250, 500, 1000, 2000, 5000]
//! eval_size = 2000
//!
//! [dataset]
//! kind = "idx"
//! images = "mnist-images-idx3-ubyte"
//!
//! [kernel]
//! family = "rbf"
//! sigma2 = 50.0
//! ```
//!
//! Unknown keys are rejected. Every default is written back out by
//! [`ExperimentConfig::effective_toml`].

use std::fs;
use std::path::{Path, PathBuf};

use rfkpca_core::{KernelFamily, KernelSpec, Learner, OjaOptions, ProbeFamily};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("config key `{key}`: {msg}")]
    Key { key: String, msg: String },
    #[error("config: {0}")]
    Syntax(String),
}

fn key_err(key: &str, msg: impl Into<String>) -> ConfigError {
    ConfigError::Key {
        key: key.to_string(),
        msg: msg.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerName {
    RfOja,
    RfErm,
    ExactErm,
    Nystrom,
}

impl LearnerName {
    pub fn learner(self) -> Learner {
        match self {
            LearnerName::RfOja => Learner::RfOja,
            LearnerName::RfErm => Learner::RfErm,
            LearnerName::ExactErm => Learner::ExactErm,
            LearnerName::Nystrom => Learner::Nystrom,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum DatasetConfig {
    /// idx image file; pixel bytes are scaled to [0, 1].
    Idx {
        images: PathBuf,
        labels: Option<PathBuf>,
        /// Keep only the first `limit` images.
        limit: Option<usize>,
    },
    Delimited {
        path: PathBuf,
        #[serde(default = "default_delimiter")]
        delimiter: char,
        #[serde(default)]
        header: bool,
        limit: Option<usize>,
    },
    /// Gaussian data with covariance spectrum `top·alpha^j`, `j = 0..d`.
    Synthetic {
        d: usize,
        n: usize,
        #[serde(default = "default_alpha")]
        alpha: f64,
        #[serde(default = "default_one")]
        top: f64,
        #[serde(default)]
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelName {
    Rbf,
    Laplacian,
    Cauchy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub family: KernelName,
    /// σ² (rbf only); exclusive with `bandwidth`.
    pub sigma2: Option<f64>,
    /// σ.
    pub bandwidth: Option<f64>,
}

impl KernelConfig {
    pub fn spec(&self, dim: usize) -> Result<KernelSpec, ConfigError> {
        let family = match self.family {
            KernelName::Rbf => KernelFamily::Rbf,
            KernelName::Laplacian => KernelFamily::Laplacian,
            KernelName::Cauchy => KernelFamily::Cauchy,
        };
        let bandwidth = match (self.sigma2, self.bandwidth) {
            (Some(s2), None) => s2.sqrt(),
            (None, Some(b)) => b,
            _ => unreachable!("validated"),
        };
        KernelSpec::new(family, bandwidth, dim).map_err(|e| key_err("kernel", e.to_string()))
    }
}

/// Overrides for the Oja schedule; absent keys keep the learner defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OjaOverrides {
    pub t0: Option<usize>,
    pub t1: Option<usize>,
    pub c_warm: Option<f64>,
    pub c_mid: Option<f64>,
    pub c_decay: Option<f64>,
    pub rate_factor: Option<f64>,
    pub eta_max: Option<f64>,
    pub gap: Option<f64>,
    pub pilot: Option<usize>,
    pub refine_gap: Option<bool>,
}

impl OjaOverrides {
    pub fn options(&self, k: usize, seed: u64, stream_len: usize) -> OjaOptions {
        let mut o = OjaOptions::new(k, seed);
        o.stream_len = Some(stream_len);
        o.t0 = self.t0;
        o.t1 = self.t1;
        o.c_warm = self.c_warm;
        o.c_mid = self.c_mid;
        o.gap_estimate = self.gap;
        if let Some(v) = self.c_decay {
            o.c_decay = v;
        }
        if let Some(v) = self.rate_factor {
            o.rate_factor = v;
        }
        if let Some(v) = self.eta_max {
            o.eta_max = v;
        }
        if let Some(v) = self.pilot {
            o.pilot = v;
        }
        if let Some(v) = self.refine_gap {
            o.refine_gap = v;
        }
        o
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeName {
    Fourier,
    Constant,
    Linear,
    Indicator,
    SignedStar,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiagnoseConfig {
    #[serde(default = "default_probe")]
    pub family: ProbeName,
    /// Subsample size N.
    #[serde(default = "default_diag_points")]
    pub points: usize,
    /// Single-feature draws M.
    #[serde(default = "default_diag_draws")]
    pub draws: usize,
    /// Feature budget κ is reported at; defaults to `m`.
    pub m_budget: Option<usize>,
    /// Sample size the implied budget m* is solved for; defaults to the
    /// training size.
    pub n: Option<usize>,
    #[serde(default)]
    pub seed: u64,
    /// Constant family value.
    pub value: Option<f64>,
    /// Indicator family class count.
    pub classes: Option<usize>,
    pub alpha: Option<f64>,
    pub levels: Option<usize>,
    pub scale: Option<f64>,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig {
            family: default_probe(),
            points: default_diag_points(),
            draws: default_diag_draws(),
            m_budget: None,
            n: None,
            seed: 0,
            value: None,
            classes: None,
            alpha: None,
            levels: None,
            scale: None,
        }
    }
}

impl DiagnoseConfig {
    pub fn probe(&self, spec: KernelSpec) -> Result<ProbeFamily, ConfigError> {
        let need = |v: Option<f64>, key: &str| {
            v.ok_or_else(|| key_err(&format!("diagnose.{key}"), "required by this family"))
        };
        Ok(match self.family {
            ProbeName::Fourier => ProbeFamily::Fourier(spec),
            ProbeName::Constant => ProbeFamily::Constant(self.value.unwrap_or(1.0)),
            ProbeName::Linear => ProbeFamily::Linear,
            ProbeName::Indicator => ProbeFamily::Indicator {
                classes: self
                    .classes
                    .ok_or_else(|| key_err("diagnose.classes", "required by this family"))?,
            },
            ProbeName::SignedStar => ProbeFamily::SignedStar {
                alpha: need(self.alpha, "alpha")?,
                levels: self.levels.unwrap_or(10),
                scale: self.scale.unwrap_or(0.01),
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub m: usize,
    pub k: usize,
    #[serde(default = "default_learners")]
    pub learners: Vec<LearnerName>,
    #[serde(default = "default_nystrom_p")]
    pub nystrom_p: usize,
    #[serde(default = "default_checkpoints")]
    pub checkpoints: Vec<usize>,
    /// Training rows drawn by the split; defaults to the last checkpoint.
    pub train_size: Option<usize>,
    #[serde(default = "default_eval_size")]
    pub eval_size: usize,
    #[serde(default = "default_eval_cap")]
    pub eval_cap: usize,
    #[serde(default = "default_gram_cap")]
    pub gram_cap: usize,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_output")]
    pub output: PathBuf,
    #[serde(default = "default_workers")]
    pub workers: usize,
    pub dataset: DatasetConfig,
    pub kernel: KernelConfig,
    #[serde(default)]
    pub oja: OjaOverrides,
    #[serde(default)]
    pub diagnose: DiagnoseConfig,
}

fn default_delimiter() -> char {
    ','
}
fn default_alpha() -> f64 {
    0.7
}
fn default_one() -> f64 {
    1.0
}
fn default_probe() -> ProbeName {
    ProbeName::Fourier
}
fn default_diag_points() -> usize {
    2000
}
fn default_diag_draws() -> usize {
    500
}
fn default_learners() -> Vec<LearnerName> {
    vec![
        LearnerName::RfOja,
        LearnerName::RfErm,
        LearnerName::ExactErm,
        LearnerName::Nystrom,
    ]
}
fn default_nystrom_p() -> usize {
    100
}
fn default_checkpoints() -> Vec<usize> {
    vec![250, 500, 1000, 2000, 5000]
}
fn default_eval_size() -> usize {
    2000
}
fn default_eval_cap() -> usize {
    rfkpca_core::evaluate::DEFAULT_EVAL_CAP
}
fn default_gram_cap() -> usize {
    rfkpca_core::batchpca::DEFAULT_GRAM_CAP
}
fn default_seeds() -> Vec<u64> {
    (0..10).collect()
}
fn default_output() -> PathBuf {
    PathBuf::from("results.csv")
}
fn default_workers() -> usize {
    1
}

impl ExperimentConfig {
    pub fn train_size(&self) -> usize {
        self.train_size
            .unwrap_or_else(|| self.checkpoints.last().copied().unwrap_or(0))
    }

    pub fn has(&self, learner: LearnerName) -> bool {
        self.learners.contains(&learner)
    }

    /// Checks the cross-field invariants. Dataset-dependent checks (enough
    /// rows for the split) happen when the data is loaded.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.m == 0 {
            return Err(key_err("m", "must be at least 1"));
        }
        if self.k == 0 || self.k > self.m {
            return Err(key_err("k", format!("must lie in 1..={} (m)", self.m)));
        }
        if self.learners.is_empty() {
            return Err(key_err("learners", "must name at least one learner"));
        }
        for (i, l) in self.learners.iter().enumerate() {
            if self.learners[..i].contains(l) {
                return Err(key_err("learners", format!("{l:?} listed twice")));
            }
        }
        if self.checkpoints.is_empty() {
            return Err(key_err("checkpoints", "must not be empty"));
        }
        if self.checkpoints.windows(2).any(|w| w[1] <= w[0]) {
            return Err(key_err("checkpoints", "must be strictly increasing"));
        }
        let first = self.checkpoints[0];
        let last = *self.checkpoints.last().expect("non-empty");
        if first < self.k {
            return Err(key_err(
                "checkpoints",
                format!("first checkpoint must be at least k = {}", self.k),
            ));
        }
        if self.train_size() < last {
            return Err(key_err(
                "train_size",
                format!("must cover the last checkpoint ({last})"),
            ));
        }
        if self.has(LearnerName::Nystrom) && (self.nystrom_p < self.k || self.nystrom_p > first) {
            return Err(key_err(
                "nystrom_p",
                format!("must lie in k..=first checkpoint ({}..={first})", self.k),
            ));
        }
        if self.eval_size == 0 || self.eval_size > self.eval_cap {
            return Err(key_err(
                "eval_size",
                format!("must lie in 1..={} (eval_cap)", self.eval_cap),
            ));
        }
        if (self.has(LearnerName::ExactErm) || self.has(LearnerName::Nystrom))
            && last > self.gram_cap
        {
            return Err(key_err(
                "checkpoints",
                format!(
                    "Gram-based learners cannot exceed gram_cap = {}",
                    self.gram_cap
                ),
            ));
        }
        if self.seeds.is_empty() {
            return Err(key_err("seeds", "must not be empty"));
        }
        if self.workers == 0 {
            return Err(key_err("workers", "must be at least 1"));
        }
        match (self.kernel.sigma2, self.kernel.bandwidth) {
            (Some(_), Some(_)) | (None, None) => {
                return Err(key_err(
                    "kernel",
                    "give exactly one of `sigma2` and `bandwidth`",
                ))
            }
            (Some(s2), None) => {
                if self.kernel.family != KernelName::Rbf {
                    return Err(key_err(
                        "kernel.sigma2",
                        "only meaningful for the rbf family",
                    ));
                }
                if !(s2.is_finite() && s2 > 0.0) {
                    return Err(key_err("kernel.sigma2", "must be positive"));
                }
            }
            (None, Some(b)) => {
                if !(b.is_finite() && b > 0.0) {
                    return Err(key_err("kernel.bandwidth", "must be positive"));
                }
            }
        }
        if let DatasetConfig::Synthetic {
            d, n, alpha, top, ..
        } = self.dataset
        {
            if d == 0 || n == 0 {
                return Err(key_err("dataset", "synthetic `d` and `n` must be positive"));
            }
            if !(alpha > 0.0 && alpha <= 1.0) {
                return Err(key_err("dataset.alpha", "must lie in (0, 1]"));
            }
            if !(top.is_finite() && top > 0.0) {
                return Err(key_err("dataset.top", "must be positive"));
            }
        }
        if let DatasetConfig::Delimited { delimiter, .. } = self.dataset {
            if !delimiter.is_ascii() {
                return Err(key_err(
                    "dataset.delimiter",
                    "must be a single ASCII character",
                ));
            }
        }
        let d = &self.diagnose;
        if d.points < 2 || d.draws < 2 {
            return Err(key_err(
                "diagnose",
                "`points` and `draws` must be at least 2",
            ));
        }
        if d.m_budget == Some(0) || d.n == Some(0) {
            return Err(key_err("diagnose", "`m_budget` and `n` must be positive"));
        }
        if d.family == ProbeName::Indicator && d.classes.is_none() {
            return Err(key_err(
                "diagnose.classes",
                "required by the indicator family",
            ));
        }
        if d.family == ProbeName::SignedStar && d.alpha.is_none() {
            return Err(key_err(
                "diagnose.alpha",
                "required by the signed_star family",
            ));
        }
        Ok(())
    }

    /// Resolves relative dataset and output paths against `base`.
    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self.dataset {
            DatasetConfig::Idx { images, labels, .. } => {
                fix(images);
                if let Some(l) = labels {
                    fix(l);
                }
            }
            DatasetConfig::Delimited { path, .. } => fix(path),
            DatasetConfig::Synthetic { .. } => {}
        }
        fix(&mut self.output);
    }

    /// The configuration with every default filled in.
    pub fn effective_toml(&self) -> String {
        let mut full = self.clone();
        full.train_size = Some(self.train_size());
        full.diagnose.m_budget = Some(self.diagnose.m_budget.unwrap_or(self.m));
        full.diagnose.n = Some(self.diagnose.n.unwrap_or(self.train_size()));
        toml::to_string(&full).expect("config is always serializable")
    }
}

/// Parses and validates a configuration from TOML text. Paths are left as
/// written.
pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| named(text, &e))?;
    cfg.validate()?;
    Ok(cfg)
}

/// Reads, parses and validates a configuration file; relative paths are
/// taken relative to the file's directory.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut cfg = parse_config_str(&text)?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    cfg.resolve_paths(base);
    Ok(cfg)
}

/// Turns a deserialization error into one naming the offending key.
fn named(text: &str, err: &toml::de::Error) -> ConfigError {
    let msg = err.message().to_string();
    for marker in ["missing field `", "unknown field `"] {
        if let Some(rest) = msg.split(marker).nth(1) {
            if let Some(key) = rest.split('`').next() {
                let key = match table_at(text, err.span()) {
                    Some(t) if marker.starts_with("unknown") => format!("{t}.{key}"),
                    _ => key.to_string(),
                };
                return key_err(&key, msg);
            }
        }
    }
    if let Some(span) = err.span() {
        let start = text[..span.start].rfind('\n').map_or(0, |i| i + 1);
        let line = &text[start..];
        let line = line.lines().next().unwrap_or("");
        if let Some((key, _)) = line.split_once('=') {
            let key = key.trim();
            let key = match table_at(text, Some(span)) {
                Some(t) => format!("{t}.{key}"),
                None => key.to_string(),
            };
            return key_err(&key, msg);
        }
    }
    ConfigError::Syntax(err.to_string())
}

/// Name of the `[table]` header governing byte offset `span.start`.
fn table_at(text: &str, span: Option<std::ops::Range<usize>>) -> Option<String> {
    let upto = &text[..span?.start.min(text.len())];
    upto.lines().rev().find_map(|l| {
        let l = l.trim();
        (l.starts_with('[') && l.ends_with(']'))
            .then(|| l.trim_matches(|c| c == '[' || c == ']').to_string())
    })
}
