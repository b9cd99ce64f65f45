//! Seeded experiment sweeps over the four learners.
//!
//! One worker handles one seed at a time: it samples the feature map, builds
//! the evaluation set, streams the training rows in a seeded order and, at
//! every checkpoint, snapshots each learner and evaluates it. Evaluation and
//! evaluation-set construction are kept out of the recorded wall time.
//! Finished rows go through a channel to the calling thread, which sorts and
//! writes them.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::mpsc;
use std::time::Instant;

use log::{info, warn};
use rfkpca_core::batchpca::{exact_erm_capped, nystrom_erm, rf_erm};
use rfkpca_core::data::split_indices;
use rfkpca_core::evaluate::{erm_objective_with_cross, gram_deviation_cross};
use rfkpca_core::kernelmap::kernel_matrix;
use rfkpca_core::{
    fourth_moment_from_features, gram_deviation, lifted_objective, probe_features,
    sample_feature_map, synth_gaussian_spectrum, CovarianceAccumulator, DMatrix, Dataset, EvalSet,
    FeatureMap, GramModel, KernelSpec, Learner, OjaLearner, SpectrumDiagnostics, StreamMode,
    StreamSource, SubspaceModel,
};

use crate::config::{ConfigError, DatasetConfig, ExperimentConfig, LearnerName};
use crate::io::{load_delimited, load_idx, FormatError};

pub const CSV_HEADER: [&str; 8] = [
    "learner",
    "seed",
    "n_seen",
    "m",
    "k",
    "objective",
    "gram_deviation",
    "wall_time_s",
];

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Core(#[from] rfkpca_core::Error),
    #[error("{}: {source}", path.display())]
    Output {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

/// One detail row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub learner: Learner,
    pub seed: u64,
    pub n_seen: usize,
    pub m: usize,
    pub k: usize,
    pub objective: f64,
    pub gram_deviation: f64,
    /// Cumulative training time up to this checkpoint.
    pub wall_time_s: f64,
}

/// Mean or standard error over seeds at one checkpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct AggregateRecord {
    pub learner: Learner,
    pub stat: Stat,
    pub n_seen: usize,
    pub m: usize,
    pub k: usize,
    pub seeds: usize,
    pub objective: f64,
    pub gram_deviation: f64,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stat {
    Mean,
    Stderr,
}

impl Stat {
    pub fn label(self) -> &'static str {
        match self {
            Stat::Mean => "mean",
            Stat::Stderr => "stderr",
        }
    }
}

#[derive(Debug, Clone)]
pub struct CellFailure {
    pub learner: Learner,
    pub seed: u64,
    pub error: String,
}

#[derive(Debug, Clone, Default)]
pub struct RunSummary {
    pub records: Vec<RunRecord>,
    pub aggregates: Vec<AggregateRecord>,
    pub failures: Vec<CellFailure>,
}

/// Scores a model on held-out data. Swappable so the timing of evaluation
/// can be checked against the recorded wall time.
pub trait Evaluator: Sync {
    fn eval_set(
        &self,
        spec: &KernelSpec,
        map: &FeatureMap,
        points: &[f64],
        kernel: &DMatrix<f64>,
    ) -> rfkpca_core::Result<EvalSet> {
        EvalSet::with_kernel(spec, map, points, kernel.clone())
    }

    /// `(objective, gram_deviation)` of a feature-space model.
    fn subspace(&self, model: &SubspaceModel, eval: &EvalSet) -> rfkpca_core::Result<(f64, f64)> {
        Ok((
            lifted_objective(model, eval)?.value,
            gram_deviation(model, eval)?,
        ))
    }

    /// `(objective, gram_deviation)` of a Gram-based model given the
    /// evaluation-by-training cross kernel.
    fn gram(&self, model: &GramModel, cross: &DMatrix<f64>) -> rfkpca_core::Result<(f64, f64)> {
        Ok((
            erm_objective_with_cross(model, cross)?.value,
            gram_deviation_cross(model, cross)?,
        ))
    }
}

/// The standard evaluator.
#[derive(Debug, Clone, Copy, Default)]
pub struct HeldOut;

impl Evaluator for HeldOut {}

/// Loads the dataset named by the configuration.
pub fn load_dataset(cfg: &ExperimentConfig) -> Result<Dataset, HarnessError> {
    let ds = match &cfg.dataset {
        DatasetConfig::Idx {
            images,
            labels,
            limit,
        } => {
            let (ds, _) = load_idx(images, labels.as_deref())?;
            truncate(ds, *limit)?
        }
        DatasetConfig::Delimited {
            path,
            delimiter,
            header,
            limit,
        } => truncate(load_delimited(path, *delimiter as u8, *header)?, *limit)?,
        DatasetConfig::Synthetic {
            d,
            n,
            alpha,
            top,
            seed,
        } => {
            let spectrum: Vec<f64> = (0..*d).map(|j| top * alpha.powi(j as i32)).collect();
            synth_gaussian_spectrum(*d, *n, &spectrum, *seed)?.dataset
        }
    };
    Ok(ds)
}

fn truncate(ds: Dataset, limit: Option<usize>) -> Result<Dataset, HarnessError> {
    match limit {
        Some(l) if l < ds.len() => {
            let idx: Vec<usize> = (0..l).collect();
            let name = ds.name.clone();
            Ok(ds.select(&idx, name)?)
        }
        _ => Ok(ds),
    }
}

/// Training pool, evaluation points and their kernel matrix, shared by every
/// seed.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub spec: KernelSpec,
    pub train: Dataset,
    pub eval: Dataset,
    pub eval_kernel: DMatrix<f64>,
}

pub fn prepare(cfg: &ExperimentConfig, dataset: &Dataset) -> Result<Prepared, HarnessError> {
    let spec = cfg.kernel.spec(dataset.dim())?;
    let (train, eval) = split_train_eval(cfg, dataset)?;
    let eval_kernel = rfkpca_core::kernelmap::kernel_gram(&spec, eval.as_rows())?;
    Ok(Prepared {
        spec,
        train,
        eval,
        eval_kernel,
    })
}

fn split_train_eval(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
) -> Result<(Dataset, Dataset), HarnessError> {
    let (ntr, ne) = (cfg.train_size(), cfg.eval_size);
    if ntr + ne > dataset.len() {
        return Err(ConfigError::Key {
            key: "train_size".into(),
            msg: format!(
                "train_size + eval_size = {} exceeds the {} rows of the dataset",
                ntr + ne,
                dataset.len()
            ),
        }
        .into());
    }
    let [tr, _, ev] = split_indices(dataset.len(), [ntr, 0, ne], cfg.split_seed)?;
    let name = dataset.name.clone();
    Ok((
        dataset.select(&tr, format!("{name}/train"))?,
        dataset.select(&ev, format!("{name}/eval"))?,
    ))
}

/// Runs every (learner, seed) cell. Seeds are shifted by `seed_offset`.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    seed_offset: u64,
    evaluator: &dyn Evaluator,
) -> RunSummary {
    let seeds: Vec<u64> = cfg.seeds.iter().map(|s| s + seed_offset).collect();
    let next = AtomicUsize::new(0);
    let (tx, rx) = mpsc::channel();
    let workers = cfg.workers.min(seeds.len()).max(1);
    let mut summary = RunSummary::default();
    std::thread::scope(|scope| {
        for _ in 0..workers {
            let tx = tx.clone();
            let (next, seeds) = (&next, &seeds);
            scope.spawn(move || loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(&seed) = seeds.get(i) else { break };
                for cell in run_seed(cfg, prep, seed, evaluator) {
                    if tx.send(cell).is_err() {
                        return;
                    }
                }
            });
        }
        drop(tx);
        for cell in rx {
            match cell {
                Ok(rows) => summary.records.extend(rows),
                Err(f) => {
                    warn!("{} seed {} failed: {}", f.learner.name(), f.seed, f.error);
                    summary.failures.push(f);
                }
            }
        }
    });
    let rank = |l: Learner| cfg.learners.iter().position(|x| x.learner() == l);
    summary
        .records
        .sort_by_key(|r| (rank(r.learner), r.seed, r.n_seen));
    summary.failures.sort_by_key(|f| (rank(f.learner), f.seed));
    summary.aggregates = aggregate(&summary.records, &cfg.learners, &cfg.checkpoints);
    summary
}

type Cell = Result<Vec<RunRecord>, CellFailure>;

fn run_seed(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    seed: u64,
    evaluator: &dyn Evaluator,
) -> Vec<Cell> {
    let d = prep.train.dim();
    let ntr = cfg.train_size();
    let order: Vec<usize> = StreamSource::new(&prep.train, seed, StreamMode::SinglePass).collect();
    let mut rows = Vec::with_capacity(ntr * d);
    for &i in &order[..ntr] {
        rows.extend_from_slice(prep.train.row(i));
    }
    info!(
        "seed {seed}: {} learners, {} training rows",
        cfg.learners.len(),
        ntr
    );

    let fail = |learner: Learner, e: &dyn std::fmt::Display| CellFailure {
        learner,
        seed,
        error: e.to_string(),
    };
    let uses_features = cfg.learners.iter().any(|l| l.learner().uses_features());
    let feature_side = if uses_features {
        sample_feature_map(prep.spec, cfg.m, seed)
            .and_then(|map| {
                let eval =
                    evaluator.eval_set(&prep.spec, &map, prep.eval.as_rows(), &prep.eval_kernel)?;
                Ok((map, eval))
            })
            .map_err(|e| e.to_string())
    } else {
        Err(String::new())
    };
    let gram_side = if cfg.learners.iter().any(|l| !l.learner().uses_features()) {
        kernel_matrix(&prep.spec, prep.eval.as_rows(), &rows).map_err(|e| e.to_string())
    } else {
        Err(String::new())
    };

    cfg.learners
        .iter()
        .map(|&name| {
            let learner = name.learner();
            let out = if learner.uses_features() {
                match &feature_side {
                    Ok((map, eval)) => run_features(cfg, name, seed, map, eval, &rows, evaluator),
                    Err(e) => Err(e.clone()),
                }
            } else {
                match &gram_side {
                    Ok(cross) => run_gram(cfg, prep, name, seed, cross, &rows, evaluator),
                    Err(e) => Err(e.clone()),
                }
            };
            out.map_err(|e| fail(learner, &e))
        })
        .collect()
}

fn record(
    cfg: &ExperimentConfig,
    learner: Learner,
    seed: u64,
    n: usize,
    scores: (f64, f64),
    wall: f64,
) -> RunRecord {
    RunRecord {
        learner,
        seed,
        n_seen: n,
        m: cfg.m,
        k: cfg.k,
        objective: scores.0,
        gram_deviation: scores.1,
        wall_time_s: wall,
    }
}

fn run_features(
    cfg: &ExperimentConfig,
    name: LearnerName,
    seed: u64,
    map: &FeatureMap,
    eval: &EvalSet,
    rows: &[f64],
    evaluator: &dyn Evaluator,
) -> Result<Vec<RunRecord>, String> {
    let d = map.input_dim();
    let learner = name.learner();
    let mut out = Vec::with_capacity(cfg.checkpoints.len());
    let mut wall = 0.0;
    let mut prev = 0;
    let s = |e: rfkpca_core::Error| e.to_string();
    match name {
        LearnerName::RfOja => {
            let opts = cfg.oja.options(cfg.k, seed, cfg.train_size());
            let mut oja = OjaLearner::new(opts, cfg.m).map_err(s)?;
            for &n in &cfg.checkpoints {
                let t = Instant::now();
                let z = map.transform_rows(&rows[prev * d..n * d]).map_err(s)?;
                for col in z.column_iter() {
                    oja.push(col.as_slice()).map_err(s)?;
                }
                let model = oja.snapshot().map_err(s)?;
                wall += t.elapsed().as_secs_f64();
                if model.meta.incomplete {
                    info!("rf_oja seed {seed}: checkpoint {n} is still in warm-up");
                }
                out.push(record(
                    cfg,
                    learner,
                    seed,
                    n,
                    evaluator.subspace(&model, eval).map_err(s)?,
                    wall,
                ));
                prev = n;
            }
        }
        LearnerName::RfErm => {
            let mut acc = CovarianceAccumulator::new(cfg.m);
            for &n in &cfg.checkpoints {
                let t = Instant::now();
                let z = map.transform_rows(&rows[prev * d..n * d]).map_err(s)?;
                acc.accumulate_batch(&z).map_err(s)?;
                let model = rf_erm(&acc, cfg.k, seed).map_err(s)?;
                wall += t.elapsed().as_secs_f64();
                out.push(record(
                    cfg,
                    learner,
                    seed,
                    n,
                    evaluator.subspace(&model, eval).map_err(s)?,
                    wall,
                ));
                prev = n;
            }
        }
        _ => unreachable!("feature learners only"),
    }
    Ok(out)
}

fn run_gram(
    cfg: &ExperimentConfig,
    prep: &Prepared,
    name: LearnerName,
    seed: u64,
    cross: &DMatrix<f64>,
    rows: &[f64],
    evaluator: &dyn Evaluator,
) -> Result<Vec<RunRecord>, String> {
    let d = prep.train.dim();
    let learner = name.learner();
    let mut out = Vec::with_capacity(cfg.checkpoints.len());
    let mut wall = 0.0;
    let s = |e: rfkpca_core::Error| e.to_string();
    for &n in &cfg.checkpoints {
        let prefix = &rows[..n * d];
        let t = Instant::now();
        let model = match name {
            LearnerName::ExactErm => exact_erm_capped(&prep.spec, prefix, cfg.k, cfg.gram_cap),
            LearnerName::Nystrom => nystrom_erm(&prep.spec, prefix, cfg.nystrom_p, cfg.k, seed),
            _ => unreachable!("Gram learners only"),
        }
        .map_err(s)?;
        wall += t.elapsed().as_secs_f64();
        out.push(record(
            cfg,
            learner,
            seed,
            n,
            evaluator.gram(&model, cross).map_err(s)?,
            wall,
        ));
    }
    Ok(out)
}

/// Per-(learner, checkpoint) mean and standard error over seeds. The
/// standard error is `sd/√count` with the `count − 1` variance; it is 0 for a
/// single seed.
pub fn aggregate(
    records: &[RunRecord],
    learners: &[LearnerName],
    checkpoints: &[usize],
) -> Vec<AggregateRecord> {
    let mut out = Vec::new();
    for l in learners {
        let learner = l.learner();
        for &n in checkpoints {
            let rows: Vec<&RunRecord> = records
                .iter()
                .filter(|r| r.learner == learner && r.n_seen == n)
                .collect();
            if rows.is_empty() {
                continue;
            }
            let stats = |f: &dyn Fn(&RunRecord) -> f64| {
                let c = rows.len() as f64;
                let mean = rows.iter().map(|r| f(r)).sum::<f64>() / c;
                let se = if rows.len() > 1 {
                    let var = rows.iter().map(|r| (f(r) - mean).powi(2)).sum::<f64>() / (c - 1.0);
                    (var / c).sqrt()
                } else {
                    0.0
                };
                (mean, se)
            };
            let obj = stats(&|r| r.objective);
            let dev = stats(&|r| r.gram_deviation);
            let wall = stats(&|r| r.wall_time_s);
            for (stat, pick) in [(Stat::Mean, 0usize), (Stat::Stderr, 1)] {
                let get = |p: (f64, f64)| if pick == 0 { p.0 } else { p.1 };
                out.push(AggregateRecord {
                    learner,
                    stat,
                    n_seen: n,
                    m: rows[0].m,
                    k: rows[0].k,
                    seeds: rows.len(),
                    objective: get(obj),
                    gram_deviation: get(dev),
                    wall_time_s: get(wall),
                });
            }
        }
    }
    out
}

/// Writes detail rows followed by aggregate rows (seed column `mean` or
/// `stderr`).
pub fn write_csv(path: &Path, summary: &RunSummary) -> Result<(), HarnessError> {
    let wrap = |source: csv::Error| HarnessError::Output {
        path: path.to_path_buf(),
        source,
    };
    let mut w = csv::Writer::from_path(path).map_err(wrap)?;
    w.write_record(CSV_HEADER).map_err(wrap)?;
    for r in &summary.records {
        w.write_record([
            r.learner.name().to_string(),
            r.seed.to_string(),
            r.n_seen.to_string(),
            r.m.to_string(),
            r.k.to_string(),
            r.objective.to_string(),
            r.gram_deviation.to_string(),
            r.wall_time_s.to_string(),
        ])
        .map_err(wrap)?;
    }
    for a in &summary.aggregates {
        w.write_record([
            a.learner.name().to_string(),
            a.stat.label().to_string(),
            a.n_seen.to_string(),
            a.m.to_string(),
            a.k.to_string(),
            a.objective.to_string(),
            a.gram_deviation.to_string(),
            a.wall_time_s.to_string(),
        ])
        .map_err(wrap)?;
    }
    w.flush().map_err(|e| wrap(e.into()))?;
    Ok(())
}

/// Path of the effective-config dump written next to `output`.
pub fn effective_config_path(output: &Path) -> PathBuf {
    let stem = output
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "results".into());
    output.with_file_name(format!("{stem}.effective.toml"))
}

/// Output of [`diagnose`].
#[derive(Debug, Clone)]
pub struct DiagnoseReport {
    pub diagnostics: SpectrumDiagnostics,
    pub points: usize,
    pub draws: usize,
    /// Sample size the feature budget is solved for.
    pub n: usize,
    /// Smallest `m` with `24·κ(B_k, k, m) ≤ √(k/n)`, searched up to
    /// [`M_STAR_LIMIT`].
    pub m_star: Option<usize>,
}

pub const M_STAR_LIMIT: usize = 100_000_000;

/// Fourth-moment diagnostics on the first `diagnose.points` training rows.
pub fn diagnose(cfg: &ExperimentConfig, prep: &Prepared) -> Result<DiagnoseReport, HarnessError> {
    let dc = &cfg.diagnose;
    let points = dc.points.min(prep.train.len());
    let rows = prep.train.rows(0..points);
    let family = dc.probe(prep.spec)?;
    let values = probe_features(&family, rows, prep.train.dim(), dc.draws, dc.seed)?;
    let budget = dc.m_budget.unwrap_or(cfg.m);
    let diagnostics = fourth_moment_from_features(&values, cfg.k, budget)?;
    let n = dc.n.unwrap_or(cfg.train_size());
    let target = 24f64.recip() * (cfg.k as f64 / n as f64).sqrt();
    let m_star = diagnostics.feature_budget_for(target, M_STAR_LIMIT);
    Ok(DiagnoseReport {
        diagnostics,
        points,
        draws: dc.draws,
        n,
        m_star,
    })
}

impl DiagnoseReport {
    /// Plain-text report: summary lines, then the eigenvalue table.
    pub fn render(&self, max_rows: usize) -> String {
        use std::fmt::Write;
        let d = &self.diagnostics;
        let mut s = String::new();
        let opt =
            |v: Option<f64>| v.map_or_else(|| "unavailable".to_string(), |x| format!("{x:.6e}"));
        let _ = writeln!(s, "sample points N      {}", self.points);
        let _ = writeln!(s, "feature draws M      {}", self.draws);
        let _ = writeln!(s, "k                    {}", d.k);
        let _ = writeln!(s, "sqrt E<z,z'>^4       {:.6e}", d.fourth_moment_root);
        let _ = writeln!(s, "B_k                  {}", opt(d.b_k));
        let _ = writeln!(s, "kappa (m = {:<8})  {}", d.m_budget, opt(d.kappa));
        let _ = writeln!(
            s,
            "argmin h             {}",
            d.argmin_h
                .map_or_else(|| "unavailable".into(), |h| h.to_string())
        );
        let ratios = &d.decay_ratios;
        if ratios.is_empty() {
            let _ = writeln!(
                s,
                "decay ratio          none (fewer than two non-zero eigenvalues)"
            );
        } else {
            let lead = &ratios[..ratios.len().min(5)];
            let mut sorted = ratios.clone();
            sorted.sort_by(f64::total_cmp);
            let _ = writeln!(
                s,
                "decay ratio          leading {:.4}, median {:.4}, first {:?}",
                ratios[0],
                sorted[sorted.len() / 2],
                lead.iter()
                    .map(|r| (r * 1e4).round() / 1e4)
                    .collect::<Vec<_>>()
            );
        }
        match (d.b_k, self.m_star) {
            (None, _) => {
                let _ = writeln!(
                    s,
                    "m* (n = {})         unavailable: the L2 eigengap at k is below threshold",
                    self.n
                );
            }
            (Some(_), None) => {
                let _ = writeln!(s, "m* (n = {})         > {M_STAR_LIMIT}", self.n);
            }
            (Some(_), Some(m)) => {
                let _ = writeln!(s, "m* (n = {})         {m}", self.n);
            }
        }
        let _ = writeln!(s, "\n j  lambda_j(C')        lambda_j(L2)");
        for j in 0..max_rows.min(d.cprime_eigenvalues.len()) {
            let _ = writeln!(
                s,
                "{:>2}  {:<18.6e}  {:.6e}",
                j + 1,
                d.cprime_eigenvalues[j],
                d.l2_eigenvalues.get(j).copied().unwrap_or(0.0)
            );
        }
        s
    }
}
