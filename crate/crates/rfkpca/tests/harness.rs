#[path = "../../core/tests/oracle/mod.rs"]
mod oracle;

use std::process::Command;
use std::thread::sleep;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use oracle::{jacobi_eigen, rbf_gram};
use rfkpca::harness::{load_dataset, Evaluator, Stat, CSV_HEADER};
use rfkpca::{
    parse_config_str, prepare, run_experiment, write_csv, ExperimentConfig, HeldOut, RunSummary,
};
use rfkpca_core::{
    sample_feature_map, EvalSet, FeatureMap, GramModel, KernelSpec, Learner, StreamMode,
    StreamSource, SubspaceModel,
};

const BASE: &str = r#"
m = 20
k = 2
learners = ["rf_oja", "rf_erm"]
checkpoints = [50, 100, 200]
eval_size = 80
seeds = [3, 4]

[dataset]
kind = "synthetic"
d = 4
n = 400

[kernel]
family = "rbf"
sigma2 = 2.0
"#;

fn config(text: &str) -> ExperimentConfig {
    parse_config_str(text).unwrap()
}

fn run(cfg: &ExperimentConfig, eval: &dyn Evaluator) -> RunSummary {
    let data = load_dataset(cfg).unwrap();
    let prep = prepare(cfg, &data).unwrap();
    run_experiment(cfg, &prep, 0, eval)
}

#[test]
fn sweep_emits_one_row_per_cell_and_checkpoint() {
    let cfg = config(BASE);
    let s = run(&cfg, &HeldOut);
    assert!(s.failures.is_empty(), "{:?}", s.failures);
    assert_eq!(s.records.len(), 12);
    let keys: Vec<_> = s
        .records
        .iter()
        .map(|r| (r.learner, r.seed, r.n_seen))
        .collect();
    let mut want = Vec::new();
    for l in [Learner::RfOja, Learner::RfErm] {
        for seed in [3, 4] {
            for n in [50, 100, 200] {
                want.push((l, seed, n));
            }
        }
    }
    assert_eq!(keys, want);
    assert!(s
        .records
        .iter()
        .all(|r| r.m == 20 && r.k == 2 && r.objective.is_finite()));
    assert_eq!(s.aggregates.len(), 12);
}

#[test]
fn runs_are_deterministic_apart_from_wall_time() {
    let mut cfg = config(BASE);
    let a = run(&cfg, &HeldOut);
    cfg.workers = 2;
    let b = run(&cfg, &HeldOut);
    assert_eq!(a.records.len(), b.records.len());
    for (x, y) in a.records.iter().zip(&b.records) {
        assert_eq!((x.learner, x.seed, x.n_seen), (y.learner, y.seed, y.n_seen));
        assert_eq!(x.objective.to_bits(), y.objective.to_bits());
        assert_eq!(x.gram_deviation.to_bits(), y.gram_deviation.to_bits());
    }
}

#[test]
fn aggregates_match_a_recomputation() {
    let s = run(&config(BASE), &HeldOut);
    for a in &s.aggregates {
        let vals: Vec<f64> = s
            .records
            .iter()
            .filter(|r| r.learner == a.learner && r.n_seen == a.n_seen)
            .map(|r| r.objective)
            .collect();
        assert_eq!(a.seeds, vals.len());
        let c = vals.len() as f64;
        let mean = vals.iter().sum::<f64>() / c;
        let sd = (vals.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (c - 1.0)).sqrt();
        let want = match a.stat {
            Stat::Mean => mean,
            Stat::Stderr => sd / c.sqrt(),
        };
        assert!((a.objective - want).abs() <= 1e-12, "{a:?} vs {want}");
    }
}

/// Lifted objective of the RF-ERM span rebuilt from scratch: Jacobi on the
/// training covariance and on the held-out covariance, polar alignment, and
/// the oracle kernel matrix.
fn oracle_rf_erm_objective(cfg: &ExperimentConfig, seed: u64, n: usize) -> f64 {
    let data = load_dataset(cfg).unwrap();
    let prep = prepare(cfg, &data).unwrap();
    let map = sample_feature_map(prep.spec, cfg.m, seed).unwrap();
    let order: Vec<usize> = StreamSource::new(&prep.train, seed, StreamMode::SinglePass).collect();
    let feats = |rows: &mut dyn Iterator<Item = &[f64]>| {
        let cols: Vec<_> = rows
            .map(|x| nalgebra::DVector::from_vec(map.transform(x).unwrap()))
            .collect();
        DMatrix::from_columns(&cols)
    };
    let z = feats(&mut order[..n].iter().map(|&i| prep.train.row(i)));
    let (_, uvecs) = jacobi_eigen(&(&z * z.transpose() / n as f64));
    let u = uvecs.columns(0, cfg.k).into_owned();
    let ne = prep.eval.len();
    let ze = feats(&mut (0..ne).map(|i| prep.eval.row(i)));
    let ce = &ze * ze.transpose() / ne as f64;
    let (_, evecs) = jacobi_eigen(&ce);
    let svd = (u.transpose() * evecs.columns(0, cfg.k)).svd(true, true);
    let aligned = &u * (svd.u.unwrap() * svd.v_t.unwrap());
    let mut f = DMatrix::zeros(ne, cfg.k);
    for i in 0..cfg.k {
        let col = aligned.column(i);
        let s = col.dot(&(&ce * col));
        f.set_column(i, &(ze.transpose() * col / s.sqrt()));
    }
    let kmat = rbf_gram(prep.eval.as_rows(), prep.eval.dim(), 2.0);
    (f.transpose() * kmat * &f).trace() / (ne * ne) as f64
}

#[test]
fn rf_erm_objective_matches_an_independent_rebuild() {
    let cfg = config(BASE);
    let s = run(&cfg, &HeldOut);
    for r in s.records.iter().filter(|r| r.learner == Learner::RfErm) {
        let want = oracle_rf_erm_objective(&cfg, r.seed, r.n_seen);
        assert!(
            (r.objective - want).abs() <= 1e-8 * want,
            "seed {} n {}: {} vs {want}",
            r.seed,
            r.n_seen,
            r.objective
        );
    }
}

struct Slow;

impl Evaluator for Slow {
    fn eval_set(
        &self,
        spec: &KernelSpec,
        map: &FeatureMap,
        points: &[f64],
        kernel: &DMatrix<f64>,
    ) -> rfkpca_core::Result<EvalSet> {
        sleep(Duration::from_millis(100));
        HeldOut.eval_set(spec, map, points, kernel)
    }
    fn subspace(&self, model: &SubspaceModel, eval: &EvalSet) -> rfkpca_core::Result<(f64, f64)> {
        sleep(Duration::from_millis(100));
        HeldOut.subspace(model, eval)
    }
    fn gram(&self, model: &GramModel, cross: &DMatrix<f64>) -> rfkpca_core::Result<(f64, f64)> {
        sleep(Duration::from_millis(100));
        HeldOut.gram(model, cross)
    }
}

#[test]
fn wall_time_excludes_evaluation() {
    let text = BASE
        .replace(
            r#"["rf_oja", "rf_erm"]"#,
            r#"["rf_oja", "rf_erm", "exact_erm", "nystrom"]"#,
        )
        .replace("k = 2", "k = 2\nnystrom_p = 20")
        .replace("seeds = [3, 4]", "seeds = [3]");
    let cfg = config(&text);
    let t = Instant::now();
    let s = run(&cfg, &Slow);
    assert!(t.elapsed() >= Duration::from_millis(1200));
    assert!(s.failures.is_empty(), "{:?}", s.failures);
    for r in &s.records {
        assert!(
            r.wall_time_s < 0.09,
            "{:?} {} includes evaluation: {}",
            r.learner,
            r.n_seen,
            r.wall_time_s
        );
    }
    for w in s
        .records
        .windows(2)
        .filter(|w| w[0].learner == w[1].learner)
    {
        assert!(w[1].wall_time_s >= w[0].wall_time_s);
    }
}

struct GramFails;

impl Evaluator for GramFails {
    fn gram(&self, _: &GramModel, _: &DMatrix<f64>) -> rfkpca_core::Result<(f64, f64)> {
        Err(rfkpca_core::Error::Degenerate("injected".into()))
    }
}

#[test]
fn a_failing_cell_does_not_stop_the_sweep() {
    let text = BASE.replace(r#"["rf_oja", "rf_erm"]"#, r#"["exact_erm", "rf_erm"]"#);
    let s = run(&config(&text), &GramFails);
    assert_eq!(s.failures.len(), 2);
    assert!(s
        .failures
        .iter()
        .all(|f| f.learner == Learner::ExactErm && f.error.contains("injected")));
    assert_eq!(s.records.len(), 6);
    assert!(s.records.iter().all(|r| r.learner == Learner::RfErm));
}

#[test]
fn csv_has_the_fixed_header_then_details_then_aggregates() {
    let cfg = config(BASE);
    let s = run(&cfg, &HeldOut);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.csv");
    write_csv(&path, &s).unwrap();
    let mut rd = csv::Reader::from_path(&path).unwrap();
    assert_eq!(
        rd.headers().unwrap().iter().collect::<Vec<_>>(),
        CSV_HEADER.to_vec()
    );
    let rows: Vec<csv::StringRecord> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 24);
    assert_eq!(&rows[0][0], "rf_oja");
    assert_eq!(&rows[11][1], "4");
    assert_eq!(&rows[12][1], "mean");
    assert_eq!(&rows[13][1], "stderr");
    let obj: f64 = rows[5][5].parse().unwrap();
    assert_eq!(obj.to_bits(), s.records[5].objective.to_bits());
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_rfkpca"))
        .args(args)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

#[test]
fn cli_run_writes_results_and_the_effective_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, BASE.replace("[3, 4]", "[0]")).unwrap();
    let out = dir.path().join("res/run.csv");
    let o = cli(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().next().unwrap(), CSV_HEADER.join(","));
    assert_eq!(text.lines().count(), 1 + 6 + 12);
    let dump = std::fs::read_to_string(dir.path().join("res/run.effective.toml")).unwrap();
    assert!(dump.contains("train_size = 200"));
}

#[test]
fn cli_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, BASE.replace("[50, 100, 200]", "[100, 50]")).unwrap();
    let o = cli(&["validate-config", "--config", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("checkpoints"));

    let missing = dir.path().join("missing.toml");
    let o = cli(&["run", "--config", missing.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));

    let partial = dir.path().join("partial.toml");
    std::fs::write(
        &partial,
        format!("{}\n[oja]\neta_max = -1.0\n", BASE.replace("[3, 4]", "[0]")),
    )
    .unwrap();
    let out = dir.path().join("p.csv");
    let o = cli(&[
        "run",
        "--config",
        partial.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    let text = std::fs::read_to_string(&out).unwrap();
    assert!(text.lines().skip(1).all(|l| l.starts_with("rf_erm")));

    let good = dir.path().join("good.toml");
    std::fs::write(&good, BASE).unwrap();
    let o = cli(&["validate-config", "--config", good.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("eval_cap"));
}

#[test]
fn cli_diagnose_reports_kappa() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(
        &cfg,
        format!("{BASE}\n[diagnose]\npoints = 100\ndraws = 60\n"),
    )
    .unwrap();
    let o = cli(&["diagnose", "--config", cfg.to_str().unwrap()]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let text = String::from_utf8_lossy(&o.stdout);
    for key in ["B_k", "kappa", "decay ratio", "m* (n = 200)"] {
        assert!(text.contains(key), "{key} missing:\n{text}");
    }
}
