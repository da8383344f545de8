//! End-to-end runs: detection, line mapping, refactoring evidence,
//! filtering, and corpus benchmarking.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::detect::{detect, InterferenceReport};
use crate::evalkit::{
    empirical_pvalue, mcnemar_exact, metrics, simulate_baseline, BaselineKind, ConfusionMatrix, MetricSet,
};
use crate::filter::{classify, FilterOutcome};
use crate::linemap::{map_lines, LineMapConfig};
use crate::minilang::DEFAULT_STEP_LIMIT;
use crate::refdetect::{detect_refactorings, RefactoringIndex, RefactoringRecord, Source};
use crate::scenario::{load_fixture, ChangeSet, Fixture, MergeScenario, Side};
use crate::{Error, Result};

pub const DEFAULT_SEED: u64 = 20_240_601;
pub const DEFAULT_ITERATIONS: usize = 10_000;

#[derive(Debug, Clone)]
pub struct Config {
    pub sources: Vec<Source>,
    pub linemap: LineMapConfig,
    pub step_limit: u64,
    pub allow_impure: bool,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            sources: vec![Source::Builtin, Source::Fixture],
            linemap: LineMapConfig::default(),
            step_limit: DEFAULT_STEP_LIMIT,
            allow_impure: false,
        }
    }
}

/// Everything phase two produced for one scenario.
#[derive(Debug, Clone)]
pub struct Analysis {
    pub report: InterferenceReport,
    pub outcome: FilterOutcome,
    pub left: ChangeSet,
    pub right: ChangeSet,
    pub records_left: Vec<RefactoringRecord>,
    pub records_right: Vec<RefactoringRecord>,
}

/// Runs phase two over a given report.
pub fn filter_report(
    s: &MergeScenario,
    report: &InterferenceReport,
    fixture_file: Option<&Path>,
    cfg: &Config,
) -> Result<Analysis> {
    report.validate(s)?;
    cfg.linemap.validate()?;
    let left = map_lines(&s.changes_left, &s.left, &cfg.linemap)?;
    let right = map_lines(&s.changes_right, &s.right, &cfg.linemap)?;
    let records_left = detect_refactorings(s, Side::Left, &cfg.sources, fixture_file, cfg.step_limit)?;
    let records_right = detect_refactorings(s, Side::Right, &cfg.sources, fixture_file, cfg.step_limit)?;
    let idx_left = RefactoringIndex::build(Side::Left, &records_left, cfg.allow_impure);
    let idx_right = RefactoringIndex::build(Side::Right, &records_right, cfg.allow_impure);
    let outcome = classify(report, &left, &right, &idx_left, &idx_right);
    Ok(Analysis { report: report.clone(), outcome, left, right, records_left, records_right })
}

/// Both phases.
pub fn analyze(s: &MergeScenario, fixture_file: Option<&Path>, cfg: &Config) -> Result<Analysis> {
    let report = detect(s)?;
    filter_report(s, &report, fixture_file, cfg)
}

pub fn analyze_fixture(f: &Fixture, cfg: &Config) -> Result<Analysis> {
    analyze(&f.scenario, f.refactorings.as_deref(), cfg)
}

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub iterations: usize,
    pub seed: u64,
    /// Worker threads; `0` lets rayon decide.
    pub jobs: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig { iterations: DEFAULT_ITERATIONS, seed: DEFAULT_SEED, jobs: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BenchRow {
    pub scenario: String,
    pub interference: bool,
    pub sa: bool,
    pub reffilter: bool,
    pub reported: usize,
    pub kept: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variant {
    pub confusion: ConfusionMatrix,
    pub metrics: MetricSet,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McNemar {
    pub b: u64,
    pub c: u64,
    pub p_value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub kind: BaselineKind,
    pub p_pos: f64,
    pub seed: u64,
    pub iterations: usize,
    pub mean_f1: f64,
    pub mean_accuracy: f64,
    pub p_f1: f64,
    pub p_accuracy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub seed: u64,
    pub scenarios: Vec<BenchRow>,
    pub skipped: Vec<String>,
    pub sa: Variant,
    pub sa_reffilter: Variant,
    pub mcnemar_fp: McNemar,
    pub mcnemar_fn: McNemar,
    /// Random classifiers compared against the filtered pipeline.
    pub baselines: Vec<BaselineResult>,
}

fn fixture_dirs(corpus: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(corpus).map_err(|e| Error::io(corpus, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(corpus, e))?.path();
        if path.join("merge").is_dir() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

fn bench_row(dir: &Path, cfg: &Config) -> Result<Option<BenchRow>> {
    let fixture = load_fixture(dir)?;
    let Some(gt) = fixture.ground_truth.clone() else {
        log::warn!("{}: no ground truth, skipped", dir.display());
        return Ok(None);
    };
    let a = analyze_fixture(&fixture, cfg)?;
    Ok(Some(BenchRow {
        scenario: fixture.scenario.id.clone(),
        interference: gt.interference,
        sa: !a.report.is_empty(),
        reffilter: a.outcome.any_kept,
        reported: a.report.interferences.len(),
        kept: a.outcome.kept().count(),
    }))
}

fn discordance(rows: &[BenchRow], err_sa: impl Fn(&BenchRow) -> bool, err_rf: impl Fn(&BenchRow) -> bool) -> McNemar {
    let b = rows.iter().filter(|r| err_sa(r) && !err_rf(r)).count() as u64;
    let c = rows.iter().filter(|r| !err_sa(r) && err_rf(r)).count() as u64;
    McNemar { b, c, p_value: mcnemar_exact(b, c) }
}

fn run_in_pool<T: Send>(jobs: usize, f: impl FnOnce() -> T + Send) -> Result<T> {
    if jobs == 0 {
        return Ok(f());
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .map_err(|e| Error::Config(format!("cannot start {jobs} worker(s): {e}")))?;
    Ok(pool.install(f))
}

/// Scores detection alone and detection plus filtering across a corpus.
pub fn bench(corpus: &Path, cfg: &Config, bcfg: &BenchConfig) -> Result<BenchReport> {
    let dirs = fixture_dirs(corpus)?;
    if dirs.is_empty() {
        return Err(Error::Scenario(format!("{} contains no fixtures", corpus.display())));
    }
    let results: Vec<Result<Option<BenchRow>>> =
        run_in_pool(bcfg.jobs, || dirs.par_iter().map(|d| bench_row(d, cfg)).collect())?;
    let mut scenarios = Vec::new();
    let mut skipped = Vec::new();
    for (dir, r) in dirs.iter().zip(results) {
        match r? {
            Some(row) => scenarios.push(row),
            None => skipped.push(dir.display().to_string()),
        }
    }
    if scenarios.is_empty() {
        return Err(Error::Scenario(format!("no fixture in {} has ground truth", corpus.display())));
    }
    let mut sa = ConfusionMatrix::default();
    let mut rf = ConfusionMatrix::default();
    for row in &scenarios {
        sa.record(row.interference, row.sa);
        rf.record(row.interference, row.reffilter);
    }
    let sa_metrics = metrics(&sa)?;
    let rf_metrics = metrics(&rf)?;
    let mcnemar_fp = discordance(&scenarios, |r| r.sa && !r.interference, |r| r.reffilter && !r.interference);
    let mcnemar_fn = discordance(&scenarios, |r| !r.sa && r.interference, |r| !r.reffilter && r.interference);

    let labels: Vec<bool> = scenarios.iter().map(|r| r.interference).collect();
    let prevalence = labels.iter().filter(|&&l| l).count() as f64 / labels.len() as f64;
    let mut baselines = Vec::new();
    for (i, kind) in [BaselineKind::CoinFlip, BaselineKind::Calibrated].into_iter().enumerate() {
        let seed = bcfg.seed.wrapping_add(i as u64);
        let d = run_in_pool(bcfg.jobs, || simulate_baseline(kind, &labels, prevalence, bcfg.iterations, seed))??;
        baselines.push(BaselineResult {
            kind,
            p_pos: d.p_pos,
            seed,
            iterations: d.iterations(),
            mean_f1: d.mean_f1(),
            mean_accuracy: d.mean_accuracy(),
            p_f1: empirical_pvalue(&d.f1, rf_metrics.f1),
            p_accuracy: empirical_pvalue(&d.accuracy, rf_metrics.accuracy),
        });
    }
    Ok(BenchReport {
        seed: bcfg.seed,
        scenarios,
        skipped,
        sa: Variant { confusion: sa, metrics: sa_metrics },
        sa_reffilter: Variant { confusion: rf, metrics: rf_metrics },
        mcnemar_fp,
        mcnemar_fn,
        baselines,
    })
}
