use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use refaware_core::detect::{detect, InterferenceReport, PiKind, PotentialInterference};
use refaware_core::evalkit::{empirical_pvalue, mcnemar_exact, metrics, simulate_baseline, BaselineKind, ConfusionMatrix};
use refaware_core::filter::classify;
use refaware_core::linemap::{jaro_winkler_default, map_lines, LineMapConfig};
use refaware_core::minilang::{execute, DEFAULT_STEP_LIMIT};
use refaware_core::oracle::{interferes, VarClass};
use refaware_core::pipeline::{analyze, bench, BenchConfig, Config};
use refaware_core::refdetect::{LineRange, RefactoringIndex, RefactoringRecord, Source};
use refaware_core::scenario::{load_fixture, ChangeEntry, ChangeSet, LineRef, Side, VersionKind};
use refaware_core::synth::Generator;

const SEED: u64 = 20_240_601;

fn corpus() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../corpus")
}

fn fig1() -> PathBuf {
    corpus().join("refactor-fp-order-service")
}

fn refaware(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_refaware")).args(args).output().expect("binary runs")
}

type Outcome = Result<String, String>;
type Criterion = Box<dyn Fn() -> Outcome>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

fn metric_reproduction() -> Outcome {
    let start = Instant::now();
    let rows = [((15, 32, 13, 39), [0.319, 0.536, 0.545, 0.400]), ((14, 22, 14, 49), [0.389, 0.500, 0.636, 0.438])];
    let mut worst: f64 = 0.0;
    for ((tp, fp, fn_, tn), want) in rows {
        let m = metrics(&ConfusionMatrix::new(tp, fp, fn_, tn)).map_err(|e| e.to_string())?;
        for (got, want) in [m.precision, m.recall, m.accuracy, m.f1].into_iter().zip(want) {
            worst = worst.max((got - want).abs());
        }
    }
    let took = start.elapsed();
    check(worst <= 0.001 && took < Duration::from_secs(1), format!("max deviation {worst:.5}, {took:?}"))
}

fn mcnemar_reproduction() -> Outcome {
    let p = mcnemar_exact(10, 0);
    check(close(p, 0.001953125, 1e-6), format!("p = {p}"))
}

fn monte_carlo_reproduction() -> Outcome {
    let labels: Vec<bool> = (0..99).map(|i| i < 28).collect();
    let p_pos = 28.0 / 99.0;
    let mut inside = 0;
    let mut ps = Vec::new();
    let mut slowest = Duration::ZERO;
    for k in 0..10u64 {
        let start = Instant::now();
        let d = simulate_baseline(BaselineKind::Calibrated, &labels, p_pos, 10_000, SEED + k).map_err(|e| e.to_string())?;
        let p = empirical_pvalue(&d.f1, 0.438);
        slowest = slowest.max(start.elapsed());
        if (0.012..=0.032).contains(&p) {
            inside += 1;
        }
        ps.push(format!("{p:.4}"));
    }
    check(inside >= 9 && slowest < Duration::from_secs(5), format!("{inside}/10 seeds in range [{}], slowest {slowest:?}", ps.join(" ")))
}

fn worked_example() -> Outcome {
    let dir = fig1();
    let f = load_fixture(&dir).map_err(|e| e.to_string())?;
    let report = detect(&f.scenario).map_err(|e| e.to_string())?;
    let shape = report.interferences.len() == 1
        && report.interferences[0].kind == PiKind::Dataflow
        && report.interferences[0].members.len() == 2;
    let with = analyze(&f.scenario, None, &Config { sources: vec![Source::Builtin], ..Config::default() })
        .map_err(|e| e.to_string())?;
    let without = analyze(&f.scenario, None, &Config { sources: vec![], ..Config::default() }).map_err(|e| e.to_string())?;
    let d = dir.to_str().unwrap();
    let on = refaware(&["analyze", d, "--sources", "builtin"]).status.code();
    let off = refaware(&["analyze", d, "--sources", "none"]).status.code();
    check(
        shape && !with.outcome.any_kept && without.outcome.any_kept && on == Some(0) && off == Some(1),
        format!(
            "{} PI(s) {:?}; builtin: discarded={}, exit {:?}; disabled: kept={}, exit {:?}",
            report.interferences.len(),
            report.interferences.first().map(|p| p.members.iter().map(|m| m.line).collect::<Vec<_>>()),
            !with.outcome.any_kept,
            on,
            without.outcome.any_kept,
            off
        ),
    )
}

/// The three interference predicates spelled out directly.
fn expected_class(b: Option<i64>, l: Option<i64>, r: Option<i64>, m: Option<i64>) -> VarClass {
    let divergent = l != b && r != b && l != r;
    let lost = [l, r].iter().any(|&side| side != b && m != side);
    let emergent = l == b && r == b && m != b;
    match (divergent, lost, emergent) {
        (true, _, _) => VarClass::TypeI,
        (false, true, _) => VarClass::TypeII,
        (false, false, true) => VarClass::TypeIII,
        _ => VarClass::None,
    }
}

fn oracle_equivalence() -> Outcome {
    let mut g = Generator::new(SEED);
    let mut mismatches = 0;
    let mut oversized = 0;
    let mut vars = 0;
    for i in 0..500 {
        let s = g.random_scenario(&format!("r{i}"));
        let result = interferes(&s, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
        let mut finals = Vec::new();
        let mut names = std::collections::BTreeSet::new();
        for kind in VersionKind::ALL {
            let p = s.parse_version(kind).map_err(|e| e.to_string())?;
            if p.functions.len() > 3 || p.globals.len() > 3 {
                oversized += 1;
            }
            names.extend(p.globals.iter().map(|d| d.name.clone()));
            finals.push(execute(&p, DEFAULT_STEP_LIMIT).final_state.unwrap_or_default());
        }
        for x in &names {
            let v = |k: usize| finals[k].get(x).copied();
            vars += 1;
            if result.classes.get(x) != Some(&expected_class(v(0), v(1), v(2), v(3))) {
                mismatches += 1;
            }
        }
    }
    check(mismatches == 0 && oversized == 0, format!("{vars} variables, {mismatches} mismatch(es), {oversized} oversized version(s)"))
}

fn refactoring_neutrality() -> Outcome {
    let mut g = Generator::new(SEED + 1);
    let cfg = Config { sources: vec![Source::Builtin], ..Config::default() };
    let (mut violations, mut pis) = (0, 0);
    for i in 0..200 {
        let case = g.refactoring_scenario(&format!("n{i}"));
        let oracle = interferes(&case.scenario, DEFAULT_STEP_LIMIT).map_err(|e| e.to_string())?;
        let a = analyze(&case.scenario, None, &cfg).map_err(|e| e.to_string())?;
        pis += a.report.interferences.len();
        if oracle.overall || a.outcome.any_kept {
            violations += 1;
        }
    }
    check(violations == 0, format!("200 scenarios, {pis} PI(s) emitted, {violations} violation(s)"))
}

const UNIT: &str = "u.mini";

fn random_changes(rng: &mut ChaCha8Rng, side: Side) -> ChangeSet {
    let mut set = ChangeSet::new(side);
    for line in 1..=10 {
        if rng.random_bool(0.4) {
            let deletion = rng.random_bool(0.1);
            let parent_line = if !deletion && rng.random_bool(0.2) { None } else { Some(rng.random_range(1..=12)) };
            set.insert(ChangeEntry { merge_ref: LineRef::new(UNIT, line), parent_line, content: String::new(), deletion });
        }
    }
    set
}

fn random_range(rng: &mut ChaCha8Rng) -> LineRange {
    let a = rng.random_range(1..=12);
    let b = rng.random_range(a..=(a + 3).min(12));
    LineRange::new(UNIT, a, b)
}

fn random_records(rng: &mut ChaCha8Rng, side: Side) -> Vec<RefactoringRecord> {
    (0..rng.random_range(0..=3))
        .map(|_| RefactoringRecord {
            tool: "random".into(),
            rtype: "Any".into(),
            side,
            pure: rng.random_bool(0.7),
            parent_ranges: (0..rng.random_range(1..=2)).map(|_| random_range(rng)).collect(),
            added_merge_ranges: (0..rng.random_range(0..=1)).map(|_| random_range(rng)).collect(),
            description: String::new(),
        })
        .collect()
}

fn in_ranges(ranges: &[LineRange], line: usize) -> bool {
    ranges.iter().any(|r| r.unit == UNIT && r.start_line <= line && line <= r.end_line)
}

/// R_f by enumeration over records.
fn refactored(records: &[RefactoringRecord], allow_impure: bool, e: &ChangeEntry) -> bool {
    records.iter().any(|r| {
        (r.pure || allow_impure)
            && (e.parent_line.is_some_and(|p| in_ranges(&r.parent_ranges, p))
                || (!e.deletion && in_ranges(&r.added_merge_ranges, e.merge_ref.line)))
    })
}

/// Psi by enumeration: every member is unmodified or refactored.
fn psi_expanded(c: &ChangeSet, records: &[RefactoringRecord], allow_impure: bool, pi: &PotentialInterference) -> bool {
    pi.members.iter().all(|m| match c.entries().iter().find(|e| &e.merge_ref == m) {
        None => true,
        Some(e) => refactored(records, allow_impure, e),
    })
}

fn filter_soundness() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(SEED + 2);
    let (mut unsound, mut disagree, mut discarded, mut contested) = (0, 0, 0, 0);
    for i in 0..1000 {
        let l = random_changes(&mut rng, Side::Left);
        let r = random_changes(&mut rng, Side::Right);
        let rec_l = random_records(&mut rng, Side::Left);
        let rec_r = random_records(&mut rng, Side::Right);
        let allow_impure = rng.random_bool(0.2);
        let n = rng.random_range(1..=4);
        let pi = PotentialInterference::new(PiKind::Dataflow, (0..n).map(|_| LineRef::new(UNIT, rng.random_range(1..=10))));
        let report = InterferenceReport { scenario_id: format!("t{i}"), interferences: vec![pi.clone()] };
        let idx_l = RefactoringIndex::build(Side::Left, &rec_l, allow_impure);
        let idx_r = RefactoringIndex::build(Side::Right, &rec_r, allow_impure);
        let verdict = &classify(&report, &l, &r, &idx_l, &idx_r).verdicts[0];
        let uncovered = |c: &ChangeSet, recs: &[RefactoringRecord]| {
            pi.members.iter().any(|m| c.entries().iter().any(|e| &e.merge_ref == m && !refactored(recs, allow_impure, e)))
        };
        if uncovered(&l, &rec_l) && uncovered(&r, &rec_r) {
            contested += 1;
            unsound += verdict.discarded as usize;
        }
        let expected = psi_expanded(&l, &rec_l, allow_impure, &pi) || psi_expanded(&r, &rec_r, allow_impure, &pi);
        if verdict.discarded != expected {
            disagree += 1;
        }
        discarded += verdict.discarded as usize;
    }
    check(
        unsound == 0 && disagree == 0 && contested > 0,
        format!("1000 triples, {discarded} discarded, {contested} uncovered on both sides, {unsound} unsound, {disagree} disagreement(s)"),
    )
}

fn corpus_fp_reduction() -> Outcome {
    let cfg = Config::default();
    let report = bench(&corpus(), &cfg, &BenchConfig { iterations: 1000, seed: SEED, jobs: 0 }).map_err(|e| e.to_string())?;
    let planted: Vec<_> =
        report.scenarios.iter().filter(|r| r.scenario.starts_with("refactor-fp-") && r.sa && !r.interference).collect();
    let removed = planted.iter().filter(|r| !r.reffilter).count();
    let lost = report.scenarios.iter().filter(|r| r.interference && r.sa && !r.reffilter).count();
    let share = if planted.is_empty() { 0.0 } else { removed as f64 / planted.len() as f64 };
    check(
        report.scenarios.len() >= 20 && planted.len() >= 5 && share >= 0.8 && lost <= 1,
        format!(
            "{} fixtures, {}/{} planted FPs removed ({:.0}%), {} TP lost; FP {} -> {}",
            report.scenarios.len(),
            removed,
            planted.len(),
            share * 100.0,
            lost,
            report.sa.confusion.fp,
            report.sa_reffilter.confusion.fp
        ),
    )
}

fn jaro_winkler_values() -> Outcome {
    let a = jaro_winkler_default("MARTHA", "MARHTA");
    let b = jaro_winkler_default("    total = a + b;", "    total = a + b;");
    let c = jaro_winkler_default("abc", "xyz");
    check(close(a, 0.9611, 1e-4) && b == 1.0 && c == 0.0, format!("MARTHA/MARHTA {a:.4}, identity {b}, disjoint {c}"))
}

fn determinism(started: Instant) -> Outcome {
    let c = corpus();
    let c = c.to_str().unwrap();
    let f = fig1();
    let f = f.to_str().unwrap();
    let runs = [
        refaware(&["bench", c, "--iterations", "2000", "--jobs", "1"]),
        refaware(&["bench", c, "--iterations", "2000", "--jobs", "4"]),
        refaware(&["bench", c, "--iterations", "2000"]),
    ];
    let bench_same = runs.iter().all(|o| o.status.success() && o.stdout == runs[0].stdout);
    let a = refaware(&["analyze", f]);
    let b = refaware(&["analyze", f]);
    let analyze_same = a.stdout == b.stdout && !a.stdout.is_empty();
    let labels: Vec<bool> = (0..99).map(|i| i % 4 == 0).collect();
    let d1 = simulate_baseline(BaselineKind::Calibrated, &labels, 0.25, 3000, SEED).map_err(|e| e.to_string())?;
    let d2 = simulate_baseline(BaselineKind::Calibrated, &labels, 0.25, 3000, SEED).map_err(|e| e.to_string())?;
    let sim_same = d1 == d2;
    let mut lm_same = true;
    if let Ok(fx) = load_fixture(f) {
        let cfg = LineMapConfig::default();
        let m1 = map_lines(&fx.scenario.changes_left, &fx.scenario.left, &cfg).ok();
        let m2 = map_lines(&fx.scenario.changes_left, &fx.scenario.left, &cfg).ok();
        lm_same = m1.is_some() && m1 == m2;
    }
    let took = started.elapsed();
    check(
        bench_same && analyze_same && sim_same && lm_same && took < Duration::from_secs(120),
        format!(
            "bench across job counts identical={bench_same}, analyze identical={analyze_same}, baseline identical={sim_same}, line maps identical={lm_same}; gate ran in {took:.1?}"
        ),
    )
}

fn main() {
    let started = Instant::now();
    let criteria: Vec<(&str, Criterion)> = vec![
        ("metric reproduction", Box::new(metric_reproduction)),
        ("McNemar reproduction", Box::new(mcnemar_reproduction)),
        ("Monte Carlo reproduction", Box::new(monte_carlo_reproduction)),
        ("worked example", Box::new(worked_example)),
        ("oracle brute-force equivalence", Box::new(oracle_equivalence)),
        ("refactoring neutrality", Box::new(refactoring_neutrality)),
        ("filter soundness", Box::new(filter_soundness)),
        ("corpus FP reduction", Box::new(corpus_fp_reduction)),
        ("Jaro-Winkler correctness", Box::new(jaro_winkler_values)),
        ("determinism", Box::new(move || determinism(started))),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        match run() {
            Ok(detail) => println!("[PASS] {}. {name}: {detail}", i + 1),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {}. {name}: {detail}", i + 1);
            }
        }
    }
    if failed > 0 {
        eprintln!("{failed} criterion/criteria failed");
        std::process::exit(1);
    }
}
