use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use refaware_core::detect::{detect, load_report, PiKind};
use refaware_core::filter::{Basis, FilterOutcome};
use refaware_core::linemap::{LineMapConfig, DEFAULT_MAX_PREFIX, DEFAULT_PREFIX_SCALE, DEFAULT_THRESHOLD};
use refaware_core::minilang::DEFAULT_STEP_LIMIT;
use refaware_core::oracle::interferes;
use refaware_core::pipeline::{self, BenchConfig, BenchReport, Config, DEFAULT_ITERATIONS, DEFAULT_SEED};
use refaware_core::refdetect::Source;
use refaware_core::scenario::{load_fixture, load_git_scenario, write_ground_truth, MergeScenario};

#[derive(Parser)]
#[command(name = "refaware", version, about = "Refactoring-aware semantic interference analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Detect potential interferences and filter refactoring-induced ones.
    Analyze {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Detect potential interferences only.
    Detect {
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Filter an externally produced interference report.
    Filter {
        /// Report in the `detect` JSON shape.
        #[arg(long)]
        report: PathBuf,
        #[command(flatten)]
        target: Target,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Score detection with and without filtering over a fixture corpus.
    Bench {
        corpus: PathBuf,
        #[arg(long, default_value_t = DEFAULT_ITERATIONS)]
        iterations: usize,
        #[command(flatten)]
        run: RunArgs,
    },
    /// Execute the four versions of a fixture and write its groundtruth.json.
    Oracle {
        fixture: PathBuf,
        #[command(flatten)]
        run: RunArgs,
    },
}

#[derive(Args)]
struct Target {
    /// Fixture directory, or repository path/URL with `--commit`.
    scenario: Option<String>,
    /// Two-parent merge commit to load from a git repository.
    #[arg(long)]
    commit: Option<String>,
    /// Repository for `--commit`, instead of the positional path.
    #[arg(long, conflicts_with = "scenario")]
    repo: Option<String>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Text,
}

#[derive(Args)]
struct RunArgs {
    /// Comma-separated: builtin, fixture, external:<path>, or none.
    #[arg(long, default_value = "builtin,fixture")]
    sources: String,
    #[arg(long, default_value_t = DEFAULT_THRESHOLD)]
    jw_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_PREFIX_SCALE)]
    jw_prefix_scale: f64,
    #[arg(long, default_value_t = DEFAULT_STEP_LIMIT)]
    step_limit: u64,
    /// Let impure refactorings justify discarding.
    #[arg(long)]
    allow_impure: bool,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
    /// Worker threads for corpus runs; 0 picks automatically.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

impl RunArgs {
    fn sources(&self) -> Result<Vec<Source>> {
        let mut out = Vec::new();
        for part in self.sources.split(',').map(str::trim).filter(|p| !p.is_empty()) {
            if part == "none" {
                continue;
            }
            out.push(part.parse::<Source>()?);
        }
        Ok(out)
    }

    fn config(&self) -> Result<Config> {
        let linemap =
            LineMapConfig { threshold: self.jw_threshold, prefix_scale: self.jw_prefix_scale, max_prefix: DEFAULT_MAX_PREFIX };
        linemap.validate()?;
        Ok(Config { sources: self.sources()?, linemap, step_limit: self.step_limit, allow_impure: self.allow_impure })
    }
}

#[derive(Serialize)]
struct Seeded<'a, T: Serialize> {
    seed: u64,
    #[serde(flatten)]
    body: &'a T,
}

fn print_json<T: Serialize>(seed: u64, body: &T) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(&Seeded { seed, body })?);
    Ok(())
}

struct Loaded {
    scenario: MergeScenario,
    refactorings: Option<PathBuf>,
}

fn load_target(t: &Target) -> Result<Loaded> {
    if let Some(commit) = &t.commit {
        let repo = t.repo.as_deref().or(t.scenario.as_deref()).unwrap_or(".");
        let scenario = load_git_scenario(repo, commit).with_context(|| format!("loading {commit} from {repo}"))?;
        return Ok(Loaded { scenario, refactorings: None });
    }
    let Some(path) = &t.scenario else {
        bail!("a fixture directory or `--commit` is required");
    };
    let fixture = load_fixture(path).with_context(|| format!("loading fixture {path}"))?;
    Ok(Loaded { scenario: fixture.scenario, refactorings: fixture.refactorings })
}

fn verdict_code(outcome: &FilterOutcome) -> ExitCode {
    if outcome.any_kept {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    }
}

fn members_text(members: &[refaware_core::scenario::LineRef]) -> String {
    members.iter().map(|m| m.to_string()).collect::<Vec<_>>().join(", ")
}

fn kind_text(kind: PiKind) -> &'static str {
    match kind {
        PiKind::Dataflow => "dataflow",
        PiKind::Override => "override",
    }
}

fn print_outcome(run: &RunArgs, outcome: &FilterOutcome) -> Result<()> {
    match run.format {
        Format::Json => print_json(run.seed, outcome),
        Format::Text => {
            println!("scenario {} (seed {})", outcome.scenario_id, run.seed);
            for v in &outcome.verdicts {
                let members = members_text(&v.pi.members);
                match v.witness_side {
                    Some(side) => {
                        println!("  discarded {} [{}] via {}", kind_text(v.pi.kind), members, side);
                        for e in &v.evidence {
                            let why = match &e.basis {
                                Basis::NotModifiedBySide => "not modified".to_owned(),
                                Basis::Refactoring(r) => format!("{} ({})", r.rtype, r.tool),
                            };
                            println!("    {}: {}", e.at, why);
                        }
                    }
                    None => println!("  kept {} [{}]", kind_text(v.pi.kind), members),
                }
            }
            let kept = outcome.kept().count();
            if kept == 0 {
                println!("interference-free");
            } else {
                println!("{kept} potential interference(s) kept");
            }
            Ok(())
        }
    }
}

fn print_bench(run: &RunArgs, report: &BenchReport) -> Result<()> {
    match run.format {
        Format::Json => print_json(run.seed, report),
        Format::Text => {
            println!("{} scenario(s), {} skipped, seed {}", report.scenarios.len(), report.skipped.len(), run.seed);
            for (name, v) in [("SA", &report.sa), ("SA+RefFilter", &report.sa_reffilter)] {
                let (c, m) = (&v.confusion, &v.metrics);
                println!(
                    "{name:<13} tp={} fp={} fn={} tn={}  precision={:.3} recall={:.3} accuracy={:.3} f1={:.3}",
                    c.tp, c.fp, c.fn_, c.tn, m.precision, m.recall, m.accuracy, m.f1
                );
            }
            for (name, t) in [("FP", &report.mcnemar_fp), ("FN", &report.mcnemar_fn)] {
                println!("McNemar {name}: b={} c={} p={:.6}", t.b, t.c, t.p_value);
            }
            for b in &report.baselines {
                println!(
                    "baseline {:?} p_pos={:.3}: mean f1={:.3} accuracy={:.3}; p(f1)={:.4} p(accuracy)={:.4}",
                    b.kind, b.p_pos, b.mean_f1, b.mean_accuracy, b.p_f1, b.p_accuracy
                );
            }
            Ok(())
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Analyze { target, run } => {
            let cfg = run.config()?;
            let t = load_target(&target)?;
            let a = pipeline::analyze(&t.scenario, t.refactorings.as_deref(), &cfg)?;
            print_outcome(&run, &a.outcome)?;
            Ok(verdict_code(&a.outcome))
        }
        Command::Detect { target, run } => {
            let t = load_target(&target)?;
            let report = detect(&t.scenario)?;
            match run.format {
                Format::Json => print_json(run.seed, &report)?,
                Format::Text => {
                    println!("scenario {} (seed {})", report.scenario_id, run.seed);
                    for pi in &report.interferences {
                        println!("  {} [{}]", kind_text(pi.kind), members_text(&pi.members));
                    }
                }
            }
            Ok(if report.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
        Command::Filter { report, target, run } => {
            let cfg = run.config()?;
            if cfg.sources.is_empty() {
                bail!("filter needs at least one refactoring source");
            }
            let t = load_target(&target)?;
            let mut pis = load_report(&report).with_context(|| format!("reading {}", report.display()))?;
            if pis.scenario_id.is_empty() {
                pis.scenario_id = t.scenario.id.clone();
            }
            let a = pipeline::filter_report(&t.scenario, &pis, t.refactorings.as_deref(), &cfg)?;
            print_outcome(&run, &a.outcome)?;
            Ok(verdict_code(&a.outcome))
        }
        Command::Bench { corpus, iterations, run } => {
            let cfg = run.config()?;
            let bcfg = BenchConfig { iterations, seed: run.seed, jobs: run.jobs };
            let report = pipeline::bench(&corpus, &cfg, &bcfg)?;
            print_bench(&run, &report)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Oracle { fixture, run } => oracle(&fixture, &run),
    }
}

fn oracle(dir: &Path, run: &RunArgs) -> Result<ExitCode> {
    let f = load_fixture(dir).with_context(|| format!("loading fixture {}", dir.display()))?;
    let result = interferes(&f.scenario, run.step_limit)?;
    if !result.statuses.all_ok() {
        eprintln!("error: not every version runs to completion: {}", serde_json::to_string(&result.statuses)?);
        return Ok(ExitCode::from(2));
    }
    let gt = result.ground_truth();
    write_ground_truth(&gt, dir)?;
    match run.format {
        Format::Json => print_json(run.seed, &gt)?,
        Format::Text => match gt.kind {
            Some(kind) => println!("interference type {kind:?} on {}", gt.variables.join(", ")),
            None => println!("no interference"),
        },
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    // Restore default SIGPIPE handling.
    #[cfg(unix)]
    unsafe {
        libc::signal(libc::SIGPIPE, libc::SIG_DFL);
    }
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
