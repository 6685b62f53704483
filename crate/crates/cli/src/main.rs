use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use ducut_core::agent::{DEFAULT_ALPHA, DEFAULT_EPSILON, DEFAULT_GAMMA};
use ducut_core::ast::{parse_source, Ast};
use ducut_core::dataflow::{check_du_consistency, compute_du_chains, dump_chains_jsonl};
use ducut_core::manager::{debloat, ManagerError, RunConfig};
use ducut_core::oracle::DEFAULT_TIMEOUT_MS;
use ducut_core::reducer::{max_level, propose_units, Mode};

/// Removes code a test script does not need from a C program.
#[derive(Debug, Parser)]
#[command(name = "ducut", version, about)]
struct Cli {
    /// More log output (-v info, -vv debug). RUST_LOG overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Reduce one program against a test script.
    Reduce(ReduceArgs),
    /// Parse and analyse a program without reducing it.
    Analyze(AnalyzeArgs),
    /// Reduce every fixture of a corpus under several modes; prints CSV.
    Bench(BenchArgs),
}

#[derive(Debug, Args)]
struct OracleArgs {
    /// Seed for the learned ordering.
    #[arg(long, env = "DUCUT_SEED", default_value_t = 0)]
    seed: u64,
    /// Per-run limit for the test script.
    #[arg(long, default_value_t = DEFAULT_TIMEOUT_MS)]
    timeout_ms: u64,
    /// Test scripts run concurrently.
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    /// Maximum number of real test-script runs.
    #[arg(long)]
    budget: Option<u64>,
}

#[derive(Debug, Args)]
struct ReduceArgs {
    #[arg(long)]
    input: PathBuf,
    /// Executable receiving the candidate path; exit 0 means keep.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, default_value = "rl")]
    mode: Mode,
    #[command(flatten)]
    oracle: OracleArgs,
    /// Check 1-minimality over DU-closed units at the end.
    #[arg(long)]
    verify_minimality: bool,
    /// Reduced source [default: <input>.reduced.c]
    #[arg(long)]
    out: Option<PathBuf>,
    /// JSON report [default: <input>.report.json]
    #[arg(long)]
    report: Option<PathBuf>,
    /// JSONL log of every proposed and attempted removal.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Q-table to start from (if present) and save to.
    #[arg(long)]
    qtable: Option<PathBuf>,
    #[arg(long, default_value_t = DEFAULT_ALPHA)]
    alpha: f64,
    #[arg(long, default_value_t = DEFAULT_GAMMA)]
    gamma: f64,
    #[arg(long, default_value_t = DEFAULT_EPSILON)]
    epsilon: f64,
}

#[derive(Debug, Args)]
struct AnalyzeArgs {
    #[arg(long)]
    input: PathBuf,
    /// Print one JSON line per definition with the uses it reaches.
    #[arg(long)]
    dump_du_chains: bool,
    /// Exit 1 if any retained use has lost its definition or declaration.
    #[arg(long)]
    check: bool,
}

#[derive(Debug, Args)]
struct BenchArgs {
    /// Directory with one sub-directory per fixture holding input.c and a test script.
    #[arg(long)]
    corpus: PathBuf,
    #[arg(long, value_delimiter = ',', default_value = "ddmin,hdd,hdd-du,rl")]
    modes: Vec<Mode>,
    /// Test script name inside each fixture directory.
    #[arg(long, default_value = "test.sh")]
    script: String,
    #[command(flatten)]
    oracle: OracleArgs,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    // Test scripts may call back into this binary for well-formedness checks.
    if std::env::var_os("DUCUT_BIN").is_none() {
        if let Ok(exe) = std::env::current_exe() {
            std::env::set_var("DUCUT_BIN", exe);
        }
    }

    let code = match cli.command {
        Command::Reduce(args) => reduce(args),
        Command::Analyze(args) => analyze(args),
        Command::Bench(args) => bench(args),
    };
    ExitCode::from(code as u8)
}

fn with_suffix(input: &Path, suffix: &str) -> PathBuf {
    let stem = input.file_stem().unwrap_or_default().to_string_lossy();
    input.with_file_name(format!("{stem}{suffix}"))
}

fn reduce(args: ReduceArgs) -> i32 {
    let config = RunConfig {
        mode: args.mode,
        seed: args.oracle.seed,
        timeout_ms: args.oracle.timeout_ms,
        jobs: args.oracle.jobs,
        budget: args.oracle.budget,
        verify_minimality: args.verify_minimality,
        out: Some(args.out.unwrap_or_else(|| with_suffix(&args.input, ".reduced.c"))),
        report: Some(args.report.unwrap_or_else(|| with_suffix(&args.input, ".report.json"))),
        trace: args.trace,
        qtable: args.qtable,
        alpha: args.alpha,
        gamma: args.gamma,
        epsilon: args.epsilon,
        ..RunConfig::new(args.input, args.test)
    };
    match debloat(&config) {
        Ok(out) => {
            let r = &out.report;
            eprintln!(
                "{}: {} -> {} tokens ({:.2}% smaller), {} oracle runs, {} passes",
                config.input.display(),
                r.tokens.original,
                r.tokens.final_,
                r.tokens.reduction_pct,
                r.oracle.invocations,
                r.passes
            );
            if r.minimality_verified == Some(false) {
                eprintln!(
                    "warning: {} units could still be removed",
                    r.minimality_witnesses.unwrap_or(0)
                );
            }
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn load(input: &Path) -> Result<Ast, i32> {
    let text = fs::read_to_string(input).map_err(|e| {
        eprintln!("error: {}: {e}", input.display());
        2
    })?;
    parse_source(&text).map_err(|e| {
        eprintln!("error: {}: {e}", input.display());
        2
    })
}

fn analyze(args: AnalyzeArgs) -> i32 {
    let ast = match load(&args.input) {
        Ok(a) => a,
        Err(code) => return code,
    };
    if args.check {
        let report = check_du_consistency(&ast);
        for d in &report.dangling {
            eprintln!("{}:{}: `{}`: {:?}", args.input.display(), d.location, d.name, d.reason);
        }
        if !report.is_empty() {
            return 1;
        }
    }
    if args.dump_du_chains {
        match compute_du_chains(&ast) {
            Ok(chains) => print!("{}", dump_chains_jsonl(&chains)),
            Err(e) => {
                eprintln!("error: {}: {e}", args.input.display());
                return 2;
            }
        }
    }
    if !args.check && !args.dump_du_chains {
        println!("tokens: {}", ast.retained_tokens());
        println!("statements: {}", ast.retained_statements());
        if let Some(max) = max_level(&ast) {
            for level in 0..=max {
                println!("level {level}: {} units", propose_units(&ast, level).len());
            }
        }
    }
    0
}

fn fixtures(corpus: &Path, script: &str) -> std::io::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(corpus)? {
        let path = entry?.path();
        if path.join("input.c").is_file() && path.join(script).is_file() {
            out.push((entry_name(&path), path));
        }
    }
    out.sort();
    Ok(out)
}

fn entry_name(path: &Path) -> String {
    path.file_name().unwrap_or_default().to_string_lossy().into_owned()
}

fn bench(args: BenchArgs) -> i32 {
    let fixtures = match fixtures(&args.corpus, &args.script) {
        Ok(f) => f,
        Err(e) => {
            eprintln!("error: {}: {e}", args.corpus.display());
            return 2;
        }
    };
    if fixtures.is_empty() {
        eprintln!("error: no fixtures with input.c and {} under {}", args.script, args.corpus.display());
        return 2;
    }
    let mut csv = String::from("fixture,mode,tokens_before,tokens_after,oracle_calls,wall_ms\n");
    for (name, dir) in &fixtures {
        for &mode in &args.modes {
            let config = RunConfig {
                mode,
                seed: args.oracle.seed,
                timeout_ms: args.oracle.timeout_ms,
                jobs: args.oracle.jobs,
                budget: args.oracle.budget,
                ..RunConfig::new(dir.join("input.c"), dir.join(&args.script))
            };
            let started = Instant::now();
            let report = match debloat(&config) {
                Ok(out) => out.report,
                Err(ManagerError::BudgetExhausted { report }) => *report,
                Err(e) => {
                    eprintln!("error: {name} ({mode}): {e}");
                    return e.exit_code();
                }
            };
            let _ = writeln!(
                csv,
                "{name},{mode},{},{},{},{}",
                report.tokens.original,
                report.tokens.final_,
                report.oracle.invocations,
                started.elapsed().as_millis()
            );
            log::info!("{name} {mode}: {} -> {}", report.tokens.original, report.tokens.final_);
        }
    }
    match &args.out {
        Some(p) => {
            if let Err(e) = fs::write(p, &csv) {
                eprintln!("error: {}: {e}", p.display());
                return 5;
            }
        }
        None => print!("{csv}"),
    }
    0
}
