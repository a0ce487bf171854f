//! `qbc`: protocol runs, sweeps, code utilities, a narrated demo and the
//! acceptance suite.
//!
//! Exit codes: 0 success, 1 usage, config or I/O error, 2 a statistical gate
//! (or code bound) failed.

mod demo;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qbc_core::adversary::{AliceStrategy, BobStrategy};
use qbc_core::harness::{
    run_batch_with, run_sweep, trial_rng, write_json, write_report, write_transcripts, BatchOptions, PointStatus,
    ReportFormat, RunConfig, RunReport, RunStats, SweepGrid,
};
use qbc_core::lincode::{
    codeword_count_bound, count_codewords_at_distance, generate_code, weight_distribution, BitString, CodeSpec,
    GeneratorMatrix,
};
use qbc_core::protocol::{BitChoice, ThetaPolicy};
use qbc_core::verify;

#[derive(Parser, Debug)]
#[command(name = "qbc", version, about = "Entangled-pair quantum bit commitment simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a seeded batch of protocol executions.
    Run(RunArgs),
    /// Run a batch for every point of a parameter grid.
    Sweep(SweepArgs),
    /// Narrate one small protocol execution step by step.
    Demo(demo::DemoArgs),
    /// Generate a random generator matrix with verified minimum distance.
    CodeGen(CodeGenArgs),
    /// Inspect a generator matrix: distance, counts and the counting bound.
    CodeCheck(CodeCheckArgs),
    /// Run the acceptance criteria.
    Verify(VerifyArgs),
}

/// Config file plus flag overrides; flags win.
#[derive(Args, Debug, Default)]
struct ConfigArgs {
    /// JSON run config; defaults are used when absent.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    /// Number of pairs.
    #[arg(long = "s")]
    s: Option<usize>,
    /// Size of Bob's delayed set.
    #[arg(long = "s-prime")]
    s_prime: Option<usize>,
    #[arg(long = "f-a")]
    f_a: Option<f64>,
    #[arg(long = "f-b")]
    f_b: Option<f64>,
    #[arg(long = "f-c")]
    f_c: Option<f64>,
    /// Fixed preparation angle in radians.
    #[arg(long)]
    theta: Option<f64>,
    #[arg(long = "ratio-k")]
    ratio_k: Option<f64>,
    #[arg(long = "ratio-d")]
    ratio_d: Option<f64>,
    /// e.g. `honest`, `fake-unmeasured:3`, `over-measure:0.2s`.
    #[arg(long = "alice-strategy")]
    alice_strategy: Option<AliceStrategy>,
    /// `honest`, `early-extract` or `frequency-cheat:<f_a>,<f_b>,<f_c>`.
    #[arg(long = "bob-strategy")]
    bob_strategy: Option<BobStrategy>,
    /// `0`, `1` or `random`.
    #[arg(long, value_parser = parse_bit)]
    bit: Option<BitChoice>,
}

#[derive(Args, Debug)]
struct RunArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// JSON report path.
    #[arg(long)]
    json: Option<PathBuf>,
    /// CSV report path.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Directory for per-trial JSON-lines transcripts.
    #[arg(long)]
    transcripts: Option<PathBuf>,
    /// Worker threads; all cores when absent.
    #[arg(long)]
    threads: Option<usize>,
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Args, Debug)]
struct SweepArgs {
    #[command(flatten)]
    config: ConfigArgs,
    /// JSON grid with optional axes `s`, `s_prime_ratio`, `f`, `code_ratios`.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    json: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CodeGenArgs {
    #[arg(short = 'n')]
    n: usize,
    #[arg(short = 'k')]
    k: usize,
    /// Required minimum distance.
    #[arg(short = 'd')]
    d: usize,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 10_000)]
    attempts: usize,
    /// Write the matrix here instead of standard output.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct CodeCheckArgs {
    /// Generator matrix JSON.
    file: PathBuf,
    /// Distance at which codewords are counted.
    #[arg(long)]
    d0: usize,
    /// Reference word (0/1 string); the zero codeword when absent.
    #[arg(long)]
    center: Option<String>,
}

#[derive(Args, Debug)]
struct VerifyArgs {
    /// Comma-separated criterion ids or keys.
    #[arg(long)]
    only: Option<String>,
    /// Print the reports as JSON instead of a table.
    #[arg(long)]
    json: bool,
}

/// A failure that maps to exit code 1.
#[derive(Debug)]
struct Fail(String);

impl<E: std::fmt::Display> From<E> for Fail {
    fn from(e: E) -> Self {
        Fail(e.to_string())
    }
}

type CmdResult = Result<ExitCode, Fail>;

const GATE_FAILED: u8 = 2;

fn parse_bit(s: &str) -> Result<BitChoice, String> {
    match s {
        "0" | "zero" => Ok(BitChoice::Zero),
        "1" | "one" => Ok(BitChoice::One),
        "random" => Ok(BitChoice::Random),
        _ => Err(format!("expected 0, 1 or random, got {s:?}")),
    }
}

impl ConfigArgs {
    fn resolve(&self) -> Result<RunConfig, Fail> {
        let mut c = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        let p = &mut c.params;
        if let Some(v) = self.seed {
            c.master_seed = v;
        }
        if let Some(v) = self.trials {
            c.trials = v;
        }
        if let Some(v) = self.s {
            p.s = v;
        }
        if let Some(v) = self.s_prime {
            p.s_prime = v;
        }
        if let Some(v) = self.f_a {
            p.f_a = v;
        }
        if let Some(v) = self.f_b {
            p.f_b = v;
        }
        if let Some(v) = self.f_c {
            p.f_c = v;
        }
        if let Some(v) = self.theta {
            p.theta_policy = ThetaPolicy::Fixed(v);
        }
        if let Some(v) = self.ratio_k {
            p.ratio_k = v;
        }
        if let Some(v) = self.ratio_d {
            p.ratio_d = v;
        }
        if let Some(v) = self.alice_strategy {
            c.alice_strategy = v;
        }
        if let Some(v) = self.bob_strategy {
            c.bob_strategy = v;
        }
        if let Some(v) = self.bit {
            c.bit = v;
        }
        Ok(c)
    }
}

fn echo_config(config: &RunConfig) -> Result<(), Fail> {
    println!("effective config:");
    println!("{}", serde_json::to_string_pretty(config)?);
    Ok(())
}

fn print_stats(stats: &RunStats, verbose: u8) {
    println!("{:<22} {:>10} {:>10} {:>7}   ci95", "metric", "mean", "std", "count");
    for (name, m) in &stats.metrics {
        println!(
            "{name:<22} {:>10.5} {:>10.5} {:>7}   [{:.5}, {:.5}]",
            m.mean, m.std, m.count, m.ci95_low, m.ci95_high
        );
    }
    if stats.violations.total() > 0 {
        println!("invariant violations: {:?}", stats.violations);
    }
    if verbose > 0 {
        for (check, n) in &stats.rejections {
            println!("rejected at {check}: {n}");
        }
        for (key, t) in &stats.pair_tests {
            println!("pair test {key}: {} of {} passed", t.passed, t.total);
        }
    }
    for g in &stats.gates {
        println!(
            "gate {}: {} (observed {:.5}, target {:.5} ± {:.5})",
            g.name,
            if g.passed { "PASS" } else { "FAIL" },
            g.observed,
            g.target,
            g.tolerance
        );
    }
}

fn cmd_run(args: &RunArgs) -> CmdResult {
    let mut config = args.config.resolve()?;
    if args.json.is_some() {
        config.outputs.json = args.json.clone();
    }
    if args.csv.is_some() {
        config.outputs.csv = args.csv.clone();
    }
    if args.transcripts.is_some() {
        config.outputs.transcripts = args.transcripts.clone();
    }
    echo_config(&config)?;
    config.validate()?;
    let opts = BatchOptions {
        threads: args.threads,
        keep_transcripts: config.outputs.transcripts.is_some(),
        keep_outcomes: false,
    };
    let result = run_batch_with(&config, &opts)?;
    print_stats(&result.stats, args.verbose);

    let outputs = config.outputs.clone();
    let report = RunReport { config, stats: result.stats };
    if let Some(path) = &outputs.json {
        write_report(&report, ReportFormat::Json, path)?;
    }
    if let Some(path) = &outputs.csv {
        write_report(&report, ReportFormat::Csv, path)?;
    }
    if let Some(dir) = &outputs.transcripts {
        write_transcripts(dir, &result.transcripts)?;
    }
    if report.stats.gates_passed() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("statistical gates failed");
        Ok(ExitCode::from(GATE_FAILED))
    }
}

fn load_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Fail> {
    let text = std::fs::read_to_string(path).map_err(|e| Fail(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| Fail(format!("{}: {e}", path.display())))
}

fn cmd_sweep(args: &SweepArgs) -> CmdResult {
    let base = args.config.resolve()?;
    let grid: SweepGrid = load_json(&args.grid)?;
    echo_config(&base)?;
    let report = run_sweep(&grid, &base);
    for row in &report.rows {
        let p = &row.point;
        let head = format!(
            "point {}: s={} s'={} f=({}, {}, {}) ratios=({}, {})",
            p.index, p.s, p.s_prime, p.f[0], p.f[1], p.f[2], p.ratio_k, p.ratio_d
        );
        match (&row.status, row.targets_met) {
            (PointStatus::Completed, Some(met)) => {
                let m = row.stats.as_ref().and_then(|s| s.metric("ratio_M")).map_or(f64::NAN, |m| m.mean);
                println!("{head}: {} (|M|/s = {m:.4})", if met { "targets met" } else { "targets MISSED" });
            }
            (PointStatus::Completed, None) => println!("{head}: completed"),
            (PointStatus::Skipped(why), _) => println!("{head}: skipped, {why}"),
            (PointStatus::Failed(why), _) => println!("{head}: failed, {why}"),
        }
    }
    if let Some(path) = &args.json {
        write_report(&report, ReportFormat::Json, path)?;
    }
    if let Some(path) = &args.csv {
        write_report(&report, ReportFormat::Csv, path)?;
    }
    if report.all_targets_met() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("some sweep points missed their targets");
        Ok(ExitCode::from(GATE_FAILED))
    }
}

fn cmd_code_gen(args: &CodeGenArgs) -> CmdResult {
    let spec = CodeSpec::new(args.n, args.k, args.d)?;
    let mut rng = trial_rng(args.seed, 0);
    let g = generate_code(&spec, &mut rng, args.attempts)?;
    match &args.out {
        Some(path) => {
            write_json(&g, path)?;
            println!("wrote ({}, {}, {}) code to {}", g.n(), g.k(), g.verified_min_distance(), path.display());
        }
        None => println!("{}", g.to_json()),
    }
    Ok(ExitCode::SUCCESS)
}

fn cmd_code_check(args: &CodeCheckArgs) -> CmdResult {
    let g: GeneratorMatrix = load_json(&args.file)?;
    let (n, k) = (g.n(), g.k());
    let center = match &args.center {
        Some(s) => s.parse::<BitString>()?,
        None => BitString::zeros(n),
    };
    let count = count_codewords_at_distance(&g, &center, args.d0)?;
    let bound = codeword_count_bound(n, k);
    let weights = weight_distribution(&g);
    println!("code: n = {n}, k = {k}");
    println!("min distance: {}", g.verified_min_distance());
    println!("weight distribution: {weights:?}");
    println!("codewords at distance {} from {center}: {count}", args.d0);
    println!("bound 2^(k-n/2)/sqrt(n) = {bound:.4}");
    if count as f64 >= bound {
        println!("PASS");
        Ok(ExitCode::SUCCESS)
    } else {
        println!("FAIL");
        Ok(ExitCode::from(GATE_FAILED))
    }
}

fn cmd_verify(args: &VerifyArgs) -> CmdResult {
    let ids = match &args.only {
        Some(only) => verify::select(only).map_err(Fail)?,
        None => verify::CRITERIA.iter().map(|c| c.id).collect(),
    };
    let reports = verify::run_selected(&ids);
    if args.json {
        println!("{}", serde_json::to_string_pretty(&reports)?);
    } else {
        for r in &reports {
            println!("{}", r.summary_line());
            for c in &r.checks {
                println!("    {:<34} {} {}", c.name, if c.passed { "pass" } else { "FAIL" }, c.detail);
            }
        }
    }
    if reports.iter().all(|r| r.passed) {
        Ok(ExitCode::SUCCESS)
    } else {
        Ok(ExitCode::from(GATE_FAILED))
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match &cli.command {
        Command::Run(a) => cmd_run(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Demo(a) => demo::cmd_demo(a),
        Command::CodeGen(a) => cmd_code_gen(a),
        Command::CodeCheck(a) => cmd_code_check(a),
        Command::Verify(a) => cmd_verify(a),
    };
    match result {
        Ok(code) => code,
        Err(Fail(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
