//! Command-line front end.

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::bootstrap::{bootstrap_p_all, BootstrapConfig, DEFAULT_REPLICATES};
use crate::error::{Error, Result};
use crate::sample::read_csv;
use crate::simulate::{write_rates_csv, SimulationConfig};
use crate::stats::{holm_adjust, little, nct, TestKind, TestResult};

#[derive(Debug, Parser)]
#[command(name = "misspair", version, about = "Tests for matched pairs with missing second components")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run tests on a CSV sample with columns x1,x2.
    Test(TestArgs),
    /// Run a Monte Carlo grid described by a JSON config.
    Simulate(SimulateArgs),
    /// Holm step-down adjustment of a list of p-values.
    Adjust(AdjustArgs),
}

#[derive(Debug, Args)]
pub struct TestArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Comma-separated kinds (wts, ats, mats, lt, nct) or `all`.
    #[arg(long, default_value = "all")]
    pub tests: String,
    /// Bootstrap replicates.
    #[arg(long = "B", alias = "replicates", default_value_t = DEFAULT_REPLICATES)]
    pub replicates: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Emit JSON lines instead of a table.
    #[arg(long)]
    pub json: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Output CSV path; `-` writes to standard output.
    #[arg(long)]
    pub output: PathBuf,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct AdjustArgs {
    /// Comma-separated p-values.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub pvalues: Option<Vec<f64>>,
    /// File of p-values separated by commas, whitespace or newlines.
    #[arg(long)]
    pub input: Option<PathBuf>,
}

pub fn parse_kinds(spec: &str) -> Result<Vec<TestKind>> {
    let mut kinds = Vec::new();
    for tok in spec.split(',').map(str::trim).filter(|t| !t.is_empty()) {
        if tok.eq_ignore_ascii_case("all") {
            kinds.extend(TestKind::ALL);
        } else {
            kinds.push(tok.parse()?);
        }
    }
    let mut seen = Vec::new();
    kinds.retain(|k| {
        let fresh = !seen.contains(k);
        seen.push(*k);
        fresh
    });
    if kinds.is_empty() {
        return Err(Error::InvalidArgument("no tests requested".into()));
    }
    Ok(kinds)
}

fn with_pool<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(k) = threads {
        if k == 0 {
            return Err(Error::InvalidArgument("--threads must be at least 1".into()));
        }
        builder = builder.num_threads(k);
    }
    let pool = builder
        .build()
        .map_err(|e| Error::InvalidArgument(format!("thread pool: {e}")))?;
    Ok(pool.install(f))
}

#[derive(Serialize)]
struct JsonLine<'a> {
    #[serde(flatten)]
    result: &'a TestResult,
    alpha: f64,
    reject: bool,
}

pub fn run_tests(args: &TestArgs) -> Result<Vec<TestResult>> {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(Error::InvalidArgument(format!("alpha must lie in (0, 1), got {}", args.alpha)));
    }
    if args.replicates == 0 {
        return Err(Error::InvalidArgument("--B must be at least 1".into()));
    }
    let kinds = parse_kinds(&args.tests)?;
    let sample = read_csv(BufReader::new(File::open(&args.input)?))?;
    let quad: Vec<TestKind> = kinds.iter().copied().filter(|k| k.is_bootstrap()).collect();
    let cfg = BootstrapConfig::new(args.replicates, args.seed);
    let boot = if quad.is_empty() {
        Vec::new()
    } else {
        with_pool(args.threads, || bootstrap_p_all(&sample, &quad, &cfg))??
    };
    kinds
        .iter()
        .map(|&kind| match kind {
            TestKind::Little => little(&sample),
            TestKind::Nct => nct(&sample),
            _ => Ok(boot
                .iter()
                .find(|b| b.kind == kind)
                .expect("bootstrapped kind")
                .to_test_result()),
        })
        .collect()
}

fn cmd_test(args: &TestArgs, out: &mut dyn Write) -> Result<()> {
    let results = run_tests(args)?;
    if args.json {
        for r in &results {
            let line = JsonLine {
                result: r,
                alpha: args.alpha,
                reject: r.rejects(args.alpha),
            };
            serde_json::to_writer(&mut *out, &line).map_err(io::Error::from)?;
            writeln!(out)?;
        }
    } else {
        writeln!(out, "{:<6} {:>14} {:>10}  decision (alpha = {})", "test", "statistic", "p-value", args.alpha)?;
        for r in &results {
            let decision = if r.rejects(args.alpha) { "reject" } else { "retain" };
            writeln!(out, "{:<6} {:>14.6} {:>10.4}  {}", r.kind.name(), r.statistic, r.p_value, decision)?;
        }
    }
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs, out: &mut dyn Write) -> Result<()> {
    let text = std::fs::read_to_string(&args.config)?;
    let cfg = SimulationConfig::from_json(&text)?;
    let results = with_pool(args.threads, || cfg.run())??;
    if args.output.as_os_str() == "-" {
        write_rates_csv(&results, out)
    } else {
        write_rates_csv(&results, BufWriter::new(File::create(&args.output)?))
    }
}

fn parse_pvalue_text(text: &str) -> Result<Vec<f64>> {
    text.split(|c: char| c == ',' || c.is_whitespace())
        .filter(|t| !t.is_empty())
        .enumerate()
        .map(|(i, t)| {
            t.parse::<f64>()
                .map_err(|e| Error::InvalidArgument(format!("p-value #{}: {t:?}: {e}", i + 1)))
        })
        .collect()
}

fn cmd_adjust(args: &AdjustArgs, out: &mut dyn Write) -> Result<()> {
    let pvalues = match (&args.pvalues, &args.input) {
        (Some(p), _) => p.clone(),
        (None, Some(path)) => {
            let mut text = String::new();
            File::open(path)?.read_to_string(&mut text)?;
            parse_pvalue_text(&text)?
        }
        (None, None) => return Err(Error::InvalidArgument("pass --pvalues or --input".into())),
    };
    if pvalues.is_empty() {
        return Err(Error::InvalidArgument("no p-values given".into()));
    }
    for p in holm_adjust(&pvalues)? {
        writeln!(out, "{p}")?;
    }
    Ok(())
}

pub fn run(cli: &Cli, out: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Test(a) => cmd_test(a, out),
        Command::Simulate(a) => cmd_simulate(a, out),
        Command::Adjust(a) => cmd_adjust(a, out),
    }
}

pub fn main() -> ExitCode {
    let cli = Cli::parse();
    let stdout = io::stdout();
    let mut out = stdout.lock();
    match run(&cli, &mut out).and_then(|()| out.flush().map_err(Error::from)) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
