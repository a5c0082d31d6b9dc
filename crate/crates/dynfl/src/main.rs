use std::path::PathBuf;
use std::process::ExitCode;
use std::str::FromStr;

use clap::{Args, Parser, Subcommand};

use dynfl::{
    compare_runs, generate, ingest, read_records, run_stream, write_records_to_path, Algorithm,
    AuditPolicy, HarnessError, PointSet, RunConfig, SynthConfig,
};

#[derive(Parser)]
#[command(
    name = "dynfl",
    about = "Dynamic facility location benchmark harness",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one algorithm over a sliding-window update stream and write a
    /// per-update metrics CSV.
    Run(RunArgs),
    /// Compare two metrics files: mean cost ratio (phi) and mean cumulative
    /// recourse ratio (psi).
    Compare(CompareArgs),
    /// Oracle sweep: run with full audits plus exhaustive detector
    /// cross-checks on a small instance.
    Verify(VerifyArgs),
}

#[derive(Args)]
struct PointSource {
    /// CSV file with one comma-separated point per line.
    #[arg(long)]
    points: Option<PathBuf>,
    /// Synthetic Gaussian mixture, e.g. "n=2000,clusters=5".
    #[arg(long, value_parser = parse_synth, conflicts_with = "points")]
    synthetic: Option<SynthConfig>,
}

impl PointSource {
    fn load(&self, seed: u64) -> Result<PointSet, HarnessError> {
        match (&self.points, &self.synthetic) {
            (Some(path), None) => ingest(path),
            (None, Some(config)) => Ok(generate(config, seed)),
            _ => Err(HarnessError::Config(
                "exactly one of --points and --synthetic is required".into(),
            )),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    source: PointSource,
    /// Fraction of points sampled as facilities.
    #[arg(long, default_value_t = 0.05)]
    facility_fraction: f64,
    /// Sliding window length in clients.
    #[arg(long, default_value_t = 1000)]
    window: usize,
    #[arg(long, default_value = "nice", value_parser = Algorithm::from_str)]
    algorithm: Algorithm,
    /// Level offset of the admissible-assignment rule.
    #[arg(long, default_value_t = 3)]
    mu: i32,
    /// Base of the exponential level scheme is 1 + epsilon.
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// none, every:<N>, or all.
    #[arg(long, default_value = "none", value_parser = AuditPolicy::from_str)]
    audit: AuditPolicy,
    /// Output metrics CSV path.
    #[arg(long)]
    out: PathBuf,
    /// Stop after this many updates.
    #[arg(long)]
    max_updates: Option<usize>,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    a: PathBuf,
    #[arg(long)]
    b: PathBuf,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    source: PointSource,
    /// Cap on simultaneously active clients (at most 12; the exhaustive
    /// cross-check is exponential in this).
    #[arg(long, default_value_t = 12)]
    max_clients: usize,
    #[arg(long, default_value_t = 0.05)]
    facility_fraction: f64,
    #[arg(long, default_value_t = 3)]
    mu: i32,
    #[arg(long, default_value_t = 1.0)]
    epsilon: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    max_updates: Option<usize>,
}

fn parse_synth(value: &str) -> Result<SynthConfig, String> {
    let mut config = SynthConfig::default();
    for part in value.split(',') {
        let (key, val) = part
            .split_once('=')
            .ok_or_else(|| format!("expected key=value, got {part:?}"))?;
        match key.trim() {
            "n" => config.n = val.trim().parse().map_err(|e| format!("n: {e}"))?,
            "clusters" => {
                config.clusters = val.trim().parse().map_err(|e| format!("clusters: {e}"))?
            }
            other => return Err(format!("unknown synthetic parameter {other:?}")),
        }
    }
    if config.n == 0 || config.clusters == 0 {
        return Err("synthetic n and clusters must be positive".into());
    }
    Ok(config)
}

fn cmd_run(args: &RunArgs) -> Result<(), HarnessError> {
    let points = args.source.load(args.seed)?;
    let mut config = RunConfig::new(args.algorithm);
    config.epsilon = args.epsilon;
    config.mu = args.mu;
    config.seed = args.seed;
    config.window = args.window;
    config.facility_fraction = args.facility_fraction;
    config.audit = args.audit;
    config.max_updates = args.max_updates;
    let outcome = run_stream(&points, &config)?;
    write_records_to_path(&args.out, &outcome.records)?;
    println!(
        "wrote {} records to {} ({} facilities, opening cost {})",
        outcome.records.len(),
        args.out.display(),
        outcome.facility_count,
        outcome.opening_cost
    );
    if outcome.audits_passed > 0 {
        println!("audits passed: {}", outcome.audits_passed);
    }
    Ok(())
}

fn cmd_compare(args: &CompareArgs) -> Result<(), HarnessError> {
    let a = read_records(&args.a)?;
    let b = read_records(&args.b)?;
    let comparison = compare_runs(&a, &b)?;
    println!("phi={} psi={}", comparison.phi, comparison.psi);
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), HarnessError> {
    if args.max_clients == 0 || args.max_clients > 12 {
        return Err(HarnessError::Config(format!(
            "--max-clients must be in [1, 12], got {}",
            args.max_clients
        )));
    }
    let points = args.source.load(args.seed)?;
    let mut config = RunConfig::new(Algorithm::Nice);
    config.epsilon = args.epsilon;
    config.mu = args.mu;
    config.seed = args.seed;
    config.window = args.max_clients;
    config.facility_fraction = args.facility_fraction;
    config.audit = AuditPolicy::All;
    config.equivalence_limit = Some(args.max_clients);
    config.track_opt_ratio = true;
    config.max_updates = args.max_updates;
    let outcome = run_stream(&points, &config)?;
    println!("[PASS] audits: {} updates all nice", outcome.audits_passed);
    println!(
        "[PASS] detector equivalence: {} exhaustive cross-checks agree",
        outcome.equivalence_checks
    );
    if let Some(ratio) = outcome.max_opt_ratio {
        println!("[PASS] max cost/optimum ratio observed: {ratio}");
    }
    Ok(())
}

fn main() -> ExitCode {
    // Flag and usage problems are input errors (exit 3); 2 is reserved for
    // verification failures.
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) =>
        {
            let _ = err.print();
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            let _ = err.print();
            return ExitCode::from(3);
        }
    };
    let result = match &cli.command {
        Command::Run(args) => cmd_run(args),
        Command::Compare(args) => cmd_compare(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
