use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use edgebarrier::harness::{
    run_experiment, ConfigLayer, ExperimentConfig, ExperimentKind, HarnessError, OutputFormat,
};

#[derive(Parser)]
#[command(name = "edgebarrier", version, about = "Barrier walks and edge experiments for sample covariance matrices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Monte Carlo extreme eigenvalues of the sample covariance.
    EdgesMc(Flags),
    /// Lower barrier walk.
    WalkLower(Flags),
    /// Upper barrier walk.
    WalkUpper(Flags),
    /// Strong tail-projection report.
    TailStp(Flags),
    /// Truncated one-dimensional marginal moments.
    TailWtpa(Flags),
    /// Moments of the off-diagonal quadratic form.
    Decoupling(Flags),
    /// Empirical spectrum against the Marchenko–Pastur law.
    MpCompare(Flags),
}

#[derive(Args)]
struct Flags {
    /// Flat TOML config; flags override its keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Sampler family, e.g. `gaussian` or `student_t:3`.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, conflicts_with = "rho")]
    m: Option<usize>,
    /// Aspect ratio n/m; m = round(n/rho).
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, value_parser = ["csv", "json"])]
    format: Option<String>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, value_delimiter = ',')]
    ranks: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    t_factors: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    n_grid: Option<Vec<usize>>,
    #[arg(long, value_delimiter = ',')]
    levels: Option<Vec<f64>>,
    /// Random directions for tail-wtpa.
    #[arg(long)]
    directions: Option<usize>,
    /// Projection rank for decoupling.
    #[arg(long)]
    rank: Option<usize>,
}

impl Flags {
    fn into_config(self, kind: ExperimentKind) -> Result<ExperimentConfig, HarnessError> {
        let file = match &self.config {
            Some(path) => ConfigLayer::from_file(path)?,
            None => ConfigLayer::default(),
        };
        let format = self.format.as_deref().map(str::parse::<OutputFormat>).transpose()?;
        let flags = ConfigLayer {
            experiment: None,
            model: self.model,
            n: self.n,
            m: self.m,
            rho: self.rho,
            eps: self.eps,
            trials: self.trials,
            seed: self.seed,
            out: self.out,
            format,
            threads: self.threads,
            ranks: self.ranks,
            t_factors: self.t_factors,
            n_grid: self.n_grid,
            levels: self.levels,
            directions: self.directions,
            rank: self.rank,
        };
        let mut merged = file.overlay(flags);
        // A flag for m or rho replaces both keys from the file.
        if self.m.is_some() {
            merged.rho = None;
        } else if self.rho.is_some() {
            merged.m = None;
        }
        ExperimentConfig::resolve(kind, merged)
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
    let (kind, flags) = match cli.command {
        Command::EdgesMc(f) => (ExperimentKind::EdgesMc, f),
        Command::WalkLower(f) => (ExperimentKind::WalkLower, f),
        Command::WalkUpper(f) => (ExperimentKind::WalkUpper, f),
        Command::TailStp(f) => (ExperimentKind::TailStp, f),
        Command::TailWtpa(f) => (ExperimentKind::TailWtpa, f),
        Command::Decoupling(f) => (ExperimentKind::Decoupling, f),
        Command::MpCompare(f) => (ExperimentKind::MpCompare, f),
    };
    let result = flags.into_config(kind).and_then(|config| run_experiment(&config));
    match result {
        Ok(summary) => {
            for path in &summary.files {
                println!("{}", path.display());
            }
            for failure in &summary.invariant_failures {
                eprintln!("invariant violated: {failure}");
            }
            ExitCode::from(summary.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("edgebarrier: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
