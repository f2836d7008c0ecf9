use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use subdiff_core::experiments::{run_experiment, write_outputs, ExperimentConfig, ExperimentKind};
use subdiff_core::Error;

#[derive(Parser)]
#[command(name = "subdiff-lab", version, about = "Seeded subgradient-convergence experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sup-gap versus sample size.
    RateM(Args),
    /// Sup-gap versus dimension at fixed sample size.
    RateD(Args),
    /// Pointwise gap versus ||x||.
    Peeling(Args),
    /// Stationary points of noiseless phase retrieval.
    Landscape(Args),
    /// Invariant suite; exits with 2 on any failed check.
    Verify(VerifyArgs),
}

#[derive(clap::Args)]
struct Args {
    /// JSON experiment config.
    #[arg(long)]
    config: PathBuf,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args)]
struct VerifyArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(clap::Args)]
struct Common {
    /// Output directory (defaults to the config's `output`, then `out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    threads: Option<usize>,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum, default_value_t = Verbosity::Normal)]
    verbosity: Verbosity,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Verbosity {
    Quiet,
    Normal,
}

const EXIT_CONFIG: u8 = 1;
const EXIT_BAND: u8 = 2;

fn load(path: &PathBuf, kind: ExperimentKind) -> Result<ExperimentConfig, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let cfg = ExperimentConfig::from_json(&text).map_err(|e| e.to_string())?;
    if cfg.kind != kind {
        return Err(format!(
            "config kind {} does not match subcommand {}",
            cfg.kind.name(),
            kind.name()
        ));
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (kind, config, common) = match cli.command {
        Command::RateM(a) => (ExperimentKind::RateM, Some(a.config), a.common),
        Command::RateD(a) => (ExperimentKind::RateD, Some(a.config), a.common),
        Command::Peeling(a) => (ExperimentKind::Peeling, Some(a.config), a.common),
        Command::Landscape(a) => (ExperimentKind::Landscape, Some(a.config), a.common),
        Command::Verify(a) => (ExperimentKind::Verify, a.config, a.common),
    };
    let mut cfg = match config {
        Some(path) => match load(&path, kind) {
            Ok(cfg) => cfg,
            Err(e) => {
                eprintln!("config error: {e}");
                return ExitCode::from(EXIT_CONFIG);
            }
        },
        None => ExperimentConfig::from_json(r#"{"kind": "verify", "seed": 0}"#).expect("default verify config"),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if common.threads == Some(0) {
        eprintln!("config error: --threads must be positive");
        return ExitCode::from(EXIT_CONFIG);
    }
    let out = common
        .out
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    let outcome = match run_experiment(&cfg, common.threads) {
        Ok(o) => o,
        Err(e @ Error::Config(_)) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Err(e) = write_outputs(&cfg, &outcome, &out) {
        eprintln!("error writing {}: {e}", out.display());
        return ExitCode::from(EXIT_CONFIG);
    }
    let loud = common.verbosity == Verbosity::Normal;
    if let Some(report) = &outcome.verify {
        for c in &report.checks {
            if loud || !c.passed {
                println!(
                    "{} {}::{} {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.module,
                    c.check,
                    c.detail
                );
            }
        }
        if !report.passed() {
            return ExitCode::from(EXIT_BAND);
        }
    } else if loud {
        for c in &outcome.cells {
            println!("cell {}: median {} (iqr {}, n {})", c.x, c.median, c.iqr, c.n);
        }
        if let Some(fit) = &outcome.fit {
            println!("slope {} intercept {} r2 {}", fit.slope, fit.intercept, fit.r2);
        }
        if let Some(s) = outcome.spearman {
            println!("spearman {s}");
        }
    }
    ExitCode::SUCCESS
}
