use std::io::Write;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use cfsampler::cli::{
    cmd_envelope, cmd_sample, cmd_table, cmd_validate, parse_dist_arg, CmdError, EnvelopeConfig,
    GridSpec, MRule, OutputFormat, SampleConfig, SeedSpec, TableConfig, TableFamily,
    ValidateConfig, DEFAULT_SEED,
};

/// Rejection sampler for integer-valued distributions driven by the
/// characteristic function.
#[derive(Parser)]
#[command(name = "cfsampler", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw variates and print them with acceptance statistics.
    Sample {
        /// Distribution as a JSON literal or @file.
        #[arg(long)]
        dist: String,
        /// Number of variates.
        #[arg(short = 'n', default_value_t = 1)]
        n: usize,
        /// 64-bit seed or 'random'.
        #[arg(long, default_value_t = SeedSpec::Fixed(DEFAULT_SEED))]
        seed: SeedSpec,
        /// Anchor rule: star, mean or an explicit integer.
        #[arg(long = "m-rule", default_value = "star")]
        m_rule: MRule,
        /// Output encoding.
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Absolute tolerance for inversion-based p.f. evaluation.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Reproduce an expected-complexity table.
    Table {
        /// Family: poisson, binomial or poisson-tweedie.
        #[arg(long)]
        family: TableFamily,
        /// 'paper' for the published grid, or @file with a JSON cell array.
        #[arg(long, default_value = "paper")]
        grid: GridSpec,
        /// Output encoding.
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
    },
    /// Run sanity, domination, goodness-of-fit and acceptance-rate checks.
    Validate {
        /// Distribution as a JSON literal or @file.
        #[arg(long)]
        dist: String,
        /// Sample size for the statistical checks.
        #[arg(short = 'n', default_value_t = 100_000)]
        n: usize,
        /// 64-bit seed or 'random'.
        #[arg(long, default_value_t = SeedSpec::Fixed(DEFAULT_SEED))]
        seed: SeedSpec,
        /// Anchor rule: star, mean or an explicit integer.
        #[arg(long = "m-rule", default_value = "star")]
        m_rule: MRule,
        /// Output encoding.
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Absolute tolerance for inversion-based p.f. evaluation.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
    /// Print the envelope setup (both anchors) as a diagnostic.
    Envelope {
        /// Distribution as a JSON literal or @file.
        #[arg(long)]
        dist: String,
        /// star, mean or an explicit integer (adds a third row).
        #[arg(long = "m-rule", default_value = "star")]
        m_rule: MRule,
        /// Output encoding.
        #[arg(long, default_value = "csv")]
        format: OutputFormat,
        /// Absolute tolerance for inversion-based p.f. evaluation.
        #[arg(long, default_value_t = 1e-10)]
        tol: f64,
    },
}

fn run() -> Result<(), CmdError> {
    let cli = Cli::parse();
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    match cli.command {
        Command::Sample { dist, n, seed, m_rule, format, tol } => {
            let config = SampleConfig { dist: parse_dist_arg(&dist)?, n, seed, m_rule, format, tol };
            cmd_sample(&config, &mut out)?;
        }
        Command::Table { family, grid, format } => {
            let config = TableConfig { family, grid, format };
            cmd_table(&config, &mut out)?;
        }
        Command::Validate { dist, n, seed, m_rule, format, tol } => {
            let config =
                ValidateConfig { dist: parse_dist_arg(&dist)?, n, seed, m_rule, format, tol };
            cmd_validate(&config, &mut out)?;
        }
        Command::Envelope { dist, m_rule, format, tol } => {
            let config = EnvelopeConfig { dist: parse_dist_arg(&dist)?, m_rule, format, tol };
            cmd_envelope(&config, &mut out)?;
        }
    }
    out.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    match run() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cfsampler: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
