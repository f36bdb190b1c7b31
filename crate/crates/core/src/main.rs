use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use rhoscope::cli::{
    cmd_element, cmd_matrix, cmd_oracle_check, cmd_sample, cmd_tables, load_config, CliError,
    CmdResult, FormatSel, Overrides,
};

/// Measure optical density-matrix elements in the photon-number basis with
/// two beam splitters, a phase-cycled coherent reference and three photon
/// counters.
#[derive(Parser)]
#[command(name = "rhoscope", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
struct OverrideArgs {
    /// Override the sampling seed (sampled mode).
    #[arg(long)]
    seed: Option<u64>,
    /// Override the shot count per phase setting (sampled mode).
    #[arg(long)]
    shots: Option<u64>,
    /// Override the signal Fock cutoff.
    #[arg(long)]
    cutoff: Option<usize>,
    /// Override detector efficiency at counter a.
    #[arg(long = "eta-a")]
    eta_a: Option<f64>,
    /// Override detector efficiency at counter b.
    #[arg(long = "eta-b")]
    eta_b: Option<f64>,
    /// Override detector efficiency at counter c.
    #[arg(long = "eta-c")]
    eta_c: Option<f64>,
    /// Override the probability mode: exact, smeared or sampled.
    #[arg(long, value_parser = ["exact", "smeared", "sampled"])]
    mode: Option<String>,
}

impl From<&OverrideArgs> for Overrides {
    fn from(args: &OverrideArgs) -> Self {
        Overrides {
            seed: args.seed,
            shots: args.shots,
            cutoff: args.cutoff,
            eta_a: args.eta_a,
            eta_b: args.eta_b,
            eta_c: args.eta_c,
            mode: args.mode.clone(),
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Measure a single element <n+lambda| rho |n>.
    Element {
        /// Experiment configuration (JSON).
        #[arg(long)]
        config: PathBuf,
        /// Column index N of the element.
        #[arg(long)]
        n: usize,
        /// Row offset lambda; the element row is N + lambda.
        #[arg(long)]
        lambda: usize,
        /// Directory for the element report.
        #[arg(long)]
        out: Option<PathBuf>,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Measure every element with N + lambda <= n_max and write files.
    Matrix {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; defaults to the config's out_dir, then `.`.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Matrix file format (the report is always JSON).
        #[arg(long, value_parser = ["json", "csv", "both"], default_value = "both")]
        format: String,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
    /// Reproduce the bundled golden tables and report elementwise diffs.
    Tables {
        /// Directory for computed tables and the diff report.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Override the symmetric detector efficiency of the lossy run.
        #[arg(long)]
        eta: Option<f64>,
    },
    /// Sample detector counts at one phase setting and export them as CSV.
    Sample {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = ".")]
        out: PathBuf,
        /// Phase of the reference in units of pi.
        #[arg(long, default_value_t = 0.0)]
        phi: f64,
        /// Shots to draw.
        #[arg(long, default_value_t = 1_000_000)]
        shots: u64,
        /// Seed for the draw.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Override the signal Fock cutoff.
        #[arg(long)]
        cutoff: Option<usize>,
        /// Override detector efficiency at counter a.
        #[arg(long = "eta-a")]
        eta_a: Option<f64>,
        /// Override detector efficiency at counter b.
        #[arg(long = "eta-b")]
        eta_b: Option<f64>,
        /// Override detector efficiency at counter c.
        #[arg(long = "eta-c")]
        eta_c: Option<f64>,
    },
    /// Cross-check closed-form probabilities against the brute-force oracle.
    OracleCheck {
        #[arg(long)]
        config: PathBuf,
        /// Largest count spread lambda to sweep.
        #[arg(long, default_value_t = 4)]
        lambda_max: usize,
        /// Largest signal count to sweep.
        #[arg(long, default_value_t = 5)]
        n_limit: usize,
        #[command(flatten)]
        overrides: OverrideArgs,
    },
}

fn run(cli: Cli) -> Result<CmdResult, CliError> {
    match cli.command {
        Command::Element {
            config,
            n,
            lambda,
            out,
            overrides,
        } => {
            let resolved = load_config(&config, &Overrides::from(&overrides))?;
            cmd_element(&resolved, n, lambda, out.as_deref())
        }
        Command::Matrix {
            config,
            out,
            format,
            overrides,
        } => {
            let resolved = load_config(&config, &Overrides::from(&overrides))?;
            let format = match format.as_str() {
                "json" => FormatSel::Json,
                "csv" => FormatSel::Csv,
                _ => FormatSel::Both,
            };
            let out = out
                .or_else(|| resolved.config.out_dir.as_ref().map(PathBuf::from))
                .unwrap_or_else(|| PathBuf::from("."));
            cmd_matrix(&resolved, &out, format)
        }
        Command::Tables { out, eta } => cmd_tables(out.as_deref(), eta),
        Command::Sample {
            config,
            out,
            phi,
            shots,
            seed,
            cutoff,
            eta_a,
            eta_b,
            eta_c,
        } => {
            let overrides = Overrides {
                cutoff,
                eta_a,
                eta_b,
                eta_c,
                ..Overrides::default()
            };
            let resolved = load_config(&config, &overrides)?;
            cmd_sample(&resolved, &out, phi, shots, seed)
        }
        Command::OracleCheck {
            config,
            lambda_max,
            n_limit,
            overrides,
        } => {
            let resolved = load_config(&config, &Overrides::from(&overrides))?;
            cmd_oracle_check(&resolved, lambda_max, n_limit)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(result) => {
            print!("{}", result.output);
            ExitCode::from(result.exit_code as u8)
        }
        Err(err) => {
            eprintln!("{}", err.machine_readable());
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
