use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use fluxnoise::commands::{self, CommandOptions};
use fluxnoise::config::Format;

#[derive(Parser)]
#[command(name = "fluxnoise", version, about = "Flux-noise spectra of relaxing impurity spins")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Disorder-averaged spin-noise spectra per field
    Spectrum(Args),
    /// Device flux noise of the configured ensemble
    Flux(Args),
    /// Bloch, Monte Carlo and quadrature verification tables
    Oracle(Args),
    /// Fit observations and select the direct-relaxation exponent
    Fit(Args),
    /// Local log-slope table of spectra
    Slope(Args),
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Csv,
    Json,
}

#[derive(clap::Args)]
struct Args {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, value_enum)]
    format: Option<FormatArg>,
    #[arg(long)]
    threads: Option<usize>,
    /// Observations CSV for `fit`, spectrum CSV for `slope`
    #[arg(long)]
    input: Option<PathBuf>,
}

type Runner = fn(&CommandOptions) -> fluxnoise::Result<Vec<PathBuf>>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (run, args): (Runner, Args) = match cli.command {
        Command::Spectrum(a) => (commands::spectrum, a),
        Command::Flux(a) => (commands::flux, a),
        Command::Oracle(a) => (commands::oracle, a),
        Command::Fit(a) => (commands::fit, a),
        Command::Slope(a) => (commands::slope, a),
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: --threads: {e}");
            return ExitCode::from(2);
        }
    }
    let opts = CommandOptions {
        config: args.config,
        out: args.out,
        seed: args.seed,
        format: args.format.map(|f| match f {
            FormatArg::Csv => Format::Csv,
            FormatArg::Json => Format::Json,
        }),
        input: args.input,
    };
    match run(&opts) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
