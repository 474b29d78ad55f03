use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use phaselab::error::{HarnessError, EXIT_CONFIG, EXIT_OK, EXIT_RUNTIME, EXIT_VERIFY};
use phaselab::verify::{run_suite, Suite};
use phaselab::{ExperimentConfig, Kind};

#[derive(Parser)]
#[command(name = "phaselab", version, about = "Phaseless recovery experiments")]
struct Cli {
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides `output_path` from the config.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    Recover(RunArgs),
    Stability(RunArgs),
    Injectivity(RunArgs),
    Embed(RunArgs),
    Smallball(RunArgs),
    Chaos(RunArgs),
    Adversarial(RunArgs),
    Sweep(RunArgs),
    /// Run the acceptance checks.
    Verify {
        #[arg(long, value_enum, default_value = "fast")]
        suite: Suite,
    },
}

fn run_experiment(kind: Kind, args: &RunArgs) -> Result<(), HarnessError> {
    let cfg = ExperimentConfig::load(&args.config)?;
    let art = phaselab::run(kind, &cfg, args.out.as_deref())?;
    println!("{}", art.csv.display());
    println!("{}", art.summary.display());
    println!("{}", art.metadata.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_CONFIG as u8);
        }
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(t).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_RUNTIME as u8);
        }
    }
    let (kind, args) = match &cli.command {
        Command::Verify { suite } => {
            let report = run_suite(*suite);
            for c in &report.criteria {
                println!("{c}");
            }
            let code = if report.passed() { EXIT_OK } else { EXIT_VERIFY };
            return ExitCode::from(code as u8);
        }
        Command::Recover(a) => (Kind::Recover, a),
        Command::Stability(a) => (Kind::Stability, a),
        Command::Injectivity(a) => (Kind::Injectivity, a),
        Command::Embed(a) => (Kind::Embed, a),
        Command::Smallball(a) => (Kind::Smallball, a),
        Command::Chaos(a) => (Kind::Chaos, a),
        Command::Adversarial(a) => (Kind::Adversarial, a),
        Command::Sweep(a) => (Kind::Sweep, a),
    };
    match run_experiment(kind, args) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
