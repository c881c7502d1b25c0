use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use extinctd::config::{parse_config, ExperimentConfig};
use extinctd::models::MODEL_NAMES;
use extinctd::runner::run_experiment;

/// Run extinction experiments on stochastic population, epidemic and
/// turbulence models.
#[derive(Parser)]
#[command(name = "extinctd", version)]
struct Cli {
    /// Worker threads for replica fan-out.
    #[arg(long, global = true, env = "EXTINCTD_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a config file.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Parse and validate a config file without running it.
    Validate {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Print the registered model names.
    ListModels,
}

#[derive(Args)]
struct Overrides {
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    replicas: Option<usize>,
}

fn load(path: &Path, o: Overrides) -> Result<ExperimentConfig, String> {
    let mut cfg = parse_config(path).map_err(|e| e.to_string())?;
    if let Some(s) = o.seed {
        cfg.seed = s;
    }
    if let Some(out) = o.out {
        cfg.output = out;
    }
    if let Some(r) = o.replicas {
        cfg.replicas = r;
    }
    cfg.validate().map_err(|e| e.to_string())?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::FAILURE;
        }
    }
    let result = match cli.command {
        Command::ListModels => {
            for name in MODEL_NAMES {
                println!("{name}");
            }
            Ok(())
        }
        Command::Validate { config, overrides } => load(&config, overrides).map(|cfg| {
            println!(
                "{}: ok ({} on {})",
                config.display(),
                cfg.experiment.as_str(),
                cfg.model.name()
            );
        }),
        Command::Run { config, overrides } => load(&config, overrides).and_then(|cfg| {
            let files = run_experiment(&cfg).map_err(|e| e.to_string())?;
            for f in files {
                println!("{}", f.display());
            }
            Ok(())
        }),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
