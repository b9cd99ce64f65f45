use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use log::{error, info};

use rfkpca::harness::{self, effective_config_path, HarnessError};
use rfkpca::{parse_config, HeldOut};

#[derive(Parser)]
#[command(
    name = "rfkpca",
    version,
    about = "Kernel PCA with random Fourier features"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the learner sweep and write the results CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the configured output path.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Report the fourth-moment spectrum, B_k, kappa and the implied feature budget.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed_offset: u64,
    },
    /// Parse and validate a config, printing the effective configuration.
    ValidateConfig {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_PARTIAL: u8 = 1;
const EXIT_CONFIG: u8 = 2;

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            error!("{e}");
            let code = match e {
                HarnessError::Config(_) | HarnessError::Format(_) => EXIT_CONFIG,
                _ => EXIT_PARTIAL,
            };
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<u8, HarnessError> {
    match cli.command {
        Command::ValidateConfig { config } => {
            let cfg = parse_config(&config)?;
            print!("{}", cfg.effective_toml());
            Ok(0)
        }
        Command::Run {
            config,
            out,
            workers,
            seed_offset,
        } => {
            let mut cfg = parse_config(&config)?;
            if let Some(out) = out {
                cfg.output = out;
            }
            if let Some(w) = workers {
                cfg.workers = w;
            }
            cfg.validate()?;
            let data = harness::load_dataset(&cfg)?;
            let prep = harness::prepare(&cfg, &data)?;
            if let Some(dir) = cfg.output.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)
                        .map_err(|source| dump_err(dir.to_path_buf(), source))?;
                }
            }
            let dump = effective_config_path(&cfg.output);
            fs::write(&dump, cfg.effective_toml())
                .map_err(|source| dump_err(dump.clone(), source))?;
            let summary = harness::run_experiment(&cfg, &prep, seed_offset, &HeldOut);
            harness::write_csv(&cfg.output, &summary)?;
            info!(
                "wrote {} rows to {} ({} failed cells)",
                summary.records.len(),
                cfg.output.display(),
                summary.failures.len()
            );
            Ok(if summary.failures.is_empty() {
                0
            } else {
                EXIT_PARTIAL
            })
        }
        Command::Diagnose {
            config,
            out,
            seed_offset,
        } => {
            let mut cfg = parse_config(&config)?;
            cfg.diagnose.seed += seed_offset;
            let data = harness::load_dataset(&cfg)?;
            let prep = harness::prepare(&cfg, &data)?;
            let report = harness::diagnose(&cfg, &prep)?;
            let text = report.render(20);
            print!("{text}");
            if let Some(out) = out {
                fs::write(&out, &text).map_err(|source| dump_err(out.clone(), source))?;
            }
            Ok(0)
        }
    }
}

fn dump_err(path: PathBuf, source: std::io::Error) -> HarnessError {
    HarnessError::Output {
        path,
        source: source.into(),
    }
}
