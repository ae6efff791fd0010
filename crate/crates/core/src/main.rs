use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use occdepth::cli::{cmd_estimate, cmd_evaluate, cmd_scene, cmd_sweep, Manifest};

/// Log filter, e.g. `OCCDEPTH_LOG=debug`.
const LOG_ENV: &str = "OCCDEPTH_LOG";

#[derive(Parser)]
#[command(name = "occdepth", version, about = "Three-view disparity estimation with occlusion-aware costs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the centre-view disparity for every frame in the manifest.
    Estimate { manifest: PathBuf },
    /// Score previously estimated maps against the manifest's ground truth.
    Evaluate { manifest: PathBuf },
    /// Run the mode x lambda x precision grid and write results.csv.
    Sweep {
        manifest: PathBuf,
        /// Concurrent cells; overrides the manifest.
        #[arg(long)]
        workers: Option<usize>,
    },
    /// Render a synthetic scene spec to PGM files.
    Scene {
        spec: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "scene")]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> occdepth::Result<()> {
    match cli.command {
        Command::Estimate { manifest } => {
            for p in cmd_estimate(&Manifest::load(manifest)?)? {
                println!("{}", p.display());
            }
        }
        Command::Evaluate { manifest } => {
            cmd_evaluate(&Manifest::load(manifest)?)?;
        }
        Command::Sweep { manifest, workers } => {
            let out = cmd_sweep(&Manifest::load(manifest)?, workers)?;
            print!("{}", out.summary);
            println!("{}", out.csv.display());
        }
        Command::Scene { spec, seed, out } => {
            for p in cmd_scene(&spec, seed, &out)? {
                println!("{}", p.display());
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or(LOG_ENV, "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
