//! `fdfnet` — train, run, and inspect the two-stage speech enhancer.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.

mod commands;
mod log;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use fdfnet_core::CoreError;

#[derive(Parser)]
#[command(name = "fdfnet", version, about = "Two-stage cross-spectrum speech enhancement")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one stage of the model.
    Train {
        /// 1 = magnitude network, 2 = refinement network (requires stage 1).
        #[arg(long)]
        stage: u8,
        #[arg(long)]
        config: PathBuf,
        /// Proceed despite a config fingerprint mismatch in the checkpoint.
        #[arg(long)]
        force: bool,
    },
    /// Enhance WAV files with a trained model.
    Enhance {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Defaults to `<input>.enhanced.wav`.
        #[arg(long)]
        output: Option<PathBuf>,
        /// Use the stateful streaming path instead of the offline pass.
        #[arg(long)]
        streaming: bool,
        /// Chunk size in samples for streaming mode.
        #[arg(long, default_value_t = 512)]
        chunk: usize,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Evaluate on the test split of a manifest.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Apply the clipped ideal-ratio-mask oracle instead of a model.
        #[arg(long)]
        oracle: bool,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        force: bool,
    },
    /// Report the structure of a checkpoint or configuration.
    Inspect {
        path: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn exit_code_for(err: &CoreError) -> u8 {
    match err {
        CoreError::Usage(_) | CoreError::Config(_) => 1,
        CoreError::Data(_) | CoreError::Io { .. } => 2,
        CoreError::Dsp(_) | CoreError::Nn(_) | CoreError::Numeric(_) => 3,
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Train { stage, config, force } => commands::train(stage, &config, force),
        Command::Enhance { input, checkpoint, output, streaming, chunk, config, force } => {
            commands::enhance(&input, &checkpoint, output.as_deref(), streaming, chunk, config.as_deref(), force)
        }
        Command::Eval { manifest, checkpoint, oracle, config, force } => {
            commands::eval(&manifest, checkpoint.as_deref(), oracle, config.as_deref(), force)
        }
        Command::Inspect { path, config } => commands::inspect(&path, config.as_deref()),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            let mut source = std::error::Error::source(&e);
            while let Some(s) = source {
                eprintln!("  caused by: {s}");
                source = s.source();
            }
            ExitCode::from(exit_code_for(&e))
        }
    }
}
