//! `sepsim`: analyze, simulate, compress, quantize, and cross-verify the
//! sparse separation accelerator model.

mod commands;
mod inputs;
mod reports;
mod weightfile;

use clap::{Parser, Subcommand};

use commands::{
    cmd_analyze, cmd_compress, cmd_quantize, cmd_simulate, cmd_verify, AnalyzeArgs, CompressArgs,
    QuantizeArgs, SimulateArgs, VerifyArgs, EXIT_CODE_HELP,
};

#[derive(Parser)]
#[command(
    name = "sepsim",
    version,
    about = "Software model of a sparse 1-D convolution accelerator for speech separation",
    after_help = EXIT_CODE_HELP
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Static weight and MAC accounting for a config.
    Analyze(AnalyzeArgs),
    /// Run the cycle-level array model on an input waveform.
    Simulate(SimulateArgs),
    /// Structured shrink, threshold pruning, and quantization to a new file.
    Compress(CompressArgs),
    /// Re-encode weights in a minifloat format and report the error.
    Quantize(QuantizeArgs),
    /// Cross-check schedules, reference executors, and the simulator.
    Verify(VerifyArgs),
}

fn main() {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Analyze(args) => cmd_analyze(args),
        Cmd::Simulate(args) => cmd_simulate(args),
        Cmd::Compress(args) => cmd_compress(args),
        Cmd::Quantize(args) => cmd_quantize(args),
        Cmd::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(code) => std::process::exit(code),
        Err(e) => {
            eprintln!("error: {}", e.msg);
            std::process::exit(e.code);
        }
    }
}
