use bqt_cli::args::{Cli, Command};
use bqt_cli::{compute, sweep, verify};
use clap::Parser;
use std::process::ExitCode;

fn main() -> ExitCode {
    // clap itself exits 2 on bad flags
    let cli = Cli::parse();
    let r = match &cli.command {
        Command::Compute(a) => compute::run(a),
        Command::Sweep(a) => sweep::run(a),
        Command::Verify(a) => verify::run(a),
    };
    match r {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("bqt: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
