use std::process::ExitCode;

use clap::Parser;

fn main() -> ExitCode {
    let cli = match peano_cli::Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(peano_cli::EXIT_VALIDATION)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    peano_cli::dispatch(cli)
}
