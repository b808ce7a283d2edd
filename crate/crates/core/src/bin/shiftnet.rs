use std::process::ExitCode;

use clap::Parser;
use shiftnet::cli::{run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if let shiftnet::Error::NumericalAbort(_) = e {
                eprintln!("hint: try a smaller --lr, a lower --order, or check the shift normalization");
            }
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
