//! Binary entry point; exit codes: 0 success, 1 usage, 2 runtime failure.

use clap::Parser;
use subrad_cli::cli::{parse_exit_code, run, Cli};

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let _ = err.print();
            std::process::exit(parse_exit_code(&err));
        }
    };
    if let Err(err) = run(cli) {
        eprintln!("error: {err}");
        std::process::exit(2);
    }
}
