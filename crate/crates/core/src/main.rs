use std::process::ExitCode;

use clap::Parser;
use invoice_eval::cli::{run, Cli, EXIT_INPUT, EXIT_INTERNAL};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { EXIT_INPUT as u8 } else { 0 });
        }
    };
    let code = std::panic::catch_unwind(|| run(&cli, &mut std::io::stdout().lock(), &mut std::io::stderr().lock()))
        .unwrap_or(EXIT_INTERNAL);
    ExitCode::from(code as u8)
}
