use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use nlgame_reports::{exit, run, Cli};

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { exit::PARSE as u8 } else { 0 });
        }
    };
    let (code, stdout, stderr) = run(&cli);
    let _ = std::io::stdout().write_all(stdout.as_bytes());
    let _ = std::io::stderr().write_all(stderr.as_bytes());
    ExitCode::from(code as u8)
}
