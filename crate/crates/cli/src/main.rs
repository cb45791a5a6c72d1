mod args;
mod run;

use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::Parser;

use args::Cli;
use run::{run, thread_count, threads_flag, Failure, EXIT_OK, EXIT_USAGE};

fn execute() -> Result<i32, Failure> {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return Ok(code);
        }
    };
    let threads = thread_count(threads_flag(&cli.command))?;
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = threads {
        builder = builder.num_threads(n);
    }
    let pool = builder
        .build()
        .map_err(|e| Failure::usage(format!("cannot start worker threads: {e}")))?;
    pool.install(|| run(cli.command))
}

fn main() -> ExitCode {
    let code = match execute() {
        Ok(code) => code,
        Err(f) => {
            eprintln!("rgif: {}", f.message);
            f.code
        }
    };
    ExitCode::from(code as u8)
}
