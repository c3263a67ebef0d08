//! Benchmark driver: runs the bundled experiments with a chosen integrator
//! (or a method comparison) and emits trajectory / energy-ledger CSV files.
//!
//! Exit codes: 0 success, 1 configuration error, 2 solver failure.
//! Diagnostics go to standard error; results and file names to standard out.

mod options;
mod run;

use clap::error::ErrorKind;
use clap::Parser;

fn main() {
    std::process::exit(real_main());
}

fn real_main() -> i32 {
    let cli = match options::Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return 0;
        }
        Err(err) => {
            eprintln!("error: {err}");
            return 1;
        }
    };
    let opts = match options::resolve(cli) {
        Ok(opts) => opts,
        Err(msg) => {
            eprintln!("error: {msg}");
            return 1;
        }
    };
    let outcome = match opts.compare.clone() {
        Some(methods) if methods.len() > 1 => run::run_compare(&opts, &methods),
        Some(methods) if methods.len() == 1 => {
            let mut single = opts.clone();
            single.method = methods[0].clone();
            run::run_compare(&single, &methods)
        }
        _ => run::run_single(&opts),
    };
    match outcome {
        Ok(()) => 0,
        Err(err) => {
            eprintln!("error: {}", err.message());
            err.exit_code()
        }
    }
}
