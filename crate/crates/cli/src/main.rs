use std::io::Write;
use std::process::ExitCode;

use clap::Parser;
use honestci_cli::{error_json, run, Cli, Format};

fn main() -> ExitCode {
    // Usage errors exit with code 2 inside `parse`.
    let cli = Cli::parse();
    if let Some(n) = std::env::var("HONESTCI_THREADS").ok().and_then(|v| v.parse().ok()) {
        // Fails only if a pool already exists, which cannot happen here.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    match run(&cli) {
        Ok(out) => {
            let _ = std::io::stdout().write_all(out.as_bytes());
            ExitCode::SUCCESS
        }
        Err(e) => {
            if cli.format == Format::Json {
                let _ = std::io::stdout().write_all(error_json(&e).as_bytes());
            }
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
