use std::process::ExitCode;

use clap::Parser;
use dimprune::cli::{self, Cli};

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!(
                "{}",
                serde_json::json!({
                    "error": { "kind": e.kind(), "message": e.to_string() }
                })
            );
            ExitCode::FAILURE
        }
    }
}
