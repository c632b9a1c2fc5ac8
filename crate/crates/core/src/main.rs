use std::process::ExitCode;

use clap::Parser;
use pastel::cli::{init_threads, run_parsed, Cli};

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().collect();
    // Help, version and usage errors are reported by clap itself (exit 2 on misuse).
    let cli = Cli::parse_from(&argv);
    match init_threads().and_then(|()| run_parsed(&cli, argv)) {
        Ok(_) => ExitCode::SUCCESS,
        Err(e) => {
            let body = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{body}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
