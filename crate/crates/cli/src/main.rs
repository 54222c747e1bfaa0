//! `scenelab`: serve scenes, import them, benchmark detectors, export and
//! replay examination sessions, run the stub detector on one image.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 usage error.

mod args;
mod bench;
mod detect;
mod import;
mod serve;
mod session;

use std::process::ExitCode;

use clap::Parser;
use tracing_subscriber::EnvFilter;

use args::{Cli, Command};

/// A failure already reported in full (e.g. a replay diff); exit 1 without
/// printing it again.
#[derive(Debug)]
pub struct Reported;

impl std::fmt::Display for Reported {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("failed")
    }
}

impl std::error::Error for Reported {}

fn init_logging(default: &str) {
    let filter = EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new(default));
    let _ = tracing_subscriber::fmt()
        .with_env_filter(filter)
        .with_writer(std::io::stderr)
        .try_init();
}

fn main() -> ExitCode {
    // clap prints usage errors to stderr and exits 2; --help exits 0
    let cli = Cli::parse();
    init_logging(match cli.command {
        Command::Serve(_) | Command::Worker(_) => "info",
        _ => "warn",
    });
    let runtime = match tokio::runtime::Builder::new_multi_thread().enable_all().build() {
        Ok(rt) => rt,
        Err(e) => {
            eprintln!("error: cannot start the async runtime: {e}");
            return ExitCode::from(1);
        }
    };
    let result = runtime.block_on(async move {
        match cli.command {
            Command::Serve(a) => serve::serve(a).await,
            Command::Worker(a) => serve::worker(a).await,
            Command::ImportScene(a) => import::import_scene(a),
            Command::Bench(a) => bench::bench(a).await,
            Command::Export(a) => session::export(a),
            Command::Replay(a) => session::replay(a),
            Command::Detect(a) => detect::detect(a).await,
        }
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if e.is::<Reported>() => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
