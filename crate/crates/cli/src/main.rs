//! `muscap`: caption music clips from thumbnails, featurize, train the dual
//! encoder, evaluate retrieval, search, and run the annotation service.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use crate::config::Config;

#[derive(Parser)]
#[command(name = "muscap", version, about = "Music caption dataset and retrieval toolkit")]
struct Cli {
    /// TOML config file.
    #[arg(long, global = true, env = "MUSCAP_CONFIG")]
    config: Option<PathBuf>,
    /// Root seed (overrides the config file).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Log level filter, e.g. `info` or `muscap_core=debug`.
    #[arg(long, global = true, env = "MUSCAP_LOG", default_value = "info")]
    log: String,
    /// Emit logs as JSON lines.
    #[arg(long, global = true)]
    log_json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate captions for a manifest of clips via a vision-language endpoint.
    Caption(commands::caption::Args),
    /// Compute text and audio feature files for a dataset.
    Featurize(commands::featurize::Args),
    /// Split caption records into train/validation/test files.
    Split(commands::split::Args),
    /// Train the dual encoder and write checkpoints plus a loss CSV.
    Train(commands::train::Args),
    /// Evaluate retrieval per genre, or average a stored per-genre report.
    Eval(commands::eval::Args),
    /// Run one text query against the audio index.
    Search(commands::search::Args),
    /// Start the HTTP API (and static UI, if configured).
    Serve(commands::serve::Args),
    /// Aggregate a human-evaluation rating log.
    HumevalReport(commands::humeval_report::Args),
    /// Run a scripted chat-completions endpoint for offline testing.
    MockEndpoint(commands::mock_endpoint::Args),
    /// Write a small synthetic dataset whose captions and audio are aligned.
    Synth(commands::synth::Args),
}

fn init_logging(filter: &str, json: bool) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| "info".into());
    let builder = tracing_subscriber::fmt().with_env_filter(filter).with_writer(std::io::stderr);
    if json {
        builder.json().init();
    } else {
        builder.init();
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.log, cli.log_json);
    let mut cfg = match Config::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(1);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let result = match cli.command {
        Command::Caption(a) => commands::caption::run(a, &cfg),
        Command::Featurize(a) => commands::featurize::run(a, &cfg),
        Command::Split(a) => commands::split::run(a, &cfg),
        Command::Train(a) => commands::train::run(a, &cfg),
        Command::Eval(a) => commands::eval::run(a, &cfg),
        Command::Search(a) => commands::search::run(a, &cfg),
        Command::Serve(a) => commands::serve::run(a, &cfg),
        Command::HumevalReport(a) => commands::humeval_report::run(a),
        Command::MockEndpoint(a) => commands::mock_endpoint::run(a),
        Command::Synth(a) => commands::synth::run(a, &cfg),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
