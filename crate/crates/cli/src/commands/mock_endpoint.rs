use std::path::PathBuf;

use anyhow::Context;
use muscap_serve::mock::{serve_mock, MockScript};

#[derive(clap::Args)]
pub struct Args {
    /// Directory of `<key>.txt` replies (`default.txt` answers unmatched requests).
    #[arg(long)]
    replies: PathBuf,
    #[arg(long, default_value = "127.0.0.1:8000")]
    bind: String,
    /// Answer the first N requests with `--fail-status`.
    #[arg(long, default_value_t = 0)]
    fail_first: usize,
    #[arg(long, default_value_t = 503)]
    fail_status: u16,
    /// Write the bound address to this file once listening.
    #[arg(long)]
    addr_file: Option<PathBuf>,
}

pub fn run(args: Args) -> anyhow::Result<()> {
    let mut script = MockScript::from_dir(&args.replies)
        .with_context(|| format!("reading replies from {}", args.replies.display()))?;
    script.fail_first = args.fail_first;
    script.fail_status = args.fail_status;
    let replies = script.replies.len();
    super::runtime()?.block_on(async move {
        let (addr, handle) = serve_mock(&args.bind, script).await?;
        tracing::info!(%addr, replies, "mock endpoint listening");
        println!("{addr}");
        if let Some(p) = &args.addr_file {
            std::fs::write(p, addr.to_string())?;
        }
        tokio::signal::ctrl_c().await?;
        tracing::info!(requests = handle.request_count(), "mock endpoint stopping");
        anyhow::Ok(())
    })
}
