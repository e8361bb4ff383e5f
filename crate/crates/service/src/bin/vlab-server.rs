use std::net::SocketAddr;
use std::path::PathBuf;

use clap::Parser;
use vlab_service::{serve, AppState};

/// Virtual lab session server.
#[derive(Parser)]
#[command(version)]
struct Args {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    /// Session snapshot: loaded at start if present, written on shutdown.
    #[arg(long)]
    snapshot: Option<PathBuf>,
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    tracing_subscriber::fmt()
        .with_env_filter(tracing_subscriber::EnvFilter::from_default_env())
        .init();
    let args = Args::parse();
    let state = match &args.snapshot {
        Some(p) if p.exists() => AppState::load_snapshot(p)?,
        _ => AppState::new(),
    };
    let listener = tokio::net::TcpListener::bind(args.addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    serve(listener, state.clone(), async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await?;
    if let Some(p) = &args.snapshot {
        state.save_snapshot(p).await?;
        tracing::info!(path = %p.display(), "snapshot written");
    }
    Ok(())
}
