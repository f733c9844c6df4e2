use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use tokensteer_core::config::Config;
use tracing_subscriber::EnvFilter;

#[derive(Debug, Parser)]
#[command(name = "tokensteer", about = "Token-level steering service for code completion")]
struct Args {
    /// TOML configuration file. `TOKENSTEER_*` variables override it.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Serve recorded traces from this directory instead of a live backend.
    #[arg(long)]
    scripted: Option<PathBuf>,
    /// Overrides `service.listen`.
    #[arg(long)]
    listen: Option<String>,
}

async fn shutdown_signal() {
    let _ = tokio::signal::ctrl_c().await;
    tracing::info!("shutting down");
}

#[tokio::main]
async fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(EnvFilter::try_from_default_env().unwrap_or_else(|_| EnvFilter::new("info")))
        .init();
    let args = Args::parse();
    let mut cfg = match Config::load(args.config.as_deref()) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("tokensteer: {e}");
            return ExitCode::from(2);
        }
    };
    if let Some(listen) = args.listen {
        cfg.service.listen = listen;
    }
    let addr = match cfg.listen_addr() {
        Ok(a) => a,
        Err(e) => {
            eprintln!("tokensteer: {e}");
            return ExitCode::from(2);
        }
    };
    let mgr = match tokensteer_service::build_manager(&cfg, args.scripted.as_deref()) {
        Ok(m) => m,
        Err(e) => {
            eprintln!("tokensteer: {e}");
            return ExitCode::from(2);
        }
    };
    let result = tokensteer_service::serve(
        mgr,
        addr,
        |bound| tracing::info!(%bound, "listening"),
        shutdown_signal(),
    )
    .await;
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tokensteer: {e}");
            ExitCode::FAILURE
        }
    }
}
