use std::path::Path;
use std::sync::Arc;

use thiserror::Error;
use tokensteer_core::config::Config;
use tokensteer_core::session::SessionManager;
use tokensteer_core::wiring::{self, BuildError};

#[derive(Debug, Error)]
pub enum StartupError {
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: std::net::SocketAddr,
        source: std::io::Error,
    },
}

/// With `scripted` set, traces from that directory replace the HTTP
/// backend.
pub fn build_manager(cfg: &Config, scripted: Option<&Path>) -> Result<Arc<SessionManager>, StartupError> {
    Ok(Arc::new(wiring::manager(cfg, scripted)?))
}
