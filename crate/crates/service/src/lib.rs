//! HTTP/JSON API over steering sessions, with a server-sent event stream
//! for previews and assessments that arrive after a command returns.

pub mod api;
pub mod app;
pub mod error;
pub mod sse;

pub use api::{router, AppState};
pub use app::{build_manager, StartupError};
pub use error::ApiError;

use std::future::Future;
use std::net::SocketAddr;

/// Binds `addr` and serves until `shutdown` resolves. Returns the bound
/// address through `on_bound` so callers can use port 0.
pub async fn serve(
    state: AppState,
    addr: SocketAddr,
    on_bound: impl FnOnce(SocketAddr),
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), StartupError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|source| StartupError::Bind { addr, source })?;
    let local = listener
        .local_addr()
        .map_err(|source| StartupError::Bind { addr, source })?;
    on_bound(local);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|source| StartupError::Bind { addr: local, source })
}
