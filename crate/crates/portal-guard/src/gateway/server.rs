//! Serving a [`Gateway`] over HTTP/1.1 with axum.

use std::sync::Arc;
use std::time::{Duration, SystemTime};

use axum::body::{to_bytes, Body};
use axum::extract::{Request, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Router;
use tokio::net::TcpListener;

use super::Gateway;

/// Largest request body accepted (login posts are tiny).
pub const MAX_BODY_BYTES: usize = 64 * 1024;

pub const PURGE_INTERVAL: Duration = Duration::from_secs(10 * 60);

pub fn router(gateway: Arc<Gateway>) -> Router {
    Router::new().fallback(dispatch).with_state(gateway)
}

async fn dispatch(State(gateway): State<Arc<Gateway>>, request: Request) -> Response {
    let (parts, body) = request.into_parts();
    let Ok(body) = to_bytes(body, MAX_BODY_BYTES).await else {
        return StatusCode::PAYLOAD_TOO_LARGE.into_response();
    };
    let request = axum::http::Request::from_parts(parts, body.to_vec());
    // the stores do blocking file IO
    match tokio::task::spawn_blocking(move || gateway.handle_request(&request)).await {
        Ok(response) => response.map(Body::from),
        Err(err) => {
            tracing::error!(%err, "request handler panicked");
            StatusCode::INTERNAL_SERVER_ERROR.into_response()
        }
    }
}

/// Serves until `shutdown` resolves, purging idle sessions periodically.
pub async fn serve(
    listener: TcpListener,
    gateway: Arc<Gateway>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    let sessions = Arc::clone(gateway.sessions());
    let purger = tokio::spawn(async move {
        let mut ticks = tokio::time::interval(PURGE_INTERVAL);
        loop {
            ticks.tick().await;
            let sessions = Arc::clone(&sessions);
            match tokio::task::spawn_blocking(move || sessions.purge_expired(SystemTime::now()))
                .await
            {
                Ok(Ok(0)) => {}
                Ok(Ok(purged)) => tracing::debug!(purged, "purged idle sessions"),
                Ok(Err(err)) => tracing::warn!(%err, "session purge failed"),
                Err(err) => tracing::warn!(%err, "session purge panicked"),
            }
        }
    });
    let result = axum::serve(listener, router(gateway))
        .with_graceful_shutdown(shutdown)
        .await;
    purger.abort();
    result
}
