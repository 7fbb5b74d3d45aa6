use std::net::SocketAddr;
use std::sync::Arc;

use acbr::service::ApiSession;
use acbr::TrainedModel;
use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::routing::any;
use axum::Router;
use tower_http::services::ServeDir;

use crate::{CliError, CliResult, ServeArgs};

pub fn router(session: Arc<ApiSession>, static_dir: Option<&std::path::Path>) -> Router {
    let api = Router::new()
        .route("/health", any(dispatch))
        .route("/predict", any(dispatch))
        .route("/explain", any(dispatch))
        .route("/whatif", any(dispatch))
        .route("/curves/{feature}", any(dispatch));
    let app = match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(dispatch),
    };
    app.with_state(session)
}

async fn dispatch(State(session): State<Arc<ApiSession>>, method: Method, uri: Uri, body: Bytes) -> Response {
    let path = uri.path().to_string();
    let result = tokio::task::spawn_blocking(move || session.handle(method.as_str(), &path, &body)).await;
    match result {
        Ok(r) => {
            let status = StatusCode::from_u16(r.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
            let body = serde_json::to_string(&r.body).unwrap_or_else(|_| "null".into());
            (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
        }
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

pub fn serve(args: &ServeArgs, jobs: usize) -> CliResult {
    let model = TrainedModel::load(&args.model)?;
    if let Some(dir) = &args.static_dir {
        if !dir.is_dir() {
            return Err(CliError::Usage(format!("static directory `{}` does not exist", dir.display())));
        }
    }
    let addr: SocketAddr = args.bind.parse().map_err(|e| CliError::Usage(format!("bad bind address `{}`: {e}", args.bind)))?;
    let session = Arc::new(ApiSession::new(model, jobs));
    let app = router(session, args.static_dir.as_deref());

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .max_blocking_threads(jobs.max(2))
        .build()
        .map_err(|e| CliError::Internal(e.to_string()))?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| CliError::Internal(format!("cannot bind {addr}: {e}")))?;
        let local = listener.local_addr().map_err(|e| CliError::Internal(e.to_string()))?;
        println!("listening on http://{local}");
        use std::io::Write;
        let _ = std::io::stdout().flush();
        axum::serve(listener, app)
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
            })
            .await
            .map_err(|e| CliError::Internal(e.to_string()))
    })
}
