//! JSON-over-HTTP front end used by the designer UI.
//!
//! Bodies are parsed by hand so that malformed JSON (400) and well-formed but
//! invalid requests (422) both come back as problem documents with a code.

use std::net::SocketAddr;

use axum::body::Bytes;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::api::{self, Problem};
use crate::error::{CliError, Result};

pub fn router() -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/api/v1/dgor", post(dgor))
        .route("/api/v1/samplesize", post(samplesize))
        .route("/api/v1/coords", post(coords))
}

fn json_response(status: StatusCode, body: String, content_type: &'static str) -> Response {
    (status, [(header::CONTENT_TYPE, content_type)], body).into_response()
}

fn problem(err: CliError) -> Response {
    let status = match &err {
        CliError::Json(e) if e.is_syntax() || e.is_eof() => StatusCode::BAD_REQUEST,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    };
    let body = api::render_json(&Problem::new(status.as_u16(), &err))
        .unwrap_or_else(|_| format!("{{\"code\":\"{}\"}}\n", err.code()));
    json_response(status, body, "application/problem+json")
}

fn handle<Req, Resp, F>(body: &[u8], f: F) -> Response
where
    Req: DeserializeOwned,
    Resp: Serialize,
    F: FnOnce(&Req) -> std::result::Result<Resp, dgor_core::DgorError>,
{
    let run = || -> Result<String> {
        let req: Req = api::parse_request(body)?;
        api::render_json(&f(&req)?)
    };
    match run() {
        Ok(body) => json_response(StatusCode::OK, body, "application/json"),
        Err(e) => problem(e),
    }
}

async fn healthz() -> Response {
    json_response(StatusCode::OK, "{\"status\":\"ok\"}\n".into(), "application/json")
}

async fn dgor(body: Bytes) -> Response {
    handle(&body, api::compute)
}

async fn samplesize(body: Bytes) -> Response {
    handle(&body, api::samplesize)
}

async fn coords(body: Bytes) -> Response {
    handle(&body, api::coords)
}

/// Serves until Ctrl-C.
pub async fn serve(addr: &str) -> Result<()> {
    let bind_err = |source| CliError::BindFailure {
        addr: addr.to_string(),
        source,
    };
    let parsed: SocketAddr = addr.parse().map_err(|e| {
        bind_err(std::io::Error::new(std::io::ErrorKind::InvalidInput, e))
    })?;
    let listener = tokio::net::TcpListener::bind(parsed).await.map_err(bind_err)?;
    let local = listener.local_addr().map_err(bind_err)?;
    eprintln!("listening on http://{local}");
    axum::serve(listener, router())
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| CliError::io("<server>", e))
}
