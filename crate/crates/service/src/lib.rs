//! HTTP/JSON front end over [`compare_kit::api`].
//!
//! Every POST route takes the same body the CLI reads from a file and
//! answers with an [`ApiEnvelope`]. Handlers hold no state beyond the
//! configuration read at startup.

use std::net::SocketAddr;
use std::time::Instant;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use compare_kit::api::{dispatch, ApiEnvelope, ApiError, Limits, Operation, VERSION};
use compare_kit::scenario::ErrorCode;
use serde_json::json;
use tower_http::cors::{AllowOrigin, CorsLayer};
use tower_http::trace::TraceLayer;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Config {
    pub bind_addr: SocketAddr,
    pub max_sim_draws: u64,
    /// `*` allows any origin; unset disables CORS headers.
    pub cors_origin: Option<String>,
    pub log_level: String,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            bind_addr: SocketAddr::from(([127, 0, 0, 1], 8080)),
            max_sim_draws: Limits::default().max_sim_draws,
            cors_origin: None,
            log_level: "info".into(),
        }
    }
}

impl Config {
    /// Reads BIND_ADDR, MAX_SIM_DRAWS, CORS_ORIGIN and LOG_LEVEL.
    pub fn from_env() -> Result<Self, String> {
        Self::from_lookup(|k| std::env::var(k).ok())
    }

    pub fn from_lookup(get: impl Fn(&str) -> Option<String>) -> Result<Self, String> {
        let mut c = Config::default();
        if let Some(v) = get("BIND_ADDR") {
            c.bind_addr = v.parse().map_err(|e| format!("BIND_ADDR `{v}`: {e}"))?;
        }
        if let Some(v) = get("MAX_SIM_DRAWS") {
            // Accept 1e9 as well as 1000000000.
            let x: f64 = v.trim().parse().map_err(|e| format!("MAX_SIM_DRAWS `{v}`: {e}"))?;
            if !(x >= 1.0 && x.is_finite()) {
                return Err(format!("MAX_SIM_DRAWS `{v}`: must be a positive count"));
            }
            c.max_sim_draws = x as u64;
        }
        c.cors_origin = get("CORS_ORIGIN").filter(|s| !s.is_empty());
        if let Some(v) = get("LOG_LEVEL") {
            c.log_level = v;
        }
        Ok(c)
    }

    pub fn limits(&self) -> Limits {
        Limits {
            max_sim_draws: self.max_sim_draws,
        }
    }
}

pub fn router(config: &Config) -> Router {
    let limits = config.limits();
    let mut app = Router::new().route("/healthz", get(healthz));
    for op in Operation::ALL {
        app = app.route(op.path(), post(move |State(l): State<Limits>, body: Bytes| handle(op, l, body)));
    }
    let mut app = app.fallback(not_found).with_state(limits).layer(TraceLayer::new_for_http());
    if let Some(origin) = &config.cors_origin {
        let allow = if origin == "*" {
            AllowOrigin::any()
        } else {
            match HeaderValue::from_str(origin) {
                Ok(v) => AllowOrigin::exact(v),
                Err(_) => {
                    tracing::warn!(%origin, "ignoring unparsable CORS_ORIGIN");
                    return app;
                }
            }
        };
        app = app.layer(
            CorsLayer::new()
                .allow_origin(allow)
                .allow_methods([Method::GET, Method::POST])
                .allow_headers([header::CONTENT_TYPE]),
        );
    }
    app
}

async fn healthz() -> Json<serde_json::Value> {
    Json(json!({ "status": "ok", "version": VERSION }))
}

async fn not_found() -> Response {
    let err = ApiError::new(ErrorCode::Validation, Some("path"), "no such endpoint");
    envelope(StatusCode::NOT_FOUND, ApiEnvelope::new(new_request_id(), 0, Err(err)))
}

async fn handle(op: Operation, limits: Limits, body: Bytes) -> Response {
    let start = Instant::now();
    let request_id = new_request_id();
    let outcome = match std::str::from_utf8(&body) {
        Err(e) => {
            let mut err = ApiError::new(ErrorCode::Validation, Some("body"), format!("body is not UTF-8: {e}"));
            err.malformed = true;
            Err(err)
        }
        Ok(text) => {
            let text = text.to_string();
            // The engine is CPU-bound; keep it off the async workers.
            match tokio::task::spawn_blocking(move || dispatch(op, &text, &limits)).await {
                Ok(r) => r,
                Err(e) => Err(ApiError::new(ErrorCode::Internal, None, format!("handler failed: {e}"))),
            }
        }
    };
    let status = match &outcome {
        Ok(_) => StatusCode::OK,
        Err(e) => StatusCode::from_u16(e.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR),
    };
    if let Err(e) = &outcome {
        tracing::debug!(path = op.path(), code = e.code.as_str(), field = ?e.field, "request failed");
    }
    let elapsed_ms = start.elapsed().as_millis() as u64;
    envelope(status, ApiEnvelope::new(request_id, elapsed_ms, outcome))
}

fn envelope(status: StatusCode, env: ApiEnvelope) -> Response {
    (status, Json(env)).into_response()
}

fn new_request_id() -> String {
    uuid::Uuid::new_v4().to_string()
}

pub fn init_tracing(level: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(level).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    let _ = tracing_subscriber::fmt().with_env_filter(filter).try_init();
}

/// Binds and serves until ctrl-c.
pub async fn serve(config: Config) -> std::io::Result<()> {
    let app = router(&config);
    let listener = tokio::net::TcpListener::bind(config.bind_addr).await?;
    tracing::info!(addr = %listener.local_addr()?, version = VERSION, "listening");
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

/// Blocking entry point used by the binaries.
pub fn run(config: Config) -> std::io::Result<()> {
    init_tracing(&config.log_level);
    tokio::runtime::Builder::new_multi_thread().enable_all().build()?.block_on(serve(config))
}
