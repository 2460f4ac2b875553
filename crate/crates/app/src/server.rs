//! HTTP service exposing verification and question generation.

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use factcheck_core::datasets::Claim;
use factcheck_core::questiongen::generate_questions;
use factcheck_core::verification::{verify_claim, FailureKind, Method, Pipeline, PipelineError, Stage};
use serde::Deserialize;
use serde_json::{json, Value};

use crate::error::AppError;

#[derive(Debug)]
pub struct ApiError {
    kind: FailureKind,
    stage: Option<Stage>,
    message: String,
}

impl ApiError {
    fn validation(message: impl Into<String>) -> Self {
        Self {
            kind: FailureKind::Validation,
            stage: None,
            message: message.into(),
        }
    }

    pub fn status(&self) -> StatusCode {
        match self.kind {
            FailureKind::Validation => StatusCode::UNPROCESSABLE_ENTITY,
            FailureKind::Provider => StatusCode::BAD_GATEWAY,
            FailureKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        Self {
            kind: e.kind,
            stage: Some(e.stage),
            message: e.message,
        }
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        Self {
            kind: e.kind(),
            stage: None,
            message: e.to_string(),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        Self::validation(e.body_text())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({"kind": self.kind, "message": self.message});
        if let Some(stage) = self.stage {
            error["stage"] = json!(stage);
        }
        (self.status(), Json(json!({ "error": error }))).into_response()
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyRequest {
    pub claim: String,
    #[serde(default)]
    pub claim_id: Option<String>,
    /// `claim_only`, `human` (requires `questions`) or a backend id.
    #[serde(default)]
    pub method: Option<String>,
    #[serde(default)]
    pub questions: Option<Vec<String>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GenerateRequest {
    pub claim: String,
    pub backend: String,
    #[serde(default)]
    pub n: Option<usize>,
    #[serde(default)]
    pub claim_id: Option<String>,
}

fn claim(text: &str, id: Option<&str>) -> Result<Claim, ApiError> {
    Claim::new(id.unwrap_or("request"), text).map_err(|e| ApiError::validation(e.to_string()))
}

fn method_for(req: &VerifyRequest, claim_id: &str) -> Result<Method, ApiError> {
    let human = |qs: &Vec<String>| Method::HumanQuestions {
        name: "human_written".into(),
        questions: Arc::new(BTreeMap::from([(claim_id.to_string(), qs.clone())])),
    };
    match (req.method.as_deref(), &req.questions) {
        (None | Some("human"), Some(qs)) => Ok(human(qs)),
        (Some("human"), None) => Err(ApiError::validation("method \"human\" needs questions")),
        (None | Some("claim_only"), None) => Ok(Method::ClaimOnly),
        (Some(_), Some(_)) => Err(ApiError::validation("questions are only accepted with method \"human\"")),
        (Some(id), None) => Ok(Method::Backend(id.to_string())),
    }
}

async fn verify(
    State(pipeline): State<Arc<Pipeline>>,
    body: Result<Json<VerifyRequest>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body?;
    let claim = claim(&req.claim, req.claim_id.as_deref())?;
    let method = method_for(&req, &claim.id)?;
    let record = verify_claim(&claim, &method, &pipeline).await?;
    Ok(Json(serde_json::to_value(record).expect("record serializes")))
}

async fn generate(
    State(pipeline): State<Arc<Pipeline>>,
    body: Result<Json<GenerateRequest>, JsonRejection>,
) -> Result<Json<Value>, ApiError> {
    let Json(req) = body?;
    let claim = claim(&req.claim, req.claim_id.as_deref())?;
    let backend = pipeline
        .backend(&req.backend)
        .ok_or_else(|| ApiError::validation(format!("unknown backend {:?}", req.backend)))?;
    let n = req.n.unwrap_or(pipeline.settings.questions_per_claim);
    let set = generate_questions(&claim, backend, &pipeline.template, n)
        .await
        .map_err(|e| {
            let e = AppError::from(e);
            ApiError {
                kind: e.kind(),
                stage: Some(Stage::Generation),
                message: e.to_string(),
            }
        })?;
    Ok(Json(serde_json::to_value(set).expect("question set serializes")))
}

async fn health(State(pipeline): State<Arc<Pipeline>>) -> Json<Value> {
    Json(json!({
        "status": "ok",
        "providers": pipeline.provider_names(),
        "backends": pipeline.backends.keys().collect::<Vec<_>>(),
    }))
}

pub fn router(pipeline: Arc<Pipeline>) -> Router {
    Router::new()
        .route("/verify", post(verify))
        .route("/generate", post(generate))
        .route("/health", get(health))
        .with_state(pipeline)
}

/// Serves until ctrl-c.
pub async fn serve(pipeline: Arc<Pipeline>, addr: &str) -> Result<(), AppError> {
    let listener = tokio::net::TcpListener::bind(addr)
        .await
        .map_err(|e| AppError::validation(format!("cannot bind {addr}: {e}")))?;
    tracing::info!(addr = %listener.local_addr().map(|a| a.to_string()).unwrap_or_default(), "listening");
    axum::serve(listener, router(pipeline))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| AppError::internal(e.to_string()))
}
