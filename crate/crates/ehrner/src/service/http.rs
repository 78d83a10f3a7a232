use axum::extract::rejection::JsonRejection;
use axum::extract::{FromRequest, Path, Query, Request, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post, put};
use axum::Router;
use serde::{Deserialize, Serialize};

use super::{
    default_labels, AnnotationService, ApiError, ErrorKind, JobConfig, LabelDef, Status, UploadFile,
};
use crate::formats::{Format, SpanRecord};

/// Header carrying the shared access token, when one is configured.
pub const TOKEN_HEADER: &str = "x-ehrner-token";

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: &'a str,
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            ErrorKind::BadRequest => StatusCode::BAD_REQUEST,
            ErrorKind::Unauthorized => StatusCode::UNAUTHORIZED,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Unprocessable => StatusCode::UNPROCESSABLE_ENTITY,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            code: self.code,
            message: &self.message,
        };
        (status, axum::Json(body)).into_response()
    }
}

/// JSON extractor whose rejections use the service's error body.
struct Json<T>(T);

impl<S, T> FromRequest<S> for Json<T>
where
    axum::Json<T>: FromRequest<S, Rejection = JsonRejection>,
    S: Send + Sync,
{
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        axum::Json::<T>::from_request(req, state)
            .await
            .map(|axum::Json(v)| Json(v))
            .map_err(|e| ApiError::new(ErrorKind::BadRequest, "bad_request", e.body_text()))
    }
}

fn ok<T: Serialize>(value: T) -> Response {
    axum::Json(value).into_response()
}

#[derive(Deserialize)]
struct CreateProject {
    name: String,
    #[serde(default)]
    labels: Option<Vec<LabelDef>>,
    /// `"default"` selects the four clinical labels.
    #[serde(default)]
    template: Option<String>,
}

async fn create_project(State(svc): State<AnnotationService>, Json(body): Json<CreateProject>) -> Response {
    let labels = match (body.labels, body.template.as_deref()) {
        (Some(l), None) => l,
        (None, Some("default")) => default_labels(),
        (None, Some(other)) => {
            return ApiError::validation(format!("unknown template {other:?}")).into_response();
        }
        (None, None) => Vec::new(),
        (Some(_), Some(_)) => {
            return ApiError::validation("give labels or a template, not both").into_response();
        }
    };
    match svc.create_project(&body.name, labels) {
        Ok(p) => (StatusCode::CREATED, axum::Json(p)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_project(State(svc): State<AnnotationService>, Path(id): Path<String>) -> Response {
    svc.project(&id).map_or_else(IntoResponse::into_response, ok)
}

#[derive(Deserialize)]
struct Upload {
    files: Vec<UploadFile>,
}

async fn upload(State(svc): State<AnnotationService>, Path(id): Path<String>, Json(body): Json<Upload>) -> Response {
    match tokio::task::spawn_blocking(move || svc.upload_documents(&id, body.files)).await {
        Ok(Ok(r)) => (StatusCode::CREATED, axum::Json(r)).into_response(),
        Ok(Err(e)) => e.into_response(),
        Err(e) => ApiError::internal(e).into_response(),
    }
}

#[derive(Deserialize)]
struct ListQuery {
    status: Option<String>,
}

async fn list_documents(
    State(svc): State<AnnotationService>,
    Path(id): Path<String>,
    Query(q): Query<ListQuery>,
) -> Response {
    let status = match q.status.as_deref().filter(|s| !s.is_empty()).map(str::parse::<Status>) {
        Some(Err(e)) => return e.into_response(),
        Some(Ok(s)) => Some(s),
        None => None,
    };
    svc.documents(&id, status).map_or_else(IntoResponse::into_response, ok)
}

async fn get_document(State(svc): State<AnnotationService>, Path(id): Path<String>) -> Response {
    svc.document(&id).map_or_else(IntoResponse::into_response, ok)
}

#[derive(Deserialize)]
struct SaveSpans {
    spans: Vec<SpanRecord>,
    revision: u64,
    #[serde(default)]
    editor: Option<String>,
}

async fn save_spans(
    State(svc): State<AnnotationService>,
    Path(id): Path<String>,
    Json(body): Json<SaveSpans>,
) -> Response {
    svc.save_spans(&id, body.spans, body.revision, body.editor)
        .map_or_else(IntoResponse::into_response, ok)
}

async fn suggest(State(svc): State<AnnotationService>, Path(id): Path<String>) -> Response {
    match tokio::task::spawn_blocking(move || svc.suggest(&id)).await {
        Ok(r) => r.map_or_else(IntoResponse::into_response, ok),
        Err(e) => ApiError::internal(e).into_response(),
    }
}

#[derive(Deserialize)]
struct SetStatus {
    status: String,
}

async fn set_status(
    State(svc): State<AnnotationService>,
    Path(id): Path<String>,
    Json(body): Json<SetStatus>,
) -> Response {
    match body.status.parse::<Status>() {
        Ok(s) => svc.set_status(&id, s).map_or_else(IntoResponse::into_response, ok),
        Err(e) => e.into_response(),
    }
}

#[derive(Deserialize)]
struct ExportQuery {
    format: Option<String>,
    #[serde(default)]
    include_annotated: bool,
}

async fn export(State(svc): State<AnnotationService>, Path(id): Path<String>, Query(q): Query<ExportQuery>) -> Response {
    let format = match q.format.as_deref().unwrap_or("jsonl").parse::<Format>() {
        Ok(f) => f,
        Err(e) => return ApiError::new(ErrorKind::BadRequest, "bad_request", e).into_response(),
    };
    let content_type = match format {
        Format::Jsonl => "application/x-ndjson",
        Format::Columns => "text/tab-separated-values; charset=utf-8",
    };
    match svc.export(&id, format, q.include_annotated) {
        Ok(body) => ([(header::CONTENT_TYPE, content_type)], body).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn start_train(State(svc): State<AnnotationService>, Path(id): Path<String>, body: axum::body::Bytes) -> Response {
    let config = if body.iter().all(u8::is_ascii_whitespace) {
        JobConfig::default()
    } else {
        match serde_json::from_slice::<JobConfig>(&body) {
            Ok(c) => c,
            Err(e) => return ApiError::new(ErrorKind::BadRequest, "bad_request", e.to_string()).into_response(),
        }
    };
    match svc.start_train_job(&id, config) {
        Ok(job) => (StatusCode::ACCEPTED, axum::Json(job)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn get_job(State(svc): State<AnnotationService>, Path(id): Path<String>) -> Response {
    svc.job(&id).map_or_else(IntoResponse::into_response, ok)
}

async fn require_token(State(svc): State<AnnotationService>, headers: HeaderMap, req: Request, next: Next) -> Response {
    if let Some(token) = svc.token() {
        let given = headers.get(TOKEN_HEADER).and_then(|v| v.to_str().ok());
        if given != Some(token) {
            return ApiError::new(
                ErrorKind::Unauthorized,
                "unauthorized",
                format!("missing or wrong {TOKEN_HEADER} header"),
            )
            .into_response();
        }
    }
    next.run(req).await
}

async fn fallback() -> Response {
    ApiError::new(ErrorKind::NotFound, "not_found", "no such endpoint").into_response()
}

/// The HTTP API.
pub fn router(service: AnnotationService) -> Router {
    Router::new()
        .route("/projects", post(create_project))
        .route("/projects/{id}", get(get_project))
        .route("/projects/{id}/documents", post(upload).get(list_documents))
        .route("/projects/{id}/export", get(export))
        .route("/projects/{id}/train", post(start_train))
        .route("/documents/{id}", get(get_document))
        .route("/documents/{id}/spans", put(save_spans))
        .route("/documents/{id}/suggest", post(suggest))
        .route("/documents/{id}/status", post(set_status))
        .route("/jobs/{id}", get(get_job))
        .fallback(fallback)
        .layer(middleware::from_fn_with_state(service.clone(), require_token))
        .with_state(service)
}
