use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use lighthouse_core::codegen::CodegenError;
use lighthouse_core::kernelc::KernelError;
use lighthouse_core::matfeat::MatfeatError;
use lighthouse_core::mlselect::MlError;
use lighthouse_core::taxonomy::TaxonomyError;
use serde_json::{json, Value};
use thiserror::Error;

use crate::SCHEMA_VERSION;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("invalid value `{value}` for {name}")]
    Invalid { name: &'static str, value: String },
}

/// Failure of a store lookup.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum StoreError {
    #[error("unknown id `{0}`")]
    Unknown(String),
    #[error("`{0}` has expired or was already used")]
    Expired(String),
}

/// An error answer of the HTTP API.
#[derive(Debug, Error)]
pub enum ApiError {
    #[error("{0}")]
    BadRequest(String),
    #[error("{what} `{id}` not found")]
    NotFound { what: &'static str, id: String },
    #[error("{what} `{id}` has expired or was already used")]
    Gone { what: &'static str, id: String },
    #[error("upload exceeds the limit of {cap} bytes")]
    TooLarge { cap: u64 },
    #[error("{message}")]
    Domain { code: &'static str, message: String, detail: Option<Value> },
    #[error("internal error: {0}")]
    Internal(String),
}

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound { .. } => StatusCode::NOT_FOUND,
            ApiError::Gone { .. } => StatusCode::GONE,
            ApiError::TooLarge { .. } => StatusCode::PAYLOAD_TOO_LARGE,
            ApiError::Domain { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            ApiError::BadRequest(_) => "bad_request",
            ApiError::NotFound { .. } => "not_found",
            ApiError::Gone { .. } => "gone",
            ApiError::TooLarge { .. } => "payload_too_large",
            ApiError::Domain { code, .. } => code,
            ApiError::Internal(_) => "internal",
        }
    }

    pub fn domain(code: &'static str, message: impl ToString) -> Self {
        ApiError::Domain { code, message: message.to_string(), detail: None }
    }

    pub fn store(what: &'static str, e: StoreError) -> Self {
        match e {
            StoreError::Unknown(id) => ApiError::NotFound { what, id },
            StoreError::Expired(id) => ApiError::Gone { what, id },
        }
    }

    pub fn body(&self) -> Value {
        let mut error = json!({
            "status": self.status().as_u16(),
            "code": self.code(),
            "message": self.to_string(),
        });
        if let ApiError::Domain { detail: Some(d), .. } = self {
            error["detail"] = d.clone();
        }
        json!({ "schema_version": SCHEMA_VERSION, "error": error })
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if matches!(self, ApiError::Internal(_)) {
            tracing::error!("{self}");
        }
        (self.status(), Json(self.body())).into_response()
    }
}

impl From<TaxonomyError> for ApiError {
    fn from(e: TaxonomyError) -> Self {
        match e {
            TaxonomyError::UnknownLibrary(id) => ApiError::NotFound { what: "library", id },
            TaxonomyError::UnknownRoutine(id) => ApiError::NotFound { what: "routine", id },
            TaxonomyError::NoTree(lib) => ApiError::NotFound { what: "guided-search tree", id: lib.to_string() },
            TaxonomyError::InvalidOption { ref given, ref valid } => ApiError::Domain {
                code: "invalid_option",
                detail: Some(json!({ "given": given, "valid": valid })),
                message: e.to_string(),
            },
            TaxonomyError::Finished => ApiError::domain("search_finished", e),
            TaxonomyError::AtRoot => ApiError::domain("at_first_question", e),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

impl From<MatfeatError> for ApiError {
    fn from(e: MatfeatError) -> Self {
        match e {
            MatfeatError::Io(io) => ApiError::Internal(io.to_string()),
            other => ApiError::domain("matrix_error", other),
        }
    }
}

impl From<MlError> for ApiError {
    fn from(e: MlError) -> Self {
        match e {
            MlError::MissingFeature(ref f) => ApiError::Domain {
                code: "missing_feature",
                detail: Some(json!({ "missing": [f] })),
                message: e.to_string(),
            },
            MlError::Io(io) => ApiError::Internal(io.to_string()),
            other => ApiError::domain("model_error", other),
        }
    }
}

impl From<CodegenError> for ApiError {
    fn from(e: CodegenError) -> Self {
        match e {
            CodegenError::UnknownLanguage(_) | CodegenError::UnknownKind(_) => ApiError::BadRequest(e.to_string()),
            CodegenError::MissingRecommendation
            | CodegenError::UnexpectedRecommendation
            | CodegenError::UnknownMethod(_) => ApiError::domain("bundle_error", e),
            CodegenError::Taxonomy(t) => t.into(),
            other => ApiError::Internal(other.to_string()),
        }
    }
}

/// One entry of the error list returned for a rejected kernel script.
pub fn kernel_error_entry(e: &KernelError) -> Value {
    let (kind, line, column, message) = match e {
        KernelError::Syntax { line, column, message } => ("syntax", Some(*line), Some(*column), message.clone()),
        KernelError::TypeConflict { line, column, message } => {
            ("type_conflict", Some(*line), Some(*column), message.clone())
        }
        KernelError::Ambiguous(_) => ("ambiguous", None, None, e.to_string()),
        KernelError::UnknownSeedVariable(_) | KernelError::BadSeed(_) => ("seed", None, None, e.to_string()),
        KernelError::IntentConflict { .. } => ("intent_conflict", None, None, e.to_string()),
        _ => ("internal", None, None, e.to_string()),
    };
    let mut v = json!({ "kind": kind, "message": message });
    if let (Some(l), Some(c)) = (line, column) {
        v["line"] = json!(l);
        v["column"] = json!(c);
    }
    if let KernelError::Ambiguous(vars) = e {
        v["variables"] = json!(vars);
    }
    v
}

impl From<KernelError> for ApiError {
    fn from(e: KernelError) -> Self {
        ApiError::Domain {
            code: "kernel_error",
            message: e.to_string(),
            detail: Some(json!({ "errors": [kernel_error_entry(&e)] })),
        }
    }
}
