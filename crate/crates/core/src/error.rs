//! Error type shared by every audit module, plus the stable wire form used by
//! the HTTP service and the CLI.

use serde::{Deserialize, Serialize};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    // ingestion
    #[error("input file is empty")]
    EmptyFile,
    #[error("column `{column}` is not present in the CSV header")]
    MissingColumn { column: String },
    #[error("column `{column}` row {row}: value `{value}` is not 0 or 1")]
    NonBinaryValue {
        column: String,
        row: usize,
        value: String,
    },
    #[error("column `{column}` row {row}: missing value")]
    MissingValue { column: String, row: usize },
    #[error("column `{column}` row {row}: score `{value}` is not a real in [0,1]")]
    InvalidScore {
        column: String,
        row: usize,
        value: String,
    },
    #[error("sensitive attribute `{attribute}` has only one group present")]
    EmptyGroup { attribute: String },
    #[error("invalid column schema: {0}")]
    InvalidSchema(String),
    #[error("malformed CSV: {0}")]
    Csv(String),
    #[error("unknown sensitive attribute `{0}`")]
    UnknownAttribute(String),

    // metrics
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("{metric} is undefined on the full dataset for `{attribute}`")]
    MetricUndefined { metric: String, attribute: String },
    #[error("bootstrap redraw budget exhausted after {attempts} attempts ({accepted} usable replicates)")]
    TooManyDegenerateReplicates { attempts: usize, accepted: usize },

    // risk assessment
    #[error("unanswered survey items: {}", .0.join(", "))]
    MissingResponse(Vec<String>),
    #[error("survey item `{0}` answered more than once")]
    DuplicateResponse(String),
    #[error("response references unknown survey item `{0}`")]
    UnknownItem(String),
    #[error("survey item `{item_id}`: rating {rating} outside 1..=5")]
    InvalidRating { item_id: String, rating: i64 },
    #[error("domains without a score: {}", .0.join(", "))]
    IncompleteDomains(Vec<String>),
    #[error("value {0} lies outside the risk scale [1,5]")]
    OutOfRange(f64),
    #[error("invalid question bank: {0}")]
    InvalidQuestionBank(String),

    // configuration
    #[error("task `{0}` is not supported; only binary-classification is audited")]
    UnsupportedTask(String),
    #[error("invalid sector policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid threshold override for {metric}: {reason}")]
    InvalidOverride { metric: String, reason: String },
    #[error("invalid threshold table: {0}")]
    InvalidThresholdTable(String),

    // scoring
    #[error("metric vectors do not line up: {0}")]
    VectorMismatch(String),
    #[error("bias index list is empty")]
    EmptyList,
    #[error("missing metric result for {metric} on `{attribute}`")]
    MissingResult { metric: String, attribute: String },

    // session workflow
    #[error("stage order violation: session is at {current}, cannot complete {requested}")]
    StageOrderViolation { current: String, requested: String },
    #[error("stage {0} has not been completed")]
    StageNotCompleted(String),
    #[error("payload rejected: {0}")]
    PayloadValidation(String),
    #[error("unsupported checkpoint schema_version {found} (expected {expected})")]
    SchemaVersionMismatch { found: String, expected: u32 },
    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),
    #[error("session is not complete (current stage {0})")]
    SessionIncomplete(String),
    #[error("session `{0}` not found")]
    SessionNotFound(String),
    #[error("dataset with fingerprint {0} must be uploaded again before evaluation")]
    DatasetRequired(String),

    // reporting
    #[error("unknown report format `{0}`")]
    UnknownFormat(String),
    #[error("unknown plot kind `{0}`")]
    UnknownPlotKind(String),
    #[error("payload missing: {0}")]
    PayloadMissing(String),

    // fixtures
    #[error("degenerate synthetic spec: {0}")]
    DegenerateSpec(String),

    #[error("invalid JSON: {0}")]
    Json(String),
    #[error("I/O error: {0}")]
    Io(String),
}

/// Broad class of an error, which decides the HTTP status and CLI exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Validation,
    NotFound,
    Conflict,
    Domain,
    Internal,
}

impl ErrorClass {
    pub fn http_status(self) -> u16 {
        match self {
            ErrorClass::Validation => 400,
            ErrorClass::NotFound => 404,
            ErrorClass::Conflict => 409,
            ErrorClass::Domain => 422,
            ErrorClass::Internal => 500,
        }
    }
}

impl Error {
    /// Stable machine-readable code. Codes are frozen: never rename one.
    pub fn code(&self) -> &'static str {
        match self {
            Error::EmptyFile => "EMPTY_FILE",
            Error::MissingColumn { .. } => "MISSING_COLUMN",
            Error::NonBinaryValue { .. } => "NON_BINARY_VALUE",
            Error::MissingValue { .. } => "MISSING_VALUE",
            Error::InvalidScore { .. } => "INVALID_SCORE",
            Error::EmptyGroup { .. } => "EMPTY_GROUP",
            Error::InvalidSchema(_) => "INVALID_SCHEMA",
            Error::Csv(_) => "MALFORMED_CSV",
            Error::UnknownAttribute(_) => "UNKNOWN_ATTRIBUTE",
            Error::InvalidParameter(_) => "INVALID_PARAMETER",
            Error::MetricUndefined { .. } => "METRIC_UNDEFINED",
            Error::TooManyDegenerateReplicates { .. } => "TOO_MANY_DEGENERATE_REPLICATES",
            Error::MissingResponse(_) => "MISSING_RESPONSE",
            Error::DuplicateResponse(_) => "DUPLICATE_RESPONSE",
            Error::UnknownItem(_) => "UNKNOWN_ITEM",
            Error::InvalidRating { .. } => "INVALID_RATING",
            Error::IncompleteDomains(_) => "INCOMPLETE_DOMAINS",
            Error::OutOfRange(_) => "OUT_OF_RANGE",
            Error::InvalidQuestionBank(_) => "INVALID_QUESTION_BANK",
            Error::UnsupportedTask(_) => "UNSUPPORTED_TASK",
            Error::InvalidPolicy(_) => "INVALID_POLICY",
            Error::InvalidOverride { .. } => "INVALID_OVERRIDE",
            Error::InvalidThresholdTable(_) => "INVALID_THRESHOLD_TABLE",
            Error::VectorMismatch(_) => "VECTOR_MISMATCH",
            Error::EmptyList => "EMPTY_LIST",
            Error::MissingResult { .. } => "MISSING_RESULT",
            Error::StageOrderViolation { .. } => "STAGE_ORDER_VIOLATION",
            Error::StageNotCompleted(_) => "STAGE_NOT_COMPLETED",
            Error::PayloadValidation(_) => "PAYLOAD_VALIDATION_ERROR",
            Error::SchemaVersionMismatch { .. } => "SCHEMA_VERSION_MISMATCH",
            Error::CorruptCheckpoint(_) => "CORRUPT_CHECKPOINT",
            Error::SessionIncomplete(_) => "SESSION_INCOMPLETE",
            Error::SessionNotFound(_) => "SESSION_NOT_FOUND",
            Error::DatasetRequired(_) => "DATASET_REQUIRED",
            Error::UnknownFormat(_) => "UNKNOWN_FORMAT",
            Error::UnknownPlotKind(_) => "UNKNOWN_PLOT_KIND",
            Error::PayloadMissing(_) => "PAYLOAD_MISSING",
            Error::DegenerateSpec(_) => "DEGENERATE_SPEC",
            Error::Json(_) => "INVALID_JSON",
            Error::Io(_) => "IO_ERROR",
        }
    }

    pub fn class(&self) -> ErrorClass {
        match self {
            Error::SessionNotFound(_) => ErrorClass::NotFound,
            Error::StageOrderViolation { .. }
            | Error::StageNotCompleted(_)
            | Error::SessionIncomplete(_)
            | Error::DatasetRequired(_) => ErrorClass::Conflict,
            Error::Json(_)
            | Error::InvalidParameter(_)
            | Error::InvalidSchema(_)
            | Error::UnknownFormat(_)
            | Error::UnknownPlotKind(_)
            | Error::SchemaVersionMismatch { .. }
            | Error::CorruptCheckpoint(_) => ErrorClass::Validation,
            Error::Io(_) => ErrorClass::Internal,
            _ => ErrorClass::Domain,
        }
    }

    fn details(&self) -> Option<serde_json::Value> {
        use serde_json::json;
        match self {
            Error::MissingColumn { column } => Some(json!({ "column": column })),
            Error::NonBinaryValue { column, row, value } => {
                Some(json!({ "column": column, "row": row, "value": value }))
            }
            Error::MissingValue { column, row } => Some(json!({ "column": column, "row": row })),
            Error::EmptyGroup { attribute } => Some(json!({ "attribute": attribute })),
            Error::MissingResponse(ids) => Some(json!({ "item_ids": ids })),
            Error::IncompleteDomains(d) => Some(json!({ "domains": d })),
            Error::StageOrderViolation { current, requested } => {
                Some(json!({ "current": current, "requested": requested }))
            }
            Error::InvalidOverride { metric, .. } => Some(json!({ "metric": metric })),
            _ => None,
        }
    }

    pub fn to_api_error(&self) -> ApiError {
        ApiError {
            code: self.code().to_string(),
            message: self.to_string(),
            details: self.details(),
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Json(e.to_string())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

/// Error body returned by the HTTP API and printed by the CLI on stderr.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub details: Option<serde_json::Value>,
}
