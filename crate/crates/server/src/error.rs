use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldError {
    pub field: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ServiceError {
    /// Bad input; `fields` names the offending request fields when known.
    Validation { message: String, fields: Vec<FieldError> },
    NotFound(String),
    /// Concurrency limit reached; the client may retry.
    Busy(String),
    Internal(String),
}

impl ServiceError {
    pub fn field(field: impl Into<String>, message: impl Into<String>) -> Self {
        let (field, message) = (field.into(), message.into());
        ServiceError::Validation {
            message: format!("{field}: {message}"),
            fields: vec![FieldError { field, message }],
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            ServiceError::Validation { .. } => 2,
            _ => 1,
        }
    }
}

impl std::fmt::Display for ServiceError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ServiceError::Validation { message, .. } => write!(f, "invalid request: {message}"),
            ServiceError::NotFound(m) => write!(f, "not found: {m}"),
            ServiceError::Busy(m) => write!(f, "busy: {m}"),
            ServiceError::Internal(m) => write!(f, "{m}"),
        }
    }
}

impl std::error::Error for ServiceError {}

impl From<actadd_core::Error> for ServiceError {
    fn from(e: actadd_core::Error) -> Self {
        if e.is_validation() {
            ServiceError::Validation {
                message: e.to_string(),
                fields: Vec::new(),
            }
        } else {
            ServiceError::Internal(e.to_string())
        }
    }
}

impl From<serde_json::Error> for ServiceError {
    fn from(e: serde_json::Error) -> Self {
        ServiceError::Internal(format!("json: {e}"))
    }
}
