use thiserror::Error;

/// Errors raised while loading or validating an instance document.
#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("schema violation at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("dangling reference at `{path}`: `{id}` does not exist")]
    DanglingReference { path: String, id: String },
    #[error("duplicate id at `{path}`: `{id}`")]
    DuplicateId { path: String, id: String },
    #[error("invalid value at `{path}`: {message}")]
    InvalidValue { path: String, message: String },
    #[error("network reduction failed: {0}")]
    Reduction(String),
    #[error("cyber network: {0}")]
    Cyber(String),
}

impl InstanceError {
    pub(crate) fn invalid(path: impl Into<String>, message: impl Into<String>) -> Self {
        InstanceError::InvalidValue { path: path.into(), message: message.into() }
    }

    pub(crate) fn dangling(path: impl Into<String>, id: impl Into<String>) -> Self {
        InstanceError::DanglingReference { path: path.into(), id: id.into() }
    }
}

/// Errors raised by the optimization layer.
#[derive(Debug, Error)]
pub enum SolveError {
    #[error("solver backend failure: {0}")]
    Backend(String),
    #[error("model assembly: {0}")]
    Assembly(String),
    #[error("instance is infeasible: {0}")]
    Infeasible(String),
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
}

pub type SolveResult<T> = Result<T, SolveError>;
