use molpc_core::codec::CodecError;
use molpc_core::metrics::MetricsError;
use molpc_core::pretrain::PretrainError;
use molpc_model::ModelError;
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Numeric(String),
}

#[derive(Serialize)]
struct ErrorRecord<'a> {
    error: &'a str,
    message: String,
    exit_code: i32,
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 1,
            CliError::Data(_) => 2,
            CliError::Numeric(_) => 3,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            CliError::Usage(_) => "usage",
            CliError::Data(_) => "data",
            CliError::Numeric(_) => "numeric",
        }
    }

    /// One-line JSON record for stderr.
    pub fn to_json(&self) -> String {
        serde_json::to_string(&ErrorRecord {
            error: self.kind(),
            message: self.to_string(),
            exit_code: self.exit_code(),
        })
        .expect("error record serializes")
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<CodecError> for CliError {
    fn from(e: CodecError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<PretrainError> for CliError {
    fn from(e: PretrainError) -> Self {
        CliError::Data(e.to_string())
    }
}

impl From<MetricsError> for CliError {
    fn from(e: MetricsError) -> Self {
        match e {
            MetricsError::NonFinite(_) => CliError::Numeric(e.to_string()),
            _ => CliError::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NonFiniteLoss { .. } | ModelError::Tensor(_) => CliError::Numeric(e.to_string()),
            ModelError::Config(m) => CliError::Usage(m),
            _ => CliError::Data(e.to_string()),
        }
    }
}
