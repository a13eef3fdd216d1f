use std::fmt;
use std::path::Path;

use examforge_core::agent_runtime::BusError;
use examforge_core::assessment::AssessError;
use examforge_core::generation::GenError;
use examforge_core::ingestion::IngestError;
use examforge_core::kg_store::KgError;
use examforge_core::llm_gateway::LlmError;
use examforge_core::psychometrics::PsychError;
use examforge_core::ranking::RankError;
use serde::Serialize;

/// A domain failure, printed as JSON on stderr with exit code 1.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CliError {
    pub error_code: String,
    pub message: String,
}

impl CliError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        Self { error_code: code.to_string(), message: message.into() }
    }

    pub fn io(path: &Path, err: std::io::Error) -> Self {
        Self::new("IoError", format!("{}: {err}", path.display()))
    }

    pub fn input(path: &Path, err: impl fmt::Display) -> Self {
        Self::new("MalformedInput", format!("{}: {err}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.error_code, self.message)
    }
}

macro_rules! from_domain {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                Self::new(e.code(), e.to_string())
            }
        }
    )*};
}

from_domain!(KgError, IngestError, RankError, AssessError, GenError, PsychError, LlmError, BusError);

pub type Result<T, E = CliError> = std::result::Result<T, E>;
