use chronoweave_core::corpus::CorpusError;
use chronoweave_core::evaluation::EvalError;
use chronoweave_core::llm::LlmError;
use chronoweave_core::pipeline::PipelineError;
use chronoweave_core::prompting::PromptError;
use chronoweave_core::retrieval::RetrievalError;
use chronoweave_core::timeline::TimelineError;
use thiserror::Error;

/// Errors grouped by process exit code:
/// 0 ok, 2 input/parse, 3 network/backend, 4 evaluation consistency, 1 other.
#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Backend(String),
    #[error("{0}")]
    Eval(String),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Other(_) => 1,
            CliError::Input(_) => 2,
            CliError::Backend(_) => 3,
            CliError::Eval(_) => 4,
        }
    }

    pub fn io(context: impl std::fmt::Display, e: std::io::Error) -> Self {
        CliError::Other(format!("{context}: {e}"))
    }
}

impl From<CorpusError> for CliError {
    fn from(e: CorpusError) -> Self {
        match e {
            CorpusError::Fetch { .. }
            | CorpusError::Status { .. }
            | CorpusError::Redirect { .. } => CliError::Backend(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

impl From<RetrievalError> for CliError {
    fn from(e: RetrievalError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<PromptError> for CliError {
    fn from(e: PromptError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<LlmError> for CliError {
    fn from(e: LlmError) -> Self {
        match e {
            LlmError::Backend { .. } | LlmError::Protocol(_) | LlmError::Mock(_) => {
                CliError::Backend(e.to_string())
            }
            LlmError::Cache { .. } | LlmError::InvalidRequest(_) => CliError::Other(e.to_string()),
        }
    }
}

impl From<TimelineError> for CliError {
    fn from(e: TimelineError) -> Self {
        CliError::Other(e.to_string())
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::Io { .. } => CliError::Input(e.to_string()),
            _ => CliError::Eval(e.to_string()),
        }
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Retrieval(e) => e.into(),
            PipelineError::Prompt(e) => e.into(),
            PipelineError::Llm(e) => e.into(),
            PipelineError::Timeline(e) => e.into(),
        }
    }
}
