use scribble_core::{Diagnostic, SceneIoError};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad or inconsistent inputs. Exit status 1.
    #[error("{code}: {detail}")]
    Input {
        code: String,
        detail: String,
        diagnostics: Vec<Diagnostic>,
    },
    /// Anything that went wrong after the inputs were accepted. Exit status 2.
    #[error("internal: {0}")]
    Internal(String),
}

impl CliError {
    pub fn input(code: impl Into<String>, detail: impl Into<String>) -> Self {
        CliError::Input {
            code: code.into(),
            detail: detail.into(),
            diagnostics: Vec::new(),
        }
    }

    pub fn code(&self) -> &str {
        match self {
            CliError::Input { code, .. } => code,
            CliError::Internal(_) => "internal",
        }
    }

    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Input { .. } => 1,
            CliError::Internal(_) => 2,
        }
    }

    pub fn diagnostics(&self) -> &[Diagnostic] {
        match self {
            CliError::Input { diagnostics, .. } => diagnostics,
            CliError::Internal(_) => &[],
        }
    }
}

impl From<SceneIoError> for CliError {
    fn from(e: SceneIoError) -> Self {
        CliError::Input {
            code: e.code(),
            detail: e.to_string(),
            diagnostics: e.diagnostics().to_vec(),
        }
    }
}
