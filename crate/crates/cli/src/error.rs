//! Error type whose every variant maps to a stable machine-readable code.

use std::fmt;

use cubegrasp_core::config::ConfigError;
use cubegrasp_core::env::EnvError;
use cubegrasp_core::sac::SacError;
use cubegrasp_core::train::TrainError;

#[derive(Debug, Clone, PartialEq)]
pub struct CliError {
    pub code: ErrorCode,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    Usage,
    Io,
    Config,
    Checkpoint,
    Version,
    Shape,
    EvalSet,
    Goals,
    Env,
    Train,
    Qp,
    Trace,
}

impl ErrorCode {
    pub fn as_str(self) -> &'static str {
        match self {
            ErrorCode::Usage => "E_USAGE",
            ErrorCode::Io => "E_IO",
            ErrorCode::Config => "E_CONFIG",
            ErrorCode::Checkpoint => "E_CHECKPOINT",
            ErrorCode::Version => "E_VERSION",
            ErrorCode::Shape => "E_SHAPE",
            ErrorCode::EvalSet => "E_EVAL_SET",
            ErrorCode::Goals => "E_GOALS",
            ErrorCode::Env => "E_ENV",
            ErrorCode::Train => "E_TRAIN",
            ErrorCode::Qp => "E_QP",
            ErrorCode::Trace => "E_TRACE",
        }
    }

    /// Process exit status; usage errors follow the clap convention.
    pub fn exit_status(self) -> i32 {
        match self {
            ErrorCode::Usage => 2,
            _ => 1,
        }
    }
}

impl CliError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
        }
    }

    /// `error[CODE]: message` on a single line.
    pub fn line(&self) -> String {
        let flat: Vec<&str> = self.message.split_whitespace().collect();
        format!("error[{}]: {}", self.code.as_str(), flat.join(" "))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.line())
    }
}

impl std::error::Error for CliError {}

impl From<ConfigError> for CliError {
    fn from(e: ConfigError) -> Self {
        CliError::new(ErrorCode::Config, e.to_string())
    }
}

impl From<SacError> for CliError {
    fn from(e: SacError) -> Self {
        let code = match e {
            SacError::Version { .. } => ErrorCode::Version,
            SacError::Shape(_) => ErrorCode::Shape,
            SacError::Checkpoint(_) => ErrorCode::Checkpoint,
            _ => ErrorCode::Train,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<EnvError> for CliError {
    fn from(e: EnvError) -> Self {
        let code = match e {
            EnvError::GoalParse { .. } | EnvError::InvalidGoal(_) => ErrorCode::Goals,
            _ => ErrorCode::Env,
        };
        CliError::new(code, e.to_string())
    }
}

impl From<TrainError> for CliError {
    fn from(e: TrainError) -> Self {
        match e {
            TrainError::Env(e) => e.into(),
            TrainError::Sac(e) => e.into(),
            e => CliError::new(ErrorCode::Train, e.to_string()),
        }
    }
}
