use std::fmt;
use std::process::ExitCode;

use absa_kit::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Config,
    Data,
    Backend,
}

impl Kind {
    pub fn exit_code(self) -> ExitCode {
        ExitCode::from(match self {
            Kind::Config => 2,
            Kind::Data => 3,
            Kind::Backend => 4,
        })
    }

    fn of(e: &Error) -> Kind {
        match e {
            Error::Config(_)
            | Error::UnknownTask(_)
            | Error::InvalidTemplate { .. }
            | Error::KTooLarge { .. }
            | Error::BatchSizeIndivisible { .. }
            | Error::EmptyTaskList => Kind::Config,
            Error::BackendUnavailable(_) | Error::ProtocolViolation(_) => Kind::Backend,
            _ => Kind::Data,
        }
    }
}

/// A failure tagged with the stage that raised it.
#[derive(Debug)]
pub struct Failure {
    pub stage: &'static str,
    pub kind: Kind,
    pub message: String,
}

impl Failure {
    pub fn new(stage: &'static str, kind: Kind, message: impl Into<String>) -> Self {
        Self {
            stage,
            kind,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.stage, self.message)
    }
}

pub trait StageExt<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure>;
}

impl<T> StageExt<T> for absa_kit::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, Failure> {
        self.map_err(|e| Failure::new(stage, Kind::of(&e), e.to_string()))
    }
}
