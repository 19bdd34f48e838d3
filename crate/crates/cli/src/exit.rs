use std::fmt;

use denoise_core::Error;

pub const USAGE: u8 = 1;
pub const DATA: u8 = 2;
pub const RUNTIME: u8 = 3;

/// An error paired with the process exit code it maps to.
#[derive(Debug)]
pub struct Failure {
    pub code: u8,
    pub message: String,
}

impl Failure {
    pub fn usage(message: impl Into<String>) -> Self {
        Failure {
            code: USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        Failure {
            code: DATA,
            message: message.into(),
        }
    }
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Config(_) => USAGE,
            Error::Format(_)
            | Error::Decode(_)
            | Error::Load(_)
            | Error::Size(_)
            | Error::Json(_)
            | Error::Io { .. } => DATA,
            Error::Domain(_)
            | Error::Contract(_)
            | Error::DegenerateBatch(_)
            | Error::ReplicaDivergence(_)
            | Error::WorkerFailed { .. } => RUNTIME,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}
