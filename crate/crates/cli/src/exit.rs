//! Exit-code contract: 0 ok, 1 usage or config, 2 warnings only,
//! 3 validation errors, 4 engine or backend failure.

use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Code {
    Ok = 0,
    Usage = 1,
    Warnings = 2,
    Invalid = 3,
    Backend = 4,
}

#[derive(Debug)]
pub struct Failure {
    pub code: Code,
    pub error: anyhow::Error,
}

impl fmt::Display for Failure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:#}", self.error)
    }
}

pub type CmdResult = Result<Code, Failure>;

pub fn fail(code: Code, msg: impl fmt::Display) -> Failure {
    Failure { code, error: anyhow::anyhow!("{msg}") }
}

pub trait WithCode<T> {
    fn code(self, code: Code) -> Result<T, Failure>;
}

impl<T, E: Into<anyhow::Error>> WithCode<T> for Result<T, E> {
    fn code(self, code: Code) -> Result<T, Failure> {
        self.map_err(|e| Failure { code, error: e.into() })
    }
}
