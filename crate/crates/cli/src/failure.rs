use std::fmt;

use lattice_fronts::Error;

/// A run failure together with the process exit status it maps to.
#[derive(Debug)]
pub struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    pub const CONFIG: i32 = 2;
    pub const HYPOTHESIS: i32 = 3;
    pub const ANSATZ: i32 = 4;
    pub const NUMERICAL: i32 = 5;
    /// Filesystem problems outside the documented refusal classes.
    pub const IO: i32 = 1;

    pub fn config(message: impl Into<String>) -> Self {
        Self { code: Self::CONFIG, message: message.into() }
    }

    pub fn io(context: &str, err: std::io::Error) -> Self {
        Self { code: Self::IO, message: format!("{context}: {err}") }
    }

    pub fn exit_code(&self) -> i32 {
        self.code
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
            Error::InvalidParameter(_) => Self::CONFIG,
            Error::Hypothesis(_) => Self::HYPOTHESIS,
            Error::NoSupercriticalRoot(_) | Error::Ansatz(_) => Self::ANSATZ,
            Error::Numerical(_) | Error::WindowMismatch(_) => Self::NUMERICAL,
        };
        Self { code, message: e.to_string() }
    }
}

impl From<csv::Error> for Failure {
    fn from(e: csv::Error) -> Self {
        Self { code: Self::IO, message: format!("csv output: {e}") }
    }
}
