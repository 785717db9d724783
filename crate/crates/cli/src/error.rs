use std::fmt;
use std::process::ExitCode;

use serde::Serialize;

/// Failure of a subcommand, mapped onto the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Invalid flags, config file or input data (exit 2).
    Config(String),
    /// The library rejected an argument (exit 2).
    Domain(anyons::Error),
    /// A numerical procedure did not converge (exit 3).
    Convergence(String),
    /// At least one verification check failed (exit 1).
    Verification {
        failed: usize,
        total: usize,
    },
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Verification { .. } => 1,
            Self::Config(_) | Self::Io(_) => 2,
            Self::Domain(e) if numerical(e) => 3,
            Self::Domain(_) => 2,
            Self::Convergence(_) => 3,
        })
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Config(_) => "config",
            Self::Domain(e) if numerical(e) => "convergence",
            Self::Domain(_) => "domain",
            Self::Convergence(_) => "convergence",
            Self::Verification { .. } => "verification",
            Self::Io(_) => "io",
        }
    }

    /// One-line JSON error for stderr.
    pub fn to_json(&self) -> String {
        #[derive(Serialize)]
        struct Body<'a> {
            kind: &'a str,
            message: String,
        }
        #[derive(Serialize)]
        struct Wrapper<'a> {
            error: Body<'a>,
        }
        serde_json::to_string(&Wrapper {
            error: Body {
                kind: self.kind(),
                message: self.to_string(),
            },
        })
        .unwrap_or_else(|_| format!("{{\"error\":{{\"kind\":\"{}\"}}}}", self.kind()))
    }
}

fn numerical(e: &anyons::Error) -> bool {
    matches!(
        e,
        anyons::Error::Quadrature(_)
            | anyons::Error::Convergence(_)
            | anyons::Error::LinearAlgebra(_)
    )
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Config(m) => write!(f, "{m}"),
            Self::Domain(e) => write!(f, "{e}"),
            Self::Convergence(m) => write!(f, "{m}"),
            Self::Verification { failed, total } => write!(f, "{failed} of {total} checks failed"),
            Self::Io(e) => write!(f, "{e}"),
        }
    }
}

impl From<anyons::Error> for CliError {
    fn from(e: anyons::Error) -> Self {
        Self::Domain(e)
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Io(e)
    }
}

pub type CliResult<T> = Result<T, CliError>;
