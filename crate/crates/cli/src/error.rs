use serde_json::{json, Value};
use thiserror::Error;

use crate::config::Diagnostic;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid configuration ({} problem(s))", .0.len())]
    Validation(Vec<Diagnostic>),

    #[error(transparent)]
    Numerical(#[from] fracdiff::Error),

    #[error("{what} failed")]
    CheckFailed { what: String, report: Value },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => 2,
            _ => 1,
        }
    }

    pub fn to_diagnostic(&self) -> Value {
        match self {
            CliError::Validation(d) => json!({
                "kind": "validation",
                "message": self.to_string(),
                "errors": d,
            }),
            CliError::Numerical(e) => {
                let mut v = json!({
                    "kind": "numerical",
                    "message": e.to_string(),
                });
                if let fracdiff::Error::Quadrature { achieved, requested } = e {
                    v["achieved"] = json!(achieved);
                    v["requested"] = json!(requested);
                }
                v
            }
            CliError::CheckFailed { what, report } => json!({
                "kind": "check_failed",
                "message": format!("{what} failed"),
                "report": report,
            }),
            other => json!({
                "kind": "io",
                "message": other.to_string(),
            }),
        }
    }
}
