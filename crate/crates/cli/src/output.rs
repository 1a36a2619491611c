//! Error reporting, exit codes and output formatting shared by subcommands.

use std::fmt;

use parabolica::annulus::AnnulusError;
use parabolica::circle::CircleError;
use parabolica::germ::GermError;
use parabolica::pipeline::PipelineError;
use parabolica::unfolding::UnfoldingError;
use serde::Serialize;

pub const VALIDATION: i32 = 1;
pub const NUMERICAL: i32 = 2;
pub const INVARIANT: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn validation(message: impl Into<String>) -> Self {
        Self {
            code: VALIDATION,
            kind: "validation",
            message: message.into(),
        }
    }

    fn with_code(code: i32, message: String) -> Self {
        let kind = match code {
            VALIDATION => "validation",
            INVARIANT => "invariant",
            _ => "numerical",
        };
        Self { code, kind, message }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "error": {"kind": self.kind, "exit_code": self.code, "message": self.message}
        })
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind, self.message)
    }
}

impl From<CircleError> for CliError {
    fn from(e: CircleError) -> Self {
        Self::validation(e.to_string())
    }
}

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        Self::with_code(e.exit_code(), e.to_string())
    }
}

impl From<UnfoldingError> for CliError {
    fn from(e: UnfoldingError) -> Self {
        PipelineError::Unfolding(e).into()
    }
}

impl From<AnnulusError> for CliError {
    fn from(e: AnnulusError) -> Self {
        PipelineError::Annulus(e).into()
    }
}

impl From<GermError> for CliError {
    fn from(e: GermError) -> Self {
        let code = match e {
            GermError::NotNormalized { .. } | GermError::OutOfDomain { .. } | GermError::SignMismatch { .. } => VALIDATION,
            GermError::FlowMismatch { .. } => INVARIANT,
            _ => NUMERICAL,
        };
        Self::with_code(code, e.to_string())
    }
}

/// 17 significant digits, enough for doubles to round-trip.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn opt_num(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

/// First line of every CSV output: the command and its effective config.
pub fn csv_header(command: &str, config: &impl Serialize) -> String {
    let json = serde_json::to_string(config).expect("config serializes");
    format!("# parabolica {command} {json}\n")
}

/// JSON document with the config echoed under `config`.
pub fn with_config(config: &impl Serialize, body: serde_json::Value) -> String {
    let mut doc = serde_json::json!({ "config": config });
    if let (Some(doc), serde_json::Value::Object(body)) = (doc.as_object_mut(), body) {
        doc.extend(body);
    }
    let mut text = serde_json::to_string_pretty(&doc).expect("output serializes");
    text.push('\n');
    text
}
