//! Germ specifications accepted by the `germ` subcommand.
//!
//! ```json
//! {"kind": "flow", "field": "x^2/(1-a x)", "a": 0.4}
//! {"kind": "moebius"}
//! {"kind": "moebius", "delta": 1e-3}
//! ```
//!
//! A flow germ is the time-one map of the given field. The Moebius germ is
//! `x / (1 - x)`, plus `delta * x^4` when `delta` is set.

use parabolica::germ::ParabolicGerm;
use serde::{Deserialize, Serialize};

use crate::output::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum GermSpec {
    Flow {
        field: String,
        #[serde(default)]
        a: f64,
    },
    Moebius {
        #[serde(default)]
        delta: f64,
    },
}

/// Coefficient `c` such that `field` reads `x^2 / (1 - c x)`.
fn model_coefficient(field: &str, a: f64) -> Result<f64, CliError> {
    let compact: String = field.chars().filter(|c| !c.is_whitespace() && *c != '*').collect();
    match compact.as_str() {
        "x^2/(1-ax)" => Ok(a),
        "x^2/(1+ax)" => Ok(-a),
        "x^2" if a == 0.0 => Ok(0.0),
        "x^2" => Err(CliError::validation("field x^2 takes no coefficient a")),
        _ => Err(CliError::validation(format!(
            "unsupported field {field:?}; expected \"x^2/(1-a x)\", \"x^2/(1+a x)\" or \"x^2\""
        ))),
    }
}

impl GermSpec {
    /// Reads a spec from inline JSON or from a file holding it.
    pub fn load(arg: &str) -> Result<Self, CliError> {
        let text = if arg.trim_start().starts_with('{') {
            arg.to_string()
        } else {
            std::fs::read_to_string(arg).map_err(|e| CliError::validation(format!("{arg}: {e}")))?
        };
        serde_json::from_str(&text).map_err(|e| {
            CliError::validation(format!(
                "malformed germ spec at line {}, column {}: {e}",
                e.line(),
                e.column()
            ))
        })
    }

    pub fn germ(&self) -> Result<ParabolicGerm, CliError> {
        match *self {
            GermSpec::Flow { ref field, a } => {
                let c = model_coefficient(field, a)?;
                if !(c.is_finite() && c.abs() < 1.0) {
                    return Err(CliError::validation(format!("coefficient a = {c} must satisfy |a| < 1")));
                }
                Ok(ParabolicGerm::model_flow(c))
            }
            GermSpec::Moebius { delta } if delta == 0.0 => Ok(ParabolicGerm::moebius()),
            GermSpec::Moebius { delta } => {
                if !delta.is_finite() {
                    return Err(CliError::validation("delta must be finite"));
                }
                Ok(ParabolicGerm::new(move |x| x / (1.0 - x) + delta * x.powi(4), 0.5)
                    .with_derivative(move |x| 1.0 / ((1.0 - x) * (1.0 - x)) + 4.0 * delta * x.powi(3)))
            }
        }
    }
}
