use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const BENCH_TEMPLATE: &str = include_str!("../../templates/bench.c.in");
const CONFORM_TEMPLATE: &str = include_str!("../../templates/conform.c.in");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HarnessKind {
    /// Prints microseconds per inference, one line per repetition.
    Bench,
    /// Raw float32 vectors on stdin, raw float32 outputs on stdout.
    Conform,
}

/// Placeholder values; a template placeholder left without a value is an
/// error.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HarnessParams {
    pub input_len: Option<usize>,
    pub output_len: Option<usize>,
    pub reps: Option<usize>,
    pub inner_iters: Option<usize>,
}

impl HarnessParams {
    pub fn io(input_len: usize, output_len: usize) -> Self {
        HarnessParams {
            input_len: Some(input_len),
            output_len: Some(output_len),
            ..Default::default()
        }
    }

    pub fn bench(input_len: usize, output_len: usize, reps: usize, inner_iters: usize) -> Self {
        HarnessParams {
            input_len: Some(input_len),
            output_len: Some(output_len),
            reps: Some(reps),
            inner_iters: Some(inner_iters),
        }
    }
}

pub fn template(kind: HarnessKind) -> &'static str {
    match kind {
        HarnessKind::Bench => BENCH_TEMPLATE,
        HarnessKind::Conform => CONFORM_TEMPLATE,
    }
}

/// Pure text substitution of `{{NAME}}` placeholders.
pub fn instantiate_harness(kind: HarnessKind, params: &HarnessParams) -> Result<String> {
    let values = [
        ("INPUT_LEN", params.input_len),
        ("OUTPUT_LEN", params.output_len),
        ("REPS", params.reps),
        ("INNER_ITERS", params.inner_iters),
    ];
    let mut text = template(kind).to_string();
    for (name, value) in values {
        let key = format!("{{{{{name}}}}}");
        if !text.contains(&key) {
            continue;
        }
        match value {
            Some(0) => {
                return Err(Error::Codegen(format!(
                    "harness placeholder {name} must be positive"
                )))
            }
            Some(v) => text = text.replace(&key, &v.to_string()),
            None => {
                return Err(Error::Codegen(format!(
                    "harness placeholder {name} has no value"
                )))
            }
        }
    }
    if let Some(start) = text.find("{{") {
        let rest = &text[start..];
        let end = rest.find("}}").map_or(rest.len(), |e| e + 2);
        return Err(Error::Codegen(format!(
            "unknown harness placeholder {}",
            &rest[..end]
        )));
    }
    Ok(text)
}
