//! `--config` support: a JSON object whose keys are flag names.
//!
//! `{"J": 10, "metric": "auc", "target": ["a:1M:-"], "no-cc": true}` becomes
//! `--J 10 --metric auc --target a:1M:- --no-cc`. Keys given explicitly on
//! the command line are dropped from the file.

use std::path::Path;

use serde_json::Value;

/// Removes `--config <path>` from `argv` and appends the flags read from the
/// file after the user's own arguments.
pub fn merge_config(argv: Vec<String>) -> Result<Vec<String>, String> {
    let mut out = Vec::with_capacity(argv.len());
    let mut path = None;
    let mut iter = argv.into_iter();
    while let Some(arg) = iter.next() {
        if arg == "--config" {
            path = Some(iter.next().ok_or("--config needs a value")?);
        } else if let Some(p) = arg.strip_prefix("--config=") {
            path = Some(p.to_string());
        } else {
            out.push(arg);
        }
    }
    let Some(path) = path else {
        return Ok(out);
    };
    let extra = config_args(Path::new(&path), &out)?;
    out.extend(extra);
    Ok(out)
}

fn config_args(path: &Path, given: &[String]) -> Result<Vec<String>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let value: Value =
        serde_json::from_str(&text).map_err(|e| format!("{}: {e}", path.display()))?;
    let Value::Object(map) = value else {
        return Err(format!("{}: expected a JSON object", path.display()));
    };
    let mut args = Vec::new();
    for (key, value) in map {
        let flag = format!("--{}", key.replace('_', "-"));
        let set = given
            .iter()
            .any(|a| *a == flag || a.starts_with(&format!("{flag}=")));
        if set {
            continue;
        }
        match value {
            Value::Bool(true) => args.push(flag),
            Value::Bool(false) | Value::Null => {}
            Value::Array(items) => {
                for item in items {
                    args.push(flag.clone());
                    args.push(scalar(&key, &item)?);
                }
            }
            other => {
                args.push(flag);
                args.push(scalar(&key, &other)?);
            }
        }
    }
    Ok(args)
}

fn scalar(key: &str, v: &Value) -> Result<String, String> {
    match v {
        Value::String(s) => Ok(s.clone()),
        Value::Number(n) => Ok(n.to_string()),
        Value::Bool(b) => Ok(b.to_string()),
        _ => Err(format!(
            "config key `{key}`: expected a string, number or boolean"
        )),
    }
}
