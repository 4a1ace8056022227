//! Flag and config-file merging.
//!
//! A config file is a JSON object with the same keys as the command's
//! resolved-config echo. Flags given on the command line win over file
//! values; keys the command does not know are rejected.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliError;

fn read_object(path: &Path, command: &str) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let value: Value = serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?;
    let Value::Object(mut obj) = value else {
        return Err(CliError::Usage(format!("{}: config must be a JSON object", path.display())));
    };
    // An echoed config carries its command name; accept it when it matches.
    if let Some(c) = obj.remove("command") {
        if c.as_str() != Some(command) {
            return Err(CliError::Usage(format!("config is for command {c}, not '{command}'")));
        }
    }
    Ok(obj)
}

/// Overlays the flags (unset options skipped) onto the file object and
/// deserializes the result.
pub fn resolve<T: Serialize + DeserializeOwned>(command: &str, file: Option<&Path>, flags: &T) -> Result<T, CliError> {
    let mut merged = match file {
        Some(p) => read_object(p, command)?,
        None => Map::new(),
    };
    let Value::Object(given) = serde_json::to_value(flags).map_err(|e| CliError::Usage(e.to_string()))? else {
        unreachable!("command options serialize to an object");
    };
    for (k, v) in given {
        if !v.is_null() {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| CliError::Usage(format!("config: {e}")))
}

/// First output line: the resolved config with the command name.
pub fn echo<T: Serialize>(command: &str, resolved: &T) -> String {
    let mut obj = Map::new();
    obj.insert("command".into(), Value::String(command.into()));
    if let Ok(Value::Object(fields)) = serde_json::to_value(resolved) {
        obj.extend(fields);
    }
    Value::Object(obj).to_string()
}

/// Ten significant digits, fixed notation where that stays readable.
pub fn sig10(v: f64) -> String {
    if !v.is_finite() {
        return v.to_string();
    }
    if v == 0.0 {
        return "0".into();
    }
    let e = v.abs().log10().floor() as i32;
    if (-5..15).contains(&e) {
        format!("{:.*}", (9 - e).max(0) as usize, v)
    } else {
        format!("{v:.9e}")
    }
}
