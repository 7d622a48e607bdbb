//! Config loading: strict keys, eager validation, defaults made explicit.

use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;
use serde_path_to_error::Segment;

use crate::error::CliError;

/// A command's config. `validate` runs every module invariant before any
/// output is written.
pub trait CommandConfig: DeserializeOwned + Serialize {
    fn validate(&self) -> Result<(), CliError>;
}

pub fn read_json(path: &Path) -> Result<Value, CliError> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::ReadConfig { path: path.into(), source })?;
    Ok(serde_json::from_str(&text)?)
}

fn unknown_field(message: &str) -> Option<&str> {
    let rest = message.strip_prefix("unknown field `")?;
    rest.split('`').next()
}

fn remove_key(value: &mut Value, segments: &[Segment], key: &str) -> bool {
    let mut node = value;
    for seg in segments {
        node = match (seg, node) {
            (Segment::Map { key }, Value::Object(m)) => match m.get_mut(key) {
                Some(next) => next,
                None => return false,
            },
            (Segment::Seq { index }, Value::Array(a)) => match a.get_mut(*index) {
                Some(next) => next,
                None => return false,
            },
            (Segment::Enum { .. } | Segment::Unknown, n) => n,
            _ => return false,
        };
    }
    match node {
        Value::Object(m) => m.remove(key).is_some(),
        _ => false,
    }
}

fn join(prefix: &str, key: &str) -> String {
    if prefix.is_empty() {
        key.into()
    } else {
        format!("{prefix}.{key}")
    }
}

/// Deserializes `value`, collecting every unknown key instead of stopping
/// at the first one.
pub fn parse<T: DeserializeOwned>(mut value: Value) -> Result<T, CliError> {
    let mut unknown = Vec::new();
    loop {
        let err = match serde_path_to_error::deserialize::<_, T>(&value) {
            Ok(cfg) if unknown.is_empty() => return Ok(cfg),
            Ok(_) => return Err(CliError::UnknownKeys(unknown)),
            Err(e) => e,
        };
        let message = err.inner().to_string();
        let Some(field) = unknown_field(&message).map(str::to_owned) else {
            if !unknown.is_empty() {
                return Err(CliError::UnknownKeys(unknown));
            }
            let path = err.path().to_string();
            return Err(CliError::Invalid { path: if path == "." { String::new() } else { path }, message });
        };
        let mut segments: Vec<Segment> = err.path().iter().cloned().collect();
        if matches!(segments.last(), Some(Segment::Map { key }) if *key == field) {
            segments.pop();
        }
        let prefix = segments
            .iter()
            .filter_map(|s| match s {
                Segment::Map { key } => Some(key.clone()),
                Segment::Seq { index } => Some(format!("[{index}]")),
                _ => None,
            })
            .collect::<Vec<_>>()
            .join(".")
            .replace(".[", "[");
        unknown.push(join(&prefix, &field));
        if !remove_key(&mut value, &segments, &field) {
            return Err(CliError::UnknownKeys(unknown));
        }
    }
}

/// Parses and validates; returns the config with its defaults filled in.
pub fn load<T: CommandConfig>(value: Value) -> Result<T, CliError> {
    let cfg: T = parse(value)?;
    cfg.validate()?;
    Ok(cfg)
}
