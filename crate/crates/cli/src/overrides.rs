use serde_json::{Map, Value};

use crate::CliError;

/// Applies `path.to.key=value` to a config tree. The value is read as JSON
/// when it parses as such (numbers, arrays, booleans) and as a plain
/// string otherwise. Missing intermediate objects are created; unknown
/// keys are left for config validation to reject.
pub fn apply(tree: &mut Value, assignment: &str) -> Result<(), CliError> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| CliError::Usage(format!("override `{assignment}` is not of the form KEY=VALUE")))?;
    let keys: Vec<&str> = path.split('.').collect();
    if keys.iter().any(|k| k.is_empty()) {
        return Err(CliError::Usage(format!("override key `{path}` has an empty component")));
    }
    let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));

    let mut node = tree;
    for (depth, key) in keys.iter().enumerate() {
        let Value::Object(map) = node else {
            let parent = keys[..depth].join(".");
            return Err(CliError::Usage(format!("override `{path}`: `{parent}` is not an object")));
        };
        if depth + 1 == keys.len() {
            map.insert(key.to_string(), value);
            return Ok(());
        }
        node = map.entry(key.to_string()).or_insert_with(|| Value::Object(Map::new()));
    }
    unreachable!("keys is non-empty")
}
