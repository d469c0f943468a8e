use std::io::Write;
use std::path::Path;

/// Writes `bytes` to a temp file next to `path` and renames it into place, so
/// readers never observe a truncated file at the final path.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

/// Rebuilds every object with keys inserted in sorted order, which holds
/// whether or not serde_json's `preserve_order` feature is enabled.
fn canonicalize(value: serde_json::Value) -> serde_json::Value {
    use serde_json::Value;
    match value {
        Value::Object(map) => {
            let mut pairs: Vec<(String, Value)> = map.into_iter().collect();
            pairs.sort_by(|a, b| a.0.cmp(&b.0));
            Value::Object(
                pairs
                    .into_iter()
                    .map(|(k, v)| (k, canonicalize(v)))
                    .collect(),
            )
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonicalize).collect()),
        other => other,
    }
}

/// Pretty JSON with sorted keys and a trailing newline.
pub fn canonical_json<T: serde::Serialize>(value: &T) -> String {
    let v = canonicalize(serde_json::to_value(value).expect("value serializes to JSON"));
    let mut s = serde_json::to_string_pretty(&v).expect("JSON value serializes");
    s.push('\n');
    s
}

/// One compact JSON object per line, keys sorted.
pub fn canonical_jsonl<T: serde::Serialize>(items: &[T]) -> String {
    let mut s = String::new();
    for item in items {
        let v = canonicalize(serde_json::to_value(item).expect("value serializes to JSON"));
        s.push_str(&serde_json::to_string(&v).expect("JSON value serializes"));
        s.push('\n');
    }
    s
}
