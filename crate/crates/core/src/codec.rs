//! Helpers for the JSON artifact files: base64 float32 payloads and
//! whole-file JSON reads and writes.

use std::fs;
use std::path::Path;

use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{Error, Result};

/// Base64 of the little-endian float32 encoding of `values`.
pub fn encode_f32(values: &[f64]) -> String {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for &v in values {
        bytes.extend_from_slice(&(v as f32).to_le_bytes());
    }
    STANDARD.encode(bytes)
}

pub fn decode_f32(text: &str) -> std::result::Result<Vec<f64>, String> {
    let bytes = STANDARD.decode(text.trim()).map_err(|e| format!("bad base64: {e}"))?;
    if bytes.len() % 4 != 0 {
        return Err(format!(
            "payload of {} bytes is not a whole number of float32s",
            bytes.len()
        ));
    }
    let values: Vec<f64> = bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    if values.iter().any(|v| !v.is_finite()) {
        return Err("payload contains non-finite values".into());
    }
    Ok(values)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, format!("cannot serialize: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_through_f32() {
        let v = [1.0, -0.5, 3.25];
        assert_eq!(decode_f32(&encode_f32(&v)).unwrap(), v.to_vec());
        // 1.0f32 little-endian is 00 00 80 3f.
        assert_eq!(encode_f32(&[1.0]), "AACAPw==");
    }

    #[test]
    fn rejects_ragged_payload() {
        assert!(decode_f32("AACA").is_err());
        assert!(decode_f32("!!").is_err());
    }
}
