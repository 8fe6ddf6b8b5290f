use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{ActivationDataset, Condition, Position, RowMeta};
use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ACTIVATIONS_FILE: &str = "activations.f32";
pub const META_FILE: &str = "meta.jsonl";
pub const FORMAT_VERSION: u32 = 1;

const DTYPE: &str = "f32";
const ENDIANNESS: &str = "little";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub dtype: String,
    pub endianness: String,
    pub rows: usize,
    pub dim: usize,
    pub layer: u32,
    pub model_id: String,
    pub condition: String,
    pub position: String,
    /// CRC-32 (reflected polynomial 0xEDB88320) of `activations.f32`.
    pub checksum: u32,
}

/// One line of `meta.jsonl`: the row metadata plus the dataset-level triple.
#[derive(Debug, Serialize, Deserialize)]
struct MetaLine {
    #[serde(flatten)]
    meta: RowMeta,
    layer: Option<u32>,
    condition: Option<Condition>,
    position: Option<Position>,
}

fn encode_payload(values: &[f32]) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(values.len() * 4);
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Writes `ds` into `dir`, replacing any previous contents.
///
/// Files are staged in a sibling temporary directory and moved into place
/// with a rename, so readers never observe a half-written dataset.
pub fn write_dataset(ds: &ActivationDataset, dir: &Path) -> Result<()> {
    ds.validate()?;

    let payload = encode_payload(&ds.values);
    let manifest = Manifest {
        version: FORMAT_VERSION,
        dtype: DTYPE.to_string(),
        endianness: ENDIANNESS.to_string(),
        rows: ds.len(),
        dim: ds.dim,
        layer: ds.layer,
        model_id: ds.model_id.clone(),
        condition: ds.condition.as_str().to_string(),
        position: ds.position.as_str().to_string(),
        checksum: crc32fast::hash(&payload),
    };

    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    let name = dir
        .file_name()
        .ok_or_else(|| Error::invalid(format!("{} has no final component", dir.display())))?
        .to_string_lossy();
    let staging = parent.join(format!(".{name}.tmp-{}", std::process::id()));
    if staging.exists() {
        fs::remove_dir_all(&staging).map_err(|e| Error::io(&staging, e))?;
    }
    fs::create_dir(&staging).map_err(|e| Error::io(&staging, e))?;

    let staged = (|| -> Result<()> {
        let path = staging.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| Error::format(&path, e.to_string()))?;
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;

        let path = staging.join(ACTIVATIONS_FILE);
        fs::write(&path, &payload).map_err(|e| Error::io(&path, e))?;

        let path = staging.join(META_FILE);
        let file = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        let mut out = BufWriter::new(file);
        for m in &ds.meta {
            let line = MetaLine {
                meta: m.clone(),
                layer: Some(ds.layer),
                condition: Some(ds.condition),
                position: Some(ds.position),
            };
            serde_json::to_writer(&mut out, &line).map_err(|e| Error::format(&path, e.to_string()))?;
            out.write_all(b"\n").map_err(|e| Error::io(&path, e))?;
        }
        out.flush().map_err(|e| Error::io(&path, e))?;
        Ok(())
    })();
    if let Err(e) = staged {
        let _ = fs::remove_dir_all(&staging);
        return Err(e);
    }

    if dir.exists() {
        fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::rename(&staging, dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

/// Reads and fully validates a dataset directory.
pub fn read_dataset(dir: &Path) -> Result<ActivationDataset> {
    if !dir.is_dir() {
        return Err(Error::io(
            dir,
            std::io::Error::new(std::io::ErrorKind::NotFound, "dataset directory not found"),
        ));
    }

    let path = dir.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| Error::format(&path, e.to_string()))?;
    if manifest.version != FORMAT_VERSION {
        return Err(Error::format(
            &path,
            format!("unknown format version {}", manifest.version),
        ));
    }
    if manifest.dtype != DTYPE || manifest.endianness != ENDIANNESS {
        return Err(Error::format(
            &path,
            format!(
                "unsupported encoding {}/{}, expected {DTYPE}/{ENDIANNESS}",
                manifest.dtype, manifest.endianness
            ),
        ));
    }
    let condition = Condition::parse(&manifest.condition)
        .ok_or_else(|| Error::format(&path, format!("unknown condition {:?}", manifest.condition)))?;
    let position = Position::parse(&manifest.position)
        .ok_or_else(|| Error::format(&path, format!("unknown position {:?}", manifest.position)))?;
    if manifest.dim == 0 {
        return Err(Error::format(&path, "dim must be positive"));
    }

    let path = dir.join(ACTIVATIONS_FILE);
    let payload = fs::read(&path).map_err(|e| Error::io(&path, e))?;
    let expected_len = manifest.rows * manifest.dim * 4;
    if payload.len() != expected_len {
        return Err(Error::format(
            &path,
            format!(
                "payload is {} bytes, manifest implies {} ({} rows × {} dims × 4)",
                payload.len(),
                expected_len,
                manifest.rows,
                manifest.dim
            ),
        ));
    }
    let actual = crc32fast::hash(&payload);
    if actual != manifest.checksum {
        return Err(Error::Checksum {
            path,
            expected: manifest.checksum,
            actual,
        });
    }
    let values: Vec<f32> = payload
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
        .collect();
    if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::format(
            &path,
            format!("row {} has a non-finite activation", pos / manifest.dim),
        ));
    }

    let path = dir.join(META_FILE);
    let file = fs::File::open(&path).map_err(|e| Error::io(&path, e))?;
    let mut meta = Vec::with_capacity(manifest.rows);
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(&path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parsed: MetaLine =
            serde_json::from_str(&line).map_err(|e| Error::format(&path, format!("row {i}: {e}")))?;
        if parsed.layer.is_some_and(|l| l != manifest.layer)
            || parsed.condition.is_some_and(|c| c != condition)
            || parsed.position.is_some_and(|p| p != position)
        {
            return Err(Error::format(
                &path,
                format!("row {i}: layer/condition/position disagree with manifest"),
            ));
        }
        parsed
            .meta
            .validate(i, condition)
            .map_err(|m| Error::format(&path, m))?;
        meta.push(parsed.meta);
    }
    if meta.len() != manifest.rows {
        return Err(Error::format(
            &path,
            format!("{} metadata rows for {} activation rows", meta.len(), manifest.rows),
        ));
    }

    Ok(ActivationDataset {
        dim: manifest.dim,
        layer: manifest.layer,
        model_id: manifest.model_id,
        condition,
        position,
        values,
        meta,
    })
}
