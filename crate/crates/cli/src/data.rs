//! Dataset discovery and small CSV helpers shared by the commands.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use steercal::store::{read_dataset, ActivationDataset, Split, MANIFEST_FILE};
use steercal::{Error, Result};

fn dataset_dirs(root: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if root.join(MANIFEST_FILE).is_file() {
        out.push(root.to_path_buf());
        return Ok(());
    }
    let mut children: Vec<PathBuf> = fs::read_dir(root)
        .map_err(|e| Error::io(root, e))?
        .filter_map(|entry| entry.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    children.sort();
    for child in children {
        dataset_dirs(&child, out)?;
    }
    Ok(())
}

/// Reads the dataset at `root`, or every dataset below it, ordered by layer.
pub fn load_datasets(root: &Path) -> Result<Vec<ActivationDataset>> {
    fs::metadata(root).map_err(|e| Error::io(root, e))?;
    let mut dirs = Vec::new();
    dataset_dirs(root, &mut dirs)?;
    if dirs.is_empty() {
        return Err(Error::format(
            root,
            format!("no {MANIFEST_FILE} found in or below this directory"),
        ));
    }
    let mut out = dirs.iter().map(|d| read_dataset(d)).collect::<Result<Vec<_>>>()?;
    out.sort_by_key(|ds| ds.layer);
    Ok(out)
}

/// Like [`load_datasets`] but requires one condition and distinct layers.
pub fn load_layer_set(root: &Path) -> Result<Vec<ActivationDataset>> {
    let sets = load_datasets(root)?;
    let first = &sets[0];
    if let Some(other) = sets.iter().find(|d| d.condition != first.condition) {
        return Err(Error::invalid(format!(
            "{} mixes {} and {} datasets; point at one condition",
            root.display(),
            first.condition.as_str(),
            other.condition.as_str()
        )));
    }
    if let Some(w) = sets.windows(2).find(|w| w[0].layer == w[1].layer) {
        return Err(Error::invalid(format!(
            "{} holds layer {} twice",
            root.display(),
            w[0].layer
        )));
    }
    Ok(sets)
}

/// Rows of `split`, or every row when the dataset carries no split labels.
pub fn split_or_all(ds: &ActivationDataset, split: Split) -> ActivationDataset {
    if ds.meta.iter().all(|m| m.split.is_none()) {
        ds.clone()
    } else {
        ds.filter_split(split)
    }
}

/// Mean of `field` per question, in first-appearance order. Rows lacking the
/// field are skipped; a dataset with none of it is an error naming the field.
pub fn per_question_mean(
    ds: &ActivationDataset,
    field: &str,
    get: impl Fn(&steercal::store::RowMeta) -> Option<f64>,
) -> Result<BTreeMap<String, f64>> {
    let mut sums: BTreeMap<String, (f64, usize)> = BTreeMap::new();
    for m in &ds.meta {
        if let Some(v) = get(m) {
            let e = sums.entry(m.question_id.clone()).or_insert((0.0, 0));
            e.0 += v;
            e.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(Error::invalid(format!("no rows carry the {field} field")));
    }
    Ok(sums.into_iter().map(|(q, (s, n))| (q, s / n as f64)).collect())
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    Error::format(path, e.to_string())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_error(path, e))?;
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_csv<T: serde::de::DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    fs::metadata(path).map_err(|e| Error::io(path, e))?;
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    r.deserialize()
        .collect::<std::result::Result<Vec<T>, _>>()
        .map_err(|e| csv_error(path, e))
}
