use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::{decode_f32, encode_f32, read_json, write_json};
use crate::error::{ensure_dim, Error, Result};
use crate::numerics::linalg::norm;
use crate::store::{ActivationDataset, Condition};

pub const DEFAULT_TAU_HI: f64 = 0.75;
pub const DEFAULT_TAU_LO: f64 = 0.25;

/// Contrastive steering vector for one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringVector {
    pub layer: u32,
    /// Mean of the per-question high-minus-low contrasts.
    pub raw: Vec<f64>,
    /// Mean row norm of the source dataset, the injection scale.
    pub mean_activation_norm: f64,
    pub tau_hi: f64,
    pub tau_lo: f64,
    pub num_questions: usize,
    /// Questions lacking a row on one side of the thresholds.
    pub excluded_questions: usize,
}

impl SteeringVector {
    pub fn dim(&self) -> usize {
        self.raw.len()
    }
}

fn check_taus(tau_hi: f64, tau_lo: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&tau_lo) || !(0.0..=1.0).contains(&tau_hi) || tau_lo >= tau_hi {
        return Err(Error::invalid(format!(
            "thresholds need 0 <= tau_lo < tau_hi <= 1, got tau_lo={tau_lo}, tau_hi={tau_hi}"
        )));
    }
    Ok(())
}

#[derive(Default)]
struct Sides {
    hi: Vec<f64>,
    n_hi: usize,
    lo: Vec<f64>,
    n_lo: usize,
}

/// Builds the contrastive vector from pure-confidence activations.
///
/// Rows with confidence strictly above `tau_hi` form a question's high set and
/// rows strictly below `tau_lo` its low set. Each qualifying question
/// contributes one contrast, so questions are weighted equally regardless of
/// how many rows they have.
pub fn build_caa(ds: &ActivationDataset, tau_hi: f64, tau_lo: f64) -> Result<SteeringVector> {
    check_taus(tau_hi, tau_lo)?;
    if ds.condition != Condition::PureConfidence {
        return Err(Error::invalid(format!(
            "steering vectors are built from pure_confidence activations, got {}",
            ds.condition.as_str()
        )));
    }
    let d = ds.dim;
    let mut questions: BTreeMap<&str, Sides> = BTreeMap::new();
    for (i, m) in ds.meta.iter().enumerate() {
        let sides = questions.entry(m.question_id.as_str()).or_default();
        let Some(c) = m.verbalized_confidence else {
            continue;
        };
        let (acc, count) = if c > tau_hi {
            (&mut sides.hi, &mut sides.n_hi)
        } else if c < tau_lo {
            (&mut sides.lo, &mut sides.n_lo)
        } else {
            continue;
        };
        if acc.is_empty() {
            acc.resize(d, 0.0);
        }
        for (a, &v) in acc.iter_mut().zip(ds.row(i)) {
            *a += v as f64;
        }
        *count += 1;
    }

    let mut raw = vec![0.0; d];
    let mut used = 0usize;
    for sides in questions.values() {
        if sides.n_hi == 0 || sides.n_lo == 0 {
            continue;
        }
        for ((r, hi), lo) in raw.iter_mut().zip(&sides.hi).zip(&sides.lo) {
            *r += hi / sides.n_hi as f64 - lo / sides.n_lo as f64;
        }
        used += 1;
    }
    if used == 0 {
        return Err(Error::invalid(format!(
            "no question has rows both above {tau_hi} and below {tau_lo}"
        )));
    }
    for v in &mut raw {
        *v /= used as f64;
    }
    Ok(SteeringVector {
        layer: ds.layer,
        raw,
        mean_activation_norm: ds.mean_row_norm(),
        tau_hi,
        tau_lo,
        num_questions: used,
        excluded_questions: questions.len() - used,
    })
}

/// Unit direction of `sv.raw` scaled to the mean activation norm.
pub fn prepare_direction(sv: &SteeringVector) -> Result<Vec<f64>> {
    let n = norm(&sv.raw);
    if n == 0.0 || !n.is_finite() {
        return Err(Error::invalid("steering vector is zero and has no direction"));
    }
    Ok(sv.raw.iter().map(|v| v / n * sv.mean_activation_norm).collect())
}

/// `h + α·direction`.
pub fn apply_steering(h: &[f64], direction: &[f64], alpha: f64) -> Result<Vec<f64>> {
    ensure_dim(h.len(), direction.len())?;
    Ok(h.iter().zip(direction).map(|(x, d)| x + alpha * d).collect())
}

/// On-disk steering vector; `vector_b64` holds the raw contrast.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SteeringVectorFile {
    pub layer: u32,
    pub dim: usize,
    pub tau_hi: f64,
    pub tau_lo: f64,
    pub num_questions: usize,
    pub mean_activation_norm: f64,
    pub vector_b64: String,
}

pub fn save_steering_vector(path: &Path, sv: &SteeringVector) -> Result<()> {
    write_json(
        path,
        &SteeringVectorFile {
            layer: sv.layer,
            dim: sv.dim(),
            tau_hi: sv.tau_hi,
            tau_lo: sv.tau_lo,
            num_questions: sv.num_questions,
            mean_activation_norm: sv.mean_activation_norm,
            vector_b64: encode_f32(&sv.raw),
        },
    )
}

pub fn load_steering_vector(path: &Path) -> Result<SteeringVector> {
    let file: SteeringVectorFile = read_json(path)?;
    let raw = decode_f32(&file.vector_b64).map_err(|m| Error::format(path, m))?;
    if raw.len() != file.dim {
        return Err(Error::format(
            path,
            format!("vector holds {} values but dim is {}", raw.len(), file.dim),
        ));
    }
    check_taus(file.tau_hi, file.tau_lo).map_err(|e| Error::format(path, e.to_string()))?;
    if !(file.mean_activation_norm.is_finite() && file.mean_activation_norm > 0.0) {
        return Err(Error::format(path, "mean_activation_norm must be positive"));
    }
    Ok(SteeringVector {
        layer: file.layer,
        raw,
        mean_activation_norm: file.mean_activation_norm,
        tau_hi: file.tau_hi,
        tau_lo: file.tau_lo,
        num_questions: file.num_questions,
        excluded_questions: 0,
    })
}
