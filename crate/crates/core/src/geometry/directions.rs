use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::linalg::cosine;
use crate::numerics::quantile;
use crate::store::{ActivationDataset, RowMeta};

pub const DEFAULT_HI_QUANTILE: f64 = 0.75;
pub const DEFAULT_LO_QUANTILE: f64 = 0.25;

/// Cosine between two probe weight vectors.
pub fn weight_cosine(w1: &[f64], w2: &[f64]) -> Result<f64> {
    cosine(w1, w2)
}

/// Row label used to form high and low groups.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupLabel {
    VerbalizedConfidence,
    EmpiricalAccuracy,
}

impl GroupLabel {
    pub fn as_str(self) -> &'static str {
        match self {
            GroupLabel::VerbalizedConfidence => "verbalized_confidence",
            GroupLabel::EmpiricalAccuracy => "empirical_accuracy",
        }
    }

    fn value(self, m: &RowMeta) -> Option<f64> {
        match self {
            GroupLabel::VerbalizedConfidence => m.verbalized_confidence,
            GroupLabel::EmpiricalAccuracy => m.empirical_accuracy,
        }
    }
}

/// Mean of rows whose label is at or above the `hi_q` quantile minus the mean
/// of rows at or below the `lo_q` quantile, pooled over all rows regardless of
/// question.
pub fn group_contrast(ds: &ActivationDataset, label: GroupLabel, hi_q: f64, lo_q: f64) -> Result<Vec<f64>> {
    if !(0.0..=1.0).contains(&lo_q) || !(0.0..=1.0).contains(&hi_q) || lo_q >= hi_q {
        return Err(Error::invalid(format!(
            "quantiles need 0 <= lo < hi <= 1, got lo={lo_q}, hi={hi_q}"
        )));
    }
    let labelled: Vec<(usize, f64)> = ds
        .meta
        .iter()
        .enumerate()
        .filter_map(|(i, m)| label.value(m).map(|v| (i, v)))
        .collect();
    if labelled.is_empty() {
        return Err(Error::invalid(format!("no rows carry {}", label.as_str())));
    }
    let values: Vec<f64> = labelled.iter().map(|p| p.1).collect();
    let t_hi = quantile(&values, hi_q);
    let t_lo = quantile(&values, lo_q);
    if t_hi <= t_lo {
        return Err(Error::invalid(format!(
            "{} quantiles coincide at {t_hi}; high and low groups are not separable",
            label.as_str()
        )));
    }
    let d = ds.dim;
    let (mut hi, mut lo) = (vec![0.0; d], vec![0.0; d]);
    let (mut n_hi, mut n_lo) = (0usize, 0usize);
    for &(i, v) in &labelled {
        let (acc, n) = if v >= t_hi {
            (&mut hi, &mut n_hi)
        } else if v <= t_lo {
            (&mut lo, &mut n_lo)
        } else {
            continue;
        };
        for (a, &x) in acc.iter_mut().zip(ds.row(i)) {
            *a += x as f64;
        }
        *n += 1;
    }
    if n_hi == 0 || n_lo == 0 {
        return Err(Error::invalid("high or low group is empty"));
    }
    Ok(hi
        .iter()
        .zip(&lo)
        .map(|(h, l)| h / n_hi as f64 - l / n_lo as f64)
        .collect())
}

/// Cosine between the confidence and accuracy group contrasts of one dataset.
pub fn contrast_alignment(ds: &ActivationDataset, hi_q: f64, lo_q: f64) -> Result<f64> {
    let c = group_contrast(ds, GroupLabel::VerbalizedConfidence, hi_q, lo_q)?;
    let a = group_contrast(ds, GroupLabel::EmpiricalAccuracy, hi_q, lo_q)?;
    cosine(&c, &a)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContaminationPoint {
    pub layer: u32,
    pub cos_pure: f64,
    pub cos_joint: f64,
}

/// Confidence/accuracy contrast alignment per layer under the pure and joint
/// prompts. Datasets are paired by layer.
pub fn contamination_curve(
    pure: &[ActivationDataset],
    joint: &[ActivationDataset],
    hi_q: f64,
    lo_q: f64,
) -> Result<Vec<ContaminationPoint>> {
    let mut joint_by_layer: BTreeMap<u32, &ActivationDataset> = BTreeMap::new();
    for ds in joint {
        if joint_by_layer.insert(ds.layer, ds).is_some() {
            return Err(Error::invalid(format!(
                "layer {} appears twice in the joint set",
                ds.layer
            )));
        }
    }
    let mut out = Vec::with_capacity(pure.len());
    for p in pure {
        let j = joint_by_layer
            .get(&p.layer)
            .ok_or_else(|| Error::invalid(format!("layer {} has no joint-condition dataset", p.layer)))?;
        out.push(ContaminationPoint {
            layer: p.layer,
            cos_pure: contrast_alignment(p, hi_q, lo_q)?,
            cos_joint: contrast_alignment(j, hi_q, lo_q)?,
        });
    }
    if out.len() != joint_by_layer.len() {
        return Err(Error::invalid("pure and joint datasets cover different layers"));
    }
    out.sort_by_key(|p| p.layer);
    Ok(out)
}
