use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{ensure_dim, Error, Result};
use crate::numerics::{IsotonicModel, RidgeFit};
use crate::probes::per_question_predictions;
use crate::steering::transfer::{csv_err, TransferFunction};
use crate::store::ActivationDataset;

/// Steering assignment for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanEntry {
    pub question_id: String,
    /// Mean raw probe score over the question's rows.
    pub probe_raw: f64,
    /// Calibrated accuracy estimate the steered confidence should match.
    pub target_confidence: f64,
    pub alpha_star: f64,
    /// The target fell outside the transfer range and `alpha_star` is an endpoint.
    pub clamped: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct SteeringPlan {
    pub entries: Vec<PlanEntry>,
}

impl SteeringPlan {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
        for e in &self.entries {
            w.serialize(e).map_err(|err| csv_err(path, err))?;
        }
        if self.entries.is_empty() {
            w.write_record(["question_id", "probe_raw", "target_confidence", "alpha_star", "clamped"])
                .map_err(|err| csv_err(path, err))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
        let entries = r
            .deserialize::<PlanEntry>()
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| csv_err(path, e))?;
        Ok(Self { entries })
    }
}

/// Target confidence for a raw probe score.
pub fn calibrated_target(iso: &IsotonicModel, probe_raw: f64) -> f64 {
    iso.predict(probe_raw).clamp(0.0, 1.0)
}

/// Per-question steering strengths: probe score → isotonic calibration →
/// inverse transfer function. Entries follow first appearance in `test_ds`.
pub fn plan_adaptive(
    probe: &RidgeFit,
    iso: &IsotonicModel,
    tf: &TransferFunction,
    test_ds: &ActivationDataset,
) -> Result<SteeringPlan> {
    if test_ds.is_empty() {
        return Err(Error::invalid("cannot plan steering for an empty dataset"));
    }
    ensure_dim(probe.dim(), test_ds.dim)?;
    let mut entries = Vec::new();
    for (question_id, probe_raw) in per_question_predictions(probe, test_ds)? {
        let target_confidence = calibrated_target(iso, probe_raw);
        let inv = tf.invert(target_confidence)?;
        entries.push(PlanEntry {
            question_id,
            probe_raw,
            target_confidence,
            alpha_star: inv.x,
            clamped: inv.clamped,
        });
    }
    Ok(SteeringPlan { entries })
}
