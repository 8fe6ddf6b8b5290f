//! On-disk activation datasets.
//!
//! A dataset directory holds three files:
//!
//! - `manifest.json`: shape, provenance and a CRC-32 of the payload,
//! - `activations.f32`: the `rows × dim` matrix, row-major little-endian IEEE-754 float32,
//! - `meta.jsonl`: one JSON object per row.
//!
//! All rows in a dataset share a single `(layer, condition, position)` triple.

mod io;
mod split;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use io::{read_dataset, write_dataset, Manifest, ACTIVATIONS_FILE, FORMAT_VERSION, MANIFEST_FILE, META_FILE};
pub use split::{split_by_question, split_unit, SplitFractions};

/// Prompt condition under which activations were collected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Condition {
    PureCorrectness,
    PureConfidence,
    Joint,
}

impl Condition {
    pub fn as_str(self) -> &'static str {
        match self {
            Condition::PureCorrectness => "pure_correctness",
            Condition::PureConfidence => "pure_confidence",
            Condition::Joint => "joint",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "pure_correctness" => Some(Condition::PureCorrectness),
            "pure_confidence" => Some(Condition::PureConfidence),
            "joint" => Some(Condition::Joint),
            _ => None,
        }
    }

    /// Whether prompt framings apply to this condition.
    pub fn is_framed(self) -> bool {
        !matches!(self, Condition::PureCorrectness)
    }
}

/// Token position the activation was read at.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Position {
    PromptFinal,
    AnswerFinal,
}

impl Position {
    pub fn as_str(self) -> &'static str {
        match self {
            Position::PromptFinal => "prompt_final",
            Position::AnswerFinal => "answer_final",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "prompt_final" => Some(Position::PromptFinal),
            "answer_final" => Some(Position::AnswerFinal),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Val,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
            Split::Test => "test",
        }
    }
}

/// Per-row metadata. Absent values serialize as JSON `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RowMeta {
    pub question_id: String,
    pub dataset_name: String,
    pub framing: Option<u32>,
    pub verbalized_confidence: Option<f64>,
    pub correct: Option<bool>,
    pub empirical_accuracy: Option<f64>,
    pub split: Option<Split>,
}

impl RowMeta {
    pub fn new(question_id: impl Into<String>, dataset_name: impl Into<String>) -> Self {
        Self {
            question_id: question_id.into(),
            dataset_name: dataset_name.into(),
            framing: None,
            verbalized_confidence: None,
            correct: None,
            empirical_accuracy: None,
            split: None,
        }
    }

    fn validate(&self, row: usize, condition: Condition) -> std::result::Result<(), String> {
        for (name, value) in [
            ("verbalized_confidence", self.verbalized_confidence),
            ("empirical_accuracy", self.empirical_accuracy),
        ] {
            if let Some(v) = value {
                if !(0.0..=1.0).contains(&v) {
                    return Err(format!("row {row}: {name} = {v} outside [0, 1]"));
                }
            }
        }
        if self.framing.is_some() && !condition.is_framed() {
            return Err(format!(
                "row {row}: framing set but condition is {}",
                condition.as_str()
            ));
        }
        Ok(())
    }
}

/// Residual-stream activations for one `(layer, condition, position)` triple.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationDataset {
    pub dim: usize,
    pub layer: u32,
    pub model_id: String,
    pub condition: Condition,
    pub position: Position,
    /// Row-major `meta.len() × dim` payload.
    pub values: Vec<f32>,
    pub meta: Vec<RowMeta>,
}

impl ActivationDataset {
    /// Builds a dataset and checks every invariant.
    pub fn new(
        dim: usize,
        layer: u32,
        model_id: impl Into<String>,
        condition: Condition,
        position: Position,
        values: Vec<f32>,
        meta: Vec<RowMeta>,
    ) -> Result<Self> {
        let ds = Self {
            dim,
            layer,
            model_id: model_id.into(),
            condition,
            position,
            values,
            meta,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::invalid("dataset dim must be positive"));
        }
        if self.values.len() != self.meta.len() * self.dim {
            return Err(Error::invalid(format!(
                "payload holds {} values but {} rows × {} dims were declared",
                self.values.len(),
                self.meta.len(),
                self.dim
            )));
        }
        if let Some(pos) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!(
                "row {} has a non-finite activation",
                pos / self.dim
            )));
        }
        for (i, m) in self.meta.iter().enumerate() {
            m.validate(i, self.condition).map_err(Error::Invalid)?;
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.meta.len()
    }

    pub fn is_empty(&self) -> bool {
        self.meta.is_empty()
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    /// Rows at `indices` as an `f64` matrix.
    pub fn matrix_of(&self, indices: &[usize]) -> DMatrix<f64> {
        DMatrix::from_fn(indices.len(), self.dim, |r, c| {
            self.values[indices[r] * self.dim + c] as f64
        })
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(
            self.len(),
            self.dim,
            &self.values.iter().map(|&v| v as f64).collect::<Vec<_>>(),
        )
    }

    /// Indices of rows assigned to `split`.
    pub fn split_indices(&self, split: Split) -> Vec<usize> {
        self.meta
            .iter()
            .enumerate()
            .filter(|(_, m)| m.split == Some(split))
            .map(|(i, _)| i)
            .collect()
    }

    /// A copy holding only the rows at `indices`, in that order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut values = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            values.extend_from_slice(self.row(i));
        }
        Self {
            dim: self.dim,
            layer: self.layer,
            model_id: self.model_id.clone(),
            condition: self.condition,
            position: self.position,
            values,
            meta: indices.iter().map(|&i| self.meta[i].clone()).collect(),
        }
    }

    pub fn filter_split(&self, split: Split) -> Self {
        self.select(&self.split_indices(split))
    }

    /// Mean Euclidean norm over all rows.
    pub fn mean_row_norm(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        let total: f64 = (0..self.len())
            .map(|i| self.row(i).iter().map(|&v| (v as f64) * (v as f64)).sum::<f64>().sqrt())
            .sum();
        total / self.len() as f64
    }
}
