//! Linear probes for empirical accuracy and verbalized confidence.
//!
//! A probe is a ridge readout chosen by validation R² over a regularization
//! grid. Test rows are scored once, after the strength has been selected.

use std::path::Path;

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::codec::{decode_f32, encode_f32, read_json, write_json};
use crate::error::{ensure_dim, Error, Result};
use crate::numerics::{cohens_d, pearson_r, sweep_ridge, CohensD, RidgeFit};
use crate::store::{ActivationDataset, Condition, RowMeta, Split};

/// Which metadata field a probe regresses onto.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProbeTarget {
    /// Fraction correct over repeated samples, used as is.
    EmpiricalAccuracy,
    /// Fraction correct mapped to the midpoint of its decile bin.
    EmpiricalAccuracyBinned,
    /// Per-row correctness as 0/1.
    BinaryCorrect,
    VerbalizedConfidence,
}

impl ProbeTarget {
    pub const ALL: [ProbeTarget; 4] = [
        ProbeTarget::EmpiricalAccuracy,
        ProbeTarget::EmpiricalAccuracyBinned,
        ProbeTarget::BinaryCorrect,
        ProbeTarget::VerbalizedConfidence,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ProbeTarget::EmpiricalAccuracy => "empirical_accuracy",
            ProbeTarget::EmpiricalAccuracyBinned => "empirical_accuracy_binned",
            ProbeTarget::BinaryCorrect => "binary_correct",
            ProbeTarget::VerbalizedConfidence => "verbalized_confidence",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|t| t.as_str() == s)
    }

    /// Metadata field that supplies the target.
    pub fn field(self) -> &'static str {
        match self {
            ProbeTarget::EmpiricalAccuracy | ProbeTarget::EmpiricalAccuracyBinned => "empirical_accuracy",
            ProbeTarget::BinaryCorrect => "correct",
            ProbeTarget::VerbalizedConfidence => "verbalized_confidence",
        }
    }

    pub fn is_accuracy(self) -> bool {
        !matches!(self, ProbeTarget::VerbalizedConfidence)
    }

    pub fn value(self, meta: &RowMeta) -> Option<f64> {
        match self {
            ProbeTarget::EmpiricalAccuracy => meta.empirical_accuracy,
            ProbeTarget::EmpiricalAccuracyBinned => meta.empirical_accuracy.map(decile_midpoint),
            ProbeTarget::BinaryCorrect => meta.correct.map(|c| if c { 1.0 } else { 0.0 }),
            ProbeTarget::VerbalizedConfidence => meta.verbalized_confidence,
        }
    }

    /// Accuracy targets need a prompt that does not elicit confidence, and
    /// confidence targets need one that does.
    pub fn check_condition(self, condition: Condition) -> Result<()> {
        let ok = match condition {
            Condition::PureCorrectness => self.is_accuracy(),
            Condition::PureConfidence => !self.is_accuracy(),
            Condition::Joint => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::invalid(format!(
                "target {} cannot be fit on {} activations",
                self.as_str(),
                condition.as_str()
            )))
        }
    }
}

fn decile_midpoint(a: f64) -> f64 {
    ((a * 10.0).floor().min(9.0) + 0.5) / 10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProjectionStats {
    /// Effect size of the scalar projection between correct and incorrect rows.
    pub cohens_d: CohensD,
    /// Correlation of the projection with empirical accuracy, when present.
    pub pearson_r: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerProbeResult {
    pub layer: u32,
    pub target: ProbeTarget,
    pub fit: RidgeFit,
    pub projection_stats: Option<ProjectionStats>,
    pub rows_used: usize,
    /// Rows skipped because the target field was absent.
    pub rows_excluded: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeOptions {
    pub lambdas: Vec<f64>,
    /// Standardize features by training-split statistics before fitting.
    /// Weights are mapped back to raw feature space.
    pub standardize: bool,
}

impl Default for ProbeOptions {
    fn default() -> Self {
        Self {
            lambdas: crate::numerics::default_lambdas(),
            standardize: false,
        }
    }
}

struct SplitData {
    idx: Vec<usize>,
    y: Vec<f64>,
}

fn gather(ds: &ActivationDataset, target: ProbeTarget, split: Split) -> SplitData {
    let mut idx = Vec::new();
    let mut y = Vec::new();
    for (i, m) in ds.meta.iter().enumerate() {
        if m.split != Some(split) {
            continue;
        }
        if let Some(v) = target.value(m) {
            idx.push(i);
            y.push(v);
        }
    }
    SplitData { idx, y }
}

/// Column means and standard deviations of `x` (unit scale for constant columns).
fn column_scale(x: &DMatrix<f64>) -> (Vec<f64>, Vec<f64>) {
    let n = x.nrows() as f64;
    let mut means = Vec::with_capacity(x.ncols());
    let mut sds = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let m = col.sum() / n;
        let var = col.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
        means.push(m);
        sds.push(if var > 0.0 { var.sqrt() } else { 1.0 });
    }
    (means, sds)
}

fn scale_columns(x: &DMatrix<f64>, means: &[f64], sds: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(x.nrows(), x.ncols(), |r, c| (x[(r, c)] - means[c]) / sds[c])
}

/// Fits a probe for `target` with the λ grid in `opts`.
pub fn fit_probe_with(ds: &ActivationDataset, target: ProbeTarget, opts: &ProbeOptions) -> Result<LayerProbeResult> {
    target.check_condition(ds.condition)?;
    let with_field = ds.meta.iter().filter(|m| target.value(m).is_some()).count();
    if with_field == 0 {
        return Err(Error::invalid(format!(
            "no rows carry the {} field required by target {}",
            target.field(),
            target.as_str()
        )));
    }
    let train = gather(ds, target, Split::Train);
    let val = gather(ds, target, Split::Val);
    let test = gather(ds, target, Split::Test);
    for (name, part) in [("train", &train), ("val", &val)] {
        if part.idx.is_empty() {
            return Err(Error::invalid(format!(
                "no {name} rows with {}; assign splits first",
                target.field()
            )));
        }
    }
    let first = train.y[0];
    if train.y.iter().all(|&v| v == first) {
        return Err(Error::invalid(format!(
            "target {} has fewer than 2 distinct values in the train split",
            target.as_str()
        )));
    }

    let x_train = ds.matrix_of(&train.idx);
    let x_val = ds.matrix_of(&val.idx);
    let mut fit = if opts.standardize {
        let (means, sds) = column_scale(&x_train);
        let mut f = sweep_ridge(
            &scale_columns(&x_train, &means, &sds),
            &train.y,
            &scale_columns(&x_val, &means, &sds),
            &val.y,
            &opts.lambdas,
        )?;
        for (w, s) in f.weights.iter_mut().zip(&sds) {
            *w /= s;
        }
        f.bias -= f.weights.iter().zip(&means).map(|(w, m)| w * m).sum::<f64>();
        f
    } else {
        sweep_ridge(&x_train, &train.y, &x_val, &val.y, &opts.lambdas)?
    };

    let mut projection_stats = None;
    if !test.idx.is_empty() {
        let x_test = ds.matrix_of(&test.idx);
        fit.score_test(&x_test, &test.y)?;
        if target == ProbeTarget::BinaryCorrect {
            projection_stats = projection_stats_for(ds, &test.idx, &fit, &x_test)?;
        }
    }

    Ok(LayerProbeResult {
        layer: ds.layer,
        target,
        fit,
        projection_stats,
        rows_used: train.idx.len() + val.idx.len() + test.idx.len(),
        rows_excluded: ds.len() - with_field,
    })
}

/// Fits a probe with default options except for the λ grid.
pub fn fit_probe(ds: &ActivationDataset, target: ProbeTarget, lambdas: &[f64]) -> Result<LayerProbeResult> {
    fit_probe_with(
        ds,
        target,
        &ProbeOptions {
            lambdas: lambdas.to_vec(),
            standardize: false,
        },
    )
}

fn projection_stats_for(
    ds: &ActivationDataset,
    idx: &[usize],
    fit: &RidgeFit,
    x: &DMatrix<f64>,
) -> Result<Option<ProjectionStats>> {
    let w = nalgebra::DVector::from_column_slice(&fit.weights);
    let proj = x * w;
    let (mut pos, mut neg) = (Vec::new(), Vec::new());
    let (mut p_acc, mut acc) = (Vec::new(), Vec::new());
    for (r, &i) in idx.iter().enumerate() {
        let m = &ds.meta[i];
        match m.correct {
            Some(true) => pos.push(proj[r]),
            Some(false) => neg.push(proj[r]),
            None => {}
        }
        if let Some(a) = m.empirical_accuracy {
            p_acc.push(proj[r]);
            acc.push(a);
        }
    }
    if pos.len() < 2 || neg.len() < 2 {
        return Ok(None);
    }
    let d = cohens_d(&pos, &neg)?;
    let r = pearson_r(&p_acc, &acc).ok();
    Ok(Some(ProjectionStats {
        cohens_d: d,
        pearson_r: r,
    }))
}

/// Raw probe scores `X·w + b`, unclamped.
pub fn probe_predict(fit: &RidgeFit, x: &DMatrix<f64>) -> Result<Vec<f64>> {
    fit.predict(x)
}

/// One probe per layer, ordered by layer index.
pub fn layer_curve(
    datasets: &[ActivationDataset],
    target: ProbeTarget,
    lambdas: &[f64],
) -> Result<Vec<LayerProbeResult>> {
    if let Some(first) = datasets.first() {
        for ds in datasets {
            if ds.model_id != first.model_id || ds.condition != first.condition || ds.position != first.position {
                return Err(Error::invalid(
                    "layer curve datasets must share model, condition and position",
                ));
            }
        }
    }
    let mut results: Vec<LayerProbeResult> = datasets
        .par_iter()
        .map(|ds| fit_probe(ds, target, lambdas))
        .collect::<Result<_>>()?;
    results.sort_by_key(|r| r.layer);
    Ok(results)
}

/// On-disk probe: weights as base64 little-endian float32.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeFile {
    pub layer: u32,
    pub lambda: f64,
    pub bias: f64,
    pub r2_train: f64,
    pub r2_val: Option<f64>,
    pub r2_test: Option<f64>,
    pub weights_b64: String,
}

pub fn save_probe(path: &Path, layer: u32, fit: &RidgeFit) -> Result<()> {
    let file = ProbeFile {
        layer,
        lambda: fit.lambda,
        bias: fit.bias,
        r2_train: fit.r2_train,
        r2_val: fit.r2_val,
        r2_test: fit.r2_test,
        weights_b64: encode_f32(&fit.weights),
    };
    write_json(path, &file)
}

/// Reads a probe file, returning its layer and fit.
pub fn load_probe(path: &Path) -> Result<(u32, RidgeFit)> {
    let file: ProbeFile = read_json(path)?;
    let weights = decode_f32(&file.weights_b64).map_err(|m| Error::format(path, m))?;
    if weights.is_empty() {
        return Err(Error::format(path, "probe has no weights"));
    }
    Ok((
        file.layer,
        RidgeFit {
            weights,
            bias: file.bias,
            lambda: file.lambda,
            r2_train: file.r2_train,
            r2_val: file.r2_val,
            r2_test: file.r2_test,
        },
    ))
}

/// Mean probe prediction per question, in first-appearance order.
pub fn per_question_predictions(fit: &RidgeFit, ds: &ActivationDataset) -> Result<Vec<(String, f64)>> {
    ensure_dim(fit.dim(), ds.dim)?;
    let pred = fit.predict(&ds.matrix())?;
    let mut order: Vec<String> = Vec::new();
    let mut sums: std::collections::HashMap<&str, (f64, usize)> = std::collections::HashMap::new();
    for (m, p) in ds.meta.iter().zip(&pred) {
        let e = sums.entry(m.question_id.as_str()).or_insert_with(|| {
            order.push(m.question_id.clone());
            (0.0, 0)
        });
        e.0 += p;
        e.1 += 1;
    }
    Ok(order
        .into_iter()
        .map(|q| {
            let (s, n) = sums[q.as_str()];
            (q, s / n as f64)
        })
        .collect())
}
