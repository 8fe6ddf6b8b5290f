use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{pava, Inversion, MonotoneInterpolant};

/// Smoothed means closer than this form one plateau.
const PLATEAU_TOL: f64 = 1e-12;

/// `−2.0, −1.9, …, +2.0`.
pub fn default_alpha_grid() -> Vec<f64> {
    (-20..=20).map(|i| i as f64 / 10.0).collect()
}

/// Coarse grid for quick reproduction sweeps.
pub fn coarse_alpha_grid() -> Vec<f64> {
    vec![-0.75, -0.5, -0.25, 0.0, 0.25, 0.5, 0.75]
}

/// One parsed confidence from a steered generation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub alpha: f64,
    pub question_id: String,
    pub confidence: f64,
}

/// Monotone map from steering strength to mean verbalized confidence.
#[derive(Debug, Clone, PartialEq)]
pub struct TransferFunction {
    /// `(alpha, mean_confidence)` after smoothing and plateau collapse.
    pub knots: Vec<(f64, f64)>,
    pub interpolant: MonotoneInterpolant,
    pub alpha_range: (f64, f64),
}

impl TransferFunction {
    /// Builds a transfer function from per-alpha means, smoothing them into
    /// a strictly increasing knot sequence first.
    pub fn from_means(alphas: &[f64], means: &[f64]) -> Result<Self> {
        if alphas.len() != means.len() {
            return Err(Error::Dimension {
                expected: alphas.len(),
                actual: means.len(),
            });
        }
        if alphas.iter().chain(means).any(|v| !v.is_finite()) {
            return Err(Error::invalid("sweep values must be finite"));
        }
        let mut pairs: Vec<(f64, f64)> = alphas.iter().copied().zip(means.iter().copied()).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if pairs.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::invalid("transfer knots need distinct alphas"));
        }
        if pairs.len() < 2 {
            return Err(Error::invalid("transfer function needs at least 2 distinct alphas"));
        }
        let smoothed = pava(&pairs.iter().map(|p| p.1).collect::<Vec<_>>(), &vec![1.0; pairs.len()]);
        let knots = collapse_plateaus(&pairs.iter().map(|p| p.0).collect::<Vec<_>>(), &smoothed);
        if knots.len() < 2 {
            return Err(Error::FlatTransfer(format!(
                "mean confidence does not change across {} alphas; steering has no effect",
                pairs.len()
            )));
        }
        let xs: Vec<f64> = knots.iter().map(|k| k.0).collect();
        let ys: Vec<f64> = knots.iter().map(|k| k.1).collect();
        let interpolant = MonotoneInterpolant::fit(&xs, &ys)?;
        Ok(Self {
            alpha_range: (xs[0], xs[xs.len() - 1]),
            knots,
            interpolant,
        })
    }

    pub fn eval(&self, alpha: f64) -> f64 {
        self.interpolant.eval(alpha)
    }

    /// Steering strength expected to produce `target` mean confidence.
    pub fn invert(&self, target: f64) -> Result<Inversion> {
        self.interpolant.invert(target)
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv_writer(path)?;
        w.write_record(["alpha", "mean_confidence"])
            .map_err(|e| csv_err(path, e))?;
        for (a, c) in &self.knots {
            w.write_record([a.to_string(), c.to_string()])
                .map_err(|e| csv_err(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Reads `alpha,mean_confidence` knots and rebuilds the function, so
    /// hand-edited files are smoothed the same way as fitted ones.
    pub fn read_csv(path: &Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            alpha: f64,
            mean_confidence: f64,
        }
        let mut r = csv_reader(path)?;
        let mut alphas = Vec::new();
        let mut means = Vec::new();
        for row in r.deserialize::<Row>() {
            let row = row.map_err(|e| csv_err(path, e))?;
            alphas.push(row.alpha);
            means.push(row.mean_confidence);
        }
        Self::from_means(&alphas, &means)
    }
}

/// Replaces each run of equal values by one knot at the run's midpoint alpha.
fn collapse_plateaus(alphas: &[f64], values: &[f64]) -> Vec<(f64, f64)> {
    let mut knots = Vec::new();
    let mut start = 0;
    for i in 1..=values.len() {
        if i == values.len() || (values[i] - values[start]).abs() > PLATEAU_TOL {
            knots.push((0.5 * (alphas[start] + alphas[i - 1]), values[start]));
            start = i;
        }
    }
    knots
}

/// Fits the transfer function from `(alpha, confidences)` groups. Groups may
/// arrive in any order; repeated alphas are merged.
pub fn fit_transfer(sweep: &[(f64, Vec<f64>)]) -> Result<TransferFunction> {
    let mut by_alpha: BTreeMap<OrderedAlpha, (f64, usize)> = BTreeMap::new();
    for (alpha, confs) in sweep {
        if !alpha.is_finite() {
            return Err(Error::invalid(format!("sweep alpha {alpha} is not finite")));
        }
        if let Some(c) = confs.iter().find(|c| !(0.0..=1.0).contains(*c)) {
            return Err(Error::invalid(format!(
                "sweep confidence {c} at alpha {alpha} outside [0, 1]"
            )));
        }
        let e = by_alpha.entry(OrderedAlpha(*alpha)).or_insert((0.0, 0));
        e.0 += confs.iter().sum::<f64>();
        e.1 += confs.len();
    }
    let mut alphas = Vec::new();
    let mut means = Vec::new();
    for (a, (sum, n)) in by_alpha {
        if n == 0 {
            return Err(Error::invalid(format!("sweep has no confidences at alpha {}", a.0)));
        }
        alphas.push(a.0);
        means.push(sum / n as f64);
    }
    if alphas.len() < 2 {
        return Err(Error::invalid("transfer function needs at least 2 distinct alphas"));
    }
    TransferFunction::from_means(&alphas, &means)
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct OrderedAlpha(f64);

impl Eq for OrderedAlpha {}

impl PartialOrd for OrderedAlpha {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for OrderedAlpha {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

/// Groups sweep records by alpha. Each question's confidences are averaged
/// first, so every question counts once per alpha.
pub fn aggregate_sweep(records: &[SweepRecord]) -> Vec<(f64, Vec<f64>)> {
    let mut groups: BTreeMap<OrderedAlpha, BTreeMap<&str, (f64, usize)>> = BTreeMap::new();
    for r in records {
        let q = groups
            .entry(OrderedAlpha(r.alpha))
            .or_default()
            .entry(r.question_id.as_str())
            .or_insert((0.0, 0));
        q.0 += r.confidence;
        q.1 += 1;
    }
    groups
        .into_iter()
        .map(|(a, qs)| (a.0, qs.values().map(|(s, n)| s / *n as f64).collect()))
        .collect()
}

fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    csv::Writer::from_path(path).map_err(|e| csv_err(path, e))
}

fn csv_reader(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).map_err(|e| csv_err(path, e))
}

pub(crate) fn csv_err(path: &Path, e: csv::Error) -> Error {
    if e.is_io_error() {
        match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::format(path, format!("{other:?}")),
        }
    } else {
        Error::format(path, e.to_string())
    }
}

pub fn write_sweep_csv(path: &Path, records: &[SweepRecord]) -> Result<()> {
    let mut w = csv_writer(path)?;
    for r in records {
        w.serialize(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_sweep_csv(path: &Path) -> Result<Vec<SweepRecord>> {
    let mut r = csv_reader(path)?;
    let mut out = Vec::new();
    for (i, row) in r.deserialize::<SweepRecord>().enumerate() {
        let row = row.map_err(|e| csv_err(path, e))?;
        if !row.alpha.is_finite() || !(0.0..=1.0).contains(&row.confidence) {
            return Err(Error::format(
                path,
                format!("record {i}: alpha must be finite and confidence in [0, 1]"),
            ));
        }
        out.push(row);
    }
    Ok(out)
}
