use std::path::Path;

use serde::{Deserialize, Serialize};

use super::directions::ContaminationPoint;
use super::subspace::{principal_angles, AnalysisSpace, AngleBaseline, Retention, VarianceSplit};
use crate::error::{Error, Result};
use crate::probes::ProbeTarget;
use crate::steering::csv_err;
use crate::store::ActivationDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct GeometryConfig {
    /// Subspace dimension.
    pub k: usize,
    pub pca_dim: usize,
    /// Directions per subspace entering CCA.
    pub cca_m: usize,
    pub target_a: ProbeTarget,
    pub target_b: ProbeTarget,
    pub lambdas: Vec<f64>,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            k: 10,
            pca_dim: 200,
            cca_m: 5,
            target_a: ProbeTarget::EmpiricalAccuracy,
            target_b: ProbeTarget::VerbalizedConfidence,
            lambdas: crate::numerics::default_lambdas(),
        }
    }
}

impl GeometryConfig {
    pub fn validate(&self, dim: usize) -> Result<()> {
        if self.pca_dim == 0 || self.pca_dim > dim {
            return Err(Error::invalid(format!("pca_dim {} must be in 1..={dim}", self.pca_dim)));
        }
        if self.k == 0 || self.k > self.pca_dim {
            return Err(Error::invalid(format!("k {} must be in 1..={}", self.k, self.pca_dim)));
        }
        if self.cca_m == 0 || self.cca_m > self.k {
            return Err(Error::invalid(format!(
                "cca_m {} must be in 1..={}",
                self.cca_m, self.k
            )));
        }
        if self.lambdas.is_empty() {
            return Err(Error::invalid("lambda grid is empty"));
        }
        Ok(())
    }
}

/// All subspace analyses for one layer; `a` and `b` are the two concepts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubspaceReport {
    pub layer: u32,
    pub mean_principal_angle_deg: f64,
    pub min_principal_angle_deg: f64,
    pub random_baseline: AngleBaseline,
    pub cca_correlations: Vec<f64>,
    /// R² retention of `a` after removing `b`'s subspace, and vice versa.
    pub retention_a_given_b_removed: Retention,
    pub retention_b_given_a_removed: Retention,
    /// Removing a concept's own subspace; should leave almost nothing.
    pub retention_self_a: Retention,
    pub retention_self_b: Retention,
    pub variance_a: VarianceSplit,
    pub variance_b: VarianceSplit,
}

pub fn analyze_layer(ds: &ActivationDataset, cfg: &GeometryConfig, baseline: AngleBaseline) -> Result<SubspaceReport> {
    cfg.validate(ds.dim)?;
    let space = AnalysisSpace::new(ds, cfg.pca_dim)?;
    let sa = space.extract_subspace(cfg.target_a, cfg.k, &cfg.lambdas)?;
    let sb = space.extract_subspace(cfg.target_b, cfg.k, &cfg.lambdas)?;
    let angles = principal_angles(&sa, &sb)?;
    Ok(SubspaceReport {
        layer: ds.layer,
        mean_principal_angle_deg: angles.iter().sum::<f64>() / angles.len() as f64,
        min_principal_angle_deg: angles[0],
        random_baseline: baseline,
        cca_correlations: space.cca_top(&sa, &sb, cfg.cca_m)?,
        retention_a_given_b_removed: space.removal_retention(cfg.target_a, &sb, &cfg.lambdas)?,
        retention_b_given_a_removed: space.removal_retention(cfg.target_b, &sa, &cfg.lambdas)?,
        retention_self_a: space.removal_retention(cfg.target_a, &sa, &cfg.lambdas)?,
        retention_self_b: space.removal_retention(cfg.target_b, &sb, &cfg.lambdas)?,
        variance_a: space.variance_decomposition(cfg.target_a, &sa, &sb, &cfg.lambdas)?,
        variance_b: space.variance_decomposition(cfg.target_b, &sb, &sa, &cfg.lambdas)?,
    })
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn write_rows(path: &Path, header: &[String], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn header(cols: &[&str]) -> Vec<String> {
    cols.iter().map(|s| s.to_string()).collect()
}

/// Writes one CSV per analysis into `dir`, one row per layer. Returns the
/// file names written.
pub fn write_subspace_reports(dir: &Path, reports: &[SubspaceReport]) -> Result<Vec<&'static str>> {
    let angles: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.layer.to_string(),
                r.mean_principal_angle_deg.to_string(),
                r.min_principal_angle_deg.to_string(),
                r.random_baseline.mean_deg.to_string(),
                r.random_baseline.two_sigma_deg.to_string(),
            ]
        })
        .collect();
    write_rows(
        &dir.join("principal_angles.csv"),
        &header(&[
            "layer",
            "mean_angle_deg",
            "min_angle_deg",
            "random_mean_deg",
            "random_two_sigma_deg",
        ]),
        &angles,
    )?;

    let m = reports.iter().map(|r| r.cca_correlations.len()).max().unwrap_or(0);
    let mut cca_header = vec!["layer".to_string()];
    cca_header.extend((1..=m).map(|i| format!("cca_{i}")));
    let cca: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let mut row = vec![r.layer.to_string()];
            row.extend((0..m).map(|i| fmt_opt(r.cca_correlations.get(i).copied())));
            row
        })
        .collect();
    write_rows(&dir.join("cca.csv"), &cca_header, &cca)?;

    let retention: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            let ret = [
                r.retention_a_given_b_removed,
                r.retention_b_given_a_removed,
                r.retention_self_a,
                r.retention_self_b,
            ];
            let mut row = vec![r.layer.to_string()];
            row.extend(ret.iter().map(|x| fmt_opt(x.ratio)));
            row.extend(ret.iter().map(|x| x.r2_before.to_string()));
            row.extend(ret.iter().map(|x| x.r2_after.to_string()));
            row.push(ret.iter().any(|x| x.flagged).to_string());
            row
        })
        .collect();
    write_rows(
        &dir.join("retention.csv"),
        &header(&[
            "layer",
            "a_given_b_removed",
            "b_given_a_removed",
            "self_a",
            "self_b",
            "r2_before_a_cross",
            "r2_before_b_cross",
            "r2_before_a_self",
            "r2_before_b_self",
            "r2_after_a_cross",
            "r2_after_b_cross",
            "r2_after_a_self",
            "r2_after_b_self",
            "flagged",
        ]),
        &retention,
    )?;

    let variance: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.layer.to_string(),
                r.variance_a.unique.to_string(),
                r.variance_a.shared.to_string(),
                r.variance_b.unique.to_string(),
                r.variance_b.shared.to_string(),
                r.variance_a.full.to_string(),
                r.variance_b.full.to_string(),
            ]
        })
        .collect();
    write_rows(
        &dir.join("variance.csv"),
        &header(&[
            "layer", "unique_a", "shared_a", "unique_b", "shared_b", "full_a", "full_b",
        ]),
        &variance,
    )?;
    Ok(vec!["principal_angles.csv", "cca.csv", "retention.csv", "variance.csv"])
}

pub fn write_contamination_csv(path: &Path, points: &[ContaminationPoint]) -> Result<()> {
    let rows: Vec<Vec<String>> = points
        .iter()
        .map(|p| vec![p.layer.to_string(), p.cos_pure.to_string(), p.cos_joint.to_string()])
        .collect();
    write_rows(path, &header(&["layer", "cos_pure", "cos_joint"]), &rows)
}

/// `layer,cosine` rows for probe-weight alignment.
pub fn write_probe_cosine_csv(path: &Path, rows: &[(u32, f64)]) -> Result<()> {
    let rows: Vec<Vec<String>> = rows.iter().map(|(l, c)| vec![l.to_string(), c.to_string()]).collect();
    write_rows(path, &header(&["layer", "probe_cosine"]), &rows)
}
