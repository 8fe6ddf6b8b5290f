use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::geometry::{
    analyze_layer, contamination_curve, random_angle_baseline, weight_cosine, write_contamination_csv,
    write_probe_cosine_csv, write_subspace_reports, GeometryConfig, DEFAULT_HI_QUANTILE, DEFAULT_LO_QUANTILE,
};
use steercal::numerics::{default_lambdas, RidgeFit};
use steercal::probes::load_probe;
use steercal::{Error, Result};

use crate::commands::probe::{parse_target, validate_lambdas};
use crate::config::{ensure_dir, resolve, write_resolved};
use crate::data::{load_datasets, load_layer_set};

pub const PROBE_COSINE_FILE: &str = "probe_cosine.csv";
pub const CONTAMINATION_FILE: &str = "contamination.csv";

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Probe directory for the first concept.
    #[arg(long, requires = "probes_b")]
    #[serde(skip)]
    pub probes_a: Option<PathBuf>,
    /// Probe directory for the second concept, paired with the first by layer.
    #[arg(long, requires = "probes_a")]
    #[serde(skip)]
    pub probes_b: Option<PathBuf>,
    /// Pure-confidence datasets for the contamination curve.
    #[arg(long, requires = "joint")]
    #[serde(skip)]
    pub pure: Option<PathBuf>,
    /// Joint-condition datasets for the contamination curve.
    #[arg(long, requires = "pure")]
    #[serde(skip)]
    pub joint: Option<PathBuf>,
    /// Joint-condition datasets for the subspace analyses.
    #[arg(long)]
    #[serde(skip)]
    pub data: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub pca_dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cca_m: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_a: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target_b: Option<String>,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    /// Random subspace pairs for the angle baseline.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Quantile above which rows form the high contrast group.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hi_quantile: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lo_quantile: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub k: usize,
    pub pca_dim: usize,
    pub cca_m: usize,
    pub target_a: String,
    pub target_b: String,
    pub lambdas: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
    pub hi_quantile: f64,
    pub lo_quantile: f64,
}

impl Default for Config {
    fn default() -> Self {
        let g = GeometryConfig::default();
        Self {
            k: g.k,
            pca_dim: g.pca_dim,
            cca_m: g.cca_m,
            target_a: g.target_a.as_str().into(),
            target_b: g.target_b.as_str().into(),
            lambdas: default_lambdas(),
            trials: 1000,
            seed: 0,
            hi_quantile: DEFAULT_HI_QUANTILE,
            lo_quantile: DEFAULT_LO_QUANTILE,
        }
    }
}

impl Config {
    fn geometry(&self) -> Result<GeometryConfig> {
        validate_lambdas(&self.lambdas)?;
        if self.trials < 2 {
            return Err(Error::invalid("trials must be at least 2"));
        }
        Ok(GeometryConfig {
            k: self.k,
            pca_dim: self.pca_dim,
            cca_m: self.cca_m,
            target_a: parse_target(&self.target_a)?,
            target_b: parse_target(&self.target_b)?,
            lambdas: self.lambdas.clone(),
        })
    }

    fn check_quantiles(&self) -> Result<()> {
        if !(0.0 <= self.lo_quantile && self.lo_quantile < self.hi_quantile && self.hi_quantile <= 1.0) {
            return Err(Error::invalid(format!(
                "need 0 <= lo_quantile < hi_quantile <= 1, got {} and {}",
                self.lo_quantile, self.hi_quantile
            )));
        }
        Ok(())
    }
}

fn load_probe_dir(dir: &Path) -> Result<BTreeMap<u32, RidgeFit>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut paths: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("probe_layer_") && n.ends_with(".json"))
        })
        .collect();
    paths.sort();
    let mut out = BTreeMap::new();
    for p in paths {
        let (layer, fit) = load_probe(&p)?;
        if out.insert(layer, fit).is_some() {
            return Err(Error::invalid(format!(
                "{} holds two probes for layer {layer}",
                dir.display()
            )));
        }
    }
    if out.is_empty() {
        return Err(Error::format(dir, "no probe_layer_*.json files"));
    }
    Ok(out)
}

fn probe_cosines(a: &Path, b: &Path) -> Result<Vec<(u32, f64)>> {
    let pa = load_probe_dir(a)?;
    let pb = load_probe_dir(b)?;
    if !pa.keys().eq(pb.keys()) {
        return Err(Error::invalid(format!(
            "probe layers differ: {:?} in {} against {:?} in {}",
            pa.keys().collect::<Vec<_>>(),
            a.display(),
            pb.keys().collect::<Vec<_>>(),
            b.display()
        )));
    }
    pa.iter()
        .map(|(layer, fa)| Ok((*layer, weight_cosine(&fa.weights, &pb[layer].weights)?)))
        .collect()
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("geometry", file, args)?;
    let probes = args.probes_a.as_deref().zip(args.probes_b.as_deref());
    let contamination = args.pure.as_deref().zip(args.joint.as_deref());
    if probes.is_none() && contamination.is_none() && args.data.is_none() {
        return Err(Error::invalid("pass --probes-a/--probes-b, --pure/--joint or --data"));
    }
    let geometry = match args.data {
        Some(_) => Some(cfg.geometry()?),
        None => None,
    };
    if contamination.is_some() {
        cfg.check_quantiles()?;
    }

    let cosines = probes.map(|(a, b)| probe_cosines(a, b)).transpose()?;
    let curve = contamination
        .map(|(pure, joint)| {
            contamination_curve(
                &load_datasets(pure)?,
                &load_datasets(joint)?,
                cfg.hi_quantile,
                cfg.lo_quantile,
            )
        })
        .transpose()?;
    let reports = match (&args.data, &geometry) {
        (Some(dir), Some(g)) => {
            let sets = load_layer_set(dir)?;
            let baseline = random_angle_baseline(g.k, g.pca_dim, cfg.trials, cfg.seed)?;
            Some(
                sets.iter()
                    .map(|ds| analyze_layer(ds, g, baseline))
                    .collect::<Result<Vec<_>>>()?,
            )
        }
        _ => None,
    };

    ensure_dir(&args.out)?;
    if let Some(rows) = &cosines {
        write_probe_cosine_csv(&args.out.join(PROBE_COSINE_FILE), rows)?;
        for (layer, c) in rows {
            println!("layer {layer}: probe cosine {c:.4}");
        }
    }
    if let Some(points) = &curve {
        write_contamination_csv(&args.out.join(CONTAMINATION_FILE), points)?;
    }
    if let Some(reports) = &reports {
        for name in write_subspace_reports(&args.out, reports)? {
            println!("wrote {}", args.out.join(name).display());
        }
    }
    write_resolved(&args.out, &cfg)
}
