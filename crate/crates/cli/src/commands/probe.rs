use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::numerics::default_lambdas;
use steercal::probes::{fit_probe_with, save_probe, LayerProbeResult, ProbeOptions, ProbeTarget};
use steercal::{Error, Result};

use crate::config::{ensure_dir, resolve, write_resolved};
use crate::data::{load_layer_set, write_csv};

pub const R2_FILE: &str = "probe_r2.csv";

pub fn probe_file_name(layer: u32) -> String {
    format!("probe_layer_{layer}.json")
}

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Dataset directory, or a directory of per-layer datasets.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// empirical_accuracy, empirical_accuracy_binned, binary_correct or
    /// verbalized_confidence.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    /// Ridge strengths searched on the validation split.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambdas: Option<Vec<f64>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub standardize: Option<bool>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub target: String,
    pub lambdas: Vec<f64>,
    pub standardize: bool,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            target: ProbeTarget::EmpiricalAccuracy.as_str().into(),
            lambdas: default_lambdas(),
            standardize: false,
        }
    }
}

pub fn validate_lambdas(lambdas: &[f64]) -> Result<()> {
    if lambdas.is_empty() {
        return Err(Error::invalid("lambda grid is empty"));
    }
    if let Some(l) = lambdas.iter().find(|l| !(l.is_finite() && **l >= 0.0)) {
        return Err(Error::invalid(format!("lambda {l} must be finite and nonnegative")));
    }
    Ok(())
}

pub fn parse_target(name: &str) -> Result<ProbeTarget> {
    ProbeTarget::parse(name).ok_or_else(|| Error::invalid(format!("unknown probe target `{name}`")))
}

#[derive(Serialize)]
struct R2Row {
    layer: u32,
    target: &'static str,
    lambda: f64,
    r2_train: f64,
    r2_val: Option<f64>,
    r2_test: Option<f64>,
    rows_used: usize,
    rows_excluded: usize,
    cohens_d: Option<f64>,
    pearson_r: Option<f64>,
}

impl From<&LayerProbeResult> for R2Row {
    fn from(r: &LayerProbeResult) -> Self {
        Self {
            layer: r.layer,
            target: r.target.as_str(),
            lambda: r.fit.lambda,
            r2_train: r.fit.r2_train,
            r2_val: r.fit.r2_val,
            r2_test: r.fit.r2_test,
            rows_used: r.rows_used,
            rows_excluded: r.rows_excluded,
            cohens_d: r.projection_stats.as_ref().map(|s| s.cohens_d.d),
            pearson_r: r.projection_stats.as_ref().and_then(|s| s.pearson_r),
        }
    }
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("probe", file, args)?;
    let target = parse_target(&cfg.target)?;
    validate_lambdas(&cfg.lambdas)?;
    let datasets = load_layer_set(&args.data)?;
    let opts = ProbeOptions {
        lambdas: cfg.lambdas.clone(),
        standardize: cfg.standardize,
    };
    let results = datasets
        .iter()
        .map(|ds| fit_probe_with(ds, target, &opts))
        .collect::<Result<Vec<_>>>()?;

    ensure_dir(&args.out)?;
    for r in &results {
        save_probe(&args.out.join(probe_file_name(r.layer)), r.layer, &r.fit)?;
        println!(
            "layer {}: lambda {} r2_test {}",
            r.layer,
            r.fit.lambda,
            r.fit.r2_test.map_or("n/a".into(), |v| format!("{v:.4}"))
        );
    }
    let rows: Vec<R2Row> = results.iter().map(R2Row::from).collect();
    write_csv(&args.out.join(R2_FILE), &rows)?;
    write_resolved(&args.out, &cfg)
}
