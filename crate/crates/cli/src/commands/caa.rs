use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::steering::{build_caa, save_steering_vector, DEFAULT_TAU_HI, DEFAULT_TAU_LO};
use steercal::Result;

use crate::config::{ensure_dir, resolve, write_resolved};
use crate::data::load_layer_set;

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Pure-confidence dataset directory, or a directory of per-layer datasets.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Rows with confidence strictly above this form the high group.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_hi: Option<f64>,
    /// Rows with confidence strictly below this form the low group.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub tau_lo: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub tau_hi: f64,
    pub tau_lo: f64,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            tau_hi: DEFAULT_TAU_HI,
            tau_lo: DEFAULT_TAU_LO,
        }
    }
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("caa", file, args)?;
    let datasets = load_layer_set(&args.data)?;
    let vectors = datasets
        .iter()
        .map(|ds| build_caa(ds, cfg.tau_hi, cfg.tau_lo))
        .collect::<Result<Vec<_>>>()?;
    ensure_dir(&args.out)?;
    for sv in &vectors {
        save_steering_vector(&args.out.join(format!("steering_layer_{}.json", sv.layer)), sv)?;
        println!(
            "layer {}: {} questions, {} excluded",
            sv.layer, sv.num_questions, sv.excluded_questions
        );
    }
    write_resolved(&args.out, &cfg)
}
