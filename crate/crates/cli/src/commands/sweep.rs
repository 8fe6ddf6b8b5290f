use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::steering::{
    aggregate_sweep, default_alpha_grid, fit_transfer, read_sweep_csv, write_sweep_csv, SweepRecord,
};
use steercal::store::Split;
use steercal::synth::{simulate_sweep, SynthConfig};
use steercal::{Error, Result};

use crate::config::{ensure_dir, resolve, write_resolved};
use crate::data::{load_layer_set, per_question_mean, split_or_all, write_csv};

pub const SWEEP_FILE: &str = "sweep.csv";
pub const TRANSFER_FILE: &str = "transfer.csv";
pub const MEANS_FILE: &str = "sweep_means.csv";

#[derive(clap::Args, Serialize)]
#[command(group(clap::ArgGroup::new("source").required(true).args(["records", "simulate"])))]
pub struct Args {
    /// Recorded sweep with columns alpha,question_id,confidence.
    #[arg(long)]
    #[serde(skip)]
    pub records: Option<PathBuf>,
    /// Simulate the sweep from this dataset's validation-split confidences.
    #[arg(long)]
    #[serde(skip)]
    pub simulate: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',', allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alphas: Option<Vec<f64>>,
    /// Simulated samples per question at each alpha.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sweep_samples: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_gain: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub response_noise: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub alphas: Vec<f64>,
    pub sweep_samples: usize,
    pub response_gain: f64,
    pub response_noise: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let base = SynthConfig::default();
        Self {
            alphas: default_alpha_grid(),
            sweep_samples: 1,
            response_gain: base.response_gain,
            response_noise: base.response_noise,
            seed: base.seed,
        }
    }
}

impl Config {
    /// Response model used for simulated sweeps and steered outcomes.
    pub fn response_model(&self) -> Result<SynthConfig> {
        let cfg = SynthConfig {
            response_gain: self.response_gain,
            response_noise: self.response_noise,
            seed: self.seed,
            ..SynthConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Serialize)]
struct MeanRow {
    alpha: f64,
    mean_confidence: f64,
    n_questions: usize,
}

fn simulated_records(data: &Path, cfg: &Config) -> Result<Vec<SweepRecord>> {
    if cfg.alphas.len() < 2 || cfg.alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("alpha grid needs at least 2 finite values"));
    }
    if cfg.sweep_samples == 0 {
        return Err(Error::invalid("sweep_samples must be positive"));
    }
    let model = cfg.response_model()?;
    let sets = load_layer_set(data)?;
    let val = split_or_all(&sets[0], Split::Val);
    let baselines = per_question_mean(&val, "verbalized_confidence", |m| m.verbalized_confidence)?;
    let ids: Vec<&String> = baselines.keys().collect();
    let values: Vec<f64> = baselines.values().copied().collect();
    let mut records = Vec::new();
    for (alpha, confs) in simulate_sweep(&model, &values, &cfg.alphas, cfg.sweep_samples) {
        for (q, c) in ids.iter().zip(confs) {
            records.push(SweepRecord {
                alpha,
                question_id: (*q).clone(),
                confidence: c,
            });
        }
    }
    Ok(records)
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("sweep", file, args)?;
    let records = match (&args.records, &args.simulate) {
        (Some(path), _) => read_sweep_csv(path)?,
        (None, Some(data)) => simulated_records(data, &cfg)?,
        (None, None) => return Err(Error::invalid("pass --records or --simulate")),
    };
    if records.is_empty() {
        return Err(Error::invalid("sweep has no records"));
    }
    let groups = aggregate_sweep(&records);
    let means: Vec<MeanRow> = groups
        .iter()
        .map(|(alpha, confs)| MeanRow {
            alpha: *alpha,
            mean_confidence: confs.iter().sum::<f64>() / confs.len() as f64,
            n_questions: confs.len(),
        })
        .collect();
    let tf = fit_transfer(&groups)?;

    ensure_dir(&args.out)?;
    if args.simulate.is_some() {
        write_sweep_csv(&args.out.join(SWEEP_FILE), &records)?;
    }
    write_csv(&args.out.join(MEANS_FILE), &means)?;
    tf.write_csv(&args.out.join(TRANSFER_FILE))?;
    println!(
        "transfer: {} knots over alpha [{}, {}]",
        tf.knots.len(),
        tf.alpha_range.0,
        tf.alpha_range.1
    );
    write_resolved(&args.out, &cfg)
}
