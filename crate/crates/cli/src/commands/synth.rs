use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::store::{write_dataset, Condition, SplitFractions};
use steercal::synth::{generate, SynthConfig};
use steercal::{Error, Result};

use crate::config::{ensure_dir, resolve, write_resolved};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Output root; datasets go to `<out>/<condition>/layer_<L>`.
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub layers: Option<Vec<u32>>,
    /// Any of pure_correctness, pure_confidence, joint.
    #[arg(long, value_delimiter = ',')]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub conditions: Option<Vec<String>>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dim: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_questions: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rows_per_question: Option<usize>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub planted_cosine: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub noise_sigma: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_bias: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_coupling: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub confidence_jitter: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model_id: Option<String>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub val_fraction: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub test_fraction: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub layers: Vec<u32>,
    pub conditions: Vec<String>,
    pub dim: usize,
    pub n_questions: usize,
    pub rows_per_question: usize,
    pub planted_cosine: f64,
    pub noise_sigma: f64,
    pub confidence_bias: f64,
    pub confidence_coupling: f64,
    pub confidence_jitter: f64,
    pub seed: u64,
    pub model_id: String,
    pub train_fraction: f64,
    pub val_fraction: f64,
    pub test_fraction: f64,
}

impl Default for Config {
    fn default() -> Self {
        let base = SynthConfig::default();
        let splits = SplitFractions::default();
        Self {
            layers: vec![0, 1, 2, 3],
            conditions: vec!["pure_correctness".into(), "pure_confidence".into(), "joint".into()],
            dim: base.dim,
            n_questions: base.n_questions,
            rows_per_question: base.rows_per_question,
            planted_cosine: base.planted_cosine,
            noise_sigma: base.noise_sigma,
            confidence_bias: base.confidence_bias,
            confidence_coupling: base.confidence_coupling,
            confidence_jitter: base.confidence_jitter,
            seed: base.seed,
            model_id: base.model_id,
            train_fraction: splits.train,
            val_fraction: splits.val,
            test_fraction: splits.test,
        }
    }
}

impl Config {
    fn synth_configs(&self) -> Result<Vec<SynthConfig>> {
        if self.layers.is_empty() || self.conditions.is_empty() {
            return Err(Error::invalid("layers and conditions must be nonempty"));
        }
        let splits = SplitFractions::new(self.train_fraction, self.val_fraction, self.test_fraction)?;
        let mut out = Vec::new();
        for name in &self.conditions {
            let condition =
                Condition::parse(name).ok_or_else(|| Error::invalid(format!("unknown condition `{name}`")))?;
            for &layer in &self.layers {
                let cfg = SynthConfig {
                    dim: self.dim,
                    n_questions: self.n_questions,
                    rows_per_question: self.rows_per_question,
                    planted_cosine: self.planted_cosine,
                    noise_sigma: self.noise_sigma,
                    confidence_bias: self.confidence_bias,
                    confidence_coupling: self.confidence_coupling,
                    confidence_jitter: self.confidence_jitter,
                    seed: self.seed,
                    condition,
                    layer,
                    model_id: self.model_id.clone(),
                    splits,
                    ..SynthConfig::default()
                };
                cfg.validate()?;
                out.push(cfg);
            }
        }
        Ok(out)
    }
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("synth", file, args)?;
    let jobs = cfg.synth_configs()?;
    ensure_dir(&args.out)?;
    for job in &jobs {
        let (ds, _) = generate(job)?;
        let dir = args
            .out
            .join(job.condition.as_str())
            .join(format!("layer_{}", job.layer));
        write_dataset(&ds, &dir)?;
        println!("wrote {} ({} rows)", dir.display(), ds.len());
    }
    write_resolved(&args.out, &cfg)
}
