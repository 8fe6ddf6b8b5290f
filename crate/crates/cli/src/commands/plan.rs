use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::numerics::isotonic_fit;
use steercal::probes::{load_probe, per_question_predictions};
use steercal::steering::{plan_adaptive, TransferFunction};
use steercal::store::Split;
use steercal::synth::simulate_response;
use steercal::{Error, Result};

use crate::commands::sweep;
use crate::config::{ensure_dir, resolve, write_resolved};
use crate::data::{load_layer_set, per_question_mean, split_or_all, write_csv};

pub const PLAN_FILE: &str = "plan.csv";
pub const CALIBRATION_FILE: &str = "calibration.csv";
pub const STEERED_FILE: &str = "steered.csv";
pub const UNSTEERED_FILE: &str = "unsteered.csv";

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Accuracy probe JSON.
    #[arg(long)]
    #[serde(skip)]
    pub probe: PathBuf,
    /// Dataset whose validation split fits the probe-to-accuracy calibration.
    #[arg(long)]
    #[serde(skip)]
    pub calibration: PathBuf,
    /// Transfer function CSV with columns alpha,mean_confidence.
    #[arg(long)]
    #[serde(skip)]
    pub transfer: PathBuf,
    /// Dataset whose test split gets a steering strength per question.
    #[arg(long)]
    #[serde(skip)]
    pub data: PathBuf,
    /// Dataset with verbalized confidences for the same questions; when set,
    /// steered and unsteered outcomes are simulated for the metrics command.
    #[arg(long)]
    #[serde(skip)]
    pub responses: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    /// Simulated samples averaged per question.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
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
    pub samples: usize,
    pub response_gain: f64,
    pub response_noise: f64,
    pub seed: u64,
}

impl Default for Config {
    fn default() -> Self {
        let s = sweep::Config::default();
        Self {
            samples: 50,
            response_gain: s.response_gain,
            response_noise: s.response_noise,
            seed: s.seed,
        }
    }
}

#[derive(Serialize)]
struct Knot {
    probe_raw: f64,
    calibrated: f64,
}

/// One row of the metrics input format.
#[derive(Serialize)]
struct Outcome<'a> {
    question_id: &'a str,
    confidence: f64,
    accuracy: f64,
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("plan", file, args)?;
    if cfg.samples == 0 {
        return Err(Error::invalid("samples must be positive"));
    }
    let (_, probe) = load_probe(&args.probe)?;
    let tf = TransferFunction::read_csv(&args.transfer)?;

    let cal_sets = load_layer_set(&args.calibration)?;
    let val = split_or_all(&cal_sets[0], Split::Val);
    let acc = per_question_mean(&val, "empirical_accuracy", |m| m.empirical_accuracy)?;
    let mut raw = Vec::new();
    let mut target = Vec::new();
    for (q, p) in per_question_predictions(&probe, &val)? {
        if let Some(a) = acc.get(&q) {
            raw.push(p);
            target.push(*a);
        }
    }
    let iso = isotonic_fit(&raw, &target)?;

    let sets = load_layer_set(&args.data)?;
    let test = split_or_all(&sets[0], Split::Test);
    let plan = plan_adaptive(&probe, &iso, &tf, &test)?;

    ensure_dir(&args.out)?;
    plan.write_csv(&args.out.join(PLAN_FILE))?;
    let knots: Vec<Knot> = iso
        .knot_x
        .iter()
        .zip(&iso.knot_y)
        .map(|(&probe_raw, &calibrated)| Knot { probe_raw, calibrated })
        .collect();
    write_csv(&args.out.join(CALIBRATION_FILE), &knots)?;
    let clamped = plan.entries.iter().filter(|e| e.clamped).count();
    println!("plan: {} questions, {clamped} clamped", plan.len());

    if let Some(responses) = &args.responses {
        let model = sweep::Config {
            response_gain: cfg.response_gain,
            response_noise: cfg.response_noise,
            seed: cfg.seed,
            ..sweep::Config::default()
        }
        .response_model()?;
        let resp_sets = load_layer_set(responses)?;
        let baseline = per_question_mean(&resp_sets[0], "verbalized_confidence", |m| m.verbalized_confidence)?;
        let test_acc = per_question_mean(&test, "empirical_accuracy", |m| m.empirical_accuracy)?;
        let mut rng = model.response_rng();
        let mut steered = Vec::new();
        let mut unsteered = Vec::new();
        for e in &plan.entries {
            let (Some(&c), Some(&a)) = (baseline.get(&e.question_id), test_acc.get(&e.question_id)) else {
                return Err(Error::invalid(format!(
                    "question {} has no confidence in {}",
                    e.question_id,
                    responses.display()
                )));
            };
            let s = (0..cfg.samples)
                .map(|_| simulate_response(c, e.alpha_star, &model, &mut rng))
                .sum::<f64>()
                / cfg.samples as f64;
            let q = e.question_id.as_str();
            unsteered.push(Outcome {
                question_id: q,
                confidence: c,
                accuracy: a,
            });
            steered.push(Outcome {
                question_id: q,
                confidence: s,
                accuracy: a,
            });
        }
        write_csv(&args.out.join(UNSTEERED_FILE), &unsteered)?;
        write_csv(&args.out.join(STEERED_FILE), &steered)?;
    }
    write_resolved(&args.out, &cfg)
}
