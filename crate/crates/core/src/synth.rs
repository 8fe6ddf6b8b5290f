//! Synthetic activation datasets with planted accuracy and confidence
//! directions, plus a simulated steering response for closed-loop runs.
//!
//! All randomness comes from `ChaCha8Rng` seeded with `SynthConfig::seed`.
//! Separate streams keep the pieces independent of each other:
//!
//! - question latents depend only on the seed, so every layer and condition
//!   generated from one seed describes the same questions,
//! - planted directions depend on `(seed, layer)`,
//! - row noise, framings and sampled correctness depend on
//!   `(seed, condition, layer)`.
//!
//! Rows follow `h = g_a·a·u + g_c·c·v + ε`, where `a` is the question's latent
//! accuracy, `c` the row's verbalized confidence and `(g_a, g_c)` per-condition
//! signal gains: pure-correctness prompts carry only the accuracy signal,
//! pure-confidence prompts only the confidence signal, and joint prompts both.
//! Framed conditions cycle rows through the eleven prompt framings, each of
//! which pulls confidence toward its own level.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{ece, isotonic_fit, CalibrationReport, DEFAULT_BINS};
use crate::probes::{fit_probe, per_question_predictions, ProbeTarget};
use crate::steering::{default_alpha_grid, fit_transfer, plan_adaptive, SteeringPlan, TransferFunction};
use crate::store::{split_by_question, ActivationDataset, Condition, Position, RowMeta, Split, SplitFractions};

/// Number of prompt framings.
pub const FRAMINGS: u32 = 11;

/// Confidence each framing pulls toward; `None` keeps the question's own
/// baseline confidence.
const FRAMING_LEVELS: [Option<f64>; FRAMINGS as usize] = [
    Some(0.15),
    Some(0.30),
    Some(0.425),
    Some(0.525),
    Some(0.30),
    Some(0.40),
    Some(0.50),
    None,
    Some(0.70),
    Some(0.875),
    None,
];

const STREAM_QUESTIONS: u64 = 1;
const STREAM_DIRECTIONS: u64 = 1 << 32;
const STREAM_ROWS: u64 = 2 << 32;
const STREAM_PIPELINE: u64 = 3 << 32;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub dim: usize,
    pub n_questions: usize,
    pub rows_per_question: usize,
    /// Cosine between the accuracy and confidence directions.
    pub planted_cosine: f64,
    pub noise_sigma: f64,
    /// Mean overconfidence added to every baseline confidence.
    pub confidence_bias: f64,
    /// Slope of baseline confidence in latent accuracy.
    pub confidence_coupling: f64,
    /// Standard deviation of per-question and per-row confidence noise.
    pub confidence_jitter: f64,
    /// Confidence shift per unit steering strength.
    pub response_gain: f64,
    /// Standard deviation of simulated steered confidences.
    pub response_noise: f64,
    pub seed: u64,
    pub condition: Condition,
    pub layer: u32,
    pub model_id: String,
    pub splits: SplitFractions,
    /// Overrides the per-condition `(accuracy, confidence)` signal gains.
    pub signal_gains: Option<(f64, f64)>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            n_questions: 500,
            rows_per_question: 11,
            planted_cosine: 0.0,
            noise_sigma: 0.1,
            confidence_bias: 0.3,
            confidence_coupling: 0.0,
            confidence_jitter: 0.05,
            response_gain: 0.3,
            response_noise: 0.02,
            seed: 0,
            condition: Condition::Joint,
            layer: 0,
            model_id: "synthetic".into(),
            splits: SplitFractions::default(),
            signal_gains: None,
        }
    }
}

impl SynthConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim < 2 {
            return Err(Error::invalid(format!(
                "synthetic dim must be at least 2, got {}",
                self.dim
            )));
        }
        if self.n_questions == 0 || self.rows_per_question == 0 {
            return Err(Error::invalid("question and row counts must be positive"));
        }
        if !(-1.0..=1.0).contains(&self.planted_cosine) {
            return Err(Error::invalid(format!(
                "planted_cosine {} outside [-1, 1]",
                self.planted_cosine
            )));
        }
        for (name, v) in [
            ("noise_sigma", self.noise_sigma),
            ("confidence_jitter", self.confidence_jitter),
            ("response_noise", self.response_noise),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::invalid(format!(
                    "{name} must be finite and nonnegative, got {v}"
                )));
            }
        }
        for (name, v) in [
            ("confidence_bias", self.confidence_bias),
            ("confidence_coupling", self.confidence_coupling),
            ("response_gain", self.response_gain),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid(format!("{name} must be finite, got {v}")));
            }
        }
        self.splits.validate()
    }

    pub fn gains(&self) -> (f64, f64) {
        self.signal_gains.unwrap_or(match self.condition {
            Condition::PureCorrectness => (1.0, 0.0),
            Condition::PureConfidence => (0.0, 1.0),
            Condition::Joint => (1.0, 1.0),
        })
    }

    /// Stream for simulated steered outcomes, separate from the sweep stream.
    pub fn response_rng(&self) -> ChaCha8Rng {
        self.rng(STREAM_PIPELINE + 1)
    }

    fn rng(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Planted quantities behind a synthetic dataset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub question_ids: Vec<String>,
    /// Unit accuracy direction.
    pub u: Vec<f64>,
    /// Unit confidence direction with `u·v = planted_cosine`.
    pub v: Vec<f64>,
    /// Latent accuracy per question.
    pub accuracy: Vec<f64>,
    /// Unframed baseline confidence per question.
    pub confidence: Vec<f64>,
}

impl GroundTruth {
    pub fn index_of(&self, question_id: &str) -> Option<usize> {
        self.question_ids.iter().position(|q| q == question_id)
    }
}

fn gaussian_vec(rng: &mut ChaCha8Rng, d: usize) -> Vec<f64> {
    (0..d).map(|_| rng.sample(StandardNormal)).collect()
}

fn normalize(v: &mut [f64]) {
    let n = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    for x in v {
        *x /= n;
    }
}

/// Unit `u` uniform on the sphere and unit `v` with `u·v = cosine` exactly.
pub fn planted_directions(d: usize, cosine: f64, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    let mut u = gaussian_vec(rng, d);
    normalize(&mut u);
    let mut w = gaussian_vec(rng, d);
    for _ in 0..2 {
        let proj: f64 = w.iter().zip(&u).map(|(a, b)| a * b).sum();
        for (wi, ui) in w.iter_mut().zip(&u) {
            *wi -= proj * ui;
        }
    }
    normalize(&mut w);
    let s = (1.0 - cosine * cosine).max(0.0).sqrt();
    let mut v: Vec<f64> = u.iter().zip(&w).map(|(a, b)| cosine * a + s * b).collect();
    normalize(&mut v);
    (u, v)
}

fn question_latents(cfg: &SynthConfig) -> (Vec<f64>, Vec<f64>) {
    let mut rng = cfg.rng(STREAM_QUESTIONS);
    let jitter = Normal::new(0.0, cfg.confidence_jitter).expect("validated");
    let mut acc = Vec::with_capacity(cfg.n_questions);
    let mut conf = Vec::with_capacity(cfg.n_questions);
    for _ in 0..cfg.n_questions {
        let a: f64 = rng.random();
        let e: f64 = rng.sample(jitter);
        acc.push(a);
        conf.push((0.5 + cfg.confidence_bias + cfg.confidence_coupling * (a - 0.5) + e).clamp(0.0, 1.0));
    }
    (acc, conf)
}

fn condition_index(c: Condition) -> u64 {
    match c {
        Condition::PureCorrectness => 0,
        Condition::PureConfidence => 1,
        Condition::Joint => 2,
    }
}

/// Generates one dataset for `cfg.condition` at `cfg.layer`, with splits
/// assigned by question.
pub fn generate(cfg: &SynthConfig) -> Result<(ActivationDataset, GroundTruth)> {
    cfg.validate()?;
    let d = cfg.dim;
    let (u, v) = planted_directions(
        d,
        cfg.planted_cosine,
        &mut cfg.rng(STREAM_DIRECTIONS + cfg.layer as u64),
    );
    let (accuracy, confidence) = question_latents(cfg);
    let question_ids: Vec<String> = (0..cfg.n_questions).map(|i| format!("q{i:05}")).collect();

    let mut rng = cfg.rng(STREAM_ROWS + (condition_index(cfg.condition) << 24) + cfg.layer as u64);
    let noise = Normal::new(0.0, cfg.noise_sigma).expect("validated");
    let jitter = Normal::new(0.0, cfg.confidence_jitter).expect("validated");
    let (ga, gc) = cfg.gains();
    let framed = cfg.condition.is_framed();

    let n_rows = cfg.n_questions * cfg.rows_per_question;
    let mut values = Vec::with_capacity(n_rows * d);
    let mut meta = Vec::with_capacity(n_rows);
    for q in 0..cfg.n_questions {
        let a = accuracy[q];
        for r in 0..cfg.rows_per_question {
            let (framing, c) = if framed {
                let k = (r as u32 % FRAMINGS) + 1;
                let level = FRAMING_LEVELS[(k - 1) as usize].unwrap_or(confidence[q]);
                let c = (level + rng.sample(jitter)).clamp(0.0, 1.0);
                (Some(k), c)
            } else {
                (None, confidence[q])
            };
            for j in 0..d {
                let h = ga * a * u[j] + gc * c * v[j] + rng.sample(noise);
                values.push(h as f32);
            }
            let correct = rng.random::<f64>() < a;
            let mut m = RowMeta::new(question_ids[q].clone(), "synthetic");
            m.framing = framing;
            m.verbalized_confidence = if cfg.condition == Condition::PureCorrectness {
                None
            } else {
                Some(c)
            };
            m.correct = Some(correct);
            m.empirical_accuracy = Some(a);
            meta.push(m);
        }
    }

    let ds = ActivationDataset::new(
        d,
        cfg.layer,
        cfg.model_id.clone(),
        cfg.condition,
        Position::PromptFinal,
        values,
        meta,
    )?;
    let ds = split_by_question(&ds, cfg.splits, cfg.seed)?;
    Ok((
        ds,
        GroundTruth {
            question_ids,
            u,
            v,
            accuracy,
            confidence,
        },
    ))
}

/// One simulated steered confidence: `clamp(c + gain·α + noise, 0, 1)`.
pub fn simulate_response(c_q: f64, alpha: f64, cfg: &SynthConfig, rng: &mut impl Rng) -> f64 {
    let e = if cfg.response_noise > 0.0 {
        cfg.response_noise * rng.sample::<f64, _>(StandardNormal)
    } else {
        0.0
    };
    (c_q + cfg.response_gain * alpha + e).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClosedLoopOptions {
    pub alphas: Vec<f64>,
    /// Steered samples averaged per test question.
    pub samples_per_question: usize,
    /// Simulated samples per validation question at each sweep alpha.
    pub sweep_samples: usize,
    pub n_bins: usize,
}

impl Default for ClosedLoopOptions {
    fn default() -> Self {
        Self {
            alphas: default_alpha_grid(),
            samples_per_question: 50,
            sweep_samples: 1,
            n_bins: DEFAULT_BINS,
        }
    }
}

#[derive(Debug, Clone)]
pub struct ClosedLoopReport {
    pub unsteered: CalibrationReport,
    pub steered: CalibrationReport,
    pub plan: SteeringPlan,
    pub transfer: TransferFunction,
    pub probe_lambda: f64,
    pub probe_r2_test: Option<f64>,
}

impl ClosedLoopReport {
    pub fn ece_unsteered(&self) -> f64 {
        self.unsteered.ece
    }

    pub fn ece_steered(&self) -> f64 {
        self.steered.ece
    }
}

/// Simulated sweep over validation questions. Every alpha reuses the same
/// noise draws, so differences between alphas come from the response alone.
pub fn simulate_sweep(cfg: &SynthConfig, baselines: &[f64], alphas: &[f64], samples: usize) -> Vec<(f64, Vec<f64>)> {
    alphas
        .iter()
        .map(|&alpha| {
            let mut rng = cfg.rng(STREAM_PIPELINE);
            let confs = baselines
                .iter()
                .map(|&c| {
                    (0..samples)
                        .map(|_| simulate_response(c, alpha, cfg, &mut rng))
                        .sum::<f64>()
                        / samples as f64
                })
                .collect();
            (alpha, confs)
        })
        .collect()
}

/// Runs the full adaptive-steering pipeline on pure-correctness synthetic data.
pub fn run_pipeline_closed_loop(cfg: &SynthConfig) -> Result<ClosedLoopReport> {
    run_closed_loop_with(cfg, &ClosedLoopOptions::default())
}

pub fn run_closed_loop_with(cfg: &SynthConfig, opts: &ClosedLoopOptions) -> Result<ClosedLoopReport> {
    if opts.samples_per_question == 0 || opts.sweep_samples == 0 {
        return Err(Error::invalid("sample counts must be positive"));
    }
    let cfg = SynthConfig {
        condition: Condition::PureCorrectness,
        ..cfg.clone()
    };
    let (ds, truth) = generate(&cfg)?;
    let probe = fit_probe(&ds, ProbeTarget::EmpiricalAccuracy, &crate::numerics::default_lambdas())?;

    let index = |q: &str| truth.index_of(q).expect("question from generator");
    let val = ds.filter_split(Split::Val);
    let val_pred = per_question_predictions(&probe.fit, &val)?;
    let raw: Vec<f64> = val_pred.iter().map(|p| p.1).collect();
    let val_acc: Vec<f64> = val_pred.iter().map(|p| truth.accuracy[index(&p.0)]).collect();
    let iso = isotonic_fit(&raw, &val_acc)?;

    let val_baselines: Vec<f64> = val_pred.iter().map(|p| truth.confidence[index(&p.0)]).collect();
    let sweep = simulate_sweep(&cfg, &val_baselines, &opts.alphas, opts.sweep_samples);
    let transfer = fit_transfer(&sweep)?;

    let test = ds.filter_split(Split::Test);
    let plan = plan_adaptive(&probe.fit, &iso, &transfer, &test)?;

    let mut rng = cfg.response_rng();
    let mut acc = Vec::with_capacity(plan.len());
    let mut base = Vec::with_capacity(plan.len());
    let mut steered = Vec::with_capacity(plan.len());
    for e in &plan.entries {
        let i = index(&e.question_id);
        let c = truth.confidence[i];
        let s: f64 = (0..opts.samples_per_question)
            .map(|_| simulate_response(c, e.alpha_star, &cfg, &mut rng))
            .sum();
        acc.push(truth.accuracy[i]);
        base.push(c);
        steered.push(s / opts.samples_per_question as f64);
    }
    Ok(ClosedLoopReport {
        unsteered: ece(&base, &acc, opts.n_bins)?,
        steered: ece(&steered, &acc, opts.n_bins)?,
        plan,
        transfer,
        probe_lambda: probe.fit.lambda,
        probe_r2_test: probe.fit.r2_test,
    })
}
