use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::numerics::{brier_binary, ece, DEFAULT_BINS};
use steercal::{Error, Result};

use crate::config::{ensure_dir, resolve, write_resolved};
use crate::data::{read_csv, write_csv};

pub const METRICS_FILE: &str = "metrics.csv";
pub const RELIABILITY_FILE: &str = "reliability.csv";

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// CSV with question_id, confidence and accuracy and/or correct columns.
    #[arg(long)]
    #[serde(skip)]
    pub input: PathBuf,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub bins: Option<usize>,
    /// per_question compares mean confidence with accuracy; per_sample
    /// compares each row's confidence with its 0/1 correctness.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub brier: Option<String>,
    /// Where confidences came from: verbalized or logit. Recorded in the output.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub bins: usize,
    pub brier: String,
    pub kind: String,
}

impl Default for Config {
    fn default() -> Self {
        Self {
            bins: DEFAULT_BINS,
            brier: "per_question".into(),
            kind: "verbalized".into(),
        }
    }
}

#[derive(Deserialize)]
struct Row {
    question_id: String,
    confidence: f64,
    #[serde(default)]
    accuracy: Option<f64>,
    #[serde(default)]
    correct: Option<String>,
}

fn parse_correct(s: &str) -> Option<bool> {
    match s.trim() {
        "1" | "true" | "True" => Some(true),
        "0" | "false" | "False" => Some(false),
        _ => None,
    }
}

#[derive(Default)]
struct QuestionSums {
    confidence: f64,
    accuracy: f64,
    correct: f64,
    rows: usize,
    with_accuracy: usize,
    with_correct: usize,
}

#[derive(Serialize)]
struct Summary {
    kind: String,
    n_questions: usize,
    n_samples: usize,
    bins: usize,
    ece: f64,
    brier: f64,
    brier_mode: String,
    mae: f64,
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("metrics", file, args)?;
    if cfg.bins == 0 {
        return Err(Error::invalid("bins must be at least 1"));
    }
    let per_sample = match cfg.brier.as_str() {
        "per_question" => false,
        "per_sample" => true,
        other => {
            return Err(Error::invalid(format!(
                "brier must be per_question or per_sample, got `{other}`"
            )))
        }
    };
    if !matches!(cfg.kind.as_str(), "verbalized" | "logit") {
        return Err(Error::invalid(format!("kind must be verbalized or logit, got `{}`", cfg.kind)));
    }
    let rows: Vec<Row> = read_csv(&args.input)?;
    if rows.is_empty() {
        return Err(Error::invalid(format!("{} has no rows", args.input.display())));
    }

    let mut by_q: BTreeMap<&str, QuestionSums> = BTreeMap::new();
    let mut sample_conf = Vec::new();
    let mut sample_correct = Vec::new();
    for (i, r) in rows.iter().enumerate() {
        let s = by_q.entry(r.question_id.as_str()).or_default();
        s.confidence += r.confidence;
        s.rows += 1;
        if let Some(a) = r.accuracy {
            s.accuracy += a;
            s.with_accuracy += 1;
        }
        if let Some(text) = r.correct.as_deref().filter(|t| !t.trim().is_empty()) {
            let c = parse_correct(text).ok_or_else(|| {
                Error::format(
                    &args.input,
                    format!("row {i}: correct = `{text}` is not 0/1/true/false"),
                )
            })?;
            s.correct += if c { 1.0 } else { 0.0 };
            s.with_correct += 1;
            sample_conf.push(r.confidence);
            sample_correct.push(c);
        } else if per_sample {
            return Err(Error::invalid(format!(
                "per_sample brier needs a correct value on every row; row {i} has none"
            )));
        }
    }

    let mut conf = Vec::with_capacity(by_q.len());
    let mut acc = Vec::with_capacity(by_q.len());
    for (q, s) in &by_q {
        let a = if s.with_accuracy == s.rows {
            s.accuracy / s.rows as f64
        } else if s.with_correct == s.rows {
            s.correct / s.rows as f64
        } else {
            return Err(Error::invalid(format!(
                "question {q}: every row needs an accuracy or correct value"
            )));
        };
        conf.push(s.confidence / s.rows as f64);
        acc.push(a);
    }
    let report = ece(&conf, &acc, cfg.bins)?;
    let brier = if per_sample {
        brier_binary(&sample_conf, &sample_correct)?
    } else {
        report.brier
    };

    ensure_dir(&args.out)?;
    let summary = Summary {
        kind: cfg.kind.clone(),
        n_questions: conf.len(),
        n_samples: rows.len(),
        bins: cfg.bins,
        ece: report.ece,
        brier,
        brier_mode: cfg.brier.clone(),
        mae: report.mae,
    };
    write_csv(&args.out.join(METRICS_FILE), &[&summary])?;
    write_csv(&args.out.join(RELIABILITY_FILE), &report.bins)?;
    println!(
        "ece={:.6} brier={:.6} mae={:.6} questions={}",
        report.ece,
        brier,
        report.mae,
        conf.len()
    );
    write_resolved(&args.out, &cfg)
}
