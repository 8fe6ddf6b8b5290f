use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use steercal::{Error, Result};

use crate::config::{ensure_dir, resolve, write_resolved};

#[derive(clap::Args, Serialize)]
pub struct Args {
    /// Directories holding report CSVs; may be repeated.
    #[arg(long = "in", required = true)]
    #[serde(skip)]
    pub inputs: Vec<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    pub out: PathBuf,
}

#[derive(Debug, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {}

/// A CSV read as named columns of optional numbers.
#[cfg(feature = "plot")]
pub struct Table {
    path: PathBuf,
    columns: std::collections::HashMap<String, Vec<Option<f64>>>,
}

#[cfg(feature = "plot")]
impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let fmt = |e: csv::Error| Error::format(path, e.to_string());
        let mut r = csv::Reader::from_path(path).map_err(fmt)?;
        let headers: Vec<String> = r.headers().map_err(fmt)?.iter().map(str::to_string).collect();
        let mut columns: std::collections::HashMap<String, Vec<Option<f64>>> =
            headers.iter().map(|h| (h.clone(), Vec::new())).collect();
        for rec in r.records() {
            let rec = rec.map_err(fmt)?;
            for (h, v) in headers.iter().zip(rec.iter()) {
                columns.get_mut(h).expect("header").push(v.trim().parse::<f64>().ok());
            }
        }
        Ok(Self {
            path: path.to_path_buf(),
            columns,
        })
    }

    pub fn column(&self, name: &str) -> Result<&[Option<f64>]> {
        self.columns
            .get(name)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::format(&self.path, format!("missing column `{name}`")))
    }

    /// `(x, y)` pairs where both cells are numbers.
    pub fn pairs(&self, x: &str, y: &str) -> Result<Vec<(f64, f64)>> {
        let xs = self.column(x)?;
        let ys = self.column(y)?;
        Ok(xs.iter().zip(ys).filter_map(|(a, b)| Some(((*a)?, (*b)?))).collect())
    }
}

/// Report CSVs this command knows how to draw.
pub const KNOWN: [&str; 7] = [
    "probe_r2.csv",
    "reliability.csv",
    "sweep_means.csv",
    "transfer.csv",
    "principal_angles.csv",
    "probe_cosine.csv",
    "contamination.csv",
];

fn find(inputs: &[PathBuf], name: &str) -> Option<PathBuf> {
    inputs.iter().map(|d| d.join(name)).find(|p| p.is_file())
}

#[cfg(feature = "plot")]
fn render_all(inputs: &[PathBuf], out: &Path) -> Result<Vec<String>> {
    use crate::plot::{render, Band, Chart, Mark, Series};

    let mut written = Vec::new();
    let mut emit = |name: &str, chart: Chart| -> Result<()> {
        render(&out.join(name), &chart)?;
        written.push(name.to_string());
        Ok(())
    };

    if let Some(p) = find(inputs, "probe_r2.csv") {
        let t = Table::read(&p)?;
        emit(
            "layer_curve.svg",
            Chart {
                title: "Probe R² by layer",
                x_label: "layer",
                y_label: "R²",
                series: vec![
                    Series::new("train", t.pairs("layer", "r2_train")?, Mark::LinePoints),
                    Series::new("test", t.pairs("layer", "r2_test")?, Mark::LinePoints),
                ],
                band: None,
                y_range: None,
            },
        )?;
    }
    if let Some(p) = find(inputs, "reliability.csv") {
        let t = Table::read(&p)?;
        let counts = t.column("count")?;
        let bins: Vec<(f64, f64)> = t
            .pairs("mean_confidence", "mean_accuracy")?
            .into_iter()
            .zip(counts)
            .filter(|(_, c)| c.is_some_and(|c| c > 0.0))
            .map(|(p, _)| p)
            .collect();
        emit(
            "reliability.svg",
            Chart {
                title: "Reliability diagram",
                x_label: "mean confidence",
                y_label: "mean accuracy",
                series: vec![
                    Series::new("bins", bins, Mark::LinePoints),
                    Series::new("perfect calibration", vec![(0.0, 0.0), (1.0, 1.0)], Mark::Dashed),
                ],
                band: None,
                y_range: Some((0.0, 1.0)),
            },
        )?;
    }
    let means = find(inputs, "sweep_means.csv");
    let transfer = find(inputs, "transfer.csv");
    if means.is_some() || transfer.is_some() {
        let mut series = Vec::new();
        if let Some(p) = &means {
            series.push(Series::new(
                "sweep means",
                Table::read(p)?.pairs("alpha", "mean_confidence")?,
                Mark::Points,
            ));
        }
        if let Some(p) = &transfer {
            let knots = Table::read(p)?.pairs("alpha", "mean_confidence")?;
            series.push(Series::new("transfer knots", knots, Mark::Line));
        }
        emit(
            "sweep.svg",
            Chart {
                title: "Steering sweep",
                x_label: "alpha",
                y_label: "mean verbalized confidence",
                series,
                band: None,
                y_range: Some((0.0, 1.0)),
            },
        )?;
    }
    if let Some(p) = find(inputs, "principal_angles.csv") {
        let t = Table::read(&p)?;
        let mean = t.pairs("layer", "random_mean_deg")?;
        let spread = t.pairs("layer", "random_two_sigma_deg")?;
        let band = mean
            .iter()
            .zip(&spread)
            .map(|(&(l, m), &(_, s))| (l, m - s, m + s))
            .collect();
        emit(
            "principal_angles.svg",
            Chart {
                title: "Principal angles between concept subspaces",
                x_label: "layer",
                y_label: "degrees",
                series: vec![
                    Series::new("mean angle", t.pairs("layer", "mean_angle_deg")?, Mark::LinePoints),
                    Series::new("min angle", t.pairs("layer", "min_angle_deg")?, Mark::LinePoints),
                    Series::new("random mean", mean, Mark::Dashed),
                ],
                band: Some(Band {
                    name: "random ±2σ".into(),
                    points: band,
                }),
                y_range: Some((0.0, 90.0)),
            },
        )?;
    }
    if let Some(p) = find(inputs, "probe_cosine.csv") {
        let t = Table::read(&p)?;
        emit(
            "probe_cosine.svg",
            Chart {
                title: "Probe weight cosine by layer",
                x_label: "layer",
                y_label: "cosine",
                series: vec![Series::new(
                    "cosine",
                    t.pairs("layer", "probe_cosine")?,
                    Mark::LinePoints,
                )],
                band: None,
                y_range: Some((-1.0, 1.0)),
            },
        )?;
    }
    if let Some(p) = find(inputs, "contamination.csv") {
        let t = Table::read(&p)?;
        emit(
            "contamination.svg",
            Chart {
                title: "Confidence/accuracy contrast alignment",
                x_label: "layer",
                y_label: "cosine",
                series: vec![
                    Series::new("pure prompt", t.pairs("layer", "cos_pure")?, Mark::LinePoints),
                    Series::new("joint prompt", t.pairs("layer", "cos_joint")?, Mark::LinePoints),
                ],
                band: None,
                y_range: Some((-1.0, 1.0)),
            },
        )?;
    }
    Ok(written)
}

#[cfg(not(feature = "plot"))]
fn render_all(_inputs: &[PathBuf], _out: &Path) -> Result<Vec<String>> {
    Err(Error::invalid(
        "this build has no plotting support; rebuild with the `plot` feature",
    ))
}

pub fn run(args: &Args, file: Option<&Path>) -> Result<()> {
    let cfg: Config = resolve("report", file, args)?;
    for dir in &args.inputs {
        std::fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    }
    if KNOWN.iter().all(|name| find(&args.inputs, name).is_none()) {
        return Err(Error::invalid(format!(
            "no report CSVs found; looked for {}",
            KNOWN.join(", ")
        )));
    }
    ensure_dir(&args.out)?;
    for name in render_all(&args.inputs, &args.out)? {
        println!("wrote {}", args.out.join(name).display());
    }
    write_resolved(&args.out, &cfg)
}
