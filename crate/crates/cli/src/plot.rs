//! SVG rendering. Everything that touches the plotting backend lives here.

use std::path::Path;

use plotters::prelude::*;
use steercal::{Error, Result};

pub enum Mark {
    Line,
    Points,
    LinePoints,
    Dashed,
}

pub struct Series {
    pub name: String,
    pub points: Vec<(f64, f64)>,
    pub mark: Mark,
}

impl Series {
    pub fn new(name: impl Into<String>, points: Vec<(f64, f64)>, mark: Mark) -> Self {
        Self {
            name: name.into(),
            points,
            mark,
        }
    }
}

/// Shaded region between `lower` and `upper` at each x.
pub struct Band {
    pub name: String,
    pub points: Vec<(f64, f64, f64)>,
}

pub struct Chart<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub series: Vec<Series>,
    pub band: Option<Band>,
    /// Fixed y range; otherwise fitted to the data.
    pub y_range: Option<(f64, f64)>,
}

const PALETTE: [RGBColor; 6] = [
    RGBColor(31, 119, 180),
    RGBColor(214, 39, 40),
    RGBColor(44, 160, 44),
    RGBColor(255, 127, 14),
    RGBColor(148, 103, 189),
    RGBColor(127, 127, 127),
];

fn plot_err(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::format(path, format!("plot rendering failed: {e}"))
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    if !(lo.is_finite() && hi.is_finite()) {
        return (0.0, 1.0);
    }
    let span = hi - lo;
    if span <= 0.0 {
        return (lo - 0.5, hi + 0.5);
    }
    (lo - 0.05 * span, hi + 0.05 * span)
}

fn extent(values: impl Iterator<Item = f64>) -> (f64, f64) {
    values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)))
}

pub fn render(path: &Path, chart: &Chart) -> Result<()> {
    let band_points: Vec<(f64, f64, f64)> = chart.band.iter().flat_map(|b| b.points.iter().copied()).collect();
    let series_points = || chart.series.iter().flat_map(|s| s.points.iter().copied());
    let (x0, x1) = {
        let (lo, hi) = extent(series_points().map(|p| p.0).chain(band_points.iter().map(|p| p.0)));
        padded(lo, hi)
    };
    let (y0, y1) = chart.y_range.unwrap_or_else(|| {
        let (lo, hi) = extent(
            series_points()
                .map(|p| p.1)
                .chain(band_points.iter().flat_map(|p| [p.1, p.2])),
        );
        padded(lo, hi)
    });

    let root = SVGBackend::new(path, (720, 480)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| plot_err(path, e))?;
    let mut ctx = ChartBuilder::on(&root)
        .caption(chart.title, ("sans-serif", 20))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(56)
        .build_cartesian_2d(x0..x1, y0..y1)
        .map_err(|e| plot_err(path, e))?;
    ctx.configure_mesh()
        .x_desc(chart.x_label)
        .y_desc(chart.y_label)
        .draw()
        .map_err(|e| plot_err(path, e))?;

    if let Some(band) = &chart.band {
        let mut outline: Vec<(f64, f64)> = band.points.iter().map(|p| (p.0, p.2)).collect();
        outline.extend(band.points.iter().rev().map(|p| (p.0, p.1)));
        let fill = PALETTE[5].mix(0.25);
        ctx.draw_series(std::iter::once(Polygon::new(outline, fill.filled())))
            .map_err(|e| plot_err(path, e))?
            .label(band.name.as_str())
            .legend(move |(x, y)| Rectangle::new([(x, y - 5), (x + 16, y + 5)], fill.filled()));
    }

    for (i, s) in chart.series.iter().enumerate() {
        let color = PALETTE[i % (PALETTE.len() - 1)];
        let style = color.stroke_width(2);
        let anno = match s.mark {
            Mark::Line => ctx.draw_series(LineSeries::new(s.points.iter().copied(), style)),
            Mark::Dashed => ctx.draw_series(DashedLineSeries::new(s.points.iter().copied(), 6, 4, style)),
            Mark::Points => ctx.draw_series(s.points.iter().map(|&p| Circle::new(p, 3, color.filled()))),
            Mark::LinePoints => {
                ctx.draw_series(s.points.iter().map(|&p| Circle::new(p, 3, color.filled())))
                    .map_err(|e| plot_err(path, e))?;
                ctx.draw_series(LineSeries::new(s.points.iter().copied(), style))
            }
        }
        .map_err(|e| plot_err(path, e))?;
        anno.label(s.name.as_str())
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 16, y)], color.stroke_width(2)));
    }

    ctx.configure_series_labels()
        .background_style(WHITE.mix(0.85))
        .border_style(BLACK)
        .position(SeriesLabelPosition::UpperLeft)
        .draw()
        .map_err(|e| plot_err(path, e))?;
    root.present().map_err(|e| plot_err(path, e))
}
