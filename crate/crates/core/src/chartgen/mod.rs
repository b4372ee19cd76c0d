//! Synthetic chart generation with full ground truth.
//!
//! Charts are scatter, line or bar plots with one to three series drawn in
//! red, green or blue. Each chart is described by a [`ChartSpec`], rendered
//! by [`render_chart`], and written to disk by [`generate_corpus`] together
//! with a JSON sidecar ([`ChartGroundTruth`]).

mod canvas;
mod corpus;
mod render;

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

pub use canvas::{text_extent, Canvas, TextDirection};
pub use corpus::{
    chart_rng, generate_chart, generate_corpus, load_truth, Corpus, CorpusEntry, CorpusManifest,
    GenConfig, LineStyleMode, MANIFEST_FILE,
};
pub use render::{render_chart, LegendCorner, StyleParams};

use crate::error::{Error, Result};
use crate::raster::Rgb8;
use crate::relate::{classify_correlation, spearman, RelationLabel};
use crate::segment::FacetBoxes;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ChartType {
    Scatter,
    Line,
    Bar,
}

impl ChartType {
    pub const ALL: [ChartType; 3] = [ChartType::Scatter, ChartType::Line, ChartType::Bar];
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SeriesColor {
    Red,
    Green,
    Blue,
}

impl SeriesColor {
    pub const ALL: [SeriesColor; 3] = [SeriesColor::Red, SeriesColor::Green, SeriesColor::Blue];

    /// matplotlib's named colors.
    pub fn rgb(self) -> Rgb8 {
        match self {
            SeriesColor::Red => Rgb8::new(255, 0, 0),
            SeriesColor::Green => Rgb8::new(0, 128, 0),
            SeriesColor::Blue => Rgb8::new(0, 0, 255),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            SeriesColor::Red => "red",
            SeriesColor::Green => "green",
            SeriesColor::Blue => "blue",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LineStyle {
    Solid,
    Dotted,
    Dashed,
    DashDot,
}

impl LineStyle {
    pub const ALL: [LineStyle; 4] = [
        LineStyle::Solid,
        LineStyle::Dotted,
        LineStyle::Dashed,
        LineStyle::DashDot,
    ];

    /// On/off lengths in units of the line width.
    pub fn pattern(self) -> &'static [f64] {
        match self {
            LineStyle::Solid => &[],
            LineStyle::Dotted => &[1.0, 1.65],
            LineStyle::Dashed => &[3.7, 1.6],
            LineStyle::DashDot => &[6.4, 1.6, 1.0, 1.6],
        }
    }
}

/// Points of one plotted series.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SeriesData {
    pub points: Vec<(f64, f64)>,
}

impl SeriesData {
    pub fn new(points: Vec<(f64, f64)>) -> Self {
        SeriesData { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.0).collect()
    }

    pub fn ys(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.1).collect()
    }

    /// Checks the generator invariants: at least two points, all finite.
    pub fn validate(&self) -> Result<()> {
        if self.points.len() < 2 {
            return Err(Error::InvalidParams("a series needs at least 2 points".into()));
        }
        if self.points.iter().any(|(x, y)| !x.is_finite() || !y.is_finite()) {
            return Err(Error::InvalidParams("series contains non-finite values".into()));
        }
        Ok(())
    }
}

/// Data-synthesis parameters for one series.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GenParams {
    pub n_points: usize,
    /// Standard deviation of the additive y perturbation, in units of the
    /// nominal data span (x runs over [0, 1]).
    pub noise_sigma: f64,
    /// Multiplier applied to `noise_sigma` for bar data.
    pub bar_exaggeration: f64,
    /// Height of the shortest bar after shifting bar data above zero.
    pub bar_base: f64,
}

impl Default for GenParams {
    fn default() -> Self {
        GenParams {
            n_points: 100,
            noise_sigma: 0.05,
            bar_exaggeration: 2.0,
            bar_base: 1.0,
        }
    }
}

impl GenParams {
    fn validate(&self) -> Result<()> {
        if self.n_points < 10 {
            return Err(Error::InvalidParams(format!(
                "n_points must be at least 10, got {}",
                self.n_points
            )));
        }
        if !(self.noise_sigma > 0.0) || !self.noise_sigma.is_finite() {
            return Err(Error::InvalidParams(format!(
                "noise_sigma must be positive, got {}",
                self.noise_sigma
            )));
        }
        if !(self.bar_exaggeration > 0.0) || !(self.bar_base > 0.0) {
            return Err(Error::InvalidParams(
                "bar_exaggeration and bar_base must be positive".into(),
            ));
        }
        Ok(())
    }
}

fn unit_xs(n: usize) -> impl Iterator<Item = f64> {
    (0..n).map(move |i| i as f64 / (n - 1) as f64)
}

/// Draws series data for a chart of the given kind.
///
/// Scatter data targets a correlation drawn uniformly from [-1, 1]; line data
/// is a noisy straight line with slope in [-1, 1]; bar data is line data with
/// exaggerated noise, shifted so every bar is strictly positive.
pub fn gen_series_data(kind: ChartType, rng: &mut impl Rng, params: &GenParams) -> Result<SeriesData> {
    params.validate()?;
    let n = params.n_points;
    let data = match kind {
        ChartType::Scatter => {
            let r = rng.random_range(-1.0..=1.0);
            correlated_scatter(n, r, rng)
        }
        ChartType::Line => {
            let slope = rng.random_range(-1.0..=1.0);
            noisy_line(n, slope, rng.random_range(-1.0..=1.0), params.noise_sigma, rng)
        }
        ChartType::Bar => {
            let slope = rng.random_range(-1.0..=1.0);
            let sigma = params.noise_sigma * params.bar_exaggeration;
            let mut d = noisy_line(n, slope, rng.random_range(-1.0..=1.0), sigma, rng);
            let min_y = d.points.iter().map(|p| p.1).fold(f64::INFINITY, f64::min);
            for p in &mut d.points {
                p.1 = p.1 - min_y + params.bar_base;
            }
            d
        }
    };
    Ok(data)
}

/// `y = r * z(x) + sqrt(1 - r^2) * eps` over equally spaced x, with `z` the
/// standardized x and `eps` standard normal.
pub fn correlated_scatter(n: usize, r: f64, rng: &mut impl Rng) -> SeriesData {
    let r = r.clamp(-1.0, 1.0);
    let xs: Vec<f64> = unit_xs(n).collect();
    let mean = xs.iter().sum::<f64>() / n as f64;
    let sd = (xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n as f64).sqrt();
    let spread = (1.0 - r * r).sqrt();
    let points = xs
        .into_iter()
        .map(|x| {
            let eps: f64 = StandardNormal.sample(rng);
            (x, r * (x - mean) / sd + spread * eps)
        })
        .collect();
    SeriesData::new(points)
}

pub fn noisy_line(n: usize, slope: f64, intercept: f64, sigma: f64, rng: &mut impl Rng) -> SeriesData {
    let points = unit_xs(n)
        .map(|x| {
            let eps: f64 = StandardNormal.sample(rng);
            (x, slope * x + intercept + sigma * eps)
        })
        .collect();
    SeriesData::new(points)
}

/// Spearman correlation of the data and its relation class.
pub fn label_relation(series: &SeriesData) -> Result<(f64, RelationLabel)> {
    let rho = spearman(series)?;
    Ok((rho, classify_correlation(rho)?))
}

/// Everything needed to render a chart, before layout.
#[derive(Clone, Debug, PartialEq)]
pub struct ChartSpec {
    pub chart_type: ChartType,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<SeriesSpec>,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SeriesSpec {
    pub name: String,
    pub color: SeriesColor,
    pub line_style: LineStyle,
    pub data: SeriesData,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeriesTruth {
    pub name: String,
    pub color: Rgb8,
    pub color_name: String,
    pub line_style: LineStyle,
    pub rho: f64,
    pub relation: RelationLabel,
    /// Center of the legend key mark, in image pixels.
    pub swatch_center: (f64, f64),
    pub data: SeriesData,
}

/// Ground-truth sidecar for one rendered chart.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartGroundTruth {
    pub chart_type: ChartType,
    pub width: u32,
    pub height: u32,
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub series: Vec<SeriesTruth>,
    pub facets: FacetBoxes,
    pub seed: u64,
}

impl ChartGroundTruth {
    /// The k a perfect k-selection returns: one cluster per series plus background.
    pub fn expected_k(&self) -> usize {
        self.series.len() + 1
    }
}

/// Random label text: 3-12 upper- and lowercase letters.
pub fn random_label(rng: &mut impl Rng) -> String {
    let len = rng.random_range(3..=12);
    (0..len)
        .map(|_| {
            let c = rng.random_range(0..52u8);
            if c < 26 {
                (b'a' + c) as char
            } else {
                (b'A' + c - 26) as char
            }
        })
        .collect()
}
