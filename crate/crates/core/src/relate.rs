//! Correlation relations over segmented series and end-to-end extraction.

use std::collections::BTreeMap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::chartgen::{ChartGroundTruth, SeriesData};
use crate::cluster::select_k;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::preprocess::saturation_threshold;
use crate::raster::{RasterImage, Rect, Rgb8};
use crate::segment::{assign_legend_partial, segment_series, FacetProvider, SeriesMask};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RelationLabel {
    Positive,
    Negative,
    Neutral,
}

impl RelationLabel {
    /// The label of the vertically mirrored series.
    pub fn mirror(self) -> Self {
        match self {
            RelationLabel::Positive => RelationLabel::Negative,
            RelationLabel::Negative => RelationLabel::Positive,
            RelationLabel::Neutral => RelationLabel::Neutral,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            RelationLabel::Positive => "positive",
            RelationLabel::Negative => "negative",
            RelationLabel::Neutral => "neutral",
        }
    }
}

impl fmt::Display for RelationLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// 1-based ranks; tied values share the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
    let mut ranks = vec![0.0; values.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let rank = (i + j) as f64 / 2.0 + 1.0;
        for &idx in &order[i..=j] {
            ranks[idx] = rank;
        }
        i = j + 1;
    }
    ranks
}

fn pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx).powi(2);
        syy += (b - my).powi(2);
    }
    sxy / (sxx * syy).sqrt()
}

pub fn spearman_xy(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() {
        return Err(Error::InvalidParams("x and y lengths differ".into()));
    }
    if xs.len() < 2 {
        return Err(Error::DegenerateSeries("fewer than two points"));
    }
    if xs.iter().all(|&x| x == xs[0]) {
        return Err(Error::DegenerateSeries("constant x"));
    }
    if ys.iter().all(|&y| y == ys[0]) {
        return Err(Error::DegenerateSeries("constant y"));
    }
    Ok(pearson(&average_ranks(xs), &average_ranks(ys)).clamp(-1.0, 1.0))
}

/// Spearman rank correlation with average ranks for ties.
pub fn spearman(points: &SeriesData) -> Result<f64> {
    spearman_xy(&points.xs(), &points.ys())
}

pub fn classify_correlation(rho: f64) -> Result<RelationLabel> {
    classify_with_threshold(rho, 0.4)
}

/// Strictly above `threshold` is positive, strictly below `-threshold` is
/// negative, the closed band between is neutral.
pub fn classify_with_threshold(rho: f64, threshold: f64) -> Result<RelationLabel> {
    if !(-1.0..=1.0).contains(&rho) {
        return Err(Error::OutOfRange(rho));
    }
    Ok(if rho > threshold {
        RelationLabel::Positive
    } else if rho < -threshold {
        RelationLabel::Negative
    } else {
        RelationLabel::Neutral
    })
}

/// A binary relation evaluated on one series.
pub trait RelationFunction: Send + Sync {
    fn name(&self) -> &str;
    fn evaluate(&self, points: &SeriesData) -> Result<RelationLabel>;
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CorrelationRelation {
    pub threshold: f64,
}

impl Default for CorrelationRelation {
    fn default() -> Self {
        CorrelationRelation { threshold: 0.4 }
    }
}

impl RelationFunction for CorrelationRelation {
    fn name(&self) -> &str {
        "correlation"
    }

    fn evaluate(&self, points: &SeriesData) -> Result<RelationLabel> {
        classify_with_threshold(spearman(points)?, self.threshold)
    }
}

/// Named relation functions.
#[derive(Default)]
pub struct RelationRegistry {
    functions: BTreeMap<String, Box<dyn RelationFunction>>,
}

impl RelationRegistry {
    pub fn with_defaults() -> Self {
        let mut r = RelationRegistry::default();
        r.register(Box::new(CorrelationRelation::default()));
        r
    }

    pub fn register(&mut self, f: Box<dyn RelationFunction>) {
        self.functions.insert(f.name().to_string(), f);
    }

    pub fn get(&self, name: &str) -> Option<&dyn RelationFunction> {
        self.functions.get(name).map(|f| f.as_ref())
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.functions.keys().map(String::as_str)
    }
}

/// Reads the text inside a box of an image.
pub trait TextRecognizer {
    fn read(&self, img: &RasterImage, region: &Rect) -> Option<String>;
}

/// Reads nothing.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoText;

impl TextRecognizer for NoText {
    fn read(&self, _img: &RasterImage, _region: &Rect) -> Option<String> {
        None
    }
}

/// Answers from the ground truth: the text whose box equals the query box.
#[derive(Clone, Debug, Default)]
pub struct TruthText {
    texts: Vec<(Rect, String)>,
}

impl TruthText {
    pub fn new(truth: &ChartGroundTruth) -> Self {
        let f = &truth.facets;
        let mut texts = Vec::new();
        for (b, t) in [(f.title, &truth.title), (f.x_label, &truth.x_label), (f.y_label, &truth.y_label)] {
            if let Some(b) = b {
                texts.push((b, t.clone()));
            }
        }
        texts.extend(f.legend_entries.iter().map(|e| (e.text_box, e.text.clone())));
        TruthText { texts }
    }
}

impl TextRecognizer for TruthText {
    fn read(&self, _img: &RasterImage, region: &Rect) -> Option<String> {
        self.texts.iter().find(|(b, _)| b == region).map(|(_, t)| t.clone())
    }
}

/// Wraps a recognizer and corrupts each answer with `typos` substitutions at
/// distinct positions, so the edit distance to the clean answer is `typos`
/// whenever the text is at least that long.
pub struct TypoText<T> {
    pub inner: T,
    pub typos: usize,
    pub seed: u64,
}

impl<T: TextRecognizer> TextRecognizer for TypoText<T> {
    fn read(&self, img: &RasterImage, region: &Rect) -> Option<String> {
        let text = self.inner.read(img, region)?;
        let mut chars: Vec<char> = text.chars().collect();
        let key = (region.x as u64) << 48 ^ (region.y as u64) << 32 ^ (region.width as u64) << 16 ^ region.height as u64;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed ^ key);
        while chars.len() < self.typos {
            chars.push('_');
        }
        let positions = rand::seq::index::sample(&mut rng, chars.len(), self.typos);
        for p in positions {
            let old = chars[p];
            let mut c = old;
            while c == old {
                c = (b'0' + rng.random_range(0..10u8)) as char;
            }
            chars[p] = c;
        }
        Some(chars.into_iter().collect())
    }
}

/// Mask pixels as points with y increasing upward.
pub fn mask_to_points(mask: &SeriesMask) -> Result<SeriesData> {
    if mask.is_empty() {
        return Err(Error::EmptyMask { pixels: 0, minimum: 1 });
    }
    Ok(SeriesData::new(
        mask.pixels
            .iter()
            .map(|&(c, r)| (c as f64, (mask.height - 1 - r) as f64))
            .collect(),
    ))
}

/// How mask pixels become the points whose correlation is measured.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PointReduction {
    /// Every pixel is a point.
    Pixels,
    /// One point per column at the median height of that column's pixels.
    /// Thick marks such as filled bars otherwise swamp the trend with
    /// vertical runs of tied x values.
    #[default]
    ColumnMedian,
}

/// Median y for each distinct x, in ascending x order.
pub fn column_profile(points: &SeriesData) -> SeriesData {
    let mut columns: BTreeMap<i64, Vec<f64>> = BTreeMap::new();
    for &(x, y) in &points.points {
        columns.entry(x.to_bits() as i64).or_default().push(y);
    }
    let mut out: Vec<(f64, f64)> = columns
        .into_iter()
        .map(|(bits, mut ys)| {
            ys.sort_by(f64::total_cmp);
            let n = ys.len();
            let m = if n % 2 == 1 { ys[n / 2] } else { (ys[n / 2 - 1] + ys[n / 2]) / 2.0 };
            (f64::from_bits(bits as u64), m)
        })
        .collect();
    out.sort_by(|a, b| a.0.total_cmp(&b.0));
    SeriesData::new(out)
}

pub fn reduce_points(points: &SeriesData, mode: PointReduction) -> SeriesData {
    match mode {
        PointReduction::Pixels => points.clone(),
        PointReduction::ColumnMedian => column_profile(points),
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractedSeries {
    pub legend_text: Option<String>,
    pub color: Rgb8,
    pub relation: RelationLabel,
    pub rho: f64,
}

/// Everything read from one chart image.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub x_axis: Option<String>,
    pub y_axis: Option<String>,
    pub title: Option<String>,
    pub series: Vec<ExtractedSeries>,
}

/// Correlation and label of one mask, ignoring pixels inside `exclude`.
pub fn relate_mask(
    mask: &SeriesMask,
    exclude: Option<&Rect>,
    reduction: PointReduction,
    threshold: f64,
) -> Result<(f64, RelationLabel)> {
    let kept = SeriesMask {
        pixels: mask
            .pixels
            .iter()
            .copied()
            .filter(|&(c, r)| exclude.is_none_or(|b| !b.contains(c, r)))
            .collect(),
        ..mask.clone()
    };
    if kept.is_empty() {
        return Ok((0.0, RelationLabel::Neutral));
    }
    let points = reduce_points(&mask_to_points(&kept)?, reduction);
    match spearman(&points) {
        Ok(rho) => Ok((rho, classify_with_threshold(rho, threshold)?)),
        Err(Error::DegenerateSeries(_)) => Ok((0.0, RelationLabel::Neutral)),
        Err(e) => Err(e),
    }
}

/// Runs the full pipeline on one chart: facet detection, crop to the plot,
/// saturation thresholding, k selection, segmentation, per-series correlation
/// and text reading.
pub fn extract_relations(
    img: &RasterImage,
    facets: &dyn FacetProvider,
    ocr: &dyn TextRecognizer,
    cfg: &PipelineConfig,
) -> Result<ExtractionResult> {
    cfg.validate()?;
    let boxes = facets.detect(img);
    let in_image = |r: &Option<Rect>| r.filter(|b| b.fits_in(img.width(), img.height()));
    let plot = in_image(&boxes.plot_area).unwrap_or(img.bounds());
    let legend = in_image(&boxes.legend);

    let crop = img.crop(&plot)?;
    let pre = saturation_threshold(&crop, &cfg.preprocess());
    let k = select_k(&pre, cfg.seed, &cfg.cluster())?.chosen_k;
    let masks: Vec<SeriesMask> = segment_series(&pre, k, cfg.seed, &cfg.segment(), &cfg.cluster())?
        .iter()
        .map(|m| m.translate(plot.x, plot.y, img.width(), img.height()))
        .collect();
    if masks.is_empty() {
        return Err(Error::SegmentationEmpty);
    }

    let legend_facets = crate::segment::FacetBoxes { legend, ..boxes.clone() };
    let assignment = assign_legend_partial(&legend_facets, &masks);
    let mut legend_text = vec![None; masks.len()];
    for (entry, m) in boxes.legend_entries.iter().zip(&assignment) {
        if let Some(m) = *m {
            legend_text[m] = ocr.read(img, &entry.text_box);
        }
    }

    let series = masks
        .iter()
        .zip(legend_text)
        .map(|(mask, text)| {
            let (rho, relation) =
                relate_mask(mask, legend.as_ref(), cfg.point_reduction, cfg.correlation_threshold)?;
            Ok(ExtractedSeries {
                legend_text: text,
                color: mask.representative_color,
                relation,
                rho,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let read = |r: &Option<Rect>| in_image(r).and_then(|b| ocr.read(img, &b));
    Ok(ExtractionResult {
        x_axis: read(&boxes.x_label),
        y_axis: read(&boxes.y_label),
        title: read(&boxes.title),
        series,
    })
}
