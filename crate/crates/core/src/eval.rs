//! Accuracy metrics and preprocessing ablations.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::chartgen::{ChartGroundTruth, Corpus, SeriesTruth};
use crate::cluster::select_k;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::preprocess::saturation_threshold;
use crate::raster::{hue_distance, rgb_to_hsv, Rgb8};
use crate::relate::{ExtractedSeries, ExtractionResult};
use crate::segment::segment_series;

pub const AXIS_EDIT_THRESHOLD: usize = 5;
pub const LEGEND_EDIT_THRESHOLD: usize = 2;
pub const HUE_TOLERANCE: u8 = 10;
/// Half-width of the band around the classification threshold whose series
/// count as ambiguous.
pub const BOUNDARY_BAND: f64 = 0.15;

/// Levenshtein distance over Unicode scalar values.
pub fn edit_distance(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(ca != cb);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Hue match within the tolerance; achromatic colors have no hue and never match.
pub fn colors_match(a: Rgb8, b: Rgb8) -> bool {
    let (ha, hb) = (rgb_to_hsv(a), rgb_to_hsv(b));
    ha.s > 0 && hb.s > 0 && hue_distance(ha.h, hb.h) <= HUE_TOLERANCE
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MatchBy {
    /// Legend text within the legend edit threshold.
    Text,
    /// Series color within the hue tolerance.
    Color,
}

fn axis_correct(pred: &ExtractionResult, truth: &ChartGroundTruth) -> bool {
    let ok = |p: &Option<String>, t: &str| p.as_deref().is_some_and(|p| edit_distance(p, t) <= AXIS_EDIT_THRESHOLD);
    ok(&pred.x_axis, &truth.x_label) && ok(&pred.y_axis, &truth.y_label)
}

/// Match cost between a truth series and a prediction, or `None` if they do
/// not correspond.
fn match_cost(truth: &SeriesTruth, pred: &ExtractedSeries, by: MatchBy) -> Option<usize> {
    match by {
        MatchBy::Text => {
            let d = edit_distance(pred.legend_text.as_deref()?, &truth.name);
            (d <= LEGEND_EDIT_THRESHOLD).then_some(d)
        }
        MatchBy::Color => colors_match(truth.color, pred.color)
            .then(|| hue_distance(rgb_to_hsv(truth.color).h, rgb_to_hsv(pred.color).h) as usize),
    }
}

/// Greedy one-to-one matching, best pairs first. Pairs with the right
/// relation win over closer pairs with the wrong one; remaining ties are
/// broken by prediction content so the result ignores prediction order.
fn greedy_match(truths: &[SeriesTruth], preds: &[ExtractedSeries], by: MatchBy) -> Vec<Option<usize>> {
    let mut pairs = Vec::new();
    for (t, truth) in truths.iter().enumerate() {
        for (p, pred) in preds.iter().enumerate() {
            if let Some(cost) = match_cost(truth, pred, by) {
                pairs.push((pred.relation != truth.relation, cost, t, p));
            }
        }
    }
    pairs.sort_by(|a, b| {
        (a.0, a.1, a.2)
            .cmp(&(b.0, b.1, b.2))
            .then_with(|| series_key(&preds[a.3]).partial_cmp(&series_key(&preds[b.3])).unwrap())
    });
    let mut truth_match = vec![None; truths.len()];
    let mut used = vec![false; preds.len()];
    for (_, _, t, p) in pairs {
        if truth_match[t].is_none() && !used[p] {
            truth_match[t] = Some(p);
            used[p] = true;
        }
    }
    truth_match
}

fn series_key(s: &ExtractedSeries) -> (Rgb8, Option<&str>, u64) {
    (s.color, s.legend_text.as_deref(), s.rho.to_bits())
}

/// Series score of one chart before clamping: `1/n` per included truth series
/// matched with the right relation, minus `1/n` per unmatched prediction.
/// `None` when no truth series is included.
fn chart_series_score(
    pred: &ExtractionResult,
    truth: &ChartGroundTruth,
    by: MatchBy,
    include: &dyn Fn(&SeriesTruth) -> bool,
) -> Option<f64> {
    let matched = greedy_match(&truth.series, &pred.series, by);
    let included: Vec<bool> = truth.series.iter().map(include).collect();
    let n = included.iter().filter(|&&i| i).count();
    if n == 0 {
        return None;
    }
    let correct = truth
        .series
        .iter()
        .zip(&matched)
        .zip(&included)
        .filter(|((t, m), &inc)| inc && m.is_some_and(|p| pred.series[p].relation == t.relation))
        .count();
    let used = matched.iter().flatten().count();
    let spurious = pred.series.len() - used;
    Some((correct as f64 - spurious as f64) / n as f64)
}

fn all_series(_: &SeriesTruth) -> bool {
    true
}

fn away_from_boundary(t: &SeriesTruth) -> bool {
    (t.rho.abs() - 0.4).abs() > BOUNDARY_BAND
}

fn mean(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

pub fn axis_accuracy(pairs: &[(ExtractionResult, ChartGroundTruth)]) -> Result<f64> {
    mean(pairs.iter().map(|(p, t)| f64::from(u8::from(axis_correct(p, t))))).ok_or(Error::EmptyCorpus)
}

/// Mean per-chart series score, with chart scores clamped at zero.
pub fn series_accuracy(pairs: &[(ExtractionResult, ChartGroundTruth)], by: MatchBy) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    mean(pairs.iter().filter_map(|(p, t)| chart_series_score(p, t, by, &all_series)).map(|s| s.max(0.0)))
        .ok_or(Error::EmptyCorpus)
}

/// As [`series_accuracy`], ignoring truth series whose |rho| lies within
/// [`BOUNDARY_BAND`] of 0.4. Charts with no remaining series are skipped.
pub fn series_accuracy_excluding_boundary(pairs: &[(ExtractionResult, ChartGroundTruth)], by: MatchBy) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    mean(
        pairs
            .iter()
            .filter_map(|(p, t)| chart_series_score(p, t, by, &away_from_boundary))
            .map(|s| s.max(0.0)),
    )
    .ok_or(Error::EmptyCorpus)
}

pub fn total_accuracy(a_axis: f64, a_series: f64) -> f64 {
    (a_axis + a_series) / 2.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChartMetrics {
    pub index: usize,
    pub n_series: usize,
    pub n_predicted: usize,
    pub axis_correct: bool,
    pub series_score: f64,
    /// Unclamped; negative when spurious series outweigh correct ones.
    pub series_score_raw: f64,
    pub series_noocr: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub charts: usize,
    pub series: usize,
    pub a_axis: f64,
    pub a_series: f64,
    pub a_total: f64,
    pub series_noocr: f64,
    /// Series_NoOCR over series away from the classification boundary.
    pub series_noocr_excluding_boundary: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PipelineConfig>,
    pub rows: Vec<ChartMetrics>,
}

pub fn evaluate(pairs: &[(ExtractionResult, ChartGroundTruth)]) -> Result<MetricsReport> {
    if pairs.is_empty() {
        return Err(Error::EmptyCorpus);
    }
    let rows: Vec<ChartMetrics> = pairs
        .iter()
        .enumerate()
        .map(|(index, (p, t))| {
            let raw = chart_series_score(p, t, MatchBy::Text, &all_series).unwrap_or(0.0);
            ChartMetrics {
                index,
                n_series: t.series.len(),
                n_predicted: p.series.len(),
                axis_correct: axis_correct(p, t),
                series_score: raw.max(0.0),
                series_score_raw: raw,
                series_noocr: chart_series_score(p, t, MatchBy::Color, &all_series).unwrap_or(0.0).max(0.0),
            }
        })
        .collect();
    let a_axis = axis_accuracy(pairs)?;
    let a_series = series_accuracy(pairs, MatchBy::Text)?;
    Ok(MetricsReport {
        charts: pairs.len(),
        series: pairs.iter().map(|(_, t)| t.series.len()).sum(),
        a_axis,
        a_series,
        a_total: total_accuracy(a_axis, a_series),
        series_noocr: series_accuracy(pairs, MatchBy::Color)?,
        series_noocr_excluding_boundary: series_accuracy_excluding_boundary(pairs, MatchBy::Color).ok(),
        config: None,
        rows,
    })
}

fn pct(v: f64) -> String {
    format!("{:.1}%", 100.0 * v)
}

impl MetricsReport {
    /// Aligned plain-text summary.
    pub fn to_table(&self) -> String {
        let mut lines = vec![
            ("charts", self.charts.to_string()),
            ("series", self.series.to_string()),
            ("A_axis", pct(self.a_axis)),
            ("A_series", pct(self.a_series)),
            ("A_total", pct(self.a_total)),
            ("Series_NoOCR", pct(self.series_noocr)),
        ];
        if let Some(v) = self.series_noocr_excluding_boundary {
            lines.push(("Series_NoOCR (boundary excluded)", pct(v)));
        }
        table(&lines)
    }
}

fn table(lines: &[(&str, String)]) -> String {
    let w = lines.iter().map(|(k, _)| k.len()).max().unwrap_or(0);
    let mut out = String::new();
    for (k, v) in lines {
        let _ = writeln!(out, "{k:<w$}  {v:>8}");
    }
    out
}

/// Results of the preprocessing ablations. Each experiment fills its own fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub charts: usize,
    pub k_accuracy_with_preprocess: Option<f64>,
    pub k_accuracy_without: Option<f64>,
    pub segmentation_errors_with: Option<usize>,
    pub segmentation_errors_without: Option<usize>,
    /// `(series - errors) / series`, unclamped.
    pub segmentation_ratio_with: Option<f64>,
    pub segmentation_ratio_without: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<PipelineConfig>,
    pub rows: Vec<AblationRow>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct AblationRow {
    pub index: usize,
    pub expected_k: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_with: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k_without: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors_with: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub errors_without: Option<usize>,
}

impl AblationReport {
    pub fn to_table(&self) -> String {
        let mut lines = vec![("charts", self.charts.to_string())];
        if let Some(v) = self.k_accuracy_with_preprocess {
            lines.push(("k accuracy (preprocessed)", pct(v)));
        }
        if let Some(v) = self.k_accuracy_without {
            lines.push(("k accuracy (raw)", pct(v)));
        }
        if let Some(v) = self.segmentation_errors_with {
            lines.push(("segmentation errors (preprocessed)", v.to_string()));
        }
        if let Some(v) = self.segmentation_errors_without {
            lines.push(("segmentation errors (raw)", v.to_string()));
        }
        table(&lines)
    }
}

/// Plot-area crop of a chart, optionally saturation-thresholded.
fn analysis_image(
    img: &crate::raster::RasterImage,
    truth: &ChartGroundTruth,
    preprocess: bool,
    cfg: &PipelineConfig,
) -> Result<crate::raster::RasterImage> {
    let crop = match truth.facets.plot_area.filter(|b| b.fits_in(img.width(), img.height())) {
        Some(b) => img.crop(&b)?,
        None => img.clone(),
    };
    Ok(if preprocess {
        saturation_threshold(&crop, &cfg.preprocess())
    } else {
        crop
    })
}

fn ensure_nonempty(corpus: &Corpus) -> Result<()> {
    if corpus.is_empty() {
        Err(Error::EmptyCorpus)
    } else {
        Ok(())
    }
}

/// k-selection accuracy with and without saturation thresholding.
pub fn ablate_k_selection(corpus: &Corpus, cfg: &PipelineConfig) -> Result<AblationReport> {
    ensure_nonempty(corpus)?;
    cfg.validate()?;
    let rows = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let (img, truth) = corpus.load(i)?;
            let k = |pre| -> Result<usize> {
                Ok(select_k(&analysis_image(&img, &truth, pre, cfg)?, cfg.seed, &cfg.cluster())?.chosen_k)
            };
            Ok(AblationRow {
                index: i,
                expected_k: truth.expected_k(),
                k_with: Some(k(true)?),
                k_without: Some(k(false)?),
                ..Default::default()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let acc = |f: fn(&AblationRow) -> Option<usize>| {
        rows.iter().filter(|r| f(r) == Some(r.expected_k)).count() as f64 / rows.len() as f64
    };
    Ok(AblationReport {
        charts: rows.len(),
        k_accuracy_with_preprocess: Some(acc(|r| r.k_with)),
        k_accuracy_without: Some(acc(|r| r.k_without)),
        config: Some(*cfg),
        rows,
        ..Default::default()
    })
}

/// Missed truth colors plus spurious predicted colors, matched one-to-one
/// by hue.
pub fn color_errors(truth: &[Rgb8], predicted: &[Rgb8]) -> usize {
    let mut pairs = Vec::new();
    for (t, &tc) in truth.iter().enumerate() {
        for (p, &pc) in predicted.iter().enumerate() {
            if colors_match(tc, pc) {
                pairs.push((hue_distance(rgb_to_hsv(tc).h, rgb_to_hsv(pc).h), t, p));
            }
        }
    }
    pairs.sort();
    let mut t_used = vec![false; truth.len()];
    let mut p_used = vec![false; predicted.len()];
    let mut matched = 0;
    for (_, t, p) in pairs {
        if !t_used[t] && !p_used[p] {
            t_used[t] = true;
            p_used[p] = true;
            matched += 1;
        }
    }
    truth.len() + predicted.len() - 2 * matched
}

/// Color-identification errors with the true k, with and without
/// saturation thresholding.
pub fn ablate_segmentation(corpus: &Corpus, cfg: &PipelineConfig) -> Result<AblationReport> {
    ensure_nonempty(corpus)?;
    cfg.validate()?;
    let rows = (0..corpus.len())
        .into_par_iter()
        .map(|i| {
            let (img, truth) = corpus.load(i)?;
            let colors: Vec<Rgb8> = truth.series.iter().map(|s| s.color).collect();
            let errors = |pre| -> Result<usize> {
                let work = analysis_image(&img, &truth, pre, cfg)?;
                let predicted: Vec<Rgb8> =
                    match segment_series(&work, truth.expected_k(), cfg.seed, &cfg.segment(), &cfg.cluster()) {
                        Ok(masks) => masks.iter().map(|m| m.representative_color).collect(),
                        Err(Error::SegmentationEmpty) => Vec::new(),
                        Err(e) => return Err(e),
                    };
                Ok(color_errors(&colors, &predicted))
            };
            Ok(AblationRow {
                index: i,
                expected_k: truth.expected_k(),
                errors_with: Some(errors(true)?),
                errors_without: Some(errors(false)?),
                ..Default::default()
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let series: usize = rows.iter().map(|r| r.expected_k - 1).sum();
    let with: usize = rows.iter().filter_map(|r| r.errors_with).sum();
    let without: usize = rows.iter().filter_map(|r| r.errors_without).sum();
    let ratio = |e: usize| (series as f64 - e as f64) / series as f64;
    Ok(AblationReport {
        charts: rows.len(),
        segmentation_errors_with: Some(with),
        segmentation_errors_without: Some(without),
        segmentation_ratio_with: Some(ratio(with)),
        segmentation_ratio_without: Some(ratio(without)),
        config: Some(*cfg),
        rows,
        ..Default::default()
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edit_distance_examples() {
        assert_eq!(edit_distance("abc", "abc"), 0);
        assert_eq!(edit_distance("kitten", "sitting"), 3);
        assert_eq!(edit_distance("", "abcd"), 4);
        assert_eq!(edit_distance("Revenue over time", "Revenue 0ver tine"), 2);
    }

    #[test]
    fn total_examples() {
        assert_eq!(total_accuracy(1.0, 1.0), 1.0);
        assert!((total_accuracy(0.86, 0.833) - 0.8465).abs() < 1e-12);
        assert_eq!(total_accuracy(0.0, 1.0), 0.5);
    }

    #[test]
    fn color_errors_count_misses_and_spurious() {
        let (r, g, b) = (Rgb8::new(255, 0, 0), Rgb8::new(0, 128, 0), Rgb8::new(0, 0, 255));
        assert_eq!(color_errors(&[r, b], &[b, r]), 0);
        assert_eq!(color_errors(&[r, b], &[r]), 1);
        assert_eq!(color_errors(&[r], &[r, g, Rgb8::gray(40)]), 2);
        assert_eq!(color_errors(&[r, b], &[r, r]), 2);
    }

    #[test]
    fn achromatic_never_matches() {
        assert!(!colors_match(Rgb8::new(255, 0, 0), Rgb8::WHITE));
        assert!(colors_match(Rgb8::new(255, 0, 0), Rgb8::new(200, 20, 30)));
    }
}
