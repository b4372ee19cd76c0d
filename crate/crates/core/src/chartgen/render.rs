use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::canvas::{text_extent, Canvas, TextDirection};
use super::{label_relation, ChartGroundTruth, ChartSpec, ChartType, SeriesTruth};
use crate::error::{Error, Result};
use crate::raster::{RasterImage, Rect, Rgb8};
use crate::segment::{FacetBoxes, LegendEntry};

const INK: Rgb8 = Rgb8::gray(38);
const LEGEND_EDGE: Rgb8 = Rgb8::gray(204);

const PLOT_LEFT: u32 = 60;
const PLOT_TOP: u32 = 36;
const PLOT_RIGHT_MARGIN: u32 = 16;
const PLOT_BOTTOM_MARGIN: u32 = 44;

const LEGEND_INSET: u32 = 6;
const LEGEND_PAD: u32 = 5;
const LEGEND_ROW: u32 = 12;
const SWATCH_LEN: u32 = 20;
/// Fraction of each category slot covered by its group of bars.
const BAR_GROUP_WIDTH: f64 = 0.6;
const SWATCH_GAP: u32 = 6;
const TICKS: usize = 5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LegendCorner {
    UpperLeft,
    UpperRight,
    LowerLeft,
    LowerRight,
}

impl LegendCorner {
    pub const ALL: [LegendCorner; 4] = [
        LegendCorner::UpperLeft,
        LegendCorner::UpperRight,
        LegendCorner::LowerLeft,
        LegendCorner::LowerRight,
    ];

    fn is_upper(self) -> bool {
        matches!(self, LegendCorner::UpperLeft | LegendCorner::UpperRight)
    }

    fn is_left(self) -> bool {
        matches!(self, LegendCorner::UpperLeft | LegendCorner::LowerLeft)
    }

    fn to_upper(self) -> LegendCorner {
        if self.is_left() {
            LegendCorner::UpperLeft
        } else {
            LegendCorner::UpperRight
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StyleParams {
    pub width: u32,
    pub height: u32,
    pub legend_corner: LegendCorner,
    pub marker_radius: f64,
    pub line_width: f64,
    /// Standard deviation of additive per-channel Gaussian pixel noise.
    pub noise_sigma: f64,
    pub antialias: bool,
}

impl Default for StyleParams {
    fn default() -> Self {
        StyleParams {
            width: 512,
            height: 384,
            legend_corner: LegendCorner::UpperRight,
            marker_radius: 3.0,
            line_width: 2.0,
            noise_sigma: 0.0,
            antialias: true,
        }
    }
}

struct Axes {
    plot: Rect,
    // Vertical pixel band available to data, inside `plot`.
    data_top: f64,
    data_bottom: f64,
    x_range: (f64, f64),
    y_range: (f64, f64),
}

impl Axes {
    fn left(&self) -> f64 {
        self.plot.x as f64 + 1.0
    }

    fn right(&self) -> f64 {
        self.plot.right() as f64 - 2.0
    }

    fn px(&self, x: f64) -> f64 {
        let (x0, x1) = self.x_range;
        self.left() + (x - x0) / (x1 - x0) * (self.right() - self.left())
    }

    fn py(&self, y: f64) -> f64 {
        let (y0, y1) = self.y_range;
        self.data_bottom - (y - y0) / (y1 - y0) * (self.data_bottom - self.data_top)
    }
}

fn padded(lo: f64, hi: f64) -> (f64, f64) {
    let span = hi - lo;
    let pad = if span > 0.0 { span * 0.05 } else { 0.5 };
    (lo - pad, hi + pad)
}

fn tick_label(v: f64) -> String {
    let s = format!("{v:.1}");
    if s == "-0.0" {
        "0.0".into()
    } else {
        s
    }
}

/// Renders a chart and returns it with its ground truth.
///
/// Data is kept out of the horizontal band occupied by the legend, so key
/// marks never overlap series marks. Bar charts always take an upper corner
/// since bars grow from the bottom axis.
pub fn render_chart(
    spec: &ChartSpec,
    style: &StyleParams,
    rng: &mut impl Rng,
) -> Result<(RasterImage, ChartGroundTruth)> {
    let (w, h) = (style.width, style.height);
    if w < 256 || h < 256 {
        return Err(Error::InvalidParams(format!("image must be at least 256x256, got {w}x{h}")));
    }
    if spec.series.is_empty() || spec.series.len() > 3 {
        return Err(Error::InvalidParams(format!(
            "charts carry 1 to 3 series, got {}",
            spec.series.len()
        )));
    }
    for (i, a) in spec.series.iter().enumerate() {
        a.data.validate()?;
        if spec.series[..i].iter().any(|b| b.color == a.color) {
            return Err(Error::InvalidParams("series colors must be distinct".into()));
        }
    }
    if !(style.marker_radius > 0.0) || !(style.line_width > 0.0) || !(style.noise_sigma >= 0.0) {
        return Err(Error::InvalidParams("mark sizes must be positive".into()));
    }

    let plot = Rect::new(
        PLOT_LEFT,
        PLOT_TOP,
        w - PLOT_LEFT - PLOT_RIGHT_MARGIN,
        h - PLOT_TOP - PLOT_BOTTOM_MARGIN,
    );
    let corner = if spec.chart_type == ChartType::Bar {
        style.legend_corner.to_upper()
    } else {
        style.legend_corner
    };

    // Legend geometry.
    let n = spec.series.len() as u32;
    let text_w = spec
        .series
        .iter()
        .map(|s| text_extent(&s.name, 1, TextDirection::Horizontal).0)
        .max()
        .unwrap_or(0);
    let legend_w = LEGEND_PAD * 2 + SWATCH_LEN + SWATCH_GAP + text_w;
    let legend_h = LEGEND_PAD * 2 + n * LEGEND_ROW - (LEGEND_ROW - 7);
    let band = legend_h + 2 * LEGEND_INSET;
    if legend_w + 2 * LEGEND_INSET > plot.width || band * 2 > plot.height {
        return Err(Error::Layout(format!(
            "{legend_w}x{legend_h} legend does not fit a {}x{} plot",
            plot.width, plot.height
        )));
    }
    let legend = Rect::new(
        if corner.is_left() {
            plot.x + LEGEND_INSET
        } else {
            plot.right() - LEGEND_INSET - legend_w
        },
        if corner.is_upper() {
            plot.y + LEGEND_INSET
        } else {
            plot.bottom() - LEGEND_INSET - legend_h
        },
        legend_w,
        legend_h,
    );

    let (mut data_top, mut data_bottom) = (plot.y as f64 + 1.0, plot.bottom() as f64 - 2.0);
    if corner.is_upper() {
        data_top += band as f64;
    } else {
        data_bottom -= band as f64;
    }

    let all = spec.series.iter().flat_map(|s| s.data.points.iter());
    let (mut xmin, mut xmax, mut ymin, mut ymax) =
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY);
    for &(x, y) in all {
        xmin = xmin.min(x);
        xmax = xmax.max(x);
        ymin = ymin.min(y);
        ymax = ymax.max(y);
    }
    let n_bars = spec.series.iter().map(|s| s.data.len()).max().unwrap_or(0);
    let (x_range, y_range) = match spec.chart_type {
        ChartType::Bar => ((-0.5, n_bars as f64 - 0.5), (0.0, ymax * 1.05)),
        _ => (padded(xmin, xmax), padded(ymin, ymax)),
    };
    let axes = Axes {
        plot,
        data_top,
        data_bottom,
        x_range,
        y_range,
    };

    let mut canvas = Canvas::new(w, h, Rgb8::WHITE);

    for (si, s) in spec.series.iter().enumerate() {
        let color = s.color.rgb();
        match spec.chart_type {
            ChartType::Scatter => {
                for &(x, y) in &s.data.points {
                    canvas.fill_circle(axes.px(x), axes.py(y), style.marker_radius, color, style.antialias);
                }
            }
            ChartType::Line => {
                let pts: Vec<(f64, f64)> = s.data.points.iter().map(|&(x, y)| (axes.px(x), axes.py(y))).collect();
                let dash: Vec<f64> = s.line_style.pattern().iter().map(|l| l * style.line_width).collect();
                canvas.stroke_polyline(&pts, style.line_width, color, &dash, style.antialias);
            }
            ChartType::Bar => {
                let slot = (axes.right() - axes.left()) / n_bars as f64;
                let bar_w = slot * BAR_GROUP_WIDTH / n as f64;
                let base = axes.py(0.0).round();
                for (i, &(_, y)) in s.data.points.iter().enumerate() {
                    let x0 = (axes.left() + slot * (i as f64 + (1.0 - BAR_GROUP_WIDTH) / 2.0) + bar_w * si as f64).round();
                    let x1 = (x0 + bar_w).round().max(x0 + 1.0);
                    let top = axes.py(y).round().min(base - 1.0);
                    canvas.fill_rect(
                        Rect::new(x0 as u32, top as u32, (x1 - x0) as u32, (base - top) as u32 + 1),
                        color,
                    );
                }
            }
        }
    }

    // Frame and ticks.
    canvas.outline_rect(plot, INK);
    for t in 0..TICKS {
        let f = t as f64 / (TICKS - 1) as f64;
        let xv = axes.x_range.0 + f * (axes.x_range.1 - axes.x_range.0);
        let xp = axes.px(xv).round() as u32;
        canvas.fill_rect(Rect::new(xp, plot.bottom(), 1, 4), INK);
        let label = tick_label(xv);
        let (tw, _) = text_extent(&label, 1, TextDirection::Horizontal);
        canvas.draw_text(xp.saturating_sub(tw / 2), plot.bottom() + 7, &label, 1, TextDirection::Horizontal, INK);

        let yv = axes.y_range.0 + f * (axes.y_range.1 - axes.y_range.0);
        let yp = axes.py(yv).round() as u32;
        canvas.fill_rect(Rect::new(plot.x - 4, yp, 4, 1), INK);
        let label = tick_label(yv);
        let (tw, th) = text_extent(&label, 1, TextDirection::Horizontal);
        canvas.draw_text(plot.x - 7 - tw, yp.saturating_sub(th / 2), &label, 1, TextDirection::Horizontal, INK);
    }

    // Title and axis labels.
    let (tw, _) = text_extent(&spec.title, 2, TextDirection::Horizontal);
    let title = canvas.draw_text(
        (w.saturating_sub(tw)) / 2,
        10,
        &spec.title,
        2,
        TextDirection::Horizontal,
        INK,
    );
    let (xw, _) = text_extent(&spec.x_label, 1, TextDirection::Horizontal);
    let x_label = canvas.draw_text(
        (plot.x + plot.width / 2).saturating_sub(xw / 2),
        h - 18,
        &spec.x_label,
        1,
        TextDirection::Horizontal,
        INK,
    );
    let (_, yh) = text_extent(&spec.y_label, 1, TextDirection::Vertical);
    let y_label = canvas.draw_text(
        8,
        (plot.y + plot.height / 2).saturating_sub(yh / 2),
        &spec.y_label,
        1,
        TextDirection::Vertical,
        INK,
    );

    // Legend on top of everything inside the plot.
    canvas.fill_rect(legend, Rgb8::WHITE);
    canvas.outline_rect(legend, LEGEND_EDGE);
    let mut entries = Vec::with_capacity(spec.series.len());
    let mut swatches = Vec::with_capacity(spec.series.len());
    for (i, s) in spec.series.iter().enumerate() {
        let row_top = legend.y + LEGEND_PAD + i as u32 * LEGEND_ROW;
        let cy = row_top as f64 + 3.0;
        let sx0 = (legend.x + LEGEND_PAD) as f64;
        let cx = sx0 + (SWATCH_LEN as f64 - 1.0) / 2.0;
        let color = s.color.rgb();
        match spec.chart_type {
            ChartType::Scatter => canvas.fill_circle(cx, cy, style.marker_radius, color, style.antialias),
            ChartType::Line => {
                let dash: Vec<f64> = s.line_style.pattern().iter().map(|l| l * style.line_width).collect();
                canvas.stroke_polyline(
                    &[(sx0, cy), (sx0 + SWATCH_LEN as f64 - 1.0, cy)],
                    style.line_width,
                    color,
                    &dash,
                    style.antialias,
                );
            }
            ChartType::Bar => canvas.fill_rect(Rect::new(sx0 as u32 + 3, row_top, SWATCH_LEN - 6, 7), color),
        }
        let text_box = canvas.draw_text(
            legend.x + LEGEND_PAD + SWATCH_LEN + SWATCH_GAP,
            row_top,
            &s.name,
            1,
            TextDirection::Horizontal,
            INK,
        );
        entries.push(LegendEntry {
            text: s.name.clone(),
            text_box,
        });
        swatches.push((cx, cy));
    }

    if style.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, style.noise_sigma).expect("sigma is positive and finite");
        canvas.add_noise(&mut || normal.sample(rng));
    }

    let series = spec
        .series
        .iter()
        .zip(swatches)
        .map(|(s, swatch_center)| {
            let (rho, relation) = label_relation(&s.data)?;
            Ok(SeriesTruth {
                name: s.name.clone(),
                color: s.color.rgb(),
                color_name: s.color.name().to_string(),
                line_style: s.line_style,
                rho,
                relation,
                swatch_center,
                data: s.data.clone(),
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let truth = ChartGroundTruth {
        chart_type: spec.chart_type,
        width: w,
        height: h,
        title: spec.title.clone(),
        x_label: spec.x_label.clone(),
        y_label: spec.y_label.clone(),
        series,
        facets: FacetBoxes {
            plot_area: Some(plot),
            legend: Some(legend),
            title: Some(title),
            x_label: Some(x_label),
            y_label: Some(y_label),
            legend_entries: entries,
        },
        seed: spec.seed,
    };
    Ok((canvas.into_image(), truth))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::chartgen::{noisy_line, LineStyle, SeriesColor, SeriesSpec};
    use crate::raster::{hue_distance, rgb_to_hsv};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn spec(kind: ChartType, colors: &[SeriesColor]) -> ChartSpec {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        ChartSpec {
            chart_type: kind,
            title: "Revenue".into(),
            x_label: "time".into(),
            y_label: "value".into(),
            series: colors
                .iter()
                .enumerate()
                .map(|(i, &color)| SeriesSpec {
                    name: format!("series{i}"),
                    color,
                    line_style: LineStyle::Solid,
                    data: noisy_line(if kind == ChartType::Bar { 12 } else { 60 }, 0.8, 1.0 + i as f64, 0.05, &mut rng),
                })
                .collect(),
            seed: 11,
        }
    }

    #[test]
    fn red_line_has_only_red_saturated_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let (img, _) = render_chart(&spec(ChartType::Line, &[SeriesColor::Red]), &StyleParams::default(), &mut rng).unwrap();
        let saturated: Vec<_> = img.pixels().iter().map(|&p| rgb_to_hsv(p)).filter(|h| h.s > 200).collect();
        assert!(!saturated.is_empty());
        assert!(saturated.iter().all(|h| hue_distance(h.h, 0) <= 10));
    }

    #[test]
    fn corner_is_white_without_noise() {
        for kind in ChartType::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let s = spec(kind, &[SeriesColor::Red, SeriesColor::Green, SeriesColor::Blue]);
            let (img, truth) = render_chart(&s, &StyleParams::default(), &mut rng).unwrap();
            assert_eq!(img.get(0, 0), Rgb8::WHITE);
            assert_eq!(img.get(img.width() - 1, img.height() - 1), Rgb8::WHITE);
            let colors: Vec<Rgb8> = truth.series.iter().map(|s| s.color).collect();
            assert_eq!(colors.len(), 3);
            assert!(colors[0] != colors[1] && colors[1] != colors[2] && colors[0] != colors[2]);
        }
    }

    #[test]
    fn facets_are_in_bounds_and_entries_inside_legend() {
        for corner in LegendCorner::ALL {
            let mut rng = ChaCha8Rng::seed_from_u64(0);
            let style = StyleParams { legend_corner: corner, ..Default::default() };
            let (img, truth) = render_chart(&spec(ChartType::Scatter, &[SeriesColor::Blue, SeriesColor::Red]), &style, &mut rng).unwrap();
            let f = &truth.facets;
            for r in [f.plot_area, f.legend, f.title, f.x_label, f.y_label].into_iter().flatten() {
                assert!(r.fits_in(img.width(), img.height()), "{r:?}");
            }
            let legend = f.legend.unwrap();
            assert!(f.legend_entries.iter().all(|e| legend.contains_rect(&e.text_box)));
            for s in &truth.series {
                let (x, y) = s.swatch_center;
                assert!(legend.contains(x.round() as u32, y.round() as u32));
                assert_eq!(img.get(x.round() as u32, y.round() as u32), s.color);
            }
        }
    }

    #[test]
    fn legend_too_wide_is_layout_error() {
        let mut s = spec(ChartType::Line, &[SeriesColor::Red]);
        s.series[0].name = "x".repeat(80);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(matches!(
            render_chart(&s, &StyleParams::default(), &mut rng),
            Err(Error::Layout(_))
        ));
    }

    #[test]
    fn small_canvas_rejected() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let style = StyleParams { width: 200, ..Default::default() };
        assert!(matches!(
            render_chart(&spec(ChartType::Line, &[SeriesColor::Red]), &style, &mut rng),
            Err(Error::InvalidParams(_))
        ));
    }

    #[test]
    fn pixel_noise_perturbs_background() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let style = StyleParams { noise_sigma: 8.0, ..Default::default() };
        let (img, _) = render_chart(&spec(ChartType::Line, &[SeriesColor::Red]), &style, &mut rng).unwrap();
        let changed = img.pixels().iter().filter(|&&p| p != Rgb8::WHITE).count();
        assert!(changed > img.pixels().len() / 2);
    }
}
