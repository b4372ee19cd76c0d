//! Per-series segmentation masks and legend assignment.

use serde::{Deserialize, Serialize};

use crate::cluster::{kmeans_image, ClusterConfig, ColorCluster};
use crate::error::{Error, Result};
use crate::raster::{rgb_to_hsv, Hsv, RasterImage, Rect, Rgb8};

/// Inclusive HSV box.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HsvBox {
    pub lower: Hsv,
    pub upper: Hsv,
}

impl HsvBox {
    pub fn contains(&self, c: Hsv) -> bool {
        (self.lower.h..=self.upper.h).contains(&c.h)
            && (self.lower.s..=self.upper.s).contains(&c.s)
            && (self.lower.v..=self.upper.v).contains(&c.v)
    }
}

/// One box, or two hue-disjoint boxes when the hue interval wraps.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct HsvRangeSet {
    pub boxes: Vec<HsvBox>,
}

impl HsvRangeSet {
    pub fn contains(&self, c: Hsv) -> bool {
        self.boxes.iter().any(|b| b.contains(c))
    }
}

/// Half-widths of the box around a series color.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RangeWidths {
    pub hue: u8,
    pub saturation: u8,
    pub value: u8,
}

impl Default for RangeWidths {
    fn default() -> Self {
        RangeWidths {
            hue: 10,
            saturation: 25,
            value: 40,
        }
    }
}

pub fn hsv_range(color: Rgb8) -> HsvRangeSet {
    hsv_range_with(color, &RangeWidths::default())
}

pub fn hsv_range_with(color: Rgb8, widths: &RangeWidths) -> HsvRangeSet {
    hsv_range_around(rgb_to_hsv(color), widths)
}

/// Box set centered on an HSV triple.
pub fn hsv_range_around(c: Hsv, widths: &RangeWidths) -> HsvRangeSet {
    let clamp = |x: i32| x.clamp(0, 255) as u8;
    let (s0, s1) = (clamp(c.s as i32 - widths.saturation as i32), clamp(c.s as i32 + widths.saturation as i32));
    let (v0, v1) = (clamp(c.v as i32 - widths.value as i32), clamp(c.v as i32 + widths.value as i32));
    let hue_box = |h0: i32, h1: i32| HsvBox {
        lower: Hsv::new(h0 as u8, s0, v0),
        upper: Hsv::new(h1 as u8, s1, v1),
    };

    let (lo, hi) = (c.h as i32 - widths.hue as i32, c.h as i32 + widths.hue as i32);
    let boxes = if widths.hue >= 90 {
        vec![hue_box(0, 180)]
    } else if lo < 0 {
        vec![hue_box(0, hi), hue_box(180 + lo, 180)]
    } else if hi > 180 {
        vec![hue_box(lo, 180), hue_box(0, hi - 180)]
    } else {
        vec![hue_box(lo, hi)]
    };
    HsvRangeSet { boxes }
}

/// Pixels of one series, in the coordinates of a `width` x `height` image.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SeriesMask {
    pub width: u32,
    pub height: u32,
    /// `(col, row)` pairs in row-major scan order.
    pub pixels: Vec<(u32, u32)>,
    pub representative_color: Rgb8,
}

impl SeriesMask {
    pub fn len(&self) -> usize {
        self.pixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    /// Moves the mask into a larger image, e.g. from a crop back to the full chart.
    pub fn translate(&self, dx: u32, dy: u32, width: u32, height: u32) -> SeriesMask {
        SeriesMask {
            width,
            height,
            pixels: self.pixels.iter().map(|&(c, r)| (c + dx, r + dy)).collect(),
            representative_color: self.representative_color,
        }
    }

    /// Renders the mask as black marks on white.
    pub fn to_image(&self) -> RasterImage {
        let mut img = RasterImage::filled(self.width, self.height, Rgb8::WHITE);
        for &(c, r) in &self.pixels {
            img.set(c, r, Rgb8::BLACK);
        }
        img
    }
}

fn median(v: &mut [u8]) -> u8 {
    v.sort_unstable();
    v[(v.len() - 1) / 2]
}

/// Collects the pixels whose HSV falls in `range`.
///
/// Fails with `EmptyMask` when fewer than `min_pixels` (and at least one)
/// pixels match.
pub fn extract_mask(img: &RasterImage, range: &HsvRangeSet, min_pixels: usize) -> Result<SeriesMask> {
    let mut pixels = Vec::new();
    let (mut rs, mut gs, mut bs) = (Vec::new(), Vec::new(), Vec::new());
    for (col, row, p) in img.enumerate() {
        if range.contains(rgb_to_hsv(p)) {
            pixels.push((col, row));
            rs.push(p.r);
            gs.push(p.g);
            bs.push(p.b);
        }
    }
    if pixels.is_empty() || pixels.len() < min_pixels {
        return Err(Error::EmptyMask {
            pixels: pixels.len(),
            minimum: min_pixels.max(1),
        });
    }
    Ok(SeriesMask {
        width: img.width(),
        height: img.height(),
        pixels,
        representative_color: Rgb8::new(median(&mut rs), median(&mut gs), median(&mut bs)),
    })
}

fn whiteness_distance(c: &ColorCluster) -> f64 {
    c.centroid.iter().map(|v| (255.0 - v).powi(2)).sum()
}

/// Splits off the most populous cluster as the background.
pub fn eliminate_background(clusters: &[ColorCluster]) -> Result<(Vec<ColorCluster>, ColorCluster)> {
    let bg_index = clusters
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| {
            b.member_count
                .cmp(&a.member_count)
                .then(whiteness_distance(a).total_cmp(&whiteness_distance(b)))
        })
        .map(|(i, _)| i)
        .ok_or(Error::NoClusters)?;
    let mut series: Vec<ColorCluster> = clusters
        .iter()
        .enumerate()
        .filter(|&(i, _)| i != bg_index)
        .map(|(_, c)| *c)
        .collect();
    series.sort_by_key(|c| std::cmp::Reverse(c.member_count));
    Ok((series, clusters[bg_index]))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentConfig {
    /// Masks smaller than this are treated as residue and dropped.
    pub min_mask_pixels: usize,
    pub widths: RangeWidths,
}

impl Default for SegmentConfig {
    fn default() -> Self {
        SegmentConfig {
            min_mask_pixels: 25,
            widths: RangeWidths::default(),
        }
    }
}

/// Clusters the image into `k` colors and extracts one mask per non-background
/// cluster, largest first.
pub fn segment_series(
    img: &RasterImage,
    k: usize,
    seed: u64,
    cfg: &SegmentConfig,
    cluster: &ClusterConfig,
) -> Result<Vec<SeriesMask>> {
    if k <= 1 {
        return Ok(Vec::new());
    }
    let fit = kmeans_image(img, k, seed, cluster)?;
    let (series, _background) = eliminate_background(&fit.clusters)?;
    let mut masks = Vec::with_capacity(series.len());
    for c in &series {
        let range = hsv_range_with(c.color(), &cfg.widths);
        match extract_mask(img, &range, cfg.min_mask_pixels) {
            Ok(m) => masks.push(m),
            Err(Error::EmptyMask { .. }) => {}
            Err(e) => return Err(e),
        }
    }
    if masks.is_empty() && !series.is_empty() {
        return Err(Error::SegmentationEmpty);
    }
    masks.sort_by_key(|m| std::cmp::Reverse(m.len()));
    Ok(masks)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LegendEntry {
    pub text: String,
    pub text_box: Rect,
}

/// Boxes around the structural regions of a chart.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FacetBoxes {
    pub plot_area: Option<Rect>,
    pub legend: Option<Rect>,
    pub title: Option<Rect>,
    pub x_label: Option<Rect>,
    pub y_label: Option<Rect>,
    #[serde(default)]
    pub legend_entries: Vec<LegendEntry>,
}

pub trait FacetProvider {
    fn detect(&self, img: &RasterImage) -> FacetBoxes;
}

/// Returns fixed boxes, typically read from a ground-truth sidecar.
#[derive(Clone, Debug, Default)]
pub struct TruthFacets(pub FacetBoxes);

impl FacetProvider for TruthFacets {
    fn detect(&self, _img: &RasterImage) -> FacetBoxes {
        self.0.clone()
    }
}

/// Detects nothing; extraction then works on the whole image without text.
#[derive(Clone, Copy, Debug, Default)]
pub struct NoFacets;

impl FacetProvider for NoFacets {
    fn detect(&self, _img: &RasterImage) -> FacetBoxes {
        FacetBoxes::default()
    }
}

/// Median location of each mask's pixels inside `legend`.
fn legend_marks(legend: &Rect, masks: &[SeriesMask]) -> Vec<Option<(f64, f64)>> {
    masks
        .iter()
        .map(|m| {
            let (mut cols, mut rows): (Vec<u32>, Vec<u32>) =
                m.pixels.iter().filter(|&&(c, r)| legend.contains(c, r)).copied().unzip();
            if cols.is_empty() {
                return None;
            }
            cols.sort_unstable();
            rows.sort_unstable();
            let mid = (cols.len() - 1) / 2;
            Some((cols[mid] as f64, rows[mid] as f64))
        })
        .collect()
}

/// Matches legend entries to masks, nearest pairs first. Entries that cannot
/// be matched are `None`.
pub fn assign_legend_partial(facets: &FacetBoxes, masks: &[SeriesMask]) -> Vec<Option<usize>> {
    let mut assigned = vec![None; facets.legend_entries.len()];
    let Some(legend) = facets.legend else {
        return assigned;
    };
    let marks = legend_marks(&legend, masks);
    let mut pairs = Vec::new();
    for (e, entry) in facets.legend_entries.iter().enumerate() {
        let (tx, ty) = entry.text_box.center();
        for (m, mark) in marks.iter().enumerate() {
            if let Some((mx, my)) = mark {
                pairs.push(((mx - tx).hypot(my - ty), e, m));
            }
        }
    }
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
    let mut mask_taken = vec![false; masks.len()];
    for (_, e, m) in pairs {
        if assigned[e].is_none() && !mask_taken[m] {
            assigned[e] = Some(m);
            mask_taken[m] = true;
        }
    }
    assigned
}

/// Mask index for each legend entry, in entry order.
pub fn assign_legend(facets: &FacetBoxes, masks: &[SeriesMask]) -> Result<Vec<usize>> {
    if facets.legend.is_none() || facets.legend_entries.is_empty() {
        return Err(Error::NoLegend);
    }
    assign_legend_partial(facets, masks)
        .into_iter()
        .enumerate()
        .map(|(i, m)| m.ok_or(Error::UnassignableEntry(i)))
        .collect()
}
