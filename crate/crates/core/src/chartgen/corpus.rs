use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::render::{render_chart, LegendCorner, StyleParams};
use super::{
    gen_series_data, random_label, ChartGroundTruth, ChartSpec, ChartType, GenParams, LineStyle,
    SeriesColor, SeriesSpec,
};
use crate::error::{Error, Result};
use crate::raster::{load_image, RasterImage};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LineStyleMode {
    Solid,
    Random,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenConfig {
    pub count: usize,
    pub width: u32,
    pub height: u32,
    pub chart_types: Vec<ChartType>,
    pub min_series: usize,
    pub max_series: usize,
    pub points_per_series: usize,
    pub bars_per_series: usize,
    pub noise_sigma: f64,
    pub bar_exaggeration: f64,
    pub bar_base: f64,
    pub line_styles: LineStyleMode,
    pub marker_radius: (f64, f64),
    pub line_width: (f64, f64),
    pub pixel_noise_sigma: f64,
    pub antialias: bool,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            count: 100,
            width: 512,
            height: 384,
            chart_types: ChartType::ALL.to_vec(),
            min_series: 1,
            max_series: 3,
            points_per_series: 100,
            bars_per_series: 12,
            noise_sigma: 0.05,
            bar_exaggeration: 2.0,
            bar_base: 1.0,
            line_styles: LineStyleMode::Solid,
            marker_radius: (2.5, 4.0),
            line_width: (1.5, 3.0),
            pixel_noise_sigma: 0.0,
            antialias: true,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if self.count == 0 {
            return Err(Error::InvalidParams("count must be at least 1".into()));
        }
        if self.chart_types.is_empty() {
            return Err(Error::InvalidParams("no chart types enabled".into()));
        }
        if self.min_series == 0 || self.min_series > self.max_series || self.max_series > 3 {
            return Err(Error::InvalidParams(format!(
                "series count range {}..={} must lie within 1..=3",
                self.min_series, self.max_series
            )));
        }
        let (r0, r1) = self.marker_radius;
        let (w0, w1) = self.line_width;
        if !(r0 > 0.0 && r0 <= r1 && w0 > 0.0 && w0 <= w1) {
            return Err(Error::InvalidParams("mark size ranges must be positive and ordered".into()));
        }
        if !(self.pixel_noise_sigma >= 0.0) {
            return Err(Error::InvalidParams("pixel_noise_sigma must be non-negative".into()));
        }
        Ok(())
    }

    fn params_for(&self, kind: ChartType) -> GenParams {
        GenParams {
            n_points: match kind {
                ChartType::Bar => self.bars_per_series,
                _ => self.points_per_series,
            },
            noise_sigma: self.noise_sigma,
            bar_exaggeration: self.bar_exaggeration,
            bar_base: self.bar_base,
        }
    }
}

/// Per-chart seed, so a chart's content depends only on `(seed, index)`.
pub fn chart_seed(seed: u64, index: usize) -> u64 {
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn chart_rng(seed: u64, index: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(chart_seed(seed, index))
}

/// Builds and renders chart `index` of the corpus identified by `seed`.
pub fn generate_chart(config: &GenConfig, seed: u64, index: usize) -> Result<(RasterImage, ChartGroundTruth)> {
    config.validate()?;
    let chart_seed = chart_seed(seed, index);
    let mut rng = ChaCha8Rng::seed_from_u64(chart_seed);

    let chart_type = config.chart_types[rng.random_range(0..config.chart_types.len())];
    let n_series = rng.random_range(config.min_series..=config.max_series);
    let mut colors = SeriesColor::ALL.to_vec();
    colors.shuffle(&mut rng);
    let mut styles = LineStyle::ALL.to_vec();
    styles.shuffle(&mut rng);

    let params = config.params_for(chart_type);
    let title = random_label(&mut rng);
    let x_label = random_label(&mut rng);
    let y_label = random_label(&mut rng);
    let series = (0..n_series)
        .map(|i| {
            Ok(SeriesSpec {
                name: random_label(&mut rng),
                color: colors[i],
                line_style: match config.line_styles {
                    LineStyleMode::Solid => LineStyle::Solid,
                    LineStyleMode::Random => styles[i],
                },
                data: gen_series_data(chart_type, &mut rng, &params)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let style = StyleParams {
        width: config.width,
        height: config.height,
        legend_corner: LegendCorner::ALL[rng.random_range(0..4)],
        marker_radius: rng.random_range(config.marker_radius.0..=config.marker_radius.1),
        line_width: rng.random_range(config.line_width.0..=config.line_width.1),
        noise_sigma: config.pixel_noise_sigma,
        antialias: config.antialias,
    };
    let spec = ChartSpec {
        chart_type,
        title,
        x_label,
        y_label,
        series,
        seed: chart_seed,
    };
    render_chart(&spec, &style, &mut rng)
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub image_path: String,
    pub truth_path: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CorpusManifest {
    pub seed: u64,
    pub generator_config: GenConfig,
    /// Paths are relative to the directory holding the manifest.
    pub entries: Vec<CorpusEntry>,
}

impl CorpusManifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        read_json(path.as_ref())
    }
}

/// Renders `config.count` charts into `out_dir` and writes `manifest.json`.
///
/// Output bytes depend only on `(config, seed)`, whatever the thread count.
pub fn generate_corpus(config: &GenConfig, seed: u64, out_dir: impl AsRef<Path>) -> Result<CorpusManifest> {
    config.validate()?;
    let out_dir = out_dir.as_ref();
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;

    let entries = (0..config.count)
        .into_par_iter()
        .map(|i| {
            let (img, truth) = generate_chart(config, seed, i)?;
            let entry = CorpusEntry {
                image_path: format!("chart_{i:05}.png"),
                truth_path: format!("chart_{i:05}.truth.json"),
            };
            crate::raster::save_image(&img, out_dir.join(&entry.image_path))?;
            write_json(&out_dir.join(&entry.truth_path), &truth)?;
            Ok(entry)
        })
        .collect::<Result<Vec<_>>>()?;

    let manifest = CorpusManifest {
        seed,
        generator_config: config.clone(),
        entries,
    };
    write_json(&out_dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}

pub fn load_truth(path: impl AsRef<Path>) -> Result<ChartGroundTruth> {
    read_json(path.as_ref())
}

/// A corpus on disk: its directory plus the parsed manifest.
#[derive(Clone, Debug)]
pub struct Corpus {
    pub dir: PathBuf,
    pub manifest: CorpusManifest,
}

impl Corpus {
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        let manifest = CorpusManifest::load(dir.join(MANIFEST_FILE))?;
        Ok(Corpus { dir, manifest })
    }

    pub fn len(&self) -> usize {
        self.manifest.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.entries.is_empty()
    }

    pub fn image_path(&self, i: usize) -> PathBuf {
        self.dir.join(&self.manifest.entries[i].image_path)
    }

    pub fn truth_path(&self, i: usize) -> PathBuf {
        self.dir.join(&self.manifest.entries[i].truth_path)
    }

    pub fn load(&self, i: usize) -> Result<(RasterImage, ChartGroundTruth)> {
        Ok((load_image(self.image_path(i))?, load_truth(self.truth_path(i))?))
    }
}

pub(crate) fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Document {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).expect("serializable value");
    text.push('\n');
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}
