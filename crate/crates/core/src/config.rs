//! Pipeline configuration shared by the library and the command line.

use serde::{Deserialize, Serialize};

use crate::cluster::ClusterConfig;
use crate::error::{Error, Result};
use crate::preprocess::PreprocessConfig;
use crate::relate::PointReduction;
use crate::segment::{RangeWidths, SegmentConfig};

/// Every tunable constant of the extraction pipeline, flat so it maps onto a
/// single key-value config file.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub saturation_threshold: u8,
    pub min_mask_pixels: usize,
    pub k_range_max: usize,
    pub kneedle_threshold: f64,
    pub correlation_threshold: f64,
    pub hue_half_width: u8,
    pub saturation_half_width: u8,
    pub value_half_width: u8,
    pub subsample_cap: usize,
    pub kmeans_restarts: usize,
    pub point_reduction: PointReduction,
    pub seed: u64,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let cluster = ClusterConfig::default();
        let segment = SegmentConfig::default();
        PipelineConfig {
            saturation_threshold: PreprocessConfig::default().saturation_threshold,
            min_mask_pixels: segment.min_mask_pixels,
            k_range_max: cluster.k_max,
            kneedle_threshold: cluster.kneedle_threshold,
            correlation_threshold: 0.4,
            hue_half_width: segment.widths.hue,
            saturation_half_width: segment.widths.saturation,
            value_half_width: segment.widths.value,
            subsample_cap: cluster.subsample_cap,
            kmeans_restarts: cluster.restarts,
            point_reduction: PointReduction::default(),
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidParams(msg.to_string()));
        if !(3..=64).contains(&self.k_range_max) {
            return bad("k_range_max must be in 3..=64");
        }
        if !(self.kneedle_threshold > 0.0 && self.kneedle_threshold <= 1.0) {
            return bad("kneedle_threshold must be in (0, 1]");
        }
        if !(0.0..1.0).contains(&self.correlation_threshold) {
            return bad("correlation_threshold must be in [0, 1)");
        }
        if self.hue_half_width >= 90 {
            return bad("hue_half_width must be below 90");
        }
        if self.subsample_cap < self.k_range_max {
            return bad("subsample_cap must be at least k_range_max");
        }
        if self.kmeans_restarts == 0 {
            return bad("kmeans_restarts must be at least 1");
        }
        Ok(())
    }

    pub fn preprocess(&self) -> PreprocessConfig {
        PreprocessConfig {
            saturation_threshold: self.saturation_threshold,
        }
    }

    pub fn cluster(&self) -> ClusterConfig {
        ClusterConfig {
            k_max: self.k_range_max,
            kneedle_threshold: self.kneedle_threshold,
            subsample_cap: self.subsample_cap,
            restarts: self.kmeans_restarts,
        }
    }

    pub fn segment(&self) -> SegmentConfig {
        SegmentConfig {
            min_mask_pixels: self.min_mask_pixels,
            widths: RangeWidths {
                hue: self.hue_half_width,
                saturation: self.saturation_half_width,
                value: self.value_half_width,
            },
        }
    }
}
