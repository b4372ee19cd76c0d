//! Saturation thresholding.
//!
//! Every pixel whose HSV saturation exceeds the threshold is pushed to full
//! saturation and full value, keeping its hue; everything else becomes white.
//! Grayscale backgrounds, axes, gridlines and text all disappear, leaving only
//! the colored series marks on a white field.

use serde::{Deserialize, Serialize};

use crate::raster::{hsv_to_rgb, rgb_to_hsv, Hsv, RasterImage, Rgb8};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PreprocessConfig {
    pub saturation_threshold: u8,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { saturation_threshold: 30 }
    }
}

pub fn saturation_threshold(img: &RasterImage, cfg: &PreprocessConfig) -> RasterImage {
    let vivid: Vec<Rgb8> = (0..180u8).map(|h| hsv_to_rgb(Hsv::new(h, 255, 255))).collect();
    img.map(|p| {
        let hsv = rgb_to_hsv(p);
        if hsv.s > cfg.saturation_threshold {
            vivid[hsv.h as usize]
        } else {
            Rgb8::WHITE
        }
    })
}
