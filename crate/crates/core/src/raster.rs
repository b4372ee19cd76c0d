//! Raster images and color conversion.
//!
//! HSV values follow the 8-bit OpenCV convention used throughout the
//! pipeline: hue is stored in half-degrees (0..180), saturation and value
//! in 0..=255.

use std::path::Path;

use image::{ImageFormat, ImageReader, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Rgb8 {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb8 {
    pub const WHITE: Rgb8 = Rgb8::new(255, 255, 255);
    pub const BLACK: Rgb8 = Rgb8::new(0, 0, 0);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Rgb8 { r, g, b }
    }

    pub const fn gray(v: u8) -> Self {
        Rgb8 { r: v, g: v, b: v }
    }

    pub fn to_array(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    pub fn to_f64(self) -> [f64; 3] {
        [self.r as f64, self.g as f64, self.b as f64]
    }

    /// Rounds and clamps a real-valued color.
    pub fn from_f64(c: [f64; 3]) -> Self {
        let q = |v: f64| v.round().clamp(0.0, 255.0) as u8;
        Rgb8::new(q(c[0]), q(c[1]), q(c[2]))
    }

    pub fn is_gray(self) -> bool {
        self.r == self.g && self.g == self.b
    }

    pub fn to_hsv(self) -> Hsv {
        rgb_to_hsv(self)
    }
}

impl From<[u8; 3]> for Rgb8 {
    fn from(c: [u8; 3]) -> Self {
        Rgb8::new(c[0], c[1], c[2])
    }
}

/// HSV triple; `h` in half-degrees.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Hsv {
    pub h: u8,
    pub s: u8,
    pub v: u8,
}

impl Hsv {
    pub const fn new(h: u8, s: u8, v: u8) -> Self {
        Hsv { h, s, v }
    }
}

/// Hue distance on the 0..180 circle.
pub fn hue_distance(a: u8, b: u8) -> u8 {
    let d = (a as i16 - b as i16).rem_euclid(180);
    d.min(180 - d) as u8
}

pub fn rgb_to_hsv(c: Rgb8) -> Hsv {
    let (r, g, b) = (c.r as f64, c.g as f64, c.b as f64);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;

    let s = if max == 0.0 { 0.0 } else { 255.0 * delta / max };
    let h_deg = if delta == 0.0 {
        0.0
    } else if max == r {
        60.0 * (g - b) / delta
    } else if max == g {
        120.0 + 60.0 * (b - r) / delta
    } else {
        240.0 + 60.0 * (r - g) / delta
    };
    let h_deg = if h_deg < 0.0 { h_deg + 360.0 } else { h_deg };
    // 359.x degrees rounds up to 180, which is the same hue as 0.
    let h = ((h_deg / 2.0).round() as u16 % 180) as u8;

    Hsv::new(h, s.round() as u8, max as u8)
}

pub fn hsv_to_rgb(c: Hsv) -> Rgb8 {
    let v = c.v as f64;
    if c.s == 0 {
        return Rgb8::gray(c.v);
    }
    let s = c.s as f64 / 255.0;
    let h = (c.h as f64 * 2.0).rem_euclid(360.0) / 60.0;
    let chroma = v * s;
    let x = chroma * (1.0 - ((h % 2.0) - 1.0).abs());
    let m = v - chroma;
    let (r, g, b) = match h as u32 {
        0 => (chroma, x, 0.0),
        1 => (x, chroma, 0.0),
        2 => (0.0, chroma, x),
        3 => (0.0, x, chroma),
        4 => (x, 0.0, chroma),
        _ => (chroma, 0.0, x),
    };
    Rgb8::from_f64([r + m, g + m, b + m])
}

/// Axis-aligned pixel rectangle. `x`/`y` are the top-left column/row.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub width: u32,
    pub height: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, width: u32, height: u32) -> Self {
        Rect { x, y, width, height }
    }

    pub fn right(&self) -> u32 {
        self.x + self.width
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.height
    }

    pub fn contains(&self, col: u32, row: u32) -> bool {
        col >= self.x && col < self.right() && row >= self.y && row < self.bottom()
    }

    pub fn contains_rect(&self, other: &Rect) -> bool {
        other.x >= self.x
            && other.y >= self.y
            && other.right() <= self.right()
            && other.bottom() <= self.bottom()
    }

    pub fn intersects(&self, other: &Rect) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }

    /// Geometric center in pixel-center coordinates.
    pub fn center(&self) -> (f64, f64) {
        (
            self.x as f64 + (self.width as f64 - 1.0) / 2.0,
            self.y as f64 + (self.height as f64 - 1.0) / 2.0,
        )
    }

    pub fn translate(&self, dx: u32, dy: u32) -> Rect {
        Rect::new(self.x + dx, self.y + dy, self.width, self.height)
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.width > 0 && self.height > 0 && self.right() <= width && self.bottom() <= height
    }
}

/// Row-major 8-bit RGB image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb8>,
}

impl RasterImage {
    pub fn new(width: u32, height: u32, pixels: Vec<Rgb8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParams(format!(
                "image dimensions must be positive, got {width}x{height}"
            )));
        }
        if pixels.len() != width as usize * height as usize {
            return Err(Error::InvalidParams(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width as usize * height as usize,
                pixels.len()
            )));
        }
        Ok(RasterImage { width, height, pixels })
    }

    pub fn filled(width: u32, height: u32, color: Rgb8) -> Self {
        assert!(width > 0 && height > 0, "image dimensions must be positive");
        RasterImage {
            width,
            height,
            pixels: vec![color; width as usize * height as usize],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn pixels(&self) -> &[Rgb8] {
        &self.pixels
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    fn index(&self, col: u32, row: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    pub fn get(&self, col: u32, row: u32) -> Rgb8 {
        self.pixels[self.index(col, row)]
    }

    pub fn set(&mut self, col: u32, row: u32, c: Rgb8) {
        let i = self.index(col, row);
        self.pixels[i] = c;
    }

    /// Iterates `(col, row, pixel)` in row-major order.
    pub fn enumerate(&self) -> impl Iterator<Item = (u32, u32, Rgb8)> + '_ {
        let w = self.width;
        self.pixels
            .iter()
            .enumerate()
            .map(move |(i, &p)| ((i as u32) % w, (i as u32) / w, p))
    }

    pub fn map(&self, f: impl Fn(Rgb8) -> Rgb8) -> RasterImage {
        RasterImage {
            width: self.width,
            height: self.height,
            pixels: self.pixels.iter().map(|&p| f(p)).collect(),
        }
    }

    /// Copies the part of the image covered by `rect`, clipped to the bounds.
    pub fn crop(&self, rect: &Rect) -> Result<RasterImage> {
        let x1 = rect.right().min(self.width);
        let y1 = rect.bottom().min(self.height);
        if rect.x >= x1 || rect.y >= y1 {
            return Err(Error::InvalidParams(format!(
                "crop {rect:?} lies outside {}x{} image",
                self.width, self.height
            )));
        }
        let mut pixels = Vec::with_capacity(((x1 - rect.x) * (y1 - rect.y)) as usize);
        for row in rect.y..y1 {
            let start = self.index(rect.x, row);
            let end = self.index(x1 - 1, row) + 1;
            pixels.extend_from_slice(&self.pixels[start..end]);
        }
        RasterImage::new(x1 - rect.x, y1 - rect.y, pixels)
    }

    fn to_rgb_image(&self) -> RgbImage {
        let raw: Vec<u8> = self.pixels.iter().flat_map(|p| p.to_array()).collect();
        RgbImage::from_raw(self.width, self.height, raw).expect("buffer size matches dimensions")
    }

    /// Encodes as PNG into memory.
    pub fn to_png_bytes(&self) -> Vec<u8> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb_image()
            .write_to(&mut out, ImageFormat::Png)
            .expect("in-memory PNG encoding cannot fail");
        out.into_inner()
    }
}

/// Decodes a raster file; any alpha channel is composited over white.
pub fn load_image(path: impl AsRef<Path>) -> Result<RasterImage> {
    let path = path.as_ref();
    let reader = ImageReader::open(path)
        .map_err(|e| Error::io(path, e))?
        .with_guessed_format()
        .map_err(|e| Error::io(path, e))?;
    let decoded = reader.decode().map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        reason: e.to_string(),
    })?;
    let rgba = decoded.to_rgba8();
    let (width, height) = rgba.dimensions();
    let pixels = rgba
        .pixels()
        .map(|p| {
            let a = p[3] as u32;
            let over_white = |c: u8| ((c as u32 * a + 255 * (255 - a) + 127) / 255) as u8;
            Rgb8::new(over_white(p[0]), over_white(p[1]), over_white(p[2]))
        })
        .collect();
    RasterImage::new(width, height, pixels)
}

/// Writes a lossless PNG.
pub fn save_image(img: &RasterImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, img.to_png_bytes()).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn primary_hues() {
        assert_eq!(rgb_to_hsv(Rgb8::new(255, 0, 0)), Hsv::new(0, 255, 255));
        assert_eq!(rgb_to_hsv(Rgb8::new(0, 255, 0)).h, 60);
        assert_eq!(rgb_to_hsv(Rgb8::new(0, 0, 255)), Hsv::new(120, 255, 255));
    }

    #[test]
    fn gray_has_zero_saturation_and_hue() {
        assert_eq!(rgb_to_hsv(Rgb8::gray(128)), Hsv::new(0, 0, 128));
        assert_eq!(rgb_to_hsv(Rgb8::BLACK), Hsv::new(0, 0, 0));
    }

    #[test]
    fn muted_red_saturation() {
        // 255 * 140 / 200 = 178.5
        assert_eq!(rgb_to_hsv(Rgb8::new(200, 60, 60)), Hsv::new(0, 179, 200));
    }

    #[test]
    fn hsv_to_rgb_basics() {
        assert_eq!(hsv_to_rgb(Hsv::new(0, 255, 255)), Rgb8::new(255, 0, 0));
        for h in [0, 45, 90, 179] {
            assert_eq!(hsv_to_rgb(Hsv::new(h, 0, 255)), Rgb8::WHITE);
        }
    }

    #[test]
    fn hue_distance_wraps() {
        assert_eq!(hue_distance(2, 178), 4);
        assert_eq!(hue_distance(0, 90), 90);
        assert_eq!(hue_distance(60, 50), 10);
    }

    #[test]
    fn crop_copies_window() {
        let mut img = RasterImage::filled(4, 3, Rgb8::WHITE);
        img.set(2, 1, Rgb8::BLACK);
        let c = img.crop(&Rect::new(1, 1, 2, 2)).unwrap();
        assert_eq!((c.width(), c.height()), (2, 2));
        assert_eq!(c.get(1, 0), Rgb8::BLACK);
        assert!(img.crop(&Rect::new(4, 0, 1, 1)).is_err());
    }

    #[test]
    fn rejects_bad_dimensions() {
        assert!(RasterImage::new(0, 1, vec![]).is_err());
        assert!(RasterImage::new(2, 2, vec![Rgb8::WHITE; 3]).is_err());
    }

    // Hue is quantized to 2-degree steps, so the middle channel of a
    // chromatic color can move by up to (max - min) / 60 on a round trip.
    fn round_trip_bound(c: Rgb8) -> i32 {
        let max = c.r.max(c.g).max(c.b) as i32;
        let min = c.r.min(c.g).min(c.b) as i32;
        1 + (max - min + 59) / 60
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn round_trip_within_hue_quantization(r: u8, g: u8, b: u8) {
            let c = Rgb8::new(r, g, b);
            let back = hsv_to_rgb(rgb_to_hsv(c));
            let bound = round_trip_bound(c);
            for (x, y) in c.to_array().into_iter().zip(back.to_array()) {
                prop_assert!((x as i32 - y as i32).abs() <= bound, "{c:?} -> {back:?}");
            }
            // The brightest channel is carried exactly by V.
            prop_assert_eq!(c.r.max(c.g).max(c.b), back.r.max(back.g).max(back.b));
        }

        #[test]
        fn hsv_round_trip_is_stable(r: u8, g: u8, b: u8) {
            let hsv = rgb_to_hsv(Rgb8::new(r, g, b));
            let again = rgb_to_hsv(hsv_to_rgb(hsv));
            prop_assert!(hue_distance(hsv.h, again.h) <= 1 || hsv.s < 8);
            prop_assert!((hsv.s as i32 - again.s as i32).abs() <= 1);
            prop_assert_eq!(hsv.v, again.v);
        }

        #[test]
        fn gray_never_saturated(v: u8) {
            prop_assert_eq!(rgb_to_hsv(Rgb8::gray(v)).s, 0);
        }
    }
}
