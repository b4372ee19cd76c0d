//! A small software rasterizer: just enough to draw matplotlib-like charts.

use crate::raster::{RasterImage, Rect, Rgb8};

/// Glyph cell size for the built-in text face (5x7 glyph plus 1 px spacing).
pub const GLYPH_W: u32 = 5;
pub const GLYPH_H: u32 = 7;
pub const GLYPH_ADVANCE: u32 = GLYPH_W + 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TextDirection {
    Horizontal,
    /// Rotated 90 degrees counter-clockwise, reading bottom to top.
    Vertical,
}

/// Pixel size of a rendered string at the given scale.
pub fn text_extent(text: &str, scale: u32, dir: TextDirection) -> (u32, u32) {
    let n = text.chars().count().max(1) as u32;
    let along = (n * GLYPH_ADVANCE - 1) * scale;
    let across = GLYPH_H * scale;
    match dir {
        TextDirection::Horizontal => (along, across),
        TextDirection::Vertical => (across, along),
    }
}

// Stand-in glyphs: every character gets a fixed pseudo-random 5x7 bit
// pattern. Only the footprint and the gray tone of text matter downstream.
fn glyph_bits(c: char) -> u64 {
    let mut x = (c as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ 0xD1B5_4A32_D192_ED03;
    x ^= x >> 29;
    x = x.wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x ^= x >> 32;
    // Keep the top and bottom rows partially lit so every glyph spans its cell.
    x | 0b00100 | (0b00100 << 30)
}

pub struct Canvas {
    width: u32,
    height: u32,
    buf: Vec<[f32; 3]>,
    coverage: Vec<f32>,
}

impl Canvas {
    pub fn new(width: u32, height: u32, background: Rgb8) -> Self {
        let n = width as usize * height as usize;
        Canvas {
            width,
            height,
            buf: vec![to_f32(background); n],
            coverage: vec![0.0; n],
        }
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    fn idx(&self, col: u32, row: u32) -> usize {
        row as usize * self.width as usize + col as usize
    }

    pub fn blend(&mut self, col: i64, row: i64, color: Rgb8, alpha: f32) {
        if col < 0 || row < 0 || col >= self.width as i64 || row >= self.height as i64 || alpha <= 0.0 {
            return;
        }
        let a = alpha.min(1.0);
        let i = self.idx(col as u32, row as u32);
        let c = to_f32(color);
        let p = &mut self.buf[i];
        for ch in 0..3 {
            p[ch] = p[ch] * (1.0 - a) + c[ch] * a;
        }
    }

    pub fn fill_rect(&mut self, rect: Rect, color: Rgb8) {
        let x1 = rect.right().min(self.width);
        let y1 = rect.bottom().min(self.height);
        for row in rect.y..y1 {
            for col in rect.x..x1 {
                let i = self.idx(col, row);
                self.buf[i] = to_f32(color);
            }
        }
    }

    /// One-pixel outline just inside `rect`.
    pub fn outline_rect(&mut self, rect: Rect, color: Rgb8) {
        if rect.width == 0 || rect.height == 0 {
            return;
        }
        let (x0, y0) = (rect.x, rect.y);
        let (x1, y1) = (rect.right() - 1, rect.bottom() - 1);
        self.fill_rect(Rect::new(x0, y0, rect.width, 1), color);
        self.fill_rect(Rect::new(x0, y1, rect.width, 1), color);
        self.fill_rect(Rect::new(x0, y0, 1, rect.height), color);
        self.fill_rect(Rect::new(x1, y0, 1, rect.height), color);
    }

    pub fn fill_circle(&mut self, cx: f64, cy: f64, radius: f64, color: Rgb8, antialias: bool) {
        let r = radius + 1.0;
        let (c0, c1) = ((cx - r).floor() as i64, (cx + r).ceil() as i64);
        let (r0, r1) = ((cy - r).floor() as i64, (cy + r).ceil() as i64);
        for row in r0..=r1 {
            for col in c0..=c1 {
                let d = ((col as f64 - cx).powi(2) + (row as f64 - cy).powi(2)).sqrt();
                let a = edge_coverage(radius - d, antialias);
                self.blend(col, row, color, a);
            }
        }
    }

    /// Strokes a polyline of width `width`. `dash` alternates on/off lengths in
    /// pixels measured along the path; an empty pattern draws a solid line.
    pub fn stroke_polyline(
        &mut self,
        points: &[(f64, f64)],
        width: f64,
        color: Rgb8,
        dash: &[f64],
        antialias: bool,
    ) {
        if points.len() < 2 {
            return;
        }
        let half = width / 2.0;
        let period: f64 = dash.iter().sum();
        let mut touched = Vec::new();
        let mut arc = 0.0;
        for seg in points.windows(2) {
            let ((ax, ay), (bx, by)) = (seg[0], seg[1]);
            let (dx, dy) = (bx - ax, by - ay);
            let len2 = dx * dx + dy * dy;
            let len = len2.sqrt();
            let pad = half + 1.0;
            let c0 = (ax.min(bx) - pad).floor().max(0.0) as i64;
            let c1 = (ax.max(bx) + pad).ceil().min(self.width as f64 - 1.0) as i64;
            let r0 = (ay.min(by) - pad).floor().max(0.0) as i64;
            let r1 = (ay.max(by) + pad).ceil().min(self.height as f64 - 1.0) as i64;
            for row in r0..=r1 {
                for col in c0..=c1 {
                    let (px, py) = (col as f64, row as f64);
                    let t = if len2 == 0.0 {
                        0.0
                    } else {
                        (((px - ax) * dx + (py - ay) * dy) / len2).clamp(0.0, 1.0)
                    };
                    if period > 0.0 && !dash_on(dash, period, arc + t * len) {
                        continue;
                    }
                    let d = ((px - ax - t * dx).powi(2) + (py - ay - t * dy).powi(2)).sqrt();
                    let a = edge_coverage(half - d, antialias);
                    if a > 0.0 {
                        let i = self.idx(col as u32, row as u32);
                        if self.coverage[i] == 0.0 {
                            touched.push(i);
                        }
                        self.coverage[i] = self.coverage[i].max(a);
                    }
                }
            }
            arc += len;
        }
        // Max-coverage per stroke, blended once, so joints are not darkened.
        let c = to_f32(color);
        for i in touched {
            let a = std::mem::take(&mut self.coverage[i]);
            let p = &mut self.buf[i];
            for ch in 0..3 {
                p[ch] = p[ch] * (1.0 - a) + c[ch] * a;
            }
        }
    }

    /// Draws `text` with its top-left corner at `(x, y)`; returns the box it covers.
    pub fn draw_text(
        &mut self,
        x: u32,
        y: u32,
        text: &str,
        scale: u32,
        dir: TextDirection,
        color: Rgb8,
    ) -> Rect {
        let (w, h) = text_extent(text, scale, dir);
        let n = text.chars().count() as u32;
        for (k, ch) in text.chars().enumerate() {
            let bits = glyph_bits(ch);
            for gy in 0..GLYPH_H {
                for gx in 0..GLYPH_W {
                    if bits >> (gy * GLYPH_W + gx) & 1 == 0 {
                        continue;
                    }
                    // Glyph-space offsets along and across the baseline.
                    let along = (k as u32 * GLYPH_ADVANCE + gx) * scale;
                    let across = gy * scale;
                    for sy in 0..scale {
                        for sx in 0..scale {
                            let (col, row) = match dir {
                                TextDirection::Horizontal => (x + along + sx, y + across + sy),
                                TextDirection::Vertical => {
                                    let total = (n * GLYPH_ADVANCE - 1) * scale;
                                    (x + across + sy, y + total - 1 - along - sx)
                                }
                            };
                            self.blend(col as i64, row as i64, color, 1.0);
                        }
                    }
                }
            }
        }
        Rect::new(x, y, w, h)
    }

    pub fn add_noise(&mut self, sample: &mut impl FnMut() -> f64) {
        for p in &mut self.buf {
            for ch in p.iter_mut() {
                *ch += sample() as f32;
            }
        }
    }

    pub fn into_image(self) -> RasterImage {
        let pixels = self
            .buf
            .into_iter()
            .map(|p| Rgb8::from_f64([p[0] as f64, p[1] as f64, p[2] as f64]))
            .collect();
        RasterImage::new(self.width, self.height, pixels).expect("canvas dimensions are valid")
    }
}

fn to_f32(c: Rgb8) -> [f32; 3] {
    [c.r as f32, c.g as f32, c.b as f32]
}

/// Coverage of a pixel whose center lies `inside` pixels within an edge.
fn edge_coverage(inside: f64, antialias: bool) -> f32 {
    if antialias {
        (inside + 0.5).clamp(0.0, 1.0) as f32
    } else if inside >= 0.0 {
        1.0
    } else {
        0.0
    }
}

fn dash_on(pattern: &[f64], period: f64, s: f64) -> bool {
    let mut pos = s.rem_euclid(period);
    for (i, &len) in pattern.iter().enumerate() {
        if pos < len {
            return i % 2 == 0;
        }
        pos -= len;
    }
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solid_stroke_without_antialias_is_pure() {
        let mut c = Canvas::new(20, 20, Rgb8::WHITE);
        c.stroke_polyline(&[(2.0, 10.0), (17.0, 10.0)], 3.0, Rgb8::new(255, 0, 0), &[], false);
        let img = c.into_image();
        assert_eq!(img.get(10, 10), Rgb8::new(255, 0, 0));
        assert_eq!(img.get(10, 11), Rgb8::new(255, 0, 0));
        assert_eq!(img.get(10, 13), Rgb8::WHITE);
    }

    #[test]
    fn dashed_stroke_leaves_gaps() {
        let mut c = Canvas::new(60, 5, Rgb8::WHITE);
        c.stroke_polyline(&[(0.0, 2.0), (59.0, 2.0)], 2.0, Rgb8::BLACK, &[6.0, 4.0], false);
        let img = c.into_image();
        let lit = (0..60).filter(|&x| img.get(x, 2) == Rgb8::BLACK).count();
        assert!(lit > 30 && lit < 45, "lit {lit}");
    }

    #[test]
    fn text_box_matches_extent() {
        let mut c = Canvas::new(100, 40, Rgb8::WHITE);
        let r = c.draw_text(3, 4, "abc", 1, TextDirection::Horizontal, Rgb8::gray(60));
        assert_eq!(r, Rect::new(3, 4, 17, 7));
        let v = c.draw_text(80, 2, "abcd", 1, TextDirection::Vertical, Rgb8::gray(60));
        assert_eq!((v.width, v.height), (7, 23));
        let img = c.into_image();
        let inside = img.enumerate().filter(|&(x, y, p)| p != Rgb8::WHITE && !r.contains(x, y) && !v.contains(x, y));
        assert_eq!(inside.count(), 0);
    }

    #[test]
    fn antialiased_circle_has_soft_edge() {
        let mut c = Canvas::new(21, 21, Rgb8::WHITE);
        c.fill_circle(10.0, 10.0, 4.0, Rgb8::new(0, 0, 255), true);
        let img = c.into_image();
        assert_eq!(img.get(10, 10), Rgb8::new(0, 0, 255));
        let edge = img.get(13, 13);
        assert!(edge != Rgb8::WHITE && edge != Rgb8::new(0, 0, 255));
    }
}
