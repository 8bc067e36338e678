//! Deterministic top-down rasterization of layouts.
//!
//! Image x follows layout x and image y follows layout y, so y points down
//! on screen. Every object becomes a translucent rotated rectangle with an
//! opaque outline and a black label just below its center. All arithmetic
//! on pixel colors is integer, and PNG encoding uses a fixed filter and
//! compression level without ancillary chunks, so identical inputs give
//! identical bytes.

mod font;

use std::io::Cursor;

use thiserror::Error;

use crate::geometry::{Footprint, Point};
use crate::layout::{BevLayout, Room, Scene3D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RenderError {
    #[error("layout contains no objects")]
    EmptyLayout,
    #[error("canvas {width}x{height} exceeds the {max_pixels}-pixel cap")]
    CanvasTooLarge {
        width: u64,
        height: u64,
        max_pixels: u64,
    },
    #[error("object {0} has a degenerate footprint")]
    Degenerate(usize),
    #[error("png: {0}")]
    Png(String),
}

pub type Rgb = [u8; 3];

pub const BACKGROUND: Rgb = [255, 255, 255];
pub const TEXT_COLOR: Rgb = [0, 0, 0];
pub const BORDER_COLOR: Rgb = [128, 128, 128];
pub const AXIS_COLOR: Rgb = [96, 96, 96];

pub const PALETTE: [Rgb; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [245, 130, 48],
    [145, 30, 180],
    [70, 200, 200],
    [240, 50, 230],
    [150, 150, 20],
    [0, 128, 128],
    [170, 110, 40],
    [128, 0, 0],
    [0, 0, 128],
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterConfig {
    /// Image pixels per layout pixel.
    pub scale: u32,
    /// Fill opacity out of 255.
    pub fill_alpha: u8,
    pub max_pixels: u64,
    pub draw_axes: bool,
}

impl Default for RasterConfig {
    fn default() -> Self {
        Self {
            scale: 4,
            fill_alpha: 96,
            max_pixels: 4096 * 4096,
            draw_axes: true,
        }
    }
}

impl RasterConfig {
    fn outline_px(&self) -> f64 {
        (f64::from(self.scale) / 2.0).max(1.0)
    }

    fn text_scale(&self) -> u32 {
        (self.scale / 2).max(1)
    }
}

pub fn palette_color(index: usize) -> Rgb {
    PALETTE[index % PALETTE.len()]
}

fn blend(over: Rgb, under: Rgb, alpha: u8) -> Rgb {
    let a = u32::from(alpha);
    let mut out = [0u8; 3];
    for i in 0..3 {
        out[i] = ((u32::from(over[i]) * a + u32::from(under[i]) * (255 - a) + 127) / 255) as u8;
    }
    out
}

/// Color of object `index`'s interior where it covers bare background.
pub fn fill_color(index: usize, cfg: &RasterConfig) -> Rgb {
    blend(palette_color(index), BACKGROUND, cfg.fill_alpha)
}

struct Canvas {
    width: u32,
    height: u32,
    rgb: Vec<u8>,
}

impl Canvas {
    fn new(width: u32, height: u32) -> Self {
        let mut rgb = Vec::with_capacity(width as usize * height as usize * 3);
        for _ in 0..(width as usize * height as usize) {
            rgb.extend_from_slice(&BACKGROUND);
        }
        Self { width, height, rgb }
    }

    fn offset(&self, x: i64, y: i64) -> Option<usize> {
        (x >= 0 && y >= 0 && x < i64::from(self.width) && y < i64::from(self.height))
            .then(|| (y as usize * self.width as usize + x as usize) * 3)
    }

    fn get(&self, x: i64, y: i64) -> Option<Rgb> {
        self.offset(x, y)
            .map(|o| [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]])
    }

    fn set(&mut self, x: i64, y: i64, c: Rgb) {
        if let Some(o) = self.offset(x, y) {
            self.rgb[o..o + 3].copy_from_slice(&c);
        }
    }

    fn rect(&mut self, x0: i64, y0: i64, w: i64, h: i64, c: Rgb) {
        for y in y0..y0 + h {
            for x in x0..x0 + w {
                self.set(x, y, c);
            }
        }
    }

    fn text(&mut self, text: &str, x0: i64, y0: i64, scale: u32, c: Rgb) {
        let s = i64::from(scale);
        let advance = i64::from(font::GLYPH_WIDTH + 1) * s;
        for (i, ch) in text.chars().enumerate() {
            let gx = x0 + i as i64 * advance;
            for (row, bits) in font::glyph(ch).iter().enumerate() {
                for col in 0..font::GLYPH_WIDTH {
                    if bits & (0x10 >> col) != 0 {
                        self.rect(gx + i64::from(col) * s, y0 + row as i64 * s, s, s, c);
                    }
                }
            }
        }
    }

    fn text_width(text: &str, scale: u32) -> i64 {
        let n = text.chars().count() as i64;
        if n == 0 {
            0
        } else {
            n * i64::from(font::GLYPH_WIDTH + 1) * i64::from(scale) - i64::from(scale)
        }
    }

    fn border(&mut self) {
        let (w, h) = (i64::from(self.width), i64::from(self.height));
        self.rect(0, 0, w, 1, BORDER_COLOR);
        self.rect(0, h - 1, w, 1, BORDER_COLOR);
        self.rect(0, 0, 1, h, BORDER_COLOR);
        self.rect(w - 1, 0, 1, h, BORDER_COLOR);
    }

    /// Arrows from the origin along +x and +y, labelled.
    fn axes(&mut self, text_scale: u32) {
        let len = (i64::from(self.width.min(self.height)) / 6).clamp(8, 60);
        let (o, t) = (3i64, 2i64);
        self.rect(o, o, len, t, AXIS_COLOR);
        self.rect(o, o, t, len, AXIS_COLOR);
        for k in 0..5 {
            // arrowheads
            self.rect(o + len - k, o - k + 1, 1, t + 2 * k - 2 + 2, AXIS_COLOR);
            self.rect(o - k + 1, o + len - k, t + 2 * k - 2 + 2, 1, AXIS_COLOR);
        }
        let gh = i64::from(font::GLYPH_HEIGHT * text_scale);
        self.text("X", o + len + 4, o, text_scale, AXIS_COLOR);
        self.text("Y", o, o + len + 4, text_scale, AXIS_COLOR);
        let _ = gh;
    }

    fn object(&mut self, index: usize, f: &Footprint, label: &str, cfg: &RasterConfig) {
        let scale = f64::from(cfg.scale);
        let corners = f.corners();
        let min_x = corners.iter().map(|p| p.x).fold(f64::INFINITY, f64::min) * scale;
        let max_x = corners.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max) * scale;
        let min_y = corners.iter().map(|p| p.y).fold(f64::INFINITY, f64::min) * scale;
        let max_y = corners.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max) * scale;
        let x0 = (min_x.floor() as i64).max(0);
        let x1 = (max_x.ceil() as i64).min(i64::from(self.width));
        let y0 = (min_y.floor() as i64).max(0);
        let y1 = (max_y.ceil() as i64).min(i64::from(self.height));

        let (hl, hw) = f.half_extents();
        let (ax, ay) = f.axes();
        let c = f.center();
        let color = palette_color(index);
        let outline = cfg.outline_px();
        for py in y0..y1 {
            for px in x0..x1 {
                let p = Point::new((px as f64 + 0.5) / scale, (py as f64 + 0.5) / scale);
                let (dx, dy) = (p.x - c.x, p.y - c.y);
                let u = (dx * ax.x + dy * ax.y).abs();
                let v = (dx * ay.x + dy * ay.y).abs();
                if u > hl || v > hw {
                    continue;
                }
                let edge = (hl - u).min(hw - v) * scale;
                let under = self.get(px, py).unwrap_or(BACKGROUND);
                let out = if edge < outline {
                    color
                } else {
                    blend(color, under, cfg.fill_alpha)
                };
                self.set(px, py, out);
            }
        }

        let ts = cfg.text_scale();
        let cx = (c.x * scale).floor() as i64;
        let cy = (c.y * scale).floor() as i64;
        let tw = Self::text_width(label, ts);
        self.text(label, cx - tw / 2, cy + 2 * i64::from(ts), ts, TEXT_COLOR);
    }

    fn encode(&self) -> Result<Vec<u8>, RenderError> {
        let mut out = Vec::new();
        {
            let mut enc = png::Encoder::new(&mut out, self.width, self.height);
            enc.set_color(png::ColorType::Rgb);
            enc.set_depth(png::BitDepth::Eight);
            enc.set_compression(png::Compression::Balanced);
            enc.set_filter(png::Filter::Up);
            let mut writer = enc.write_header().map_err(|e| RenderError::Png(e.to_string()))?;
            writer
                .write_image_data(&self.rgb)
                .map_err(|e| RenderError::Png(e.to_string()))?;
            writer.finish().map_err(|e| RenderError::Png(e.to_string()))?;
        }
        Ok(out)
    }
}

/// Renders `layout` inside `room` to PNG bytes.
pub fn rasterize_bev(layout: &BevLayout, room: &Room, cfg: &RasterConfig) -> Result<Vec<u8>, RenderError> {
    if layout.is_empty() {
        return Err(RenderError::EmptyLayout);
    }
    let scale = u64::from(cfg.scale.max(1));
    let width = u64::from(room.max_length) * scale;
    let height = u64::from(room.max_width) * scale;
    if width * height > cfg.max_pixels {
        return Err(RenderError::CanvasTooLarge {
            width,
            height,
            max_pixels: cfg.max_pixels,
        });
    }
    let cfg = RasterConfig {
        scale: scale as u32,
        ..cfg.clone()
    };
    let mut canvas = Canvas::new(width as u32, height as u32);
    canvas.border();
    if cfg.draw_axes {
        canvas.axes(cfg.text_scale());
    }
    for (i, obj) in layout.objects.iter().enumerate() {
        let f = Footprint::from_bev(obj).map_err(|_| RenderError::Degenerate(i))?;
        canvas.object(i, &f, &obj.label, &cfg);
    }
    canvas.encode()
}

/// Renders the top-down projection of a lifted scene.
pub fn rasterize_scene(scene: &Scene3D, cfg: &RasterConfig) -> Result<Vec<u8>, RenderError> {
    rasterize_bev(&scene.bev(), &scene.room, cfg)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DecodedImage {
    pub width: u32,
    pub height: u32,
    pub rgb: Vec<u8>,
}

impl DecodedImage {
    pub fn pixel(&self, x: u32, y: u32) -> Rgb {
        let o = (y as usize * self.width as usize + x as usize) * 3;
        [self.rgb[o], self.rgb[o + 1], self.rgb[o + 2]]
    }
}

/// Decodes an 8-bit RGB PNG as produced by [`rasterize_bev`].
pub fn decode_png(bytes: &[u8]) -> Result<DecodedImage, RenderError> {
    let decoder = png::Decoder::new(Cursor::new(bytes));
    let mut reader = decoder.read_info().map_err(|e| RenderError::Png(e.to_string()))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| RenderError::Png("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| RenderError::Png(e.to_string()))?;
    if info.color_type != png::ColorType::Rgb || info.bit_depth != png::BitDepth::Eight {
        return Err(RenderError::Png("expected 8-bit RGB".into()));
    }
    buf.truncate(info.buffer_size());
    Ok(DecodedImage {
        width: info.width,
        height: info.height,
        rgb: buf,
    })
}
