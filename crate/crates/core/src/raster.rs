//! Pixel-level primitives shared by the simulator, the driver and the scorers.

use std::fmt;
use std::path::Path;

use image::RgbImage;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Largest possible Euclidean distance between two RGB colors, `255 * sqrt(3)`.
pub const MAX_COLOR_DISTANCE: f64 = 441.672_955_930_063_7;

/// An 8-bit RGB color. Serialized as `[r, g, b]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[u8; 3]", into = "[u8; 3]")]
pub struct Rgb {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl Rgb {
    pub const BLACK: Rgb = Rgb::new(0, 0, 0);
    pub const WHITE: Rgb = Rgb::new(255, 255, 255);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    /// Euclidean distance in RGB space.
    pub fn distance(self, other: Rgb) -> f64 {
        let dr = f64::from(self.r) - f64::from(other.r);
        let dg = f64::from(self.g) - f64::from(other.g);
        let db = f64::from(self.b) - f64::from(other.b);
        (dr * dr + dg * dg + db * db).sqrt()
    }

    /// Rec. 601 luma, 0..=255.
    pub fn luma(self) -> f64 {
        0.299 * f64::from(self.r) + 0.587 * f64::from(self.g) + 0.114 * f64::from(self.b)
    }

    pub fn to_hex(self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl From<[u8; 3]> for Rgb {
    fn from([r, g, b]: [u8; 3]) -> Self {
        Self { r, g, b }
    }
}

impl From<Rgb> for [u8; 3] {
    fn from(c: Rgb) -> Self {
        [c.r, c.g, c.b]
    }
}

impl fmt::Display for Rgb {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.r, self.g, self.b)
    }
}

/// Axis-aligned rectangle in pixels, origin top-left. Serialized as `[x, y, w, h]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "[i64; 4]", into = "[u32; 4]")]
pub struct Bounds {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid bounds [{x}, {y}, {w}, {h}]: origin must be non-negative and extent positive")]
pub struct InvalidBounds {
    pub x: i64,
    pub y: i64,
    pub w: i64,
    pub h: i64,
}

impl Bounds {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Result<Self, InvalidBounds> {
        Self::try_from([i64::from(x), i64::from(y), i64::from(w), i64::from(h)])
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn contains(&self, inner: &Bounds) -> bool {
        inner.x >= self.x
            && inner.y >= self.y
            && inner.right() <= self.right()
            && inner.bottom() <= self.bottom()
    }

    pub fn intersects(&self, other: &Bounds) -> bool {
        self.x < other.right()
            && other.x < self.right()
            && self.y < other.bottom()
            && other.y < self.bottom()
    }
}

impl TryFrom<[i64; 4]> for Bounds {
    type Error = InvalidBounds;

    fn try_from([x, y, w, h]: [i64; 4]) -> Result<Self, Self::Error> {
        let err = InvalidBounds { x, y, w, h };
        let fits = |v: i64| u32::try_from(v).ok();
        if w <= 0 || h <= 0 {
            return Err(err);
        }
        match (fits(x), fits(y), fits(w), fits(h)) {
            (Some(x), Some(y), Some(w), Some(h)) if x.checked_add(w).is_some() && y.checked_add(h).is_some() => {
                Ok(Self { x, y, w, h })
            }
            _ => Err(err),
        }
    }
}

impl From<Bounds> for [u32; 4] {
    fn from(b: Bounds) -> Self {
        [b.x, b.y, b.w, b.h]
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RasterError {
    #[error("image has zero extent")]
    Empty,
    #[error("image i/o: {0}")]
    Image(#[from] image::ImageError),
}

/// Row-major RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: u32,
    height: u32,
    pixels: Vec<Rgb>,
}

impl RasterImage {
    pub fn filled(width: u32, height: u32, color: Rgb) -> Self {
        Self {
            width,
            height,
            pixels: vec![color; (width as usize) * (height as usize)],
        }
    }

    pub fn from_pixels(width: u32, height: u32, pixels: Vec<Rgb>) -> Option<Self> {
        ((width as usize) * (height as usize) == pixels.len()).then_some(Self {
            width,
            height,
            pixels,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_empty(&self) -> bool {
        self.pixels.is_empty()
    }

    pub fn pixels(&self) -> &[Rgb] {
        &self.pixels
    }

    pub fn get(&self, x: u32, y: u32) -> Option<Rgb> {
        (x < self.width && y < self.height)
            .then(|| self.pixels[(y as usize) * (self.width as usize) + x as usize])
    }

    pub fn set(&mut self, x: u32, y: u32, color: Rgb) {
        if x < self.width && y < self.height {
            let w = self.width as usize;
            self.pixels[(y as usize) * w + x as usize] = color;
        }
    }

    /// Fills `rect` with `color`, clipped to the image. `rect` may start off-canvas.
    pub fn fill_rect(&mut self, x: i64, y: i64, w: u32, h: u32, color: Rgb) {
        let x0 = x.clamp(0, i64::from(self.width)) as u32;
        let y0 = y.clamp(0, i64::from(self.height)) as u32;
        let x1 = (x + i64::from(w)).clamp(0, i64::from(self.width)) as u32;
        let y1 = (y + i64::from(h)).clamp(0, i64::from(self.height)) as u32;
        let stride = self.width as usize;
        for row in y0..y1 {
            let start = row as usize * stride;
            self.pixels[start + x0 as usize..start + x1 as usize].fill(color);
        }
    }

    /// Copy of the region under `rect`, clipped. `None` when the clip is empty.
    pub fn crop(&self, rect: &Bounds) -> Option<RasterImage> {
        let x1 = rect.right().min(self.width);
        let y1 = rect.bottom().min(self.height);
        if rect.x >= x1 || rect.y >= y1 {
            return None;
        }
        let (w, h) = (x1 - rect.x, y1 - rect.y);
        let mut pixels = Vec::with_capacity((w as usize) * (h as usize));
        for row in rect.y..y1 {
            let start = row as usize * self.width as usize;
            pixels.extend_from_slice(&self.pixels[start + rect.x as usize..start + x1 as usize]);
        }
        Some(RasterImage {
            width: w,
            height: h,
            pixels,
        })
    }

    /// Draws `other` with its top-left corner at `(x, y)`, clipped.
    pub fn paste(&mut self, other: &RasterImage, x: u32, y: u32) {
        if x >= self.width || y >= self.height {
            return;
        }
        let cols = other.width.min(self.width - x) as usize;
        for row in 0..other.height.min(self.height - y) {
            let src = (row * other.width) as usize;
            let dst = ((y + row) * self.width + x) as usize;
            self.pixels[dst..dst + cols].copy_from_slice(&other.pixels[src..src + cols]);
        }
    }

    /// Nearest-neighbour resample to `width` x `height`; each target pixel
    /// takes the source pixel under its center.
    pub fn resize(&self, width: u32, height: u32) -> RasterImage {
        if width == self.width && height == self.height {
            return self.clone();
        }
        let map = |dst: u32, src_len: u32, dst_len: u32| {
            (((2 * u64::from(dst) + 1) * u64::from(src_len)) / (2 * u64::from(dst_len))) as u32
        };
        let xs: Vec<usize> = (0..width).map(|x| map(x, self.width, width) as usize).collect();
        let mut pixels = Vec::with_capacity((width * height) as usize);
        for y in 0..height {
            let row = (map(y, self.height, height) * self.width) as usize;
            pixels.extend(xs.iter().map(|&x| self.pixels[row + x]));
        }
        RasterImage {
            width,
            height,
            pixels,
        }
    }

    /// Per-channel mean over every pixel.
    pub fn mean_color(&self) -> [f64; 3] {
        if self.pixels.is_empty() {
            return [0.0; 3];
        }
        let mut sum = [0u64; 3];
        for p in &self.pixels {
            sum[0] += u64::from(p.r);
            sum[1] += u64::from(p.g);
            sum[2] += u64::from(p.b);
        }
        let n = self.pixels.len() as f64;
        [sum[0] as f64 / n, sum[1] as f64 / n, sum[2] as f64 / n]
    }

    /// Dominant color of the whole image, see [`dominant_color`].
    pub fn dominant_color(&self) -> Option<Rgb> {
        dominant_color(self.pixels.iter().copied())
    }

    /// SHA-256 over dimensions and pixel bytes; stable across runs.
    pub fn digest(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.width.to_le_bytes());
        hasher.update(self.height.to_le_bytes());
        for p in &self.pixels {
            hasher.update([p.r, p.g, p.b]);
        }
        hex::encode(hasher.finalize())
    }

    pub fn to_rgb_image(&self) -> RgbImage {
        let mut raw = Vec::with_capacity(self.pixels.len() * 3);
        for p in &self.pixels {
            raw.extend_from_slice(&[p.r, p.g, p.b]);
        }
        RgbImage::from_raw(self.width, self.height, raw).expect("pixel buffer matches dimensions")
    }

    pub fn from_rgb_image(img: &RgbImage) -> Self {
        let pixels = img.pixels().map(|p| Rgb::new(p[0], p[1], p[2])).collect();
        Self {
            width: img.width(),
            height: img.height(),
            pixels,
        }
    }

    pub fn load_png(path: impl AsRef<Path>) -> Result<Self, RasterError> {
        let img = image::open(path)?.into_rgb8();
        if img.width() == 0 || img.height() == 0 {
            return Err(RasterError::Empty);
        }
        Ok(Self::from_rgb_image(&img))
    }

    pub fn save_png(&self, path: impl AsRef<Path>) -> Result<(), RasterError> {
        self.to_rgb_image().save_with_format(path, image::ImageFormat::Png)?;
        Ok(())
    }

    pub fn encode_png(&self) -> Result<Vec<u8>, RasterError> {
        let mut out = std::io::Cursor::new(Vec::new());
        self.to_rgb_image().write_to(&mut out, image::ImageFormat::Png)?;
        Ok(out.into_inner())
    }
}

/// Most frequent color after quantizing each channel into 8 buckets; the
/// result is the mean of the pixels in the winning bucket. Ties go to the
/// lowest bucket index.
pub fn dominant_color(pixels: impl IntoIterator<Item = Rgb>) -> Option<Rgb> {
    let mut counts = [0u32; 512];
    let mut sums = [[0u64; 3]; 512];
    let mut any = false;
    for p in pixels {
        any = true;
        let bucket = ((p.r >> 5) as usize) << 6 | ((p.g >> 5) as usize) << 3 | (p.b >> 5) as usize;
        counts[bucket] += 1;
        sums[bucket][0] += u64::from(p.r);
        sums[bucket][1] += u64::from(p.g);
        sums[bucket][2] += u64::from(p.b);
    }
    if !any {
        return None;
    }
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    let n = u64::from(counts[best]);
    let avg = |s: u64| ((s as f64) / (n as f64)).round() as u8;
    Some(Rgb::new(avg(sums[best][0]), avg(sums[best][1]), avg(sums[best][2])))
}
