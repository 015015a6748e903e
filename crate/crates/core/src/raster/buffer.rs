//! Raster containers: RGB images, binary masks, coverage layers and
//! rectangles.

use serde::{Deserialize, Serialize};

use super::RasterError;

/// 8-bit RGB image, row-major, 3 bytes per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ImageBuffer {
    width: u32,
    height: u32,
    data: Vec<u8>,
}

impl ImageBuffer {
    pub fn new(width: u32, height: u32, fill: [u8; 3]) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        let data = fill.iter().copied().cycle().take(width as usize * height as usize * 3).collect();
        Ok(Self { width, height, data })
    }

    pub fn from_raw(width: u32, height: u32, data: Vec<u8>) -> Result<Self, RasterError> {
        if width == 0 || height == 0 {
            return Err(RasterError::EmptyImage);
        }
        if data.len() != width as usize * height as usize * 3 {
            return Err(RasterError::BadDimensions);
        }
        Ok(Self { width, height, data })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    pub fn as_raw(&self) -> &[u8] {
        &self.data
    }

    pub fn into_raw(self) -> Vec<u8> {
        self.data
    }

    pub fn bounds(&self) -> Rect {
        Rect::new(0, 0, self.width, self.height)
    }

    #[inline]
    fn offset(&self, x: u32, y: u32) -> usize {
        (y as usize * self.width as usize + x as usize) * 3
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> [u8; 3] {
        let o = self.offset(x, y);
        [self.data[o], self.data[o + 1], self.data[o + 2]]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, px: [u8; 3]) {
        let o = self.offset(x, y);
        self.data[o..o + 3].copy_from_slice(&px);
    }

    /// Pixel at signed coordinates, clamped to the nearest edge.
    #[inline]
    pub fn get_clamped(&self, x: i64, y: i64) -> [u8; 3] {
        let cx = x.clamp(0, self.width as i64 - 1) as u32;
        let cy = y.clamp(0, self.height as i64 - 1) as u32;
        self.get(cx, cy)
    }

    /// Bilinear sample at continuous pixel-centre coordinates, clamped at
    /// the edges.
    pub fn sample_bilinear(&self, fx: f64, fy: f64) -> [f64; 3] {
        let x0 = fx.floor();
        let y0 = fy.floor();
        let tx = fx - x0;
        let ty = fy - y0;
        let (x0, y0) = (x0 as i64, y0 as i64);
        let p00 = self.get_clamped(x0, y0);
        let p10 = self.get_clamped(x0 + 1, y0);
        let p01 = self.get_clamped(x0, y0 + 1);
        let p11 = self.get_clamped(x0 + 1, y0 + 1);
        let mut out = [0.0; 3];
        for c in 0..3 {
            let top = p00[c] as f64 * (1.0 - tx) + p10[c] as f64 * tx;
            let bot = p01[c] as f64 * (1.0 - tx) + p11[c] as f64 * tx;
            out[c] = top * (1.0 - ty) + bot * ty;
        }
        out
    }

    /// Copies out the pixels of `r` (which must lie within the image).
    pub fn crop(&self, r: Rect) -> Result<ImageBuffer, RasterError> {
        if r.is_empty() {
            return Err(RasterError::DegenerateRegion);
        }
        if !self.bounds().contains_rect(&r) {
            return Err(RasterError::OutOfBounds(r));
        }
        let mut data = Vec::with_capacity(r.area() * 3);
        for y in r.y..r.bottom() {
            let o = self.offset(r.x, y);
            data.extend_from_slice(&self.data[o..o + r.w as usize * 3]);
        }
        ImageBuffer::from_raw(r.w, r.h, data)
    }

    /// Mean Rec.601 luma over `r`.
    pub fn mean_luma(&self, r: Rect) -> f64 {
        let r = r.intersect(&self.bounds());
        if r.is_empty() {
            return 0.0;
        }
        let mut s = 0.0;
        for (x, y) in r.pixels() {
            s += luma(self.get(x, y));
        }
        s / r.area() as f64
    }
}

#[inline]
pub fn luma(p: [u8; 3]) -> f64 {
    0.299 * p[0] as f64 + 0.587 * p[1] as f64 + 0.114 * p[2] as f64
}

#[inline]
pub fn clamp_u8(v: f64) -> u8 {
    v.round().clamp(0.0, 255.0) as u8
}

/// Axis-aligned rectangle in pixel coordinates.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    /// Builds the intersection of a signed rectangle with `[0,width)x[0,height)`.
    pub fn clipped(x: i64, y: i64, w: i64, h: i64, width: u32, height: u32) -> Rect {
        let x0 = x.clamp(0, width as i64);
        let y0 = y.clamp(0, height as i64);
        let x1 = (x + w).clamp(0, width as i64);
        let y1 = (y + h).clamp(0, height as i64);
        Rect::new(x0 as u32, y0 as u32, (x1 - x0).max(0) as u32, (y1 - y0).max(0) as u32)
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> usize {
        self.w as usize * self.h as usize
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn contains(&self, x: u32, y: u32) -> bool {
        x >= self.x && x < self.right() && y >= self.y && y < self.bottom()
    }

    pub fn contains_rect(&self, o: &Rect) -> bool {
        o.x >= self.x && o.y >= self.y && o.right() <= self.right() && o.bottom() <= self.bottom()
    }

    pub fn intersect(&self, o: &Rect) -> Rect {
        let x0 = self.x.max(o.x);
        let y0 = self.y.max(o.y);
        let x1 = self.right().min(o.right());
        let y1 = self.bottom().min(o.bottom());
        if x1 <= x0 || y1 <= y0 {
            Rect::new(x0, y0, 0, 0)
        } else {
            Rect::new(x0, y0, x1 - x0, y1 - y0)
        }
    }

    pub fn overlaps(&self, o: &Rect) -> bool {
        !self.intersect(o).is_empty()
    }

    /// Grows by `r` on every side, clipped to `width x height`.
    pub fn expand(&self, r: u32, width: u32, height: u32) -> Rect {
        Rect::clipped(
            self.x as i64 - r as i64,
            self.y as i64 - r as i64,
            self.w as i64 + 2 * r as i64,
            self.h as i64 + 2 * r as i64,
            width,
            height,
        )
    }

    pub fn union(&self, o: &Rect) -> Rect {
        if self.is_empty() {
            return *o;
        }
        if o.is_empty() {
            return *self;
        }
        let x0 = self.x.min(o.x);
        let y0 = self.y.min(o.y);
        Rect::new(x0, y0, self.right().max(o.right()) - x0, self.bottom().max(o.bottom()) - y0)
    }

    pub fn center(&self) -> (f64, f64) {
        (self.x as f64 + self.w as f64 / 2.0, self.y as f64 + self.h as f64 / 2.0)
    }

    /// Row-major iterator over the pixel coordinates inside.
    pub fn pixels(&self) -> impl Iterator<Item = (u32, u32)> {
        let r = *self;
        (r.y..r.bottom()).flat_map(move |y| (r.x..r.right()).map(move |x| (x, y)))
    }
}

/// Binary per-pixel mask.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PixelMask {
    width: u32,
    height: u32,
    bits: Vec<bool>,
}

impl PixelMask {
    pub fn new(width: u32, height: u32) -> Self {
        Self { width, height, bits: vec![false; width as usize * height as usize] }
    }

    pub fn from_bits(width: u32, height: u32, bits: Vec<bool>) -> Result<Self, RasterError> {
        if bits.len() != width as usize * height as usize {
            return Err(RasterError::BadDimensions);
        }
        Ok(Self { width, height, bits })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn dims(&self) -> (u32, u32) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: u32, y: u32) -> bool {
        self.bits[y as usize * self.width as usize + x as usize]
    }

    #[inline]
    pub fn set(&mut self, x: u32, y: u32, v: bool) {
        self.bits[y as usize * self.width as usize + x as usize] = v;
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        self.count() == 0
    }
}

/// Region of interest: a rectangle plus an optional coverage shape
/// (0..=255 per pixel, `w*h` entries, row-major within the rectangle).
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegionGeometry {
    pub rect: Rect,
    pub shape: Option<Vec<u8>>,
}

impl RegionGeometry {
    pub fn rect(rect: Rect) -> Self {
        Self { rect, shape: None }
    }

    pub fn with_shape(rect: Rect, shape: Vec<u8>) -> Result<Self, RasterError> {
        if shape.len() != rect.area() {
            return Err(RasterError::BadDimensions);
        }
        Ok(Self { rect, shape: Some(shape) })
    }

    /// Coverage at image coordinates; zero outside the rectangle, full
    /// inside when there is no shape.
    pub fn coverage(&self, x: u32, y: u32) -> u8 {
        if !self.rect.contains(x, y) {
            return 0;
        }
        match &self.shape {
            None => 255,
            Some(s) => s[(y - self.rect.y) as usize * self.rect.w as usize + (x - self.rect.x) as usize],
        }
    }

    pub fn validate_within(&self, img: &ImageBuffer) -> Result<(), RasterError> {
        if self.rect.is_empty() {
            return Err(RasterError::DegenerateRegion);
        }
        if !img.bounds().contains_rect(&self.rect) {
            return Err(RasterError::OutOfBounds(self.rect));
        }
        if let Some(s) = &self.shape {
            if s.len() != self.rect.area() {
                return Err(RasterError::BadDimensions);
            }
        }
        Ok(())
    }
}

/// An RGB patch with per-pixel coverage, as produced by shape extraction,
/// text rendering and geometric transforms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layer {
    pub image: ImageBuffer,
    pub alpha: Vec<u8>,
}

impl Layer {
    pub fn opaque(image: ImageBuffer) -> Self {
        let n = image.width() as usize * image.height() as usize;
        Self { image, alpha: vec![255; n] }
    }

    pub fn new(image: ImageBuffer, alpha: Vec<u8>) -> Result<Self, RasterError> {
        if alpha.len() != image.width() as usize * image.height() as usize {
            return Err(RasterError::BadDimensions);
        }
        Ok(Self { image, alpha })
    }

    pub fn width(&self) -> u32 {
        self.image.width()
    }

    pub fn height(&self) -> u32 {
        self.image.height()
    }

    #[inline]
    pub fn alpha_at(&self, x: u32, y: u32) -> u8 {
        self.alpha[y as usize * self.image.width() as usize + x as usize]
    }

    /// Bounding box (in layer coordinates) of pixels with nonzero coverage.
    pub fn coverage_bounds(&self) -> Option<Rect> {
        let (w, h) = self.image.dims();
        let mut r: Option<Rect> = None;
        for y in 0..h {
            for x in 0..w {
                if self.alpha_at(x, y) > 0 {
                    let p = Rect::new(x, y, 1, 1);
                    r = Some(r.map_or(p, |r| r.union(&p)));
                }
            }
        }
        r
    }
}
