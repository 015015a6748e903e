//! Geometric transforms and layer compositing.

use super::{clamp_u8, ImageBuffer, Layer, RasterError, Rect, Scale};

/// Scales then rotates `patch` about its centre. The result is a layer
/// whose alpha marks where the transformed patch lands; its bounds grow to
/// contain the rotated patch. Scale 1 with rotation 0 is an exact copy.
pub fn transform_region(patch: &ImageBuffer, scale: Scale, rotation_deg: f64) -> Result<Layer, RasterError> {
    transform_layer(&Layer::opaque(patch.clone()), scale, rotation_deg)
}

pub fn transform_layer(layer: &Layer, scale: Scale, rotation_deg: f64) -> Result<Layer, RasterError> {
    let (w, h) = layer.image.dims();
    let s = match scale {
        Scale::Factor(f) => f,
        Scale::AdaptiveTo { w: tw, h: th } => (tw as f64 / w as f64).min(th as f64 / h as f64),
    };
    if !(s.is_finite() && s > 0.0) {
        return Err(RasterError::BadParameter(format!("scale {s} must be positive")));
    }
    if s == 1.0 && rotation_deg == 0.0 {
        return Ok(layer.clone());
    }
    let sw = (w as f64 * s).round().max(1.0);
    let sh = (h as f64 * s).round().max(1.0);
    // Per-axis factors so the scaled size is an exact integer.
    let (fx, fy) = (sw / w as f64, sh / h as f64);
    let (sin, cos) = rotation_deg.to_radians().sin_cos();
    let ow = (sw * cos.abs() + sh * sin.abs() - 1e-9).ceil().max(1.0) as u32;
    let oh = (sw * sin.abs() + sh * cos.abs() - 1e-9).ceil().max(1.0) as u32;
    let (ocx, ocy) = (ow as f64 / 2.0, oh as f64 / 2.0);
    let (icx, icy) = (w as f64 / 2.0, h as f64 / 2.0);

    let mut data = Vec::with_capacity(ow as usize * oh as usize * 3);
    let mut alpha = Vec::with_capacity(ow as usize * oh as usize);
    for oy in 0..oh {
        for ox in 0..ow {
            let dx = ox as f64 + 0.5 - ocx;
            let dy = oy as f64 + 0.5 - ocy;
            // Inverse rotation, then inverse scale, into source pixel space.
            let rx = dx * cos + dy * sin;
            let ry = -dx * sin + dy * cos;
            let sx = rx / fx + icx - 0.5;
            let sy = ry / fy + icy - 0.5;
            let (px, a) = sample_premultiplied(layer, sx, sy);
            data.extend_from_slice(&px);
            alpha.push(a);
        }
    }
    Layer::new(ImageBuffer::from_raw(ow, oh, data)?, alpha)
}

/// Bilinear sample of a layer; samples outside the layer are transparent.
fn sample_premultiplied(layer: &Layer, x: f64, y: f64) -> ([u8; 3], u8) {
    let (w, h) = (layer.width() as i64, layer.height() as i64);
    let x0 = x.floor();
    let y0 = y.floor();
    let (tx, ty) = (x - x0, y - y0);
    let (x0, y0) = (x0 as i64, y0 as i64);
    let mut acc = [0.0f64; 3];
    let mut a = 0.0f64;
    for (dx, dy, wt) in [(0, 0, (1.0 - tx) * (1.0 - ty)), (1, 0, tx * (1.0 - ty)), (0, 1, (1.0 - tx) * ty), (1, 1, tx * ty)] {
        let (sx, sy) = (x0 + dx, y0 + dy);
        if wt == 0.0 || sx < 0 || sy < 0 || sx >= w || sy >= h {
            continue;
        }
        let al = layer.alpha_at(sx as u32, sy as u32) as f64 / 255.0;
        let p = layer.image.get(sx as u32, sy as u32);
        for c in 0..3 {
            acc[c] += wt * al * p[c] as f64;
        }
        a += wt * al;
    }
    if a <= 1e-12 {
        return ([0; 3], 0);
    }
    ([clamp_u8(acc[0] / a), clamp_u8(acc[1] / a), clamp_u8(acc[2] / a)], clamp_u8(a * 255.0))
}

/// Source-over composite of `patch` at `at` (top-left, may be negative).
/// With a shape, coverage `a` blends as `(dst (255-a) + src a + 127) / 255`.
/// Returns the new image and the clipped rectangle written to.
pub fn composite_paste(
    dst: &ImageBuffer,
    patch: &ImageBuffer,
    shape: Option<&[u8]>,
    at: (i64, i64),
) -> Result<(ImageBuffer, Rect), RasterError> {
    let (pw, ph) = patch.dims();
    if let Some(s) = shape {
        if s.len() != pw as usize * ph as usize {
            return Err(RasterError::BadDimensions);
        }
    }
    let clip = Rect::clipped(at.0, at.1, pw as i64, ph as i64, dst.width(), dst.height());
    if clip.is_empty() {
        return Err(RasterError::OutsideCanvas);
    }
    let mut out = dst.clone();
    for (x, y) in clip.pixels() {
        let px = (x as i64 - at.0) as u32;
        let py = (y as i64 - at.1) as u32;
        let a = shape.map_or(255u32, |s| s[(py * pw + px) as usize] as u32);
        if a == 0 {
            continue;
        }
        let src = patch.get(px, py);
        if a == 255 {
            out.set(x, y, src);
            continue;
        }
        let d = dst.get(x, y);
        let mut o = [0u8; 3];
        for c in 0..3 {
            o[c] = ((d[c] as u32 * (255 - a) + src[c] as u32 * a + 127) / 255) as u8;
        }
        out.set(x, y, o);
    }
    Ok((out, clip))
}

pub fn composite_layer(dst: &ImageBuffer, layer: &Layer, at: (i64, i64)) -> Result<(ImageBuffer, Rect), RasterError> {
    composite_paste(dst, &layer.image, Some(&layer.alpha), at)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::derive_stream;

    fn textured(w: u32, h: u32) -> ImageBuffer {
        let mut rng = derive_stream(4, "tr");
        let data = (0..w * h * 3).map(|_| rng.range_i64(0, 255) as u8).collect();
        ImageBuffer::from_raw(w, h, data).unwrap()
    }

    #[test]
    fn identity_transform_is_exact() {
        let p = textured(9, 7);
        let out = transform_region(&p, Scale::Factor(1.0), 0.0).unwrap();
        assert_eq!(out.image, p);
        assert!(out.alpha.iter().all(|a| *a == 255));
    }

    #[test]
    fn adaptive_scale_uses_min_ratio() {
        let p = textured(10, 20);
        let out = transform_region(&p, Scale::AdaptiveTo { w: 30, h: 40 }, 0.0).unwrap();
        assert_eq!(out.image.dims(), (20, 40));
    }

    #[test]
    fn rotation_grows_bounds() {
        let p = textured(20, 10);
        let out = transform_region(&p, Scale::Factor(1.0), 5.0).unwrap();
        assert!(out.width() > 20 && out.height() > 10);
    }

    #[test]
    fn rotation_round_trip_is_close_on_interior() {
        // Smooth content so bilinear resampling error stays small.
        let mut p = ImageBuffer::new(40, 30, [0; 3]).unwrap();
        for (x, y) in p.bounds().pixels() {
            p.set(x, y, [(x * 2 + 40) as u8, (y * 3 + 30) as u8, (x + y + 20) as u8]);
        }
        let a = transform_region(&p, Scale::Factor(1.0), 5.0).unwrap();
        let b = transform_layer(&a, Scale::Factor(1.0), -5.0).unwrap();
        // Centres coincide; the offset may be a half pixel.
        let ox = b.width() as f64 / 2.0 - 20.0;
        let oy = b.height() as f64 / 2.0 - 15.0;
        for y in 6..24 {
            for x in 6..34 {
                let u = p.get(x, y);
                let v = b.image.sample_bilinear(x as f64 + ox, y as f64 + oy);
                for c in 0..3 {
                    assert!((u[c] as f64 - v[c]).abs() <= 2.0, "({x},{y}) {u:?} {v:?}");
                }
            }
        }
    }

    #[test]
    fn bad_scale_errors() {
        assert!(transform_region(&textured(3, 3), Scale::Factor(0.0), 0.0).is_err());
    }

    #[test]
    fn opaque_paste_replaces_rectangle() {
        let dst = ImageBuffer::new(10, 10, [255; 3]).unwrap();
        let patch = textured(4, 3);
        let (out, r) = composite_paste(&dst, &patch, None, (2, 5)).unwrap();
        assert_eq!(r, Rect::new(2, 5, 4, 3));
        assert_eq!(out.crop(r).unwrap(), patch);
        assert_eq!(out.get(0, 0), [255; 3]);
    }

    #[test]
    fn empty_mask_changes_nothing() {
        let dst = textured(8, 8);
        let patch = ImageBuffer::new(4, 4, [0; 3]).unwrap();
        let (out, _) = composite_paste(&dst, &patch, Some(&[0; 16]), (1, 1)).unwrap();
        assert_eq!(out, dst);
    }

    #[test]
    fn half_coverage_blends_linearly() {
        let dst = ImageBuffer::new(2, 2, [255; 3]).unwrap();
        let patch = ImageBuffer::new(1, 1, [0; 3]).unwrap();
        let (out, _) = composite_paste(&dst, &patch, Some(&[128]), (0, 0)).unwrap();
        for v in out.get(0, 0) {
            assert!((v as i32 - 128).abs() <= 1);
        }
    }

    #[test]
    fn paste_is_clipped_and_fully_outside_errors() {
        let dst = ImageBuffer::new(6, 6, [0; 3]).unwrap();
        let patch = ImageBuffer::new(4, 4, [9; 3]).unwrap();
        let (_, r) = composite_paste(&dst, &patch, None, (-2, 4)).unwrap();
        assert_eq!(r, Rect::new(0, 4, 2, 2));
        assert_eq!(composite_paste(&dst, &patch, None, (6, 0)).unwrap_err(), RasterError::OutsideCanvas);
    }
}
