//! Layer effects drawn around a shape: stroke, drop shadow, outer glow,
//! and additive noise inside it.
//!
//! All effects work on the shape coverage `A` in a canvas that extends the
//! region by [`effect_reach`] pixels. Stroke bands come from disc dilation
//! and erosion of `A`. Shadow and glow are `A` (offset for the shadow),
//! dilated by the spread part, blurred by the remaining size with a
//! Gaussian of sigma `k/2` truncated at `k`, and drawn only where the layer
//! does not cover (`1 - A`). Noise dithers their alpha by `1 - n u`,
//! `u ~ U[0,1)`.

use super::filter::noise_draw;
use super::{clamp_u8, BlendMode, EffectSpec, ImageBuffer, RasterError, Rect, RegionGeometry, StrokePosition};
use crate::sampler::RngStream;

/// Farthest distance (L-infinity, px) an effect can reach outside its region.
pub fn effect_reach(spec: &EffectSpec) -> u32 {
    match spec {
        EffectSpec::Stroke { size, position, .. } => match position {
            StrokePosition::Inside => 0,
            StrokePosition::Center => size.div_ceil(2),
            StrokePosition::Outside => *size,
        },
        EffectSpec::DropShadow { distance, size, .. } => distance + size,
        EffectSpec::OuterGlow { spread, .. } => *spread,
        EffectSpec::Noise { .. } => 0,
    }
}

struct Plane {
    w: usize,
    h: usize,
    v: Vec<f32>,
}

impl Plane {
    fn at(&self, x: i64, y: i64) -> f32 {
        if x < 0 || y < 0 || x >= self.w as i64 || y >= self.h as i64 {
            0.0
        } else {
            self.v[y as usize * self.w + x as usize]
        }
    }

    fn map2(&self, o: &Plane, f: impl Fn(f32, f32) -> f32) -> Plane {
        Plane { w: self.w, h: self.h, v: self.v.iter().zip(&o.v).map(|(a, b)| f(*a, *b)).collect() }
    }

    /// Max over a disc of radius `r`.
    fn dilate(&self, r: u32) -> Plane {
        if r == 0 {
            return Plane { w: self.w, h: self.h, v: self.v.clone() };
        }
        let r = r as i64;
        let offsets: Vec<(i64, i64)> =
            (-r..=r).flat_map(|dy| (-r..=r).map(move |dx| (dx, dy))).filter(|(dx, dy)| dx * dx + dy * dy <= r * r).collect();
        let mut v = vec![0f32; self.w * self.h];
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                let mut m = 0f32;
                for (dx, dy) in &offsets {
                    m = m.max(self.at(x + dx, y + dy));
                    if m >= 1.0 {
                        break;
                    }
                }
                v[y as usize * self.w + x as usize] = m;
            }
        }
        Plane { w: self.w, h: self.h, v }
    }

    fn erode(&self, r: u32) -> Plane {
        let inv = Plane { w: self.w, h: self.h, v: self.v.iter().map(|a| 1.0 - a).collect() };
        let d = inv.dilate(r);
        Plane { w: self.w, h: self.h, v: d.v.iter().map(|a| 1.0 - a).collect() }
    }

    /// Separable Gaussian, sigma `k/2`, support `[-k, k]`, zero outside.
    fn blur(&self, k: u32) -> Plane {
        if k == 0 {
            return Plane { w: self.w, h: self.h, v: self.v.clone() };
        }
        let sigma = k as f32 / 2.0;
        let mut kern: Vec<f32> = (-(k as i64)..=k as i64).map(|i| (-(i * i) as f32 / (2.0 * sigma * sigma)).exp()).collect();
        let s: f32 = kern.iter().sum();
        kern.iter_mut().for_each(|v| *v /= s);
        let k = k as i64;
        let mut tmp = vec![0f32; self.w * self.h];
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                tmp[y as usize * self.w + x as usize] = (-k..=k).map(|i| kern[(i + k) as usize] * self.at(x + i, y)).sum();
            }
        }
        let t = Plane { w: self.w, h: self.h, v: tmp };
        let mut v = vec![0f32; self.w * self.h];
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                v[y as usize * self.w + x as usize] = (-k..=k).map(|i| kern[(i + k) as usize] * t.at(x, y + i)).sum();
            }
        }
        Plane { w: self.w, h: self.h, v }
    }

    fn shifted(&self, dx: i64, dy: i64) -> Plane {
        let mut v = vec![0f32; self.w * self.h];
        for y in 0..self.h as i64 {
            for x in 0..self.w as i64 {
                v[y as usize * self.w + x as usize] = self.at(x - dx, y - dy);
            }
        }
        Plane { w: self.w, h: self.h, v }
    }
}

fn blend(d: [u8; 3], c: [u8; 3], mode: BlendMode, a: f32) -> [u8; 3] {
    let mut o = [0u8; 3];
    for i in 0..3 {
        let (dv, cv) = (d[i] as f64, c[i] as f64);
        let t = match mode {
            BlendMode::Normal => cv,
            BlendMode::Multiply => dv * cv / 255.0,
            BlendMode::Darken => dv.min(cv),
        };
        o[i] = clamp_u8(dv + (t - dv) * a as f64);
    }
    o
}

fn percent(v: f64, what: &str) -> Result<f32, RasterError> {
    if !(0.0..=100.0).contains(&v) {
        return Err(RasterError::BadParameter(format!("{what} {v} outside [0,100]")));
    }
    Ok((v / 100.0) as f32)
}

/// Paints `alpha` (canvas coordinates) in `color` over `img`; returns the
/// bounding box of painted pixels, or `None` if nothing was painted.
fn paint(out: &mut ImageBuffer, canvas: Rect, alpha: &Plane, color: [u8; 3], mode: BlendMode) -> Option<Rect> {
    let mut bb: Option<Rect> = None;
    for (i, (x, y)) in canvas.pixels().enumerate() {
        let a = alpha.v[i];
        if a <= 0.0 {
            continue;
        }
        let d = out.get(x, y);
        let o = blend(d, color, mode, a.min(1.0));
        if o != d {
            out.set(x, y, o);
        }
        let p = Rect::new(x, y, 1, 1);
        bb = Some(bb.map_or(p, |r| r.union(&p)));
    }
    bb
}

/// Applies `spec` around `region`. Returns the new image and the rectangle
/// the effect may have painted (the region united with the painted area).
pub fn apply_effect(
    img: &ImageBuffer,
    region: &RegionGeometry,
    spec: &EffectSpec,
    rng: &mut RngStream,
) -> Result<(ImageBuffer, Rect), RasterError> {
    region.validate_within(img)?;
    if let EffectSpec::Noise { amount, distribution, monochromatic } = spec {
        let amp = percent(*amount, "noise amount")? as f64 * 128.0;
        let mut out = img.clone();
        for (x, y) in region.rect.pixels() {
            let cov = region.coverage(x, y) as f64 / 255.0;
            let p = img.get(x, y);
            let o = if *monochromatic {
                let lo = -(p.iter().min().copied().unwrap_or(0) as f64);
                let hi = 255.0 - p.iter().max().copied().unwrap_or(255) as f64;
                let d = (noise_draw(rng, amp, *distribution) * cov).round().clamp(lo, hi);
                p.map(|v| (v as f64 + d) as u8)
            } else {
                let mut o = p;
                for v in o.iter_mut() {
                    *v = clamp_u8(*v as f64 + noise_draw(rng, amp, *distribution) * cov);
                }
                o
            };
            out.set(x, y, o);
        }
        return Ok((out, region.rect));
    }
    let shape = region.shape.as_ref().ok_or(RasterError::MissingShape)?;
    let (iw, ih) = img.dims();
    let r = region.rect;
    let canvas = r.expand(effect_reach(spec), iw, ih);
    let (cw, ch) = (canvas.w as usize, canvas.h as usize);
    let mut a = Plane { w: cw, h: ch, v: vec![0.0; cw * ch] };
    for (i, s) in shape.iter().enumerate() {
        let x = (r.x - canvas.x) as usize + i % r.w as usize;
        let y = (r.y - canvas.y) as usize + i / r.w as usize;
        a.v[y * cw + x] = *s as f32 / 255.0;
    }
    let mut out = img.clone();
    let painted = match spec {
        EffectSpec::Stroke { size, position, blend: mode, opacity, color } => {
            let op = percent(*opacity, "stroke opacity")?;
            let band = match position {
                StrokePosition::Outside => a.dilate(*size).map2(&a, |d, a| d - a),
                StrokePosition::Inside => a.map2(&a.erode(*size), |a, e| a - e),
                StrokePosition::Center => a.dilate(size.div_ceil(2)).map2(&a.erode(size / 2), |d, e| d - e),
            };
            let alpha = Plane { w: cw, h: ch, v: band.v.iter().map(|s| s.clamp(0.0, 1.0) * op).collect() };
            paint(&mut out, canvas, &alpha, *color, *mode)
        }
        EffectSpec::DropShadow { blend: mode, color, opacity, angle, distance, spread, size, noise } => {
            let op = percent(*opacity, "shadow opacity")?;
            let n = percent(*noise, "shadow noise")?;
            let sp = percent(*spread, "shadow spread")?;
            let sr = (*size as f32 * sp).round() as u32;
            let (sin, cos) = angle.to_radians().sin_cos();
            let dx = (-cos * *distance as f64).round() as i64;
            let dy = (sin * *distance as f64).round() as i64;
            let s = a.shifted(dx, dy).dilate(sr).blur(size - sr);
            let alpha = dithered(&s, &a, op, n, rng);
            paint(&mut out, canvas, &alpha, *color, *mode)
        }
        EffectSpec::OuterGlow { color, opacity, noise, spread } => {
            let op = percent(*opacity, "glow opacity")?;
            let n = percent(*noise, "glow noise")?;
            let d = spread.div_ceil(2);
            let s = a.dilate(d).blur(spread - d);
            let alpha = dithered(&s, &a, op, n, rng);
            paint(&mut out, canvas, &alpha, *color, BlendMode::Normal)
        }
        EffectSpec::Noise { .. } => unreachable!("handled above"),
    };
    Ok((out, painted.map_or(r, |p| p.union(&r))))
}

fn dithered(s: &Plane, a: &Plane, op: f32, n: f32, rng: &mut RngStream) -> Plane {
    let v = s
        .v
        .iter()
        .zip(&a.v)
        .map(|(s, a)| {
            let base = s.clamp(0.0, 1.0) * op * (1.0 - a);
            if base <= 0.0 {
                0.0
            } else {
                base * (1.0 - n * rng.next_f64() as f32)
            }
        })
        .collect();
    Plane { w: s.w, h: s.h, v }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::NoiseDistribution;
    use crate::sampler::derive_stream;

    fn square_region() -> RegionGeometry {
        // 20x20 region with a 10x10 opaque square in the middle.
        let r = Rect::new(30, 30, 20, 20);
        let shape = (0..400).map(|i| if (5..15).contains(&(i % 20)) && (5..15).contains(&(i / 20)) { 255 } else { 0 }).collect();
        RegionGeometry::with_shape(r, shape).unwrap()
    }

    fn all_specs() -> Vec<EffectSpec> {
        vec![
            EffectSpec::Stroke { size: 3, position: StrokePosition::Outside, blend: BlendMode::Normal, opacity: 100.0, color: [255, 0, 0] },
            EffectSpec::Stroke { size: 4, position: StrokePosition::Center, blend: BlendMode::Multiply, opacity: 60.0, color: [0, 0, 255] },
            EffectSpec::Stroke { size: 2, position: StrokePosition::Inside, blend: BlendMode::Darken, opacity: 100.0, color: [0; 3] },
            EffectSpec::DropShadow {
                blend: BlendMode::Multiply,
                color: [0; 3],
                opacity: 75.0,
                angle: 120.0,
                distance: 7,
                spread: 10.0,
                size: 17,
                noise: 20.0,
            },
            EffectSpec::OuterGlow { color: [83, 79, 79], opacity: 17.0, noise: 0.0, spread: 5 },
            EffectSpec::Noise { amount: 10.0, distribution: NoiseDistribution::Gaussian, monochromatic: false },
        ]
    }

    fn within(r: &Rect, reach: u32, x: u32, y: u32) -> bool {
        let (x, y) = (x as i64, y as i64);
        let m = reach as i64;
        x >= r.x as i64 - m && x < r.right() as i64 + m && y >= r.y as i64 - m && y < r.bottom() as i64 + m
    }

    #[test]
    fn effects_stay_within_reach() {
        let img = ImageBuffer::new(110, 110, [200, 190, 180]).unwrap();
        let g = square_region();
        for spec in all_specs() {
            let (out, eff) = apply_effect(&img, &g, &spec, &mut derive_stream(3, "fx")).unwrap();
            let reach = effect_reach(&spec);
            assert_ne!(out, img, "{spec:?}");
            for (x, y) in img.bounds().pixels() {
                if out.get(x, y) != img.get(x, y) {
                    assert!(within(&g.rect, reach, x, y), "{spec:?} painted ({x},{y})");
                    assert!(eff.contains(x, y), "{spec:?}: ({x},{y}) outside {eff:?}");
                }
            }
        }
    }

    #[test]
    fn shadow_falls_away_from_light() {
        let img = ImageBuffer::new(110, 110, [255; 3]).unwrap();
        let spec = EffectSpec::DropShadow {
            blend: BlendMode::Normal,
            color: [0; 3],
            opacity: 100.0,
            angle: 90.0,
            distance: 7,
            spread: 100.0,
            size: 2,
            noise: 0.0,
        };
        let (out, _) = apply_effect(&img, &square_region(), &spec, &mut derive_stream(0, "s")).unwrap();
        // Light from above: shadow below the square, not above it.
        assert!(out.get(40, 48)[0] < 128);
        assert_eq!(out.get(40, 31), [255; 3]);
        // The layer itself is not darkened.
        assert_eq!(out.get(40, 40), [255; 3]);
    }

    #[test]
    fn zero_noise_leaves_image_unchanged() {
        let mut rng = derive_stream(1, "n");
        let img = ImageBuffer::from_raw(8, 8, (0..192).map(|_| rng.range_i64(0, 255) as u8).collect()).unwrap();
        let spec = EffectSpec::Noise { amount: 0.0, distribution: NoiseDistribution::Uniform, monochromatic: true };
        let (out, _) = apply_effect(&img, &RegionGeometry::rect(img.bounds()), &spec, &mut rng).unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn monochromatic_noise_moves_channels_together() {
        let mut rng = derive_stream(2, "n");
        let img = ImageBuffer::from_raw(16, 16, (0..768).map(|_| rng.range_i64(0, 255) as u8).collect()).unwrap();
        let spec = EffectSpec::Noise { amount: 25.0, distribution: NoiseDistribution::Gaussian, monochromatic: true };
        let (out, _) = apply_effect(&img, &RegionGeometry::rect(img.bounds()), &spec, &mut rng).unwrap();
        let mut moved = 0;
        for (x, y) in img.bounds().pixels() {
            let (a, b) = (img.get(x, y), out.get(x, y));
            let d: Vec<i32> = (0..3).map(|c| b[c] as i32 - a[c] as i32).collect();
            assert!(d[0] == d[1] && d[1] == d[2], "{a:?} -> {b:?}");
            moved += (d[0] != 0) as usize;
        }
        assert!(moved > 100);
    }

    #[test]
    fn shape_effects_need_a_shape() {
        let img = ImageBuffer::new(20, 20, [0; 3]).unwrap();
        let g = RegionGeometry::rect(Rect::new(5, 5, 5, 5));
        let spec = EffectSpec::OuterGlow { color: [1; 3], opacity: 50.0, noise: 0.0, spread: 2 };
        assert_eq!(apply_effect(&img, &g, &spec, &mut derive_stream(0, "x")).unwrap_err(), RasterError::MissingShape);
    }

    #[test]
    fn outside_stroke_has_exact_width() {
        let img = ImageBuffer::new(110, 110, [255; 3]).unwrap();
        let spec = EffectSpec::Stroke { size: 3, position: StrokePosition::Outside, blend: BlendMode::Normal, opacity: 100.0, color: [0; 3] };
        let (out, _) = apply_effect(&img, &square_region(), &spec, &mut derive_stream(0, "x")).unwrap();
        // Square spans x 35..45 at row 40.
        assert_eq!(out.get(34, 40), [0; 3]);
        assert_eq!(out.get(32, 40), [0; 3]);
        assert_eq!(out.get(31, 40), [255; 3]);
        assert_eq!(out.get(35, 40), [255; 3]);
    }
}
