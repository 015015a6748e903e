//! Convolution-style filters confined to a region.
//!
//! Fixed kernels: `Mean` is a 3x3 box, `Blur` the 3x3 binomial
//! `[1 2 1]^T [1 2 1] / 16`, `BlurMore` the 5x5 binomial
//! `[1 4 6 4 1]^T [1 4 6 4 1] / 256`. Gaussian uses sigma = radius / 2
//! truncated at 3 sigma. Radial blur sweeps +-5 degrees (spin) or scales
//! 90%..100% toward the region centre (zoom) with 8/16/32 taps for
//! low/medium/high quality. Smart blur is bilateral with range sigma
//! 2.5 x threshold levels; surface blur weights neighbours by
//! `1 - |diff| / (2.5 x threshold)`. Lens blur averages over a rotated
//! polygon aperture of radius `1 + 8 x aperture_radius` px, boosting
//! specular pixels, then adds noise.

use super::{
    buffer::luma, write_region, FilterSpec, ImageBuffer, LensSpec, NoiseDistribution, Quality, RadialMethod,
    RasterError, RegionGeometry, SmartMode,
};
use crate::sampler::RngStream;

/// Normalized Gaussian taps for `sigma`, truncated at `ceil(3 sigma)`.
pub fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let sigma = sigma.max(1e-3);
    let r = (3.0 * sigma).ceil().max(1.0) as i64;
    let mut k: Vec<f64> = (-r..=r).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable convolution of the rectangle's pixels with clamp-to-edge
/// sampling from the whole image.
pub(crate) fn separable(img: &ImageBuffer, r: super::Rect, k: &[f64]) -> Vec<[f64; 3]> {
    let kr = (k.len() / 2) as i64;
    let rows = r.h as i64 + 2 * kr;
    let mut tmp = vec![[0.0f64; 3]; (rows as usize) * r.w as usize];
    for ry in 0..rows {
        let y = r.y as i64 - kr + ry;
        for cx in 0..r.w as i64 {
            let x = r.x as i64 + cx;
            let mut acc = [0.0; 3];
            for (j, w) in k.iter().enumerate() {
                let p = img.get_clamped(x + j as i64 - kr, y);
                acc[0] += w * p[0] as f64;
                acc[1] += w * p[1] as f64;
                acc[2] += w * p[2] as f64;
            }
            tmp[(ry * r.w as i64 + cx) as usize] = acc;
        }
    }
    let mut out = vec![[0.0f64; 3]; r.area()];
    for cy in 0..r.h as i64 {
        for cx in 0..r.w as i64 {
            let mut acc = [0.0; 3];
            for (j, w) in k.iter().enumerate() {
                let p = tmp[((cy + j as i64) * r.w as i64 + cx) as usize];
                acc[0] += w * p[0];
                acc[1] += w * p[1];
                acc[2] += w * p[2];
            }
            out[(cy * r.w as i64 + cx) as usize] = acc;
        }
    }
    out
}

fn convolve(img: &ImageBuffer, r: super::Rect, k: &[f64], size: usize) -> Vec<[f64; 3]> {
    let h = (size / 2) as i64;
    r.pixels()
        .map(|(x, y)| {
            let mut acc = [0.0; 3];
            for dy in -h..=h {
                for dx in -h..=h {
                    let w = k[((dy + h) as usize) * size + (dx + h) as usize];
                    if w == 0.0 {
                        continue;
                    }
                    let p = img.get_clamped(x as i64 + dx, y as i64 + dy);
                    for c in 0..3 {
                        acc[c] += w * p[c] as f64;
                    }
                }
            }
            acc
        })
        .collect()
}

fn outer(a: &[f64]) -> Vec<f64> {
    let s: f64 = a.iter().sum();
    a.iter().flat_map(|u| a.iter().map(move |v| u * v / (s * s))).collect()
}

fn taps(q: Quality) -> usize {
    match q {
        Quality::Low => 8,
        Quality::Medium => 16,
        Quality::High => 32,
    }
}

fn stride(q: Quality) -> usize {
    match q {
        Quality::High => 1,
        Quality::Medium => 2,
        Quality::Low => 3,
    }
}

fn pixel_f(img: &ImageBuffer, x: i64, y: i64) -> [f64; 3] {
    let p = img.get_clamped(x, y);
    [p[0] as f64, p[1] as f64, p[2] as f64]
}

/// Applies `spec` inside `region`; the rng feeds the lens-blur noise only.
pub fn apply_filter(
    img: &ImageBuffer,
    region: &RegionGeometry,
    spec: &FilterSpec,
    rng: &mut RngStream,
) -> Result<ImageBuffer, RasterError> {
    region.validate_within(img)?;
    let r = region.rect;
    let values: Vec<[f64; 3]> = match spec {
        FilterSpec::Gaussian { radius } => {
            check(*radius > 0.0, "gaussian radius must be positive")?;
            separable(img, r, &gaussian_kernel(radius / 2.0))
        }
        FilterSpec::Sharpen { amount, radius, threshold, iterations } => {
            check(*radius > 0.0 && *amount >= 0.0, "sharpen amount/radius out of range")?;
            let k = gaussian_kernel(radius / 2.0);
            let mut cur = img.clone();
            for _ in 0..(*iterations).max(1) {
                let blurred = separable(&cur, r, &k);
                let vals: Vec<[f64; 3]> = r
                    .pixels()
                    .zip(&blurred)
                    .map(|((x, y), b)| {
                        let p = cur.get(x, y);
                        let mut o = [0.0; 3];
                        for c in 0..3 {
                            let d = p[c] as f64 - b[c];
                            o[c] = if d.abs() < *threshold { p[c] as f64 } else { p[c] as f64 + amount / 100.0 * d };
                        }
                        o
                    })
                    .collect();
                cur = write_region(&cur, region, &vals);
            }
            return Ok(cur);
        }
        FilterSpec::Motion { angle, distance } => {
            check(*distance >= 0.0, "motion distance must be nonnegative")?;
            let n = (distance.ceil() as usize + 1).max(2);
            let (s, c) = angle.to_radians().sin_cos();
            r.pixels()
                .map(|(x, y)| {
                    let mut acc = [0.0; 3];
                    for i in 0..n {
                        let t = -distance / 2.0 + distance * i as f64 / (n - 1) as f64;
                        let p = img.sample_bilinear(x as f64 + t * c, y as f64 - t * s);
                        for ch in 0..3 {
                            acc[ch] += p[ch] / n as f64;
                        }
                    }
                    acc
                })
                .collect()
        }
        FilterSpec::Radial { method, quality } => {
            let n = taps(*quality);
            let (cx, cy) = r.center();
            let (cx, cy) = (cx - 0.5, cy - 0.5);
            r.pixels()
                .map(|(x, y)| {
                    let (dx, dy) = (x as f64 - cx, y as f64 - cy);
                    let mut acc = [0.0; 3];
                    for i in 0..n {
                        let f = i as f64 / (n - 1) as f64;
                        let (sx, sy) = match method {
                            RadialMethod::Spin => {
                                let (s, c) = ((f - 0.5) * 10.0f64).to_radians().sin_cos();
                                (cx + dx * c - dy * s, cy + dx * s + dy * c)
                            }
                            RadialMethod::Zoom => {
                                let k = 0.9 + 0.1 * f;
                                (cx + dx * k, cy + dy * k)
                            }
                        };
                        let p = img.sample_bilinear(sx, sy);
                        for ch in 0..3 {
                            acc[ch] += p[ch] / n as f64;
                        }
                    }
                    acc
                })
                .collect()
        }
        FilterSpec::Smart { radius, threshold, quality, mode } => {
            check(*radius > 0.0 && *threshold > 0.0, "smart blur radius/threshold must be positive")?;
            let sigma_s = (radius / 2.0).max(0.5);
            let sigma_r = 2.5 * threshold * if *mode == SmartMode::EdgePreservation { 0.5 } else { 1.0 };
            let w = radius.ceil() as i64;
            let st = stride(*quality) as i64;
            r.pixels()
                .map(|(x, y)| {
                    let p0 = pixel_f(img, x as i64, y as i64);
                    let mut acc = [0.0; 3];
                    let mut wsum = 0.0;
                    for dy in (-w..=w).step_by(st as usize) {
                        for dx in (-w..=w).step_by(st as usize) {
                            let p = pixel_f(img, x as i64 + dx, y as i64 + dy);
                            let dr = (0..3).map(|c| (p[c] - p0[c]).abs()).fold(0.0, f64::max);
                            let ws = (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_s * sigma_s)).exp();
                            let wr = (-(dr * dr) / (2.0 * sigma_r * sigma_r)).exp();
                            let wt = ws * wr;
                            wsum += wt;
                            for c in 0..3 {
                                acc[c] += wt * p[c];
                            }
                        }
                    }
                    let b = [acc[0] / wsum, acc[1] / wsum, acc[2] / wsum];
                    match mode {
                        SmartMode::StrokeEnhancement => [2.0 * p0[0] - b[0], 2.0 * p0[1] - b[1], 2.0 * p0[2] - b[2]],
                        _ => b,
                    }
                })
                .collect()
        }
        FilterSpec::Surface { radius, threshold } => {
            check(*threshold > 0.0, "surface blur threshold must be positive")?;
            let w = *radius as i64;
            let t = 2.5 * threshold;
            r.pixels()
                .map(|(x, y)| {
                    let p0 = pixel_f(img, x as i64, y as i64);
                    let mut acc = [0.0; 3];
                    let mut ws = [0.0; 3];
                    for dy in -w..=w {
                        for dx in -w..=w {
                            let p = pixel_f(img, x as i64 + dx, y as i64 + dy);
                            for c in 0..3 {
                                let wt = (1.0 - (p[c] - p0[c]).abs() / t).max(0.0);
                                acc[c] += wt * p[c];
                                ws[c] += wt;
                            }
                        }
                    }
                    [acc[0] / ws[0], acc[1] / ws[1], acc[2] / ws[2]]
                })
                .collect()
        }
        FilterSpec::Lens(l) => lens(img, region, l, rng)?,
        FilterSpec::Mean => convolve(img, r, &[1.0 / 9.0; 9], 3),
        FilterSpec::Blur => convolve(img, r, &outer(&[1.0, 2.0, 1.0]), 3),
        FilterSpec::BlurMore => convolve(img, r, &outer(&[1.0, 4.0, 6.0, 4.0, 1.0]), 5),
        FilterSpec::Custom { kernel, scale, offset } => {
            check(*scale != 0, "custom convolution scale must be nonzero")?;
            let k: Vec<f64> = kernel.iter().map(|v| *v as f64).collect();
            convolve(img, r, &k, 5)
                .into_iter()
                .map(|a| a.map(|v| v / *scale as f64 + *offset as f64))
                .collect()
        }
    };
    Ok(write_region(img, region, &values))
}

fn check(ok: bool, msg: &str) -> Result<(), RasterError> {
    if ok {
        Ok(())
    } else {
        Err(RasterError::BadParameter(msg.into()))
    }
}

fn lens(
    img: &ImageBuffer,
    region: &RegionGeometry,
    l: &LensSpec,
    rng: &mut RngStream,
) -> Result<Vec<[f64; 3]>, RasterError> {
    check((3..=12).contains(&l.blades), "lens aperture needs 3..=12 blades")?;
    let big_r = 1.0 + (l.radius.clamp(0.0, 1.0) * 8.0).round();
    let n = l.blades as f64;
    let rot = l.rotation_deg.to_radians();
    let sector = std::f64::consts::TAU / n;
    let ri = big_r as i64;
    let mut offsets = Vec::new();
    for dy in -ri..=ri {
        for dx in -ri..=ri {
            let d = ((dx * dx + dy * dy) as f64).sqrt();
            let phi = (dy as f64).atan2(dx as f64) - rot;
            let a = phi.rem_euclid(sector) - sector / 2.0;
            let poly = big_r * (std::f64::consts::PI / n).cos() / a.cos();
            let edge = poly + (big_r - poly) * l.blade_curvature.clamp(0.0, 1.0);
            if d <= edge + 1e-9 {
                offsets.push((dx, dy));
            }
        }
    }
    let spec_level = 255.0 * (1.0 - l.threshold.clamp(0.0, 100.0) / 100.0);
    let boost = 1.0 + l.brightness / 100.0;
    let amp = l.noise.max(0.0) * 1.28;
    let r = region.rect;
    Ok(r.pixels()
        .map(|(x, y)| {
            let mut acc = [0.0; 3];
            let mut ws = 0.0;
            for (dx, dy) in &offsets {
                let p = img.get_clamped(x as i64 + dx, y as i64 + dy);
                let w = if luma(p) > spec_level { boost } else { 1.0 };
                ws += w;
                for c in 0..3 {
                    acc[c] += w * p[c] as f64;
                }
            }
            let mut o = [acc[0] / ws, acc[1] / ws, acc[2] / ws];
            for v in o.iter_mut() {
                *v += noise_draw(rng, amp, l.distribution);
            }
            o
        })
        .collect())
}

/// One noise sample with amplitude `amp` levels: uniform on [-amp, amp] or
/// Gaussian with the same variance.
pub(crate) fn noise_draw(rng: &mut RngStream, amp: f64, dist: NoiseDistribution) -> f64 {
    match dist {
        NoiseDistribution::Uniform => (rng.next_f64() * 2.0 - 1.0) * amp,
        NoiseDistribution::Gaussian => rng.standard_normal() * amp / 3f64.sqrt(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Rect;
    use crate::sampler::derive_stream;
    use proptest::prelude::*;

    fn textured(w: u32, h: u32, seed: u64) -> ImageBuffer {
        let mut rng = derive_stream(seed, "tex");
        let data = (0..w * h * 3).map(|_| rng.range_i64(0, 255) as u8).collect();
        ImageBuffer::from_raw(w, h, data).unwrap()
    }

    fn identity_kernel() -> [i32; 25] {
        let mut k = [0; 25];
        k[12] = 1;
        k
    }

    fn rng() -> RngStream {
        derive_stream(0, "filter")
    }

    #[test]
    fn identity_convolution_is_exact() {
        let img = textured(20, 20, 1);
        let g = RegionGeometry::rect(Rect::new(3, 4, 10, 8));
        let out = apply_filter(&img, &g, &FilterSpec::Custom { kernel: identity_kernel(), scale: 1, offset: 0 }, &mut rng())
            .unwrap();
        assert_eq!(out, img);
    }

    #[test]
    fn custom_offset_adds_exactly() {
        let img = ImageBuffer::new(10, 10, [128; 3]).unwrap();
        let g = RegionGeometry::rect(Rect::new(2, 2, 5, 5));
        let out = apply_filter(&img, &g, &FilterSpec::Custom { kernel: identity_kernel(), scale: 1, offset: 5 }, &mut rng())
            .unwrap();
        for (x, y) in g.rect.pixels() {
            assert_eq!(out.get(x, y), [133; 3]);
        }
        assert_eq!(out.get(0, 0), [128; 3]);
    }

    #[test]
    fn extreme_offsets_clamp() {
        let img = ImageBuffer::new(6, 6, [250; 3]).unwrap();
        let g = RegionGeometry::rect(Rect::new(1, 1, 4, 4));
        let mut k = [10; 25];
        k[0] = 10;
        let out = apply_filter(&img, &g, &FilterSpec::Custom { kernel: k, scale: 1, offset: 5 }, &mut rng()).unwrap();
        assert_eq!(out.get(2, 2), [255; 3]);
        let neg = apply_filter(&img, &g, &FilterSpec::Custom { kernel: [-10; 25], scale: 1, offset: -5 }, &mut rng()).unwrap();
        assert_eq!(neg.get(2, 2), [0; 3]);
    }

    #[test]
    fn gaussian_kernel_is_normalized_and_truncated() {
        let k = gaussian_kernel(1.5);
        assert_eq!(k.len(), 2 * 5 + 1);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zero_area_region_is_an_error() {
        let img = textured(8, 8, 2);
        let g = RegionGeometry::rect(Rect::new(1, 1, 0, 3));
        assert_eq!(apply_filter(&img, &g, &FilterSpec::Mean, &mut rng()), Err(RasterError::DegenerateRegion));
    }

    #[test]
    fn uniform_image_is_fixed_point_of_smoothing_filters() {
        let img = ImageBuffer::new(24, 24, [90, 120, 200]).unwrap();
        let g = RegionGeometry::rect(Rect::new(4, 4, 12, 10));
        for spec in [
            FilterSpec::Gaussian { radius: 3.0 },
            FilterSpec::Mean,
            FilterSpec::Blur,
            FilterSpec::BlurMore,
            FilterSpec::Motion { angle: 12.0, distance: 9.0 },
            FilterSpec::Radial { method: RadialMethod::Zoom, quality: Quality::High },
            FilterSpec::Surface { radius: 5, threshold: 10.0 },
            FilterSpec::Smart { radius: 4.0, threshold: 3.0, quality: Quality::Medium, mode: SmartMode::Normal },
        ] {
            assert_eq!(apply_filter(&img, &g, &spec, &mut rng()).unwrap(), img, "{spec:?}");
        }
    }

    fn all_specs() -> Vec<FilterSpec> {
        vec![
            FilterSpec::Sharpen { amount: 200.0, radius: 4.0, threshold: 7.0, iterations: 1 },
            FilterSpec::Sharpen { amount: 450.0, radius: 55.0, threshold: 2.0, iterations: 2 },
            FilterSpec::Gaussian { radius: 3.0 },
            FilterSpec::Motion { angle: -30.0, distance: 20.0 },
            FilterSpec::Radial { method: RadialMethod::Spin, quality: Quality::Low },
            FilterSpec::Smart { radius: 10.0, threshold: 10.0, quality: Quality::Low, mode: SmartMode::StrokeEnhancement },
            FilterSpec::Surface { radius: 15, threshold: 25.0 },
            FilterSpec::Lens(LensSpec {
                blades: 6,
                radius: 1.0,
                blade_curvature: 0.3,
                rotation_deg: 4.0,
                brightness: 100.0,
                threshold: 50.0,
                noise: 25.0,
                distribution: NoiseDistribution::Gaussian,
            }),
            FilterSpec::Mean,
            FilterSpec::Blur,
            FilterSpec::BlurMore,
            FilterSpec::Custom { kernel: [3; 25], scale: 7, offset: -5 },
        ]
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn filters_only_touch_the_region(seed in any::<u64>(), x in 0u32..20, y in 0u32..14, w in 1u32..12, h in 1u32..10) {
            let img = textured(32, 24, seed);
            let g = RegionGeometry::rect(Rect::new(x, y, w, h));
            for spec in all_specs() {
                let out = apply_filter(&img, &g, &spec, &mut derive_stream(seed, "f")).unwrap();
                for (px, py) in img.bounds().pixels() {
                    if !g.rect.contains(px, py) {
                        prop_assert_eq!(out.get(px, py), img.get(px, py));
                    }
                }
            }
        }
    }

    #[test]
    fn lens_noise_is_reproducible() {
        let img = textured(16, 16, 3);
        let g = RegionGeometry::rect(Rect::new(2, 2, 8, 8));
        let spec = all_specs().into_iter().find(|s| matches!(s, FilterSpec::Lens(_))).unwrap();
        let a = apply_filter(&img, &g, &spec, &mut derive_stream(1, "l")).unwrap();
        let b = apply_filter(&img, &g, &spec, &mut derive_stream(1, "l")).unwrap();
        assert_eq!(a, b);
    }
}
