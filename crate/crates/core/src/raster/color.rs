//! Tonal and colour adjustments.
//!
//! * Balance (midtones): channel `c` moves by `0.4 * slider_c * 4t(1-t)`
//!   levels, `t = v / 255`, so shadows and highlights stay put.
//! * Curves: raise-highlights adds `48 s(1-s)` for `v > 128` with
//!   `s = (v-128)/127`; lower-shadows subtracts `48 s(1-s)` for `v < 128`
//!   with `s = v/128`. Both are strictly increasing and fix 0, 128, 255.
//! * Hue/saturation: HSL; hue adds degrees, saturation scales by
//!   `1 + sat/100`, lightness moves toward white (`l + (1-l) L/100`) or
//!   black (`l (1 + L/100)`).
//! * Levels: linear remap of `[in_lo, in_hi]` onto `[out_lo, out_hi]`,
//!   clamped.

use super::{clamp_u8, write_region, Channel, ColorSpec, CurveKind, ImageBuffer, RasterError, RegionGeometry};

pub fn curve_lut(kind: CurveKind) -> [u8; 256] {
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        let f = v as f64;
        let y = match kind {
            CurveKind::Identity => f,
            CurveKind::RaiseHighlights if v > 128 => {
                let s = (f - 128.0) / 127.0;
                f + 48.0 * s * (1.0 - s)
            }
            CurveKind::LowerShadows if v < 128 => {
                let s = f / 128.0;
                f - 48.0 * s * (1.0 - s)
            }
            _ => f,
        };
        *out = clamp_u8(y);
    }
    lut
}

pub fn levels_lut(input: (u8, u8), output: (u8, u8)) -> [u8; 256] {
    let (ilo, ihi) = (input.0 as f64, input.1 as f64);
    let (olo, ohi) = (output.0 as f64, output.1 as f64);
    let mut lut = [0u8; 256];
    for (v, out) in lut.iter_mut().enumerate() {
        let t = if ihi > ilo { ((v as f64 - ilo) / (ihi - ilo)).clamp(0.0, 1.0) } else if v as f64 >= ihi { 1.0 } else { 0.0 };
        *out = clamp_u8(olo + (ohi - olo) * t);
    }
    lut
}

/// RGB bytes to (hue degrees in [0,360), saturation, lightness in [0,1]).
pub fn rgb_to_hsl(p: [u8; 3]) -> (f64, f64, f64) {
    let [r, g, b] = p.map(|v| v as f64 / 255.0);
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let l = (max + min) / 2.0;
    let d = max - min;
    if d == 0.0 {
        return (0.0, 0.0, l);
    }
    let s = if l > 0.5 { d / (2.0 - max - min) } else { d / (max + min) };
    let h = if max == r {
        ((g - b) / d).rem_euclid(6.0)
    } else if max == g {
        (b - r) / d + 2.0
    } else {
        (r - g) / d + 4.0
    };
    (h * 60.0, s, l)
}

pub fn hsl_to_rgb(h: f64, s: f64, l: f64) -> [f64; 3] {
    if s == 0.0 {
        return [l * 255.0; 3];
    }
    let q = if l < 0.5 { l * (1.0 + s) } else { l + s - l * s };
    let p = 2.0 * l - q;
    let h = h.rem_euclid(360.0) / 360.0;
    let f = |t: f64| {
        let t = t.rem_euclid(1.0);
        let v = if t < 1.0 / 6.0 {
            p + (q - p) * 6.0 * t
        } else if t < 0.5 {
            q
        } else if t < 2.0 / 3.0 {
            p + (q - p) * (2.0 / 3.0 - t) * 6.0
        } else {
            p
        };
        v * 255.0
    };
    [f(h + 1.0 / 3.0), f(h), f(h - 1.0 / 3.0)]
}

pub fn apply_color_adjustment(
    img: &ImageBuffer,
    region: &RegionGeometry,
    spec: &ColorSpec,
) -> Result<ImageBuffer, RasterError> {
    region.validate_within(img)?;
    let pixels: Vec<[u8; 3]> = region.rect.pixels().map(|(x, y)| img.get(x, y)).collect();
    let values: Vec<[f64; 3]> = match spec {
        ColorSpec::Balance { sliders } => {
            if sliders.iter().any(|s| !(-100..=100).contains(s)) {
                return Err(RasterError::BadParameter("balance sliders must lie in [-100,100]".into()));
            }
            pixels
                .iter()
                .map(|p| {
                    let mut o = [0.0; 3];
                    for c in 0..3 {
                        let t = p[c] as f64 / 255.0;
                        o[c] = p[c] as f64 + 0.4 * sliders[c] as f64 * 4.0 * t * (1.0 - t);
                    }
                    o
                })
                .collect()
        }
        ColorSpec::Curves(kind) => {
            let lut = curve_lut(*kind);
            pixels.iter().map(|p| p.map(|v| lut[v as usize] as f64)).collect()
        }
        ColorSpec::Levels { channel, input, output } => {
            let lut = levels_lut(*input, *output);
            let which = match channel {
                Channel::Red => [true, false, false],
                Channel::Green => [false, true, false],
                Channel::Blue => [false, false, true],
                Channel::Rgb => [true; 3],
            };
            pixels
                .iter()
                .map(|p| {
                    let mut o = p.map(|v| v as f64);
                    for c in 0..3 {
                        if which[c] {
                            o[c] = lut[p[c] as usize] as f64;
                        }
                    }
                    o
                })
                .collect()
        }
        ColorSpec::HueSaturation { hue, saturation, lightness } => {
            if !(-180..=180).contains(hue) || !(-100..=100).contains(saturation) || !(-100..=100).contains(lightness) {
                return Err(RasterError::BadParameter("hue/saturation/lightness out of range".into()));
            }
            if (*hue, *saturation, *lightness) == (0, 0, 0) {
                return Ok(img.clone());
            }
            pixels
                .iter()
                .map(|p| {
                    let (h, s, l) = rgb_to_hsl(*p);
                    let s = (s * (1.0 + *saturation as f64 / 100.0)).clamp(0.0, 1.0);
                    let lf = *lightness as f64 / 100.0;
                    let l = if lf >= 0.0 { l + (1.0 - l) * lf } else { l * (1.0 + lf) };
                    hsl_to_rgb(h + *hue as f64, s, l.clamp(0.0, 1.0))
                })
                .collect()
        }
    };
    Ok(write_region(img, region, &values))
}
