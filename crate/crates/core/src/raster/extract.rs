//! Glyph-shape extraction inside a text region.

use std::collections::{BTreeMap, VecDeque};

use super::{levels_lut, Channel, ExtractMethod, ImageBuffer, RasterError, RegionGeometry};

/// Most common colour on the region's border (ties to the smallest value).
fn border_color(img: &ImageBuffer, g: &RegionGeometry) -> [u8; 3] {
    let r = g.rect;
    let mut counts: BTreeMap<[u8; 3], usize> = BTreeMap::new();
    for (x, y) in r.pixels() {
        if x == r.x || y == r.y || x + 1 == r.right() || y + 1 == r.bottom() {
            *counts.entry(img.get(x, y)).or_default() += 1;
        }
    }
    let mut best = ([0u8; 3], 0usize);
    for (k, c) in counts {
        if c > best.1 {
            best = (k, c);
        }
    }
    best.0
}

fn dist(a: [u8; 3], b: [u8; 3]) -> u8 {
    (0..3).map(|c| a[c].abs_diff(b[c])).max().unwrap_or(0)
}

/// Returns `region` with a shape marking glyph pixels (255), feathered
/// boundary pixels (128) and background (0).
///
/// Magic wand takes the background colour from the region border; a pixel
/// is background when its max-channel distance to it is within
/// `tolerance`, and with `contiguous` only if it also connects to the
/// border through background pixels. Levels remaps one channel and marks
/// remapped values below 128 as glyph.
pub fn extract_text_shape(
    img: &ImageBuffer,
    region: &RegionGeometry,
    method: &ExtractMethod,
) -> Result<RegionGeometry, RasterError> {
    region.validate_within(img)?;
    let r = region.rect;
    let (w, h) = (r.w as usize, r.h as usize);
    let mut fg = vec![false; w * h];
    let mut feather = false;
    match method {
        ExtractMethod::MagicWand { tolerance, contiguous, anti_alias } => {
            if !(1..=50).contains(tolerance) {
                return Err(RasterError::BadParameter(format!("magic-wand tolerance {tolerance} outside [1,50]")));
            }
            feather = *anti_alias;
            let seed = border_color(img, region);
            let near: Vec<bool> = r.pixels().map(|(x, y)| dist(img.get(x, y), seed) <= *tolerance).collect();
            if *contiguous {
                let mut bg = vec![false; w * h];
                let mut q = VecDeque::new();
                for i in 0..w * h {
                    let (cx, cy) = (i % w, i / w);
                    if (cx == 0 || cy == 0 || cx + 1 == w || cy + 1 == h) && near[i] {
                        bg[i] = true;
                        q.push_back(i);
                    }
                }
                while let Some(i) = q.pop_front() {
                    let (cx, cy) = (i % w, i / w);
                    let mut visit = |j: usize| {
                        if near[j] && !bg[j] {
                            bg[j] = true;
                            q.push_back(j);
                        }
                    };
                    if cx > 0 {
                        visit(i - 1);
                    }
                    if cx + 1 < w {
                        visit(i + 1);
                    }
                    if cy > 0 {
                        visit(i - w);
                    }
                    if cy + 1 < h {
                        visit(i + w);
                    }
                }
                for i in 0..w * h {
                    fg[i] = !bg[i];
                }
            } else {
                for i in 0..w * h {
                    fg[i] = !near[i];
                }
            }
        }
        ExtractMethod::Levels { channel, input_lo, input_hi } => {
            if input_lo >= input_hi {
                return Err(RasterError::BadParameter("levels input range must have lo < hi".into()));
            }
            let lut = levels_lut((*input_lo, *input_hi), (0, 255));
            for (i, (x, y)) in r.pixels().enumerate() {
                let p = img.get(x, y);
                let v = match channel {
                    Channel::Red => p[0],
                    Channel::Green => p[1],
                    Channel::Blue => p[2],
                    Channel::Rgb => ((p[0] as u32 + p[1] as u32 + p[2] as u32) / 3) as u8,
                };
                fg[i] = lut[v as usize] < 128;
            }
        }
    }
    let mut shape: Vec<u8> = fg.iter().map(|f| if *f { 255 } else { 0 }).collect();
    if feather {
        for i in 0..w * h {
            if fg[i] {
                continue;
            }
            let (cx, cy) = (i % w, i / w);
            let touches = (cx > 0 && fg[i - 1])
                || (cx + 1 < w && fg[i + 1])
                || (cy > 0 && fg[i - w])
                || (cy + 1 < h && fg[i + w]);
            if touches {
                shape[i] = 128;
            }
        }
    }
    RegionGeometry::with_shape(r, shape)
}
