//! Ground-truth masks from pixel differences.

use super::PipelineError;
use crate::raster::{ImageBuffer, PixelMask, Rect};

/// Minimum max-channel difference that counts as an edit.
pub const DIFF_THRESHOLD: u8 = 1;

/// Marks pixels whose max-channel difference is at least
/// [`DIFF_THRESHOLD`], then applies a 3x3 closing. The erosion treats
/// out-of-image pixels as set, so the closing never removes a differing
/// pixel. Fails if any marked pixel lies outside every geometry grown by
/// one pixel.
pub fn generate_mask(
    original: &ImageBuffer,
    tampered: &ImageBuffer,
    geometries: &[Rect],
) -> Result<PixelMask, PipelineError> {
    if original.dims() != tampered.dims() {
        return Err(PipelineError::DimensionMismatch(original.dims(), tampered.dims()));
    }
    let (w, h) = original.dims();
    let raw: Vec<bool> = original
        .as_raw()
        .chunks_exact(3)
        .zip(tampered.as_raw().chunks_exact(3))
        .map(|(a, b)| (0..3).map(|c| a[c].abs_diff(b[c])).max().unwrap_or(0) >= DIFF_THRESHOLD)
        .collect();
    let closed = erode(&dilate(&raw, w, h), w, h);
    let mask = PixelMask::from_bits(w, h, closed).expect("dimensions match");

    let grown: Vec<Rect> = geometries.iter().map(|r| r.expand(1, w, h)).collect();
    let outside = (0..h)
        .flat_map(|y| (0..w).map(move |x| (x, y)))
        .filter(|(x, y)| mask.get(*x, *y) && !grown.iter().any(|r| r.contains(*x, *y)))
        .count();
    if outside > 0 {
        return Err(PipelineError::Containment(outside));
    }
    Ok(mask)
}

fn dilate(b: &[bool], w: u32, h: u32) -> Vec<bool> {
    window(b, w, h, false, |acc, v| acc || v)
}

fn erode(b: &[bool], w: u32, h: u32) -> Vec<bool> {
    window(b, w, h, true, |acc, v| acc && v)
}

/// Folds each 3x3 neighbourhood; out-of-image neighbours are skipped.
fn window(b: &[bool], w: u32, h: u32, init: bool, f: impl Fn(bool, bool) -> bool) -> Vec<bool> {
    let (w, h) = (w as i64, h as i64);
    let mut out = vec![init; b.len()];
    for y in 0..h {
        for x in 0..w {
            let mut acc = init;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h {
                        acc = f(acc, b[(ny * w + nx) as usize]);
                    }
                }
            }
            out[(y * w + x) as usize] = acc;
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampler::derive_stream;

    fn noisy(w: u32, h: u32) -> ImageBuffer {
        let mut rng = derive_stream(8, "mask");
        ImageBuffer::from_raw(w, h, (0..w * h * 3).map(|_| rng.range_i64(0, 255) as u8).collect()).unwrap()
    }

    /// 4-connected components, counted by flood fill.
    fn components(m: &PixelMask) -> usize {
        let (w, h) = m.dims();
        let mut seen = vec![false; (w * h) as usize];
        let mut n = 0;
        for start in 0..(w * h) as usize {
            if seen[start] || !m.bits()[start] {
                continue;
            }
            n += 1;
            let mut stack = vec![start];
            seen[start] = true;
            while let Some(i) = stack.pop() {
                let (x, y) = ((i as u32 % w) as i64, (i as u32 / w) as i64);
                for (dx, dy) in [(1, 0), (-1, 0), (0, 1), (0, -1)] {
                    let (nx, ny) = (x + dx, y + dy);
                    if nx >= 0 && ny >= 0 && nx < w as i64 && ny < h as i64 {
                        let j = (ny * w as i64 + nx) as usize;
                        if m.bits()[j] && !seen[j] {
                            seen[j] = true;
                            stack.push(j);
                        }
                    }
                }
            }
        }
        n
    }

    #[test]
    fn identical_images_give_empty_mask() {
        let a = noisy(20, 10);
        assert!(generate_mask(&a, &a, &[]).unwrap().is_empty());
    }

    #[test]
    fn solid_block_gives_exact_block() {
        let a = ImageBuffer::new(30, 30, [10, 20, 30]).unwrap();
        let mut b = a.clone();
        let r = Rect::new(7, 9, 10, 10);
        for (x, y) in r.pixels() {
            b.set(x, y, [200, 0, 0]);
        }
        let m = generate_mask(&a, &b, &[r]).unwrap();
        for (x, y) in a.bounds().pixels() {
            assert_eq!(m.get(x, y), r.contains(x, y), "({x},{y})");
        }
    }

    #[test]
    fn two_disjoint_regions_give_two_components() {
        let a = noisy(40, 20);
        let mut b = a.clone();
        let rs = [Rect::new(2, 2, 6, 5), Rect::new(20, 10, 8, 6)];
        for r in &rs {
            for (x, y) in r.pixels() {
                let p = b.get(x, y);
                b.set(x, y, p.map(|v| v ^ 0x80));
            }
        }
        let m = generate_mask(&a, &b, &rs).unwrap();
        assert_eq!(components(&m), 2);
    }

    #[test]
    fn closing_fills_pinholes_and_keeps_border_pixels() {
        let a = ImageBuffer::new(10, 10, [0; 3]).unwrap();
        let mut b = a.clone();
        let r = Rect::new(0, 0, 5, 5);
        for (x, y) in r.pixels() {
            if (x, y) != (2, 2) {
                b.set(x, y, [5; 3]);
            }
        }
        let m = generate_mask(&a, &b, &[r]).unwrap();
        assert!(m.get(2, 2));
        assert!(m.get(0, 0));
        assert_eq!(m.count(), 25);
    }

    #[test]
    fn containment_violation_is_reported() {
        let a = ImageBuffer::new(10, 10, [0; 3]).unwrap();
        let mut b = a.clone();
        b.set(9, 9, [1, 0, 0]);
        assert!(matches!(generate_mask(&a, &b, &[Rect::new(0, 0, 3, 3)]), Err(PipelineError::Containment(1))));
        assert!(generate_mask(&a, &b, &[Rect::new(7, 7, 2, 2)]).is_ok());
    }

    #[test]
    fn dimension_mismatch_errors() {
        let a = ImageBuffer::new(3, 3, [0; 3]).unwrap();
        let b = ImageBuffer::new(3, 4, [0; 3]).unwrap();
        assert!(generate_mask(&a, &b, &[]).is_err());
    }
}
