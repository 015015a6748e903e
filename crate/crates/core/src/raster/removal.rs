//! Content removal inside a rectangle.
//!
//! Content-aware fill is exemplar based: hole pixels are filled from the
//! outside in, each taking the centre of the best-matching 5x5 patch
//! among 48 candidate centres drawn from a ring around the hole; each
//! further iteration re-matches every hole pixel against its now complete
//! neighbourhood. Clone modes copy a same-size rectangle from one of the
//! eight neighbouring cells (falling back to a coarse scan of the image).

use super::{HealMode, ImageBuffer, RasterError, Rect, RegionGeometry, RemovalSpec};
use crate::sampler::RngStream;

const PATCH_HALF: i64 = 2;
const CANDIDATES: usize = 48;

fn ring_width(r: Rect) -> u32 {
    (r.w.min(r.h) / 2).max(3)
}

/// Ring pixels around `r` (within the image, outside `r`).
fn ring_pixels(img: &ImageBuffer, r: Rect, width: u32) -> Vec<(u32, u32)> {
    r.expand(width, img.width(), img.height()).pixels().filter(|(x, y)| !r.contains(*x, *y)).collect()
}

/// Same-size rectangles next to `r`, nearest first, fully inside the image.
fn neighbour_cells(img: &ImageBuffer, r: Rect) -> Vec<Rect> {
    let (w, h) = (r.w as i64, r.h as i64);
    let offsets = [(0, -h), (0, h), (-w, 0), (w, 0), (-w, -h), (w, -h), (-w, h), (w, h)];
    let mut out: Vec<Rect> = offsets
        .iter()
        .filter_map(|(dx, dy)| {
            let (x, y) = (r.x as i64 + dx, r.y as i64 + dy);
            (x >= 0 && y >= 0 && x + w <= img.width() as i64 && y + h <= img.height() as i64)
                .then(|| Rect::new(x as u32, y as u32, r.w, r.h))
        })
        .collect();
    if out.is_empty() {
        // Coarse scan for any same-size rectangle clear of the region.
        let step = (r.w.min(r.h) / 2).max(1) as usize;
        for y in (0..=img.height().saturating_sub(r.h)).step_by(step) {
            for x in (0..=img.width().saturating_sub(r.w)).step_by(step) {
                let c = Rect::new(x, y, r.w, r.h);
                if !c.overlaps(&r) && img.bounds().contains_rect(&c) {
                    out.push(c);
                }
            }
        }
        let (cx, cy) = r.center();
        out.sort_by(|a, b| {
            let da = (a.center().0 - cx).powi(2) + (a.center().1 - cy).powi(2);
            let db = (b.center().0 - cx).powi(2) + (b.center().1 - cy).powi(2);
            da.total_cmp(&db)
        });
    }
    out
}

fn variance(img: &ImageBuffer, r: Rect) -> f64 {
    let n = r.area() as f64;
    let mut s = [0.0; 3];
    let mut s2 = [0.0; 3];
    for (x, y) in r.pixels() {
        let p = img.get(x, y);
        for c in 0..3 {
            s[c] += p[c] as f64;
            s2[c] += (p[c] as f64).powi(2);
        }
    }
    (0..3).map(|c| s2[c] / n - (s[c] / n).powi(2)).sum()
}

fn ring_mean(img: &ImageBuffer, r: Rect) -> [f64; 3] {
    let ring = ring_pixels(img, r, 1);
    let mut m = [0.0; 3];
    if ring.is_empty() {
        return m;
    }
    for (x, y) in &ring {
        let p = img.get(*x, *y);
        for c in 0..3 {
            m[c] += p[c] as f64;
        }
    }
    m.map(|v| v / ring.len() as f64)
}

/// Removes the content of `region.rect` (the shape, if any, is ignored).
pub fn apply_removal(
    img: &ImageBuffer,
    region: &RegionGeometry,
    spec: &RemovalSpec,
    rng: &mut RngStream,
) -> Result<ImageBuffer, RasterError> {
    region.validate_within(img)?;
    let r = region.rect;
    let mut out = img.clone();
    match spec {
        RemovalSpec::SolidFill { color } => {
            for (x, y) in r.pixels() {
                out.set(x, y, *color);
            }
        }
        RemovalSpec::ContentAware { iterations } => {
            if !(1..=5).contains(iterations) {
                return Err(RasterError::BadParameter(format!("content-aware iterations {iterations} outside [1,5]")));
            }
            content_aware(&mut out, r, *iterations, rng)?;
        }
        RemovalSpec::BackgroundClone => {
            let cells = neighbour_cells(img, r);
            let best = cells
                .iter()
                .map(|c| (variance(img, *c), *c))
                .fold(None::<(f64, Rect)>, |b, (v, c)| match b {
                    Some((bv, _)) if bv <= v => b,
                    _ => Some((v, c)),
                })
                .ok_or(RasterError::NoSourceRing)?
                .1;
            copy_rect(img, &mut out, best, r, 1.0, [0.0; 3]);
        }
        RemovalSpec::CloneStamp { opacity, flow } => {
            let cells = neighbour_cells(img, r);
            if cells.is_empty() {
                return Err(RasterError::NoSourceRing);
            }
            let src = cells[rng.index(cells.len())];
            let a = (opacity / 100.0).clamp(0.0, 1.0) * (flow / 100.0).clamp(0.0, 1.0);
            copy_rect(img, &mut out, src, r, a, [0.0; 3]);
        }
        RemovalSpec::HealingBrush { mode } => {
            let cells = neighbour_cells(img, r);
            if cells.is_empty() {
                return Err(RasterError::NoSourceRing);
            }
            let src = cells[rng.index(cells.len())];
            let (dm, sm) = (ring_mean(img, r), ring_mean(img, src));
            let shift = match mode {
                HealMode::Normal => [dm[0] - sm[0], dm[1] - sm[1], dm[2] - sm[2]],
                HealMode::Replace => {
                    let l = 0.299 * (dm[0] - sm[0]) + 0.587 * (dm[1] - sm[1]) + 0.114 * (dm[2] - sm[2]);
                    [l; 3]
                }
            };
            copy_rect(img, &mut out, src, r, 1.0, shift);
        }
    }
    Ok(out)
}

fn copy_rect(src_img: &ImageBuffer, out: &mut ImageBuffer, src: Rect, dst: Rect, alpha: f64, shift: [f64; 3]) {
    for (x, y) in dst.pixels() {
        let s = src_img.get(src.x + (x - dst.x), src.y + (y - dst.y));
        if alpha >= 1.0 && shift == [0.0; 3] {
            out.set(x, y, s);
            continue;
        }
        let d = src_img.get(x, y);
        let mut o = [0u8; 3];
        for c in 0..3 {
            let v = s[c] as f64 + shift[c];
            o[c] = super::clamp_u8(d[c] as f64 + (v - d[c] as f64) * alpha);
        }
        out.set(x, y, o);
    }
}

fn content_aware(img: &mut ImageBuffer, hole: Rect, iterations: u32, rng: &mut RngStream) -> Result<(), RasterError> {
    let ring = ring_pixels(img, hole, ring_width(hole));
    if ring.is_empty() {
        return Err(RasterError::NoSourceRing);
    }
    let cands: Vec<(u32, u32)> = (0..CANDIDATES).map(|_| ring[rng.index(ring.len())]).collect();
    let (iw, ih) = img.dims();
    let idx = |x: u32, y: u32| y as usize * iw as usize + x as usize;
    let mut known = vec![true; iw as usize * ih as usize];
    for (x, y) in hole.pixels() {
        known[idx(x, y)] = false;
    }

    let best_for = |img: &ImageBuffer, known: &[bool], x: u32, y: u32| -> (u32, u32) {
        let mut best = (f64::INFINITY, cands[0]);
        for &(cx, cy) in &cands {
            let mut ssd = 0.0;
            let mut n = 0u32;
            for dy in -PATCH_HALF..=PATCH_HALF {
                for dx in -PATCH_HALF..=PATCH_HALF {
                    let (tx, ty) = (x as i64 + dx, y as i64 + dy);
                    let (sx, sy) = (cx as i64 + dx, cy as i64 + dy);
                    if tx < 0 || ty < 0 || sx < 0 || sy < 0 {
                        continue;
                    }
                    let (tx, ty, sx, sy) = (tx as u32, ty as u32, sx as u32, sy as u32);
                    if tx >= iw || ty >= ih || sx >= iw || sy >= ih {
                        continue;
                    }
                    if !known[idx(tx, ty)] || !known[idx(sx, sy)] || hole.contains(sx, sy) {
                        continue;
                    }
                    let a = img.get(tx, ty);
                    let b = img.get(sx, sy);
                    for c in 0..3 {
                        ssd += (a[c] as f64 - b[c] as f64).powi(2);
                    }
                    n += 1;
                }
            }
            if n > 0 && ssd / (n as f64) < best.0 {
                best = (ssd / n as f64, (cx, cy));
            }
        }
        best.1
    };

    // Onion-peel initial fill.
    let mut remaining: Vec<(u32, u32)> = hole.pixels().collect();
    while !remaining.is_empty() {
        let front: Vec<(u32, u32)> = remaining
            .iter()
            .copied()
            .filter(|(x, y)| {
                (-1i64..=1).any(|dy| {
                    (-1i64..=1).any(|dx| {
                        let (nx, ny) = (*x as i64 + dx, *y as i64 + dy);
                        nx >= 0 && ny >= 0 && nx < iw as i64 && ny < ih as i64 && known[idx(nx as u32, ny as u32)]
                    })
                })
            })
            .collect();
        // A hole spanning the whole image has no front; the ring check
        // above rules that out, so `front` is never empty here.
        for &(x, y) in &front {
            let (sx, sy) = best_for(img, &known, x, y);
            let p = img.get(sx, sy);
            img.set(x, y, p);
        }
        for &(x, y) in &front {
            known[idx(x, y)] = true;
        }
        remaining.retain(|(x, y)| !known[idx(*x, *y)]);
    }

    for _ in 1..iterations {
        for (x, y) in hole.pixels() {
            let (sx, sy) = best_for(img, &known, x, y);
            let p = img.get(sx, sy);
            img.set(x, y, p);
        }
    }
    Ok(())
}
