//! One executor per tampering type. Each returns the edited image and the
//! rectangles it may have written to.

use super::post::{color, extract_method, post_spec, real, removal_spec, text_style, PostSpec};
use super::{PipelineError, SourceImage};
use crate::model::{ParamValue, TamperType};
use crate::raster::{
    apply_color_adjustment, apply_effect, apply_filter, apply_removal, composite_layer, extract_text_shape, luma,
    render_text_layer, transform_layer, FontBook, ImageBuffer, Layer, Rect, RegionGeometry, Scale,
};
use crate::sampler::{PlanItem, RngStream, Target};

/// Smallest region height text is rendered into.
pub const MIN_TEXT_HEIGHT: u32 = 6;

/// Contrast (luma levels) below which a reference region is taken to hold
/// no visible ink.
const MIN_INK_CONTRAST: f64 = 24.0;

const REMOVAL_VARIANTS: [&str; 5] =
    ["content-aware-fill", "solid-color-fill", "background-clone", "clone-stamp", "healing-brush"];

/// Edited image plus the rectangles that may differ from the input.
pub type Outcome = (ImageBuffer, Vec<Rect>);

/// Signed rectangle; paste destinations may extend past the image.
#[derive(Clone, Copy, Debug)]
struct Dest {
    x: i64,
    y: i64,
    w: u32,
    h: u32,
}

impl From<Rect> for Dest {
    fn from(r: Rect) -> Self {
        Dest { x: r.x as i64, y: r.y as i64, w: r.w, h: r.h }
    }
}

fn centered(d: Dest, w: u32, h: u32) -> (i64, i64) {
    (d.x + (d.w as i64 - w as i64).div_euclid(2), d.y + (d.h as i64 - h as i64).div_euclid(2))
}

fn main_op<'a>(item: &'a PlanItem, name: &str) -> Option<&'a crate::sampler::ResolvedOp> {
    item.ops.iter().find(|o| o.phase == crate::model::Phase::Main && o.variant == name)
}

fn text_length(item: &PlanItem) -> Option<usize> {
    item.ops.iter().find_map(|o| o.param("text_length")).and_then(ParamValue::as_i64).map(|k| k.max(1) as usize)
}

/// Keeps the leading `k` of `text`'s characters: the rectangle's width
/// shrinks in proportion, anchored left.
fn retain_chars(r: Rect, text: Option<&str>, k: Option<usize>) -> Rect {
    let n = text.map_or(0, |t| t.chars().count());
    match k {
        Some(k) if n > 0 && k < n => {
            let w = ((r.w as f64 * k as f64 / n as f64).round() as u32).clamp(1, r.w);
            Rect::new(r.x, r.y, w, r.h)
        }
        _ => r,
    }
}

fn region_rect(item: &PlanItem) -> Result<Rect, PipelineError> {
    item.target
        .rect()
        .ok_or_else(|| PipelineError::Plan(format!("{} needs an annotated target region", item.type_id)))
}

/// Composites `layer` at `at`; the returned geometry carries the layer's
/// alpha over the clipped rectangle.
fn paste(img: &ImageBuffer, layer: &Layer, at: (i64, i64)) -> Result<(ImageBuffer, RegionGeometry), PipelineError> {
    let (out, clip) = composite_layer(img, layer, at)?;
    let shape = clip
        .pixels()
        .map(|(x, y)| layer.alpha_at((x as i64 - at.0) as u32, (y as i64 - at.1) as u32))
        .collect();
    Ok((out, RegionGeometry::with_shape(clip, shape)?))
}

fn scale_of(item: &PlanItem, adaptive_to: Dest) -> Result<Scale, PipelineError> {
    let Some(op) = main_op(item, "region-scaling") else { return Ok(Scale::Factor(1.0)) };
    match op.param("scaling_factor") {
        Some(ParamValue::Text(s)) if s.starts_with("adaptive") => Ok(Scale::AdaptiveTo { w: adaptive_to.w, h: adaptive_to.h }),
        _ => Ok(Scale::Factor(real(op, "scaling_factor")?)),
    }
}

fn rotation_of(item: &PlanItem) -> Result<f64, PipelineError> {
    main_op(item, "region-rotation").map_or(Ok(0.0), |op| real(op, "rotation_angle"))
}

/// Applies the item's post-processing ops in order to `geom`.
fn conceal(img: ImageBuffer, geom: &RegionGeometry, item: &PlanItem, rng: &mut RngStream) -> Result<Outcome, PipelineError> {
    let mut out = img;
    let mut rects = vec![geom.rect];
    let shaped = match &geom.shape {
        Some(_) => geom.clone(),
        None => RegionGeometry::with_shape(geom.rect, vec![255; geom.rect.area()])?,
    };
    for op in item.post_ops() {
        match post_spec(op)? {
            Some(PostSpec::Filter(f)) => out = apply_filter(&out, geom, &f, rng)?,
            Some(PostSpec::Color(c)) => out = apply_color_adjustment(&out, geom, &c)?,
            Some(PostSpec::Effect(e)) => {
                let (o, r) = apply_effect(&out, &shaped, &e, rng)?;
                out = o;
                rects.push(r);
            }
            None => return Err(PipelineError::BadParam(format!("{} is not a post-processing step", op.variant))),
        }
    }
    Ok((out, rects))
}

/// Copy-move and splicing: copy the source region (optionally
/// shape-extracted), transform, paste, conceal.
fn transplant(img: &ImageBuffer, src_img: &ImageBuffer, item: &PlanItem, rng: &mut RngStream) -> Result<Outcome, PipelineError> {
    let src = item.source.as_ref().ok_or_else(|| PipelineError::Plan("copy item without a source".into()))?;
    let s = retain_chars(src.rect, src.text.as_deref(), text_length(item));
    let patch = src_img.crop(s)?;
    let extract = item.ops.iter().map(extract_method).find_map(Result::transpose).transpose()?;
    let layer = match extract {
        Some(m) => {
            let g = extract_text_shape(src_img, &RegionGeometry::rect(s), &m)?;
            Layer::new(patch, g.shape.expect("extraction yields a shape"))?
        }
        None => Layer::opaque(patch),
    };
    let dest = match item.paste_offset {
        Some((ox, oy)) => Dest { x: s.x as i64 + ox, y: s.y as i64 + oy, w: s.w, h: s.h },
        None => region_rect(item)?.into(),
    };
    // Keep the paste centre on the canvas so some of the patch lands.
    let (iw, ih) = img.dims();
    let dest = Dest {
        x: dest.x.clamp(-(dest.w as i64 / 2), iw as i64 - 1 - dest.w as i64 / 2),
        y: dest.y.clamp(-(dest.h as i64 / 2), ih as i64 - 1 - dest.h as i64 / 2),
        ..dest
    };
    let layer = transform_layer(&layer, scale_of(item, dest)?, rotation_of(item)?)?;
    let at = centered(dest, layer.width(), layer.height());
    let (out, geom) = paste(img, &layer, at)?;
    conceal(out, &geom, item, rng)
}

pub fn execute_copy_move(img: &ImageBuffer, item: &PlanItem, rng: &mut RngStream) -> Result<Outcome, PipelineError> {
    expect_type(item, TamperType::CopyMove)?;
    transplant(img, img, item, rng)
}

pub fn execute_splicing(
    target: &ImageBuffer,
    source: &ImageBuffer,
    item: &PlanItem,
    rng: &mut RngStream,
) -> Result<Outcome, PipelineError> {
    expect_type(item, TamperType::Splicing)?;
    if std::ptr::eq(target, source) || target == source {
        return Err(PipelineError::SameImage);
    }
    transplant(target, source, item, rng)
}

fn remove(img: &ImageBuffer, r: Rect, item: &PlanItem, rng: &mut RngStream) -> Result<ImageBuffer, PipelineError> {
    match item.ops.iter().find(|o| REMOVAL_VARIANTS.contains(&o.variant.as_str())) {
        Some(op) => Ok(apply_removal(img, &RegionGeometry::rect(r), &removal_spec(op)?, rng)?),
        None => Ok(img.clone()),
    }
}

pub fn execute_removal(img: &ImageBuffer, item: &PlanItem, rng: &mut RngStream) -> Result<Outcome, PipelineError> {
    expect_type(item, TamperType::Removal)?;
    let t = region_rect(item)?;
    let r = retain_chars(t, item.target.text(), text_length(item));
    let mut out = remove(img, r, item, rng)?;
    let mut rects = vec![r];
    let scale = scale_of(item, r.into())?;
    let rot = rotation_of(item)?;
    if scale != Scale::Factor(1.0) || rot != 0.0 {
        let layer = transform_layer(&Layer::opaque(out.crop(r)?), scale, rot)?;
        let (o, geom) = paste(&out, &layer, centered(r.into(), layer.width(), layer.height()))?;
        out = o;
        rects.push(geom.rect);
    }
    Ok((out, rects))
}

/// Ink colour: the pixel of `reference` that departs most from the
/// region's mean luma, or black/white against the target background when
/// the reference shows no ink.
fn adapted_color(color_src: &ImageBuffer, reference: Rect, bg_luma: f64) -> [u8; 3] {
    let m = color_src.mean_luma(reference);
    let r = reference.intersect(&color_src.bounds());
    let mut best = ([0u8; 3], -1.0f64);
    for (x, y) in r.pixels() {
        let p = color_src.get(x, y);
        let d = (luma(p) - m).abs();
        if d > best.1 {
            best = (p, d);
        }
    }
    if best.1 >= MIN_INK_CONTRAST {
        best.0
    } else if bg_luma > 128.0 {
        [0; 3]
    } else {
        [255; 3]
    }
}

/// Renders the item's text into `t`, transforms, pastes and conceals.
/// `color_src` supplies the pixels colour adaptation samples from.
fn insert_text(
    img: &ImageBuffer,
    color_src: &ImageBuffer,
    t: Rect,
    reference: Rect,
    item: &PlanItem,
    rng: &mut RngStream,
) -> Result<Outcome, PipelineError> {
    if t.h < MIN_TEXT_HEIGHT {
        return Err(PipelineError::RegionTooSmall(t));
    }
    let text = item.text.as_deref().ok_or_else(|| PipelineError::Plan("text item without text".into()))?;
    let mut style = text_style(main_op(item, "font-properties"))?;
    let bg = img.mean_luma(t);
    style.color = if let Some(op) = main_op(item, "color-selection") {
        color(op, if bg > 128.0 { "light_background_color" } else { "dark_background_color" })?
    } else {
        adapted_color(color_src, reference, bg)
    };
    let layer = render_text_layer(FontBook::global()?, text, &style, t.w, t.h)?;
    let layer = transform_layer(&layer, scale_of(item, t.into())?, rotation_of(item)?)?;
    let (out, geom) = paste(img, &layer, centered(t.into(), layer.width(), layer.height()))?;
    conceal(out, &geom, item, rng)
}

/// Flattest `w x h` window (lowest luma variance) clear of `avoid`;
/// earliest in row-major scan order on ties.
pub fn find_blank_window(img: &ImageBuffer, w: u32, h: u32, avoid: &[Rect]) -> Result<Rect, PipelineError> {
    let (iw, ih) = img.dims();
    let (w, h) = (w.min(iw), h.min(ih));
    if w == 0 || h == 0 {
        return Err(PipelineError::NoBlankWindow(w, h));
    }
    // Integral images of luma and squared luma.
    let stride = iw as usize + 1;
    let mut s1 = vec![0f64; stride * (ih as usize + 1)];
    let mut s2 = s1.clone();
    for y in 0..ih as usize {
        for x in 0..iw as usize {
            let l = luma(img.get(x as u32, y as u32));
            let i = (y + 1) * stride + x + 1;
            s1[i] = l + s1[i - 1] + s1[i - stride] - s1[i - stride - 1];
            s2[i] = l * l + s2[i - 1] + s2[i - stride] - s2[i - stride - 1];
        }
    }
    let sum = |s: &[f64], r: Rect| {
        let (x0, y0, x1, y1) = (r.x as usize, r.y as usize, r.right() as usize, r.bottom() as usize);
        s[y1 * stride + x1] - s[y0 * stride + x1] - s[y1 * stride + x0] + s[y0 * stride + x0]
    };
    let step = (w.min(h) / 4).max(1);
    let positions = |n: u32, len: u32| {
        let mut v: Vec<u32> = (0..=n - len).step_by(step as usize).collect();
        if *v.last().unwrap_or(&0) != n - len {
            v.push(n - len);
        }
        v
    };
    let n = (w * h) as f64;
    let mut best: Option<(Rect, f64)> = None;
    for y in positions(ih, h) {
        for x in positions(iw, w) {
            let r = Rect::new(x, y, w, h);
            if avoid.iter().any(|a| a.overlaps(&r)) {
                continue;
            }
            let m = sum(&s1, r) / n;
            let var = (sum(&s2, r) / n - m * m).max(0.0);
            if best.is_none_or(|(_, b)| var < b - 1e-9) {
                best = Some((r, var));
            }
        }
    }
    best.map(|(r, _)| r).ok_or(PipelineError::NoBlankWindow(w, h))
}

pub fn execute_insertion(
    img: &ImageBuffer,
    item: &PlanItem,
    avoid: &[Rect],
    rng: &mut RngStream,
) -> Result<Outcome, PipelineError> {
    expect_type(item, TamperType::Insertion)?;
    let t = match &item.target {
        Target::Region { rect, .. } => *rect,
        Target::BlankSearch { w, h } => find_blank_window(img, *w, *h, avoid)?,
    };
    insert_text(img, img, t, item.color_ref.unwrap_or(t), item, rng)
}

pub fn execute_replacement(img: &ImageBuffer, item: &PlanItem, rng: &mut RngStream) -> Result<Outcome, PipelineError> {
    expect_type(item, TamperType::Replacement)?;
    let t = region_rect(item)?;
    let erased = remove(img, t, item, rng)?;
    let (out, mut rects) = insert_text(&erased, img, t, t, item, rng)?;
    rects.insert(0, t);
    Ok((out, rects))
}

fn expect_type(item: &PlanItem, t: TamperType) -> Result<(), PipelineError> {
    if item.type_id != t {
        return Err(PipelineError::Plan(format!("{} item given to the {t} executor", item.type_id)));
    }
    Ok(())
}

/// Runs `item` on `img`, resolving splicing sources from `sources`.
pub fn execute_item(
    img: &ImageBuffer,
    item: &PlanItem,
    sources: &[SourceImage],
    avoid: &[Rect],
    rng: &mut RngStream,
) -> Result<Outcome, PipelineError> {
    match item.type_id {
        TamperType::CopyMove => execute_copy_move(img, item, rng),
        TamperType::Splicing => {
            let name = item.source.as_ref().and_then(|s| s.image.clone()).unwrap_or_default();
            let src = sources
                .iter()
                .find(|s| s.name == name)
                .ok_or(PipelineError::MissingSource(name))?;
            execute_splicing(img, &src.image, item, rng)
        }
        TamperType::Removal => execute_removal(img, item, rng),
        TamperType::Insertion => execute_insertion(img, item, avoid, rng),
        TamperType::Replacement => execute_replacement(img, item, rng),
    }
}
