//! Plan sampling: turns a population model, a parameter table and the
//! annotated regions of one image into a concrete [`TamperingPlan`].

mod rng;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub use rng::{derive_stream, RngStream};

use crate::dataset::{RegionAnnotation, RegionKind};
use crate::model::{
    OpId, OperationVariant, ParamBounds, ParamSpec, ParamValue, ParameterTable, Phase, PopulationModel,
    StepSpec, TamperType, VariantGroup,
};
use crate::raster::Rect;

/// Upper bound on edited regions per image.
pub const MAX_REGIONS: usize = 12;

const TEXT_ALPHABET: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789";

#[derive(thiserror::Error, Debug, PartialEq)]
pub enum SamplerError {
    #[error("no region annotations to sample from")]
    EmptyRegions,
    #[error("parameter table has no spec for `{0}`")]
    MissingType(TamperType),
    #[error("post_scale {0} outside (0,1]")]
    BadPostScale(f64),
    #[error("model only allows splicing but no source image is available")]
    NoSplicingSource,
}

/// A variant chosen for one group, with every parameter resolved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResolvedOp {
    pub op_id: OpId,
    pub variant: String,
    pub phase: Phase,
    pub params: BTreeMap<String, ParamValue>,
}

impl ResolvedOp {
    pub fn param(&self, name: &str) -> Option<&ParamValue> {
        self.params.get(name)
    }
}

/// Where a plan item edits.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum Target {
    /// An annotated region.
    Region {
        id: String,
        rect: Rect,
        kind: RegionKind,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        text: Option<String>,
    },
    /// No unused non-text region was annotated; the executor searches the
    /// image for the flattest `w x h` window clear of every other target.
    BlankSearch { w: u32, h: u32 },
}

impl Target {
    pub fn rect(&self) -> Option<Rect> {
        match self {
            Target::Region { rect, .. } => Some(*rect),
            Target::BlankSearch { .. } => None,
        }
    }

    pub fn region_id(&self) -> Option<&str> {
        match self {
            Target::Region { id, .. } => Some(id),
            Target::BlankSearch { .. } => None,
        }
    }

    pub fn text(&self) -> Option<&str> {
        match self {
            Target::Region { text, .. } => text.as_deref(),
            Target::BlankSearch { .. } => None,
        }
    }
}

/// Region copied by copy-move (same image) or splicing (another image).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SourceRef {
    /// Source image name; `None` means the target image itself.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub image: Option<String>,
    pub region_id: String,
    pub rect: Rect,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlanItem {
    pub type_id: TamperType,
    pub target: Target,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceRef>,
    /// Copy-move 9-grid placement: paste offset from the source rectangle.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub paste_offset: Option<(i64, i64)>,
    /// Text rendered by insertion and replacement.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    /// Existing text whose ink colour insertion adapts to.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub color_ref: Option<Rect>,
    /// Resolved operations in table order, main steps before post steps.
    pub ops: Vec<ResolvedOp>,
}

impl PlanItem {
    pub fn op(&self, op_id: OpId) -> Option<&ResolvedOp> {
        self.ops.iter().find(|o| o.op_id == op_id)
    }

    pub fn variant(&self, name: &str) -> Option<&ResolvedOp> {
        self.ops.iter().find(|o| o.variant == name)
    }

    pub fn post_ops(&self) -> impl Iterator<Item = &ResolvedOp> {
        self.ops.iter().filter(|o| o.phase == Phase::Post)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TamperingPlan {
    pub sample_id: String,
    pub region_count: usize,
    pub items: Vec<PlanItem>,
}

/// Another image that splicing may copy from.
#[derive(Clone, Debug)]
pub struct SourceCandidate {
    pub name: String,
    pub regions: Vec<RegionAnnotation>,
}

/// Everything about the target image the sampler needs.
#[derive(Clone, Copy, Debug)]
pub struct PlanInputs<'a> {
    pub sample_id: &'a str,
    pub width: u32,
    pub height: u32,
    pub regions: &'a [RegionAnnotation],
    /// Splicing sources; must not contain the target image.
    pub sources: &'a [SourceCandidate],
}

/// Draws a value uniformly within `spec`'s bounds.
pub fn sample_parameter(spec: &ParamSpec, rng: &mut RngStream) -> ParamValue {
    sample_bounds(&spec.bounds, None, rng)
}

/// As [`sample_parameter`], but a numeric range may be narrowed to `fitted`
/// (intersected with the declared bounds).
fn sample_bounds(bounds: &ParamBounds, fitted: Option<(f64, f64)>, rng: &mut RngStream) -> ParamValue {
    match bounds {
        ParamBounds::IntegerRange { lo, hi, count } => {
            let (lo, hi) = match fitted {
                Some((a, b)) if *count == 1 => narrow_int(*lo, *hi, a, b),
                _ => (*lo, *hi),
            };
            if *count == 1 {
                ParamValue::Int(rng.range_i64(lo, hi))
            } else {
                ParamValue::Ints((0..*count).map(|_| rng.range_i64(lo, hi)).collect())
            }
        }
        ParamBounds::RealRange { lo, hi } => {
            let (lo, hi) = fitted.map_or((*lo, *hi), |(a, b)| narrow_real(*lo, *hi, a, b));
            ParamValue::Real(rng.range_f64(lo, hi))
        }
        ParamBounds::Categorical(values) => ParamValue::Text(values[rng.index(values.len())].clone()),
        ParamBounds::ColorRange(ch) => {
            let mut c = [0u8; 3];
            for (out, [lo, hi]) in c.iter_mut().zip(ch) {
                *out = rng.range_i64(*lo, *hi) as u8;
            }
            ParamValue::Color(c)
        }
        ParamBounds::Fixed(v) => v.clone(),
    }
}

fn narrow_int(lo: i64, hi: i64, a: f64, b: f64) -> (i64, i64) {
    let a = (a.ceil() as i64).clamp(lo, hi);
    let b = (b.floor() as i64).clamp(lo, hi);
    if a <= b {
        (a, b)
    } else {
        (lo, hi)
    }
}

fn narrow_real(lo: f64, hi: f64, a: f64, b: f64) -> (f64, f64) {
    let a = a.clamp(lo, hi);
    let b = b.clamp(lo, hi);
    if a <= b {
        (a, b)
    } else {
        (lo, hi)
    }
}

/// Picks one variant with probability equal to its frequency, or `None`
/// with probability `residual_none`.
pub fn select_exclusive_variant<'g>(group: &'g VariantGroup, rng: &mut RngStream) -> Option<&'g OperationVariant> {
    let u = rng.next_f64();
    let mut acc = 0.0;
    for v in &group.variants {
        acc += v.frequency;
        if u < acc {
            return Some(v);
        }
    }
    if group.residual_none > 0.0 {
        None
    } else {
        // Frequencies summing to one may fall a rounding step short.
        group.variants.iter().rev().find(|v| v.frequency > 0.0)
    }
}

/// One included post-processing group with its chosen variant.
#[derive(Clone, Copy, Debug)]
pub struct PostChoice<'t> {
    pub step: &'t StepSpec,
    pub group: &'t VariantGroup,
    pub variant: &'t OperationVariant,
}

/// Includes each post-processing group independently with probability
/// `post_scale * mass(group)`, then picks a member with probability
/// proportional to its frequency. Output follows table order.
pub fn select_postprocessing_subset<'t>(
    steps: &'t [StepSpec],
    post_scale: f64,
    rng: &mut RngStream,
) -> Result<Vec<PostChoice<'t>>, SamplerError> {
    if !(post_scale > 0.0 && post_scale <= 1.0) {
        return Err(SamplerError::BadPostScale(post_scale));
    }
    let mut out = Vec::new();
    for step in steps.iter().filter(|s| s.phase == Phase::Post) {
        for group in &step.groups {
            let p = (post_scale * group.mass()).min(1.0);
            if !rng.bernoulli(p) {
                continue;
            }
            let weights: Vec<f64> = group.variants.iter().map(|v| v.frequency).collect();
            if let Some(i) = rng.weighted_index(&weights) {
                out.push(PostChoice { step, group, variant: &group.variants[i] });
            }
        }
    }
    Ok(out)
}

fn resolve(
    t: TamperType,
    phase: Phase,
    v: &OperationVariant,
    model: &PopulationModel,
    rng: &mut RngStream,
) -> ResolvedOp {
    let params = v
        .params
        .iter()
        .map(|p| {
            let fitted = model.range_override(t, v.op_id, &v.name, &p.name);
            (p.name.clone(), sample_bounds(&p.bounds, fitted, rng))
        })
        .collect();
    ResolvedOp { op_id: v.op_id, variant: v.name.clone(), phase, params }
}

fn random_text(len: usize, rng: &mut RngStream) -> String {
    (0..len.max(1)).map(|_| TEXT_ALPHABET[rng.index(TEXT_ALPHABET.len())] as char).collect()
}

/// Unused region, preferring `first` then `second` kind.
fn take_region(
    regions: &[RegionAnnotation],
    used: &mut BTreeSet<usize>,
    order: &[RegionKind],
    rng: &mut RngStream,
) -> Option<usize> {
    for kind in order {
        let free: Vec<usize> =
            (0..regions.len()).filter(|i| !used.contains(i) && regions[*i].kind == *kind).collect();
        if !free.is_empty() {
            let i = free[rng.index(free.len())];
            used.insert(i);
            return Some(i);
        }
    }
    None
}

fn pick_source_region<'r>(
    regions: &'r [RegionAnnotation],
    exclude: Option<&str>,
    rng: &mut RngStream,
) -> Option<&'r RegionAnnotation> {
    let pool = |kind: Option<RegionKind>| -> Vec<&'r RegionAnnotation> {
        regions
            .iter()
            .filter(|r| Some(r.id.as_str()) != exclude && kind.is_none_or(|k| r.kind == k))
            .collect()
    };
    let mut cands = pool(Some(RegionKind::Text));
    if cands.is_empty() {
        cands = pool(None);
    }
    (!cands.is_empty()).then(|| cands[rng.index(cands.len())])
}

const NINE_GRID: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// Samples a full plan. A pure function of its arguments and the stream
/// state.
pub fn sample_plan(
    model: &PopulationModel,
    table: &ParameterTable,
    inputs: &PlanInputs<'_>,
    rng: &mut RngStream,
) -> Result<TamperingPlan, SamplerError> {
    let regions = inputs.regions;
    if regions.is_empty() {
        return Err(SamplerError::EmptyRegions);
    }
    let n = rng.range_i64(1, regions.len().min(MAX_REGIONS) as i64) as usize;
    // Splicing needs a second image; without one its weight is dropped and
    // the rest renormalized.
    let mut weights = model.type_weights.0.clone();
    if inputs.sources.iter().all(|s| s.regions.is_empty()) {
        weights[TamperType::Splicing.index()] = 0.0;
        if weights.iter().all(|w| *w <= 0.0) {
            return Err(SamplerError::NoSplicingSource);
        }
    }
    let mut used = BTreeSet::new();
    let mut items = Vec::with_capacity(n);

    for _ in 0..n {
        let t = TamperType::ALL[rng.weighted_index(&weights).unwrap_or(0)];
        let spec = table.type_spec(t).ok_or(SamplerError::MissingType(t))?;

        let order: &[RegionKind] = if t == TamperType::Insertion {
            &[RegionKind::NonText]
        } else {
            &[RegionKind::Text, RegionKind::NonText]
        };
        let target = match take_region(regions, &mut used, order, rng) {
            Some(i) => {
                let r = &regions[i];
                Target::Region { id: r.id.clone(), rect: r.rect, kind: r.kind, text: r.text.clone() }
            }
            None => {
                // Size the blank window like a typical text line.
                let like = &regions[rng.index(regions.len())].rect;
                Target::BlankSearch {
                    w: like.w.clamp(8, inputs.width.max(1)),
                    h: like.h.clamp(8, inputs.height.max(1)),
                }
            }
        };

        let mut ops = Vec::new();
        for step in spec.steps.iter().filter(|s| s.phase == Phase::Main) {
            for group in &step.groups {
                if let Some(v) = select_exclusive_variant(group, rng) {
                    ops.push(resolve(t, Phase::Main, v, model, rng));
                }
            }
        }
        for c in select_postprocessing_subset(&spec.steps, table.post_scale, rng)? {
            ops.push(resolve(t, Phase::Post, c.variant, model, rng));
        }
        if let Some(q) = ops.iter_mut().find(|o| o.op_id == OpId::new(1, 1)) {
            q.params.insert("region_quantity".into(), ParamValue::Int(n as i64));
        }

        let text_len = ops
            .iter()
            .find(|o| o.op_id == OpId::new(1, 2) || o.op_id == OpId::new(1, 3))
            .and_then(|o| o.param("text_length"))
            .and_then(ParamValue::as_i64)
            .unwrap_or(1);

        let mut item = PlanItem { type_id: t, target, source: None, paste_offset: None, text: None, color_ref: None, ops };
        match t {
            TamperType::CopyMove => {}
            TamperType::Splicing => {
                let pool: Vec<&SourceCandidate> = inputs.sources.iter().filter(|s| !s.regions.is_empty()).collect();
                if !pool.is_empty() {
                    let src = pool[rng.index(pool.len())];
                    if let Some(r) = pick_source_region(&src.regions, None, rng) {
                        item.source = Some(SourceRef {
                            image: Some(src.name.clone()),
                            region_id: r.id.clone(),
                            rect: r.rect,
                            text: r.text.clone(),
                        });
                    }
                }
            }
            TamperType::Insertion => {
                item.text = Some(random_text(text_len as usize, rng));
                let texts: Vec<&RegionAnnotation> = regions.iter().filter(|r| r.kind == RegionKind::Text).collect();
                if !texts.is_empty() {
                    item.color_ref = Some(texts[rng.index(texts.len())].rect);
                }
            }
            TamperType::Replacement => {
                item.text = Some(random_text(text_len as usize, rng));
            }
            TamperType::Removal => {}
        }
        items.push(item);
    }

    // Copy-move placement needs every target fixed first.
    let targets: Vec<Option<Rect>> = items.iter().map(|i| i.target.rect()).collect();
    for k in 0..items.len() {
        if items[k].type_id != TamperType::CopyMove {
            continue;
        }
        let Some(own) = targets[k] else { continue };
        let own_id = items[k].target.region_id().map(str::to_string);
        let placement = items[k].op(OpId::new(1, 4)).and_then(|o| o.param("target_region")).and_then(|p| p.as_str().map(str::to_string));
        let in_region = placement.as_deref() == Some("text-region-in-target");
        let src = if in_region { pick_source_region(regions, own_id.as_deref(), rng) } else { None };
        match src {
            Some(r) => {
                items[k].source = Some(SourceRef {
                    image: None,
                    region_id: r.id.clone(),
                    rect: r.rect,
                    text: r.text.clone(),
                });
            }
            None => {
                if in_region {
                    // Only one region in the image: fall back to a neighbour cell.
                    log::debug!("{}: no second region for copy-move, using 9-grid", inputs.sample_id);
                    if let Some(o) = items[k].ops.iter_mut().find(|o| o.op_id == OpId::new(1, 4)) {
                        o.params.insert("target_region".into(), ParamValue::Text("copy-area-nearby-9-grid".into()));
                    }
                }
                let others: Vec<Rect> =
                    targets.iter().enumerate().filter(|(j, _)| *j != k).filter_map(|(_, r)| *r).collect();
                let cells: Vec<(i64, i64)> = NINE_GRID
                    .iter()
                    .map(|(dx, dy)| (dx * own.w as i64, dy * own.h as i64))
                    .filter(|(ox, oy)| {
                        !Rect::clipped(own.x as i64 + ox, own.y as i64 + oy, own.w as i64, own.h as i64, inputs.width, inputs.height)
                            .is_empty()
                    })
                    .collect();
                let fits = |(ox, oy): &(i64, i64)| {
                    let (x, y) = (own.x as i64 + ox, own.y as i64 + oy);
                    x >= 0 && y >= 0 && x + own.w as i64 <= inputs.width as i64 && y + own.h as i64 <= inputs.height as i64
                };
                let clear = |c: &(i64, i64)| {
                    let r = Rect::clipped(own.x as i64 + c.0, own.y as i64 + c.1, own.w as i64, own.h as i64, inputs.width, inputs.height);
                    others.iter().all(|o| !o.overlaps(&r))
                };
                // Preference: fully inside and clear, clear, any.
                let inside_clear: Vec<(i64, i64)> = cells.iter().copied().filter(|c| fits(c) && clear(c)).collect();
                let any_clear: Vec<(i64, i64)> = cells.iter().copied().filter(clear).collect();
                let pool = [&inside_clear, &any_clear, &cells].into_iter().find(|p| !p.is_empty()).unwrap_or(&cells);
                if !pool.is_empty() {
                    items[k].paste_offset = Some(pool[rng.index(pool.len())]);
                }
                items[k].source = Some(SourceRef {
                    image: None,
                    region_id: own_id.clone().unwrap_or_default(),
                    rect: own,
                    text: items[k].target.text().map(str::to_string),
                });
            }
        }
    }

    Ok(TamperingPlan { sample_id: inputs.sample_id.to_string(), region_count: n, items })
}

/// Checks every resolved parameter of `plan` against `table`; returns the
/// offending `(op, param)` descriptions.
pub fn plan_bound_violations(plan: &TamperingPlan, table: &ParameterTable) -> Vec<String> {
    let mut bad = Vec::new();
    for item in &plan.items {
        let Some(spec) = table.type_spec(item.type_id) else {
            bad.push(format!("{}: type missing from table", item.type_id));
            continue;
        };
        let mut groups_seen = BTreeSet::new();
        for op in &item.ops {
            if !groups_seen.insert(op.op_id) {
                bad.push(format!("{}/{}: group resolved twice", item.type_id, op.op_id));
            }
            let Some(v) = spec.group(op.op_id).and_then(|g| g.variant(&op.variant)) else {
                bad.push(format!("{}/{}/{}: unknown variant", item.type_id, op.op_id, op.variant));
                continue;
            };
            for p in &v.params {
                match op.params.get(&p.name) {
                    Some(val) if p.bounds.contains(val) => {}
                    Some(val) => bad.push(format!("{}/{}/{}: {} out of bounds", item.type_id, op.op_id, p.name, val)),
                    None => bad.push(format!("{}/{}/{}: missing", item.type_id, op.op_id, p.name)),
                }
            }
        }
    }
    bad
}
