//! Plan execution, ground-truth masks and per-sample synthesis.
//!
//! Items run in plan order on one working buffer. Item `i` draws from the
//! stream `derive_stream(seed, sample_id).fork("exec/{i}")`; the plan
//! itself from `.fork("plan")`. A [`SampleRecord`] therefore fully
//! determines the output given the original and source images.

mod exec;
mod mask;
mod post;

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::RegionAnnotation;
use crate::model::{ParameterTable, PopulationModel, TamperType};
use crate::raster::{ImageBuffer, PixelMask, RasterError, Rect};
use crate::sampler::{derive_stream, sample_plan, PlanInputs, SamplerError, SourceCandidate, TamperingPlan};

pub use exec::{
    execute_copy_move, execute_insertion, execute_item, execute_removal, execute_replacement, execute_splicing,
    find_blank_window, Outcome, MIN_TEXT_HEIGHT,
};
pub use mask::{generate_mask, DIFF_THRESHOLD};
pub use post::{extract_method, post_spec, removal_spec, text_style, PostSpec};

pub const RECORD_FORMAT_VERSION: u32 = 1;

#[derive(thiserror::Error, Debug)]
pub enum PipelineError {
    #[error(transparent)]
    Raster(#[from] RasterError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error("image dimensions {0:?} and {1:?} differ")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("{0} mask pixels lie outside every effective geometry")]
    Containment(usize),
    #[error("plan item {index} ({type_id}): {source}")]
    Item { index: usize, type_id: TamperType, source: Box<PipelineError> },
    #[error("splicing source `{0}` is not in the source pool")]
    MissingSource(String),
    #[error("splicing source must differ from the target image")]
    SameImage,
    #[error("invalid operation parameter: {0}")]
    BadParam(String),
    #[error("region {0:?} is too small for text")]
    RegionTooSmall(Rect),
    #[error("no blank {0}x{1} window clear of other targets")]
    NoBlankWindow(u32, u32),
    #[error("inconsistent plan: {0}")]
    Plan(String),
    #[error("record format_version {0} is not supported")]
    Version(u32),
    #[error("malformed record: {0}")]
    Record(String),
}

/// An image splicing may copy from.
#[derive(Clone, Debug)]
pub struct SourceImage {
    pub name: String,
    pub image: ImageBuffer,
    pub regions: Vec<RegionAnnotation>,
}

/// Rectangles one plan item may have modified, tagged with its type so
/// masks can be coloured per type downstream.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemGeometry {
    pub item: usize,
    pub type_id: TamperType,
    pub rects: Vec<Rect>,
}

/// Everything needed to re-run a sample.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub format_version: u32,
    pub sample_id: String,
    pub seed: u64,
    /// Name of the original image.
    pub image: String,
    pub width: u32,
    pub height: u32,
    pub plan: TamperingPlan,
    pub geometries: Vec<ItemGeometry>,
    /// Wall-clock time per item; only recorded on request since it breaks
    /// byte-identical output.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timings_ms: Option<Vec<f64>>,
}

impl SampleRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("record serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, PipelineError> {
        #[derive(Deserialize)]
        struct Probe {
            format_version: u32,
        }
        let probe: Probe = serde_json::from_str(text).map_err(|e| PipelineError::Record(e.to_string()))?;
        if probe.format_version != RECORD_FORMAT_VERSION {
            return Err(PipelineError::Version(probe.format_version));
        }
        serde_json::from_str(text).map_err(|e| PipelineError::Record(e.to_string()))
    }

    /// Union of all effective rectangles.
    pub fn all_rects(&self) -> Vec<Rect> {
        self.geometries.iter().flat_map(|g| g.rects.iter().copied()).collect()
    }
}

/// Inputs of one synthesized sample.
#[derive(Clone, Copy, Debug)]
pub struct SynthRequest<'a> {
    pub image_name: &'a str,
    pub original: &'a ImageBuffer,
    pub regions: &'a [RegionAnnotation],
    /// Splicing pool; the sampler never picks the entry named like the
    /// target.
    pub sources: &'a [SourceImage],
    pub model: &'a PopulationModel,
    pub table: &'a ParameterTable,
    pub seed: u64,
    pub sample_id: &'a str,
    pub record_timings: bool,
}

#[derive(Clone, Debug)]
pub struct Synthesized {
    pub tampered: ImageBuffer,
    pub mask: PixelMask,
    pub record: SampleRecord,
}

/// Runs `plan` on a copy of `original`. Returns the tampered image, the
/// per-item geometries and per-item timings.
pub fn execute_plan(
    original: &ImageBuffer,
    plan: &TamperingPlan,
    sources: &[SourceImage],
    seed: u64,
) -> Result<(ImageBuffer, Vec<ItemGeometry>, Vec<f64>), PipelineError> {
    let base = derive_stream(seed, &plan.sample_id);
    let mut work = original.clone();
    let mut geometries = Vec::with_capacity(plan.items.len());
    let mut timings = Vec::with_capacity(plan.items.len());
    let targets: Vec<Option<Rect>> = plan.items.iter().map(|i| i.target.rect()).collect();
    for (i, item) in plan.items.iter().enumerate() {
        let start = Instant::now();
        let avoid: Vec<Rect> =
            targets.iter().enumerate().filter(|(j, _)| *j != i).filter_map(|(_, r)| *r).collect();
        let mut rng = base.fork(&format!("exec/{i}"));
        let (img, rects) = exec::execute_item(&work, item, sources, &avoid, &mut rng)
            .map_err(|e| PipelineError::Item { index: i, type_id: item.type_id, source: Box::new(e) })?;
        work = img;
        geometries.push(ItemGeometry { item: i, type_id: item.type_id, rects });
        timings.push(start.elapsed().as_secs_f64() * 1e3);
    }
    Ok((work, geometries, timings))
}

/// Samples a plan, executes it and derives the mask. Deterministic in the
/// request (timings aside).
pub fn synthesize_sample(req: &SynthRequest<'_>) -> Result<Synthesized, PipelineError> {
    let candidates: Vec<SourceCandidate> = req
        .sources
        .iter()
        .filter(|s| s.name != req.image_name && !s.regions.is_empty())
        .map(|s| SourceCandidate { name: s.name.clone(), regions: s.regions.clone() })
        .collect();
    let (width, height) = req.original.dims();
    let inputs = PlanInputs { sample_id: req.sample_id, width, height, regions: req.regions, sources: &candidates };
    let mut rng = derive_stream(req.seed, req.sample_id).fork("plan");
    let plan = sample_plan(req.model, req.table, &inputs, &mut rng)?;
    let (tampered, geometries, timings) = execute_plan(req.original, &plan, req.sources, req.seed)?;
    let record = SampleRecord {
        format_version: RECORD_FORMAT_VERSION,
        sample_id: req.sample_id.to_string(),
        seed: req.seed,
        image: req.image_name.to_string(),
        width,
        height,
        plan,
        geometries,
        timings_ms: req.record_timings.then_some(timings),
    };
    let mask = generate_mask(req.original, &tampered, &record.all_rects())?;
    Ok(Synthesized { tampered, mask, record })
}

/// Re-executes a record against its original (and splicing sources).
/// Fails if the re-run reports different geometries.
pub fn replay_sample(
    record: &SampleRecord,
    original: &ImageBuffer,
    sources: &[SourceImage],
) -> Result<(ImageBuffer, PixelMask), PipelineError> {
    if original.dims() != (record.width, record.height) {
        return Err(PipelineError::DimensionMismatch((record.width, record.height), original.dims()));
    }
    let (tampered, geometries, _) = execute_plan(original, &record.plan, sources, record.seed)?;
    if geometries != record.geometries {
        return Err(PipelineError::Record("replayed geometries differ from the record".into()));
    }
    let mask = generate_mask(original, &tampered, &record.all_rects())?;
    Ok((tampered, mask))
}
