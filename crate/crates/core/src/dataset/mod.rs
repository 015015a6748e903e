//! Files in and out: region annotations, edit logs, the on-disk sample
//! layout, fixture corpora, and mask metrics.

mod fixture;
mod io;
mod logs;
mod metrics;
mod report;

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::raster::Rect;

pub use fixture::{fixture_document, generate_fixture_corpus, FixtureImage, FIXTURE_HEIGHT, FIXTURE_WIDTH};
pub use io::{
    decode_mask, decode_png, encode_mask, encode_png, load_image, read_manifest, read_record, read_sample,
    write_manifest, write_sample, DatasetManifest, ManifestSource, SamplePaths, StoredSample, LAYOUT_VERSION,
    MANIFEST_FILE,
};
pub use logs::{load_edit_logs, parse_edit_log, LogSet};
pub use metrics::{pixel_auc, pixel_f1};
pub use report::{
    frequency_report, frequency_report_from_logs, ChiSquareTest, GroupReport, MaskMetrics, MetricsReport, SampleMetric,
    TopOperation, TypeSummary, VariantRow, TOP_OPERATIONS,
};

#[derive(thiserror::Error, Debug)]
pub enum DatasetError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{path}: {message}")]
    Malformed { path: PathBuf, message: String },
    #[error("{path}:{line}: {message}")]
    BadLine { path: PathBuf, line: usize, message: String },
    #[error("region `{id}` {rect:?} exceeds image bounds {width}x{height}")]
    RegionOutOfBounds { id: String, rect: Rect, width: u32, height: u32 },
    #[error("{0} already exists; pass overwrite to replace it")]
    Exists(PathBuf),
    #[error("mask dimensions {0:?} differ from {1:?}")]
    DimensionMismatch((u32, u32), (u32, u32)),
    #[error("ground truth contains a single class; AUC is undefined")]
    SingleClass,
    #[error("no edit logs found in {0}")]
    NoLogs(PathBuf),
    #[error("image codec: {0}")]
    Codec(String),
}

impl DatasetError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        DatasetError::Io { path: path.to_path_buf(), source }
    }

    pub(crate) fn malformed(path: &Path, message: impl Into<String>) -> Self {
        DatasetError::Malformed { path: path.to_path_buf(), message: message.into() }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RegionKind {
    Text,
    NonText,
}

/// One annotated rectangle of an image. Serialized flat as
/// `{id, x, y, w, h, kind, text?}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegionAnnotation {
    pub id: String,
    #[serde(flatten)]
    pub rect: Rect,
    pub kind: RegionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// Parses an annotation document and checks every rectangle against the
/// image size. Whitespace-only input is an empty list.
pub fn parse_annotations(
    text: &str,
    path: &Path,
    width: u32,
    height: u32,
) -> Result<Vec<RegionAnnotation>, DatasetError> {
    if text.trim().is_empty() {
        return Ok(Vec::new());
    }
    let regions: Vec<RegionAnnotation> =
        serde_json::from_str(text).map_err(|e| DatasetError::malformed(path, e.to_string()))?;
    let bounds = Rect::new(0, 0, width, height);
    for r in &regions {
        if r.rect.is_empty() || !bounds.contains_rect(&r.rect) {
            return Err(DatasetError::RegionOutOfBounds { id: r.id.clone(), rect: r.rect, width, height });
        }
    }
    let mut ids: Vec<&str> = regions.iter().map(|r| r.id.as_str()).collect();
    ids.sort_unstable();
    if let Some(w) = ids.windows(2).find(|w| w[0] == w[1]) {
        return Err(DatasetError::malformed(path, format!("duplicate region id `{}`", w[0])));
    }
    Ok(regions)
}

pub fn load_annotations(path: &Path, width: u32, height: u32) -> Result<Vec<RegionAnnotation>, DatasetError> {
    let text = std::fs::read_to_string(path).map_err(|e| DatasetError::io(path, e))?;
    parse_annotations(&text, path, width, height)
}

pub fn annotations_to_json(regions: &[RegionAnnotation]) -> String {
    serde_json::to_string_pretty(regions).expect("annotations serialize")
}
