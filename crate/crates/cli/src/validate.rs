use std::fs;
use std::io::Write;
use std::path::Path;

use serde::Serialize;
use tamperkit::dataset::{load_annotations, load_image, read_manifest, read_record, SamplePaths, MANIFEST_FILE};
use tamperkit::dataset::{decode_mask, DatasetManifest};
use tamperkit::pipeline::{generate_mask, replay_sample, SampleRecord, SourceImage};
use tamperkit::raster::{ImageBuffer, PixelMask};

use crate::{emit, CliError, CmdResult, Exit, ValidateArgs};

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Finding {
    pub sample_id: String,
    /// `schema`, `containment`, `locality`, `mask` or `replay`.
    pub check: String,
    pub message: String,
}

impl Finding {
    fn new(sample_id: &str, check: &str, message: impl Into<String>) -> Self {
        Self { sample_id: sample_id.into(), check: check.into(), message: message.into() }
    }
}

pub(crate) fn load_sources(manifest: &DatasetManifest) -> Result<Vec<SourceImage>, CliError> {
    manifest
        .sources
        .iter()
        .map(|s| {
            let image = load_image(&s.image)?;
            let regions = load_annotations(&s.annotations, image.width(), image.height())?;
            Ok(SourceImage { name: s.name.clone(), image, regions })
        })
        .collect()
}

pub fn cmd_validate(args: &ValidateArgs, out: &mut dyn Write) -> CmdResult {
    let root = &args.dataset;
    if !root.join(MANIFEST_FILE).is_file() || !["images", "masks", "meta"].iter().all(|d| root.join(d).is_dir()) {
        return Err(CliError(format!("{} is not a dataset (layout missing)", root.display())));
    }
    let manifest = read_manifest(root)?;
    let sources = load_sources(&manifest)?;

    let mut findings = Vec::new();
    for id in &manifest.samples {
        findings.extend(check_sample(root, id, &sources, !args.no_replay));
    }

    emit(out, format!("checked {} samples, {} findings", manifest.samples.len(), findings.len()));
    if findings.is_empty() {
        return Ok(Exit::Success);
    }
    for f in &findings {
        emit(out, format!("  {} [{}] {}", f.sample_id, f.check, f.message));
    }
    let path = args.findings.clone().unwrap_or_else(|| root.join("findings.json"));
    let json = serde_json::to_string_pretty(&findings).expect("findings serialize");
    fs::write(&path, json).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    emit(out, format!("findings written to {}", path.display()));
    Ok(Exit::CheckFailed)
}

fn check_sample(root: &Path, id: &str, sources: &[SourceImage], replay: bool) -> Vec<Finding> {
    let record = match read_record(root, id) {
        Ok(r) => r,
        Err(e) => return vec![Finding::new(id, "schema", e.to_string())],
    };
    if record.sample_id != id {
        return vec![Finding::new(id, "schema", format!("record names sample `{}`", record.sample_id))];
    }
    let Some(src) = sources.iter().find(|s| s.name == record.image) else {
        return vec![Finding::new(id, "schema", format!("original `{}` is not in the manifest", record.image))];
    };
    let paths = SamplePaths::new(root, id);
    let tampered = match load_image(&paths.image) {
        Ok(t) => t,
        Err(e) => return vec![Finding::new(id, "schema", e.to_string())],
    };
    let mask = match fs::read(&paths.mask).map_err(|e| e.to_string()).and_then(|b| decode_mask(&b).map_err(|e| e.to_string())) {
        Ok(m) => m,
        Err(e) => return vec![Finding::new(id, "schema", format!("{}: {e}", paths.mask.display()))],
    };
    let dims = (record.width, record.height);
    if tampered.dims() != dims || mask.dims() != dims || src.image.dims() != dims {
        return vec![Finding::new(id, "schema", "image, mask, original and record sizes differ")];
    }
    let mut out = check_pixels(id, &record, &src.image, &tampered, &mask);
    if replay {
        match replay_sample(&record, &src.image, sources) {
            Ok((img, _)) if img == tampered => {}
            Ok(_) => out.push(Finding::new(id, "replay", "replayed image differs from the stored one")),
            Err(e) => out.push(Finding::new(id, "replay", e.to_string())),
        }
    }
    out
}

/// Containment of the stored mask, locality of the edit, and agreement of
/// the stored mask with one regenerated from the pixels.
fn check_pixels(
    id: &str,
    record: &SampleRecord,
    original: &ImageBuffer,
    tampered: &ImageBuffer,
    mask: &PixelMask,
) -> Vec<Finding> {
    let mut out = Vec::new();
    let (w, h) = original.dims();
    let grown: Vec<_> = record.all_rects().iter().map(|r| r.expand(1, w, h)).collect();
    let (mut stray, mut unmasked) = (0usize, 0usize);
    for (x, y) in original.bounds().pixels() {
        if mask.get(x, y) && !grown.iter().any(|r| r.contains(x, y)) {
            stray += 1;
        }
        if !mask.get(x, y) && original.get(x, y) != tampered.get(x, y) {
            unmasked += 1;
        }
    }
    if stray > 0 {
        out.push(Finding::new(id, "containment", format!("{stray} mask pixels outside every effective geometry")));
    }
    if unmasked > 0 {
        out.push(Finding::new(id, "locality", format!("{unmasked} changed pixels outside the mask")));
    }
    match generate_mask(original, tampered, &record.all_rects()) {
        Ok(m) if &m == mask => {}
        Ok(m) => {
            let differ = m.bits().iter().zip(mask.bits()).filter(|(a, b)| a != b).count();
            out.push(Finding::new(id, "mask", format!("{differ} pixels differ from the regenerated mask")));
        }
        Err(e) => out.push(Finding::new(id, "containment", e.to_string())),
    }
    out
}
