//! On-disk layout: `images/{id}.png`, `masks/{id}.png`, `meta/{id}.json`
//! and `manifest.json` at the root.

use std::fs;
use std::io::{Cursor, Write};
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use super::DatasetError;
use crate::pipeline::SampleRecord;
use crate::raster::{ImageBuffer, PixelMask};

pub const LAYOUT_VERSION: u32 = 1;

pub const MANIFEST_FILE: &str = "manifest.json";

fn codec(e: impl std::fmt::Display) -> DatasetError {
    DatasetError::Codec(e.to_string())
}

pub fn encode_png(img: &ImageBuffer) -> Result<Vec<u8>, DatasetError> {
    let (w, h) = img.dims();
    let rgb = RgbImage::from_raw(w, h, img.as_raw().to_vec()).expect("buffer length matches dims");
    let mut out = Cursor::new(Vec::new());
    rgb.write_to(&mut out, ImageFormat::Png).map_err(codec)?;
    Ok(out.into_inner())
}

/// Decodes any supported format to RGB8; alpha is dropped.
pub fn decode_png(bytes: &[u8]) -> Result<ImageBuffer, DatasetError> {
    let rgb = image::load_from_memory(bytes).map_err(codec)?.to_rgb8();
    let (w, h) = rgb.dimensions();
    ImageBuffer::from_raw(w, h, rgb.into_raw()).map_err(codec)
}

/// Single-channel PNG holding 0 or 255.
pub fn encode_mask(mask: &PixelMask) -> Result<Vec<u8>, DatasetError> {
    let (w, h) = mask.dims();
    let gray = GrayImage::from_raw(w, h, mask.bits().iter().map(|b| if *b { 255 } else { 0 }).collect())
        .expect("bit count matches dims");
    let mut out = Cursor::new(Vec::new());
    gray.write_to(&mut out, ImageFormat::Png).map_err(codec)?;
    Ok(out.into_inner())
}

/// Rejects values other than 0 and 255.
pub fn decode_mask(bytes: &[u8]) -> Result<PixelMask, DatasetError> {
    let gray = image::load_from_memory(bytes).map_err(codec)?.to_luma8();
    let (w, h) = gray.dimensions();
    if let Some(v) = gray.as_raw().iter().find(|v| **v != 0 && **v != 255) {
        return Err(DatasetError::Codec(format!("mask value {v} is neither 0 nor 255")));
    }
    PixelMask::from_bits(w, h, gray.as_raw().iter().map(|v| *v == 255).collect()).map_err(codec)
}

pub fn load_image(path: &Path) -> Result<ImageBuffer, DatasetError> {
    let bytes = fs::read(path).map_err(|e| DatasetError::io(path, e))?;
    decode_png(&bytes).map_err(|e| DatasetError::malformed(path, e.to_string()))
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SamplePaths {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub meta: PathBuf,
}

impl SamplePaths {
    pub fn new(root: &Path, sample_id: &str) -> Self {
        Self {
            image: root.join("images").join(format!("{sample_id}.png")),
            mask: root.join("masks").join(format!("{sample_id}.png")),
            meta: root.join("meta").join(format!("{sample_id}.json")),
        }
    }

    fn all(&self) -> [&Path; 3] {
        [&self.image, &self.mask, &self.meta]
    }
}

/// Writes via a hidden sibling and renames it into place.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), DatasetError> {
    let dir = path.parent().expect("sample paths have a parent");
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    let name = path.file_name().expect("sample paths have a file name").to_string_lossy();
    let tmp = dir.join(format!(".{name}.tmp"));
    let mut f = fs::File::create(&tmp).map_err(|e| DatasetError::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| DatasetError::io(&tmp, e))?;
    f.sync_all().map_err(|e| DatasetError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| DatasetError::io(path, e))
}

/// Writes one sample. The meta file goes last, so its presence marks a
/// complete sample. Existing files are an error unless `overwrite`.
pub fn write_sample(
    root: &Path,
    sample_id: &str,
    tampered: &ImageBuffer,
    mask: &PixelMask,
    record: &SampleRecord,
    overwrite: bool,
) -> Result<SamplePaths, DatasetError> {
    let paths = SamplePaths::new(root, sample_id);
    if !overwrite {
        if let Some(p) = paths.all().into_iter().find(|p| p.exists()) {
            return Err(DatasetError::Exists(p.to_path_buf()));
        }
    }
    if tampered.dims() != mask.dims() {
        return Err(DatasetError::DimensionMismatch(tampered.dims(), mask.dims()));
    }
    write_atomic(&paths.image, &encode_png(tampered)?)?;
    write_atomic(&paths.mask, &encode_mask(mask)?)?;
    write_atomic(&paths.meta, record.to_json().as_bytes())?;
    Ok(paths)
}

#[derive(Clone, Debug)]
pub struct StoredSample {
    pub tampered: ImageBuffer,
    pub mask: PixelMask,
    pub record: SampleRecord,
}

pub fn read_record(root: &Path, sample_id: &str) -> Result<SampleRecord, DatasetError> {
    let path = SamplePaths::new(root, sample_id).meta;
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    SampleRecord::from_json(&text).map_err(|e| DatasetError::malformed(&path, e.to_string()))
}

pub fn read_sample(root: &Path, sample_id: &str) -> Result<StoredSample, DatasetError> {
    let paths = SamplePaths::new(root, sample_id);
    let record = read_record(root, sample_id)?;
    let tampered = load_image(&paths.image)?;
    let bytes = fs::read(&paths.mask).map_err(|e| DatasetError::io(&paths.mask, e))?;
    let mask = decode_mask(&bytes).map_err(|e| DatasetError::malformed(&paths.mask, e.to_string()))?;
    Ok(StoredSample { tampered, mask, record })
}

/// One original image and its annotation sidecar.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestSource {
    pub name: String,
    pub image: PathBuf,
    pub annotations: PathBuf,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub layout_version: u32,
    pub seed: u64,
    pub sources: Vec<ManifestSource>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub table: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Sample ids written, in id order.
    pub samples: Vec<String>,
    /// Sample ids that failed and were skipped.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub skipped: Vec<String>,
}

pub fn write_manifest(root: &Path, manifest: &DatasetManifest) -> Result<PathBuf, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    let mut text = serde_json::to_string_pretty(manifest).expect("manifest serializes");
    text.push('\n');
    write_atomic(&path, text.as_bytes())?;
    Ok(path)
}

/// Reads the manifest and checks the layout version and that every
/// referenced file exists.
pub fn read_manifest(root: &Path) -> Result<DatasetManifest, DatasetError> {
    let path = root.join(MANIFEST_FILE);
    let text = fs::read_to_string(&path).map_err(|e| DatasetError::io(&path, e))?;
    let m: DatasetManifest = serde_json::from_str(&text).map_err(|e| DatasetError::malformed(&path, e.to_string()))?;
    if m.layout_version != LAYOUT_VERSION {
        return Err(DatasetError::malformed(&path, format!("layout_version {} is not supported", m.layout_version)));
    }
    let referenced = m
        .sources
        .iter()
        .flat_map(|s| [&s.image, &s.annotations])
        .chain(m.table.iter())
        .chain(m.model.iter());
    for p in referenced {
        if !p.exists() {
            return Err(DatasetError::malformed(&path, format!("referenced path {} does not exist", p.display())));
        }
    }
    Ok(m)
}
