use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use tamperkit::dataset::{
    load_annotations, load_image, write_manifest, write_sample, DatasetManifest, ManifestSource, RegionAnnotation,
    LAYOUT_VERSION, MANIFEST_FILE,
};
use tamperkit::model::{ParameterTable, PopulationModel, TamperType};
use tamperkit::pipeline::{synthesize_sample, SourceImage, SynthRequest};

use crate::{emit, load_model, load_table, CliError, CmdResult, Exit, SynthArgs};

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];

pub(crate) fn sample_id(i: usize) -> String {
    format!("s{i:06}")
}

fn canonical(p: &Path) -> Result<PathBuf, CliError> {
    fs::canonicalize(p).map_err(|e| CliError(format!("{}: {e}", p.display())))
}

/// Image files of `dir`, sorted by file name.
pub(crate) fn list_images(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    let mut files: Vec<PathBuf> = entries
        .filter_map(Result::ok)
        .map(|e| e.path())
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    files.sort();
    Ok(files)
}

fn stem(p: &Path) -> String {
    p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default()
}

/// A source image slot; `loaded` indexes the pool, `None` when the image
/// cannot be used (reason logged).
struct Slot {
    name: String,
    loaded: Option<usize>,
}

enum SampleOutcome {
    Written { mask_pixels: usize, pixels: usize, types: Vec<TamperType> },
    Skipped(String),
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> CmdResult {
    let start = Instant::now();
    let table = load_table(args.table.as_deref())?;
    let model = match &args.model {
        Some(p) => load_model(p)?,
        None => PopulationModel::from_table(&table)?,
    };
    if args.jobs == 0 {
        return Err(CliError("--jobs must be at least 1".into()));
    }
    if args.out.join(MANIFEST_FILE).exists() && !args.overwrite {
        return Err(CliError(format!("{} already holds a dataset; pass --overwrite", args.out.display())));
    }

    let ann_dir = args.annotations.clone().unwrap_or_else(|| args.sources.clone());
    let files = list_images(&args.sources)?;
    if files.is_empty() {
        return Err(CliError(format!("no images in {}", args.sources.display())));
    }
    let mut warnings = 0usize;
    let mut slots = Vec::with_capacity(files.len());
    let mut manifest_sources = Vec::new();
    let mut pool: Vec<SourceImage> = Vec::new();
    for f in &files {
        let name = stem(f);
        let ann = ann_dir.join(format!("{name}.json"));
        let loaded = match load_source(f, &ann, &name) {
            Ok(Some(src)) => {
                manifest_sources.push(ManifestSource { name: name.clone(), image: canonical(f)?, annotations: canonical(&ann)? });
                pool.push(src);
                Some(pool.len() - 1)
            }
            Ok(None) => {
                log::warn!("{name}: no regions annotated, its samples are skipped");
                warnings += 1;
                None
            }
            Err(e) => {
                log::warn!("{name}: {e}; its samples are skipped");
                warnings += 1;
                None
            }
        };
        slots.push(Slot { name, loaded });
    }

    let ids: Vec<String> = (0..args.count).map(sample_id).collect();
    let threads = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs)
        .build()
        .map_err(|e| CliError(e.to_string()))?;
    let ctx = Ctx { args, table: &table, model: &model, slots: &slots, pool: &pool };
    let results: Vec<Result<SampleOutcome, String>> = threads.install(|| {
        ids.par_iter().enumerate().map(|(i, id)| ctx.one(i, id)).collect()
    });

    let mut written = Vec::new();
    let mut skipped = Vec::new();
    let mut type_counts: BTreeMap<TamperType, usize> = BTreeMap::new();
    let (mut mask_pixels, mut pixels) = (0usize, 0usize);
    for (id, r) in ids.iter().zip(results) {
        match r {
            Ok(SampleOutcome::Written { mask_pixels: m, pixels: p, types }) => {
                written.push(id.clone());
                mask_pixels += m;
                pixels += p;
                for t in types {
                    *type_counts.entry(t).or_default() += 1;
                }
            }
            Ok(SampleOutcome::Skipped(why)) => {
                log::info!("{id}: skipped ({why})");
                skipped.push(id.clone());
            }
            Err(e) => {
                if args.strict {
                    eprintln!("error: {id}: {e}");
                    return Ok(Exit::CheckFailed);
                }
                log::warn!("{id}: {e}; skipped");
                warnings += 1;
                skipped.push(id.clone());
            }
        }
    }

    let manifest = DatasetManifest {
        layout_version: LAYOUT_VERSION,
        seed: args.seed,
        sources: manifest_sources,
        table: args.table.as_deref().map(canonical).transpose()?,
        model: args.model.as_deref().map(canonical).transpose()?,
        samples: written.clone(),
        skipped: skipped.clone(),
    };
    write_manifest(&args.out, &manifest)?;

    emit(out, format!("samples written {}  skipped {}  warnings {}", written.len(), skipped.len(), warnings));
    for (t, c) in &type_counts {
        emit(out, format!("  {:<12} {c} items", t.as_str()));
    }
    if pixels > 0 {
        emit(out, format!("mean mask coverage {:.2}%", 100.0 * mask_pixels as f64 / pixels as f64));
    }
    emit(out, format!("elapsed {:.1}s", start.elapsed().as_secs_f64()));
    Ok(Exit::Success)
}

fn load_source(image: &Path, ann: &Path, name: &str) -> Result<Option<SourceImage>, CliError> {
    if !ann.exists() {
        return Err(CliError(format!("annotation file {} not found", ann.display())));
    }
    let img = load_image(image)?;
    let regions: Vec<RegionAnnotation> = load_annotations(ann, img.width(), img.height())?;
    if regions.is_empty() {
        return Ok(None);
    }
    Ok(Some(SourceImage { name: name.to_string(), image: img, regions }))
}

struct Ctx<'a> {
    args: &'a SynthArgs,
    table: &'a ParameterTable,
    model: &'a PopulationModel,
    slots: &'a [Slot],
    pool: &'a [SourceImage],
}

impl Ctx<'_> {
    /// Sample `i` edits source `i mod n`; its randomness depends only on
    /// the seed and the id.
    fn one(&self, i: usize, id: &str) -> Result<SampleOutcome, String> {
        let slot = &self.slots[i % self.slots.len()];
        let Some(src) = slot.loaded.map(|k| &self.pool[k]) else {
            return Ok(SampleOutcome::Skipped(format!("source {} unusable", slot.name)));
        };
        let req = SynthRequest {
            image_name: &src.name,
            original: &src.image,
            regions: &src.regions,
            sources: self.pool,
            model: self.model,
            table: self.table,
            seed: self.args.seed,
            sample_id: id,
            record_timings: self.args.timings,
        };
        let s = synthesize_sample(&req).map_err(|e| e.to_string())?;
        write_sample(&self.args.out, id, &s.tampered, &s.mask, &s.record, self.args.overwrite).map_err(|e| e.to_string())?;
        let (w, h) = s.mask.dims();
        Ok(SampleOutcome::Written {
            mask_pixels: s.mask.count(),
            pixels: (w * h) as usize,
            types: s.record.plan.items.iter().map(|it| it.type_id).collect(),
        })
    }
}
