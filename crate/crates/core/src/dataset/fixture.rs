//! Deterministic synthetic document corpus for tests and demos: textured
//! paper, a few lines of rendered text, a stamp and an empty area, with
//! annotation sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use super::{annotations_to_json, encode_png, DatasetError, RegionAnnotation, RegionKind};
use crate::raster::{render_text_into, AntiAlias, ImageBuffer, Rect, RegionGeometry, TextStyle};
use crate::sampler::derive_stream;

pub const FIXTURE_WIDTH: u32 = 256;
pub const FIXTURE_HEIGHT: u32 = 160;

const WORDS: &[&str] = &[
    "Invoice", "Total", "Amount", "Date", "Receipt", "Paid", "Balance", "Account", "Order", "Price", "Qty", "Tax",
    "Name", "Address", "Ref", "Due", "Station", "Ticket", "Seat", "Coach",
];

const FAMILIES: &[&str] = &["Times New Roman", "SimSun", "Microsoft YaHei", "SimHei", "KaiTi"];

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FixtureImage {
    pub name: String,
    pub image: PathBuf,
    pub annotations: PathBuf,
}

/// Builds fixture image `index` of corpus `seed`.
pub fn fixture_document(seed: u64, index: usize) -> (ImageBuffer, Vec<RegionAnnotation>) {
    let mut rng = derive_stream(seed, &format!("fixture/{index}"));
    let base = [
        rng.range_i64(215, 250) as u8,
        rng.range_i64(210, 245) as u8,
        rng.range_i64(200, 240) as u8,
    ];
    let grain = rng.range_i64(2, 8);
    let mut img = ImageBuffer::new(FIXTURE_WIDTH, FIXTURE_HEIGHT, base).expect("nonzero size");
    for (x, y) in img.bounds().pixels() {
        // Gentle vertical shading plus grain.
        let shade = (y as i64 * 10) / FIXTURE_HEIGHT as i64;
        let d = rng.range_i64(-grain, grain) - shade;
        let p = img.get(x, y);
        img.set(x, y, p.map(|v| (v as i64 + d).clamp(0, 255) as u8));
    }

    let ink = [rng.range_i64(10, 60) as u8, rng.range_i64(10, 60) as u8, rng.range_i64(20, 90) as u8];
    let mut regions = Vec::new();
    // Two columns, four rows of text lines; each slot filled with
    // probability 0.8.
    for row in 0..4u32 {
        for col in 0..2u32 {
            if !rng.bernoulli(0.8) {
                continue;
            }
            let word = WORDS[rng.index(WORDS.len())];
            let digits = rng.range_i64(0, 3) as usize;
            let text: String = word
                .chars()
                .chain((0..digits).map(|_| char::from(b'0' + rng.range_i64(0, 9) as u8)))
                .collect();
            let h = rng.range_i64(14, 22) as u32;
            let w = (text.chars().count() as u32 * h * 11 / 20).clamp(24, 112);
            let x = 8 + col * 124 + rng.range_i64(0, 6) as u32;
            let y = 8 + row * 30 + rng.range_i64(0, 4) as u32;
            let rect = Rect::new(x, y, w, h);
            let style = TextStyle {
                family: FAMILIES[rng.index(FAMILIES.len())].into(),
                size: None,
                color: ink,
                anti_alias: AntiAlias::Smooth,
            };
            img = render_text_into(&img, &RegionGeometry::rect(rect), &text, &style).expect("slot inside image").0;
            regions.push(RegionAnnotation { id: format!("t{}", regions.len()), rect, kind: RegionKind::Text, text: Some(text) });
        }
    }
    if regions.is_empty() {
        let rect = Rect::new(8, 8, 80, 18);
        let style = TextStyle { family: "Times New Roman".into(), size: None, color: ink, anti_alias: AntiAlias::Smooth };
        img = render_text_into(&img, &RegionGeometry::rect(rect), "Total", &style).expect("slot inside image").0;
        regions.push(RegionAnnotation { id: "t0".into(), rect, kind: RegionKind::Text, text: Some("Total".into()) });
    }

    // Red stamp: a ring in the lower right.
    let stamp = Rect::new(196, 126, 30, 30);
    let (cx, cy) = stamp.center();
    for (x, y) in stamp.pixels() {
        let d = ((x as f64 + 0.5 - cx).powi(2) + (y as f64 + 0.5 - cy).powi(2)).sqrt();
        if (10.0..14.0).contains(&d) {
            img.set(x, y, [190, 40, 40]);
        }
    }
    regions.push(RegionAnnotation { id: "stamp".into(), rect: stamp, kind: RegionKind::NonText, text: None });
    // Empty paper where text could be inserted.
    regions.push(RegionAnnotation {
        id: "blank".into(),
        rect: Rect::new(16, 128, 120, 20),
        kind: RegionKind::NonText,
        text: None,
    });
    (img, regions)
}

/// Writes `count` fixture images as `{dir}/docNN.png` with sidecars
/// `{dir}/docNN.json`.
pub fn generate_fixture_corpus(dir: &Path, count: usize, seed: u64) -> Result<Vec<FixtureImage>, DatasetError> {
    fs::create_dir_all(dir).map_err(|e| DatasetError::io(dir, e))?;
    (0..count)
        .map(|i| {
            let name = format!("doc{i:02}");
            let (img, regions) = fixture_document(seed, i);
            let image = dir.join(format!("{name}.png"));
            let annotations = dir.join(format!("{name}.json"));
            fs::write(&image, encode_png(&img)?).map_err(|e| DatasetError::io(&image, e))?;
            fs::write(&annotations, annotations_to_json(&regions)).map_err(|e| DatasetError::io(&annotations, e))?;
            Ok(FixtureImage { name, image, annotations })
        })
        .collect()
}
