//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any fails.
//!
//! `cargo test -p tamperkit-cli --test acceptance`

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use statrs::distribution::{ChiSquared, ContinuousCDF};
use tamperkit::dataset::{
    fixture_document, frequency_report, generate_fixture_corpus, pixel_auc, pixel_f1, DatasetError,
};
use tamperkit::model::{
    aggregate_population, fit_individual, reference_population, CoefficientVector, EditLogRecord, LogSimulator, OpId,
    ParameterTable, Phase, PopulationModel, TamperType,
};
use tamperkit::pipeline::{replay_sample, synthesize_sample, SampleRecord, SourceImage, SynthRequest};
use tamperkit::raster::{
    apply_color_adjustment, apply_effect, apply_filter, curve_lut, levels_lut, transform_layer, Channel, ColorSpec,
    CurveKind, EffectSpec, FilterSpec, ImageBuffer, Layer, NoiseDistribution, PixelMask, Rect, RegionGeometry, Scale,
};
use tamperkit::sampler::{derive_stream, sample_plan, select_postprocessing_subset, PlanInputs, RngStream, SourceCandidate};
use tamperkit_cli::run_from;

type Outcome = Result<String, String>;

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn cli(args: &[&str]) -> (u8, String) {
    let mut out = Vec::new();
    let code = run_from(std::iter::once("tamperkit").chain(args.iter().copied()), &mut out);
    (code, String::from_utf8_lossy(&out).into_owned())
}

fn s(p: &Path) -> &str {
    p.to_str().expect("utf-8 temp path")
}

fn sources(n: usize, seed: u64) -> Vec<SourceImage> {
    (0..n)
        .map(|i| {
            let (image, regions) = fixture_document(seed, i);
            SourceImage { name: format!("doc{i:02}"), image, regions }
        })
        .collect()
}

/// Relative path -> bytes for every file below `root`.
fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<PathBuf, Vec<u8>>) {
        for e in fs::read_dir(dir).unwrap().map(Result::unwrap) {
            let p = e.path();
            if p.is_dir() {
                walk(root, &p, out);
            } else {
                out.insert(p.strip_prefix(root).unwrap().to_path_buf(), fs::read(&p).unwrap());
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(root, root, &mut out);
    out
}

// 1 ---------------------------------------------------------------------

fn determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let fx = dir.path().join("fixtures");
    generate_fixture_corpus(&fx, 20, 1).map_err(|e| e.to_string())?;
    let mut trees = Vec::new();
    let mut times = Vec::new();
    for (run, jobs) in [("a", "1"), ("b", "1"), ("c", "8")] {
        let out = dir.path().join(run);
        let t = Instant::now();
        let (code, text) =
            cli(&["synth", "--sources", s(&fx), "--seed", "42", "--count", "100", "--jobs", jobs, "--out", s(&out)]);
        times.push(t.elapsed().as_secs_f64());
        ensure(code == 0, || format!("synth exit {code}: {text}"))?;
        trees.push(tree(&out));
    }
    let files = trees[0].len();
    ensure(files == 301, || format!("expected 301 files, found {files}"))?;
    ensure(trees[0] == trees[1], || "two --jobs 1 runs differ".into())?;
    ensure(trees[0] == trees[2], || "--jobs 1 and --jobs 8 differ".into())?;
    let slowest = times.iter().cloned().fold(0.0, f64::max);
    ensure(slowest < 60.0, || format!("slowest run {slowest:.1}s exceeds 60s"))?;
    Ok(format!("{files} files identical across 3 runs (jobs 1,1,8); slowest {slowest:.1}s"))
}

// 2 ---------------------------------------------------------------------

/// Pearson statistic and upper-tail p, computed here independently of the
/// report.
fn pearson_p(observed: &[f64], probs: &[f64]) -> f64 {
    let n: f64 = observed.iter().sum();
    if observed.iter().zip(probs).any(|(o, p)| *o > 0.0 && *p <= 0.0) {
        return 0.0;
    }
    let cells: Vec<(f64, f64)> = observed.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(o, p)| (*o, p * n)).collect();
    if cells.len() < 2 {
        return 1.0;
    }
    let stat: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    ChiSquared::new((cells.len() - 1) as f64).unwrap().sf(stat)
}

fn frequency_fidelity() -> Outcome {
    let table = ParameterTable::default_table();
    let (img, regions) = fixture_document(9, 0);
    let regions = &regions[..1];
    let donor = [SourceCandidate { name: "donor".into(), regions: fixture_document(9, 1).1 }];
    let mut worst_dev: f64 = 0.0;
    let mut worst_p: f64 = 1.0;
    let mut groups = 0;
    let mut replacement = BTreeMap::new();
    for t in TamperType::ALL {
        let model = PopulationModel::with_weights(CoefficientVector::only(t)).unwrap();
        let records: Vec<SampleRecord> = (0..20_000)
            .map(|i| {
                let id = format!("p{i}");
                let inputs =
                    PlanInputs { sample_id: &id, width: img.width(), height: img.height(), regions, sources: &donor };
                let plan = sample_plan(&model, &table, &inputs, &mut derive_stream(2024, &id).fork("plan")).unwrap();
                SampleRecord {
                    format_version: 1,
                    sample_id: id.clone(),
                    seed: 2024,
                    image: "doc".into(),
                    width: img.width(),
                    height: img.height(),
                    plan,
                    geometries: Vec::new(),
                    timings_ms: None,
                }
            })
            .collect();
        let report = frequency_report(&records, &table);
        let spec = table.type_spec(t).unwrap();
        for g in report.groups.iter().filter(|g| g.type_id == t) {
            ensure(g.trials == 20_000, || format!("{t} {}: {} trials", g.op_id, g.trials))?;
            groups += 1;
            let step = spec.step_of(g.op_id).unwrap();
            let group = spec.group(g.op_id).unwrap();
            // Configured marginals recomputed from the table.
            let (probs, none): (Vec<f64>, f64) = if step.phase == Phase::Post {
                let incl = (table.post_scale * group.mass()).min(1.0);
                (group.variants.iter().map(|v| incl * v.frequency / group.mass()).collect(), 1.0 - incl)
            } else {
                (group.variants.iter().map(|v| v.frequency).collect(), group.residual_none)
            };
            let mut observed = Vec::new();
            for (row, p) in g.rows.iter().zip(&probs) {
                let dev = (row.empirical - p).abs();
                worst_dev = worst_dev.max(dev);
                ensure(dev <= 0.015, || format!("{t} {} {}: {:.4} vs {p:.4}", g.op_id, row.variant, row.empirical))?;
                observed.push(row.count as f64);
                if t == TamperType::Replacement && g.op_id == OpId::new(2, 1) {
                    replacement.insert(row.variant.clone(), (row.empirical, *p));
                }
            }
            observed.push(g.none_count as f64);
            let mut all = probs.clone();
            all.push(none);
            let p = pearson_p(&observed, &all);
            worst_p = worst_p.min(p);
            ensure(p > 0.001, || format!("{t} {}: chi-square p {p:.5}", g.op_id))?;
        }
    }
    for (name, paper) in [("content-aware-fill", 0.617), ("solid-color-fill", 0.096), ("clone-stamp", 0.104)] {
        let (emp, configured) = replacement[name];
        ensure((configured - paper).abs() < 1e-12, || format!("table {name} = {configured}, expected {paper}"))?;
        ensure((emp - paper).abs() <= 0.015, || format!("{name} empirical {emp:.4} vs {paper}"))?;
    }
    Ok(format!(
        "{groups} groups, max |dev| {:.2}pp, min p {worst_p:.4}; CAF {:.2}% solid {:.2}% clone-stamp {:.2}%",
        worst_dev * 100.0,
        replacement["content-aware-fill"].0 * 100.0,
        replacement["solid-color-fill"].0 * 100.0,
        replacement["clone-stamp"].0 * 100.0
    ))
}

// 3 ---------------------------------------------------------------------

fn post_scaling() -> Outcome {
    let table = ParameterTable::default_table();
    let spec = table.type_spec(TamperType::CopyMove).unwrap();
    let gb = spec.group(OpId::new(3, 2)).and_then(|g| g.variant("gaussian-blur")).ok_or("no copy-move gaussian-blur")?;
    ensure((gb.frequency - 0.127).abs() < 1e-12, || format!("table frequency {}", gb.frequency))?;
    let expected = table.post_scale * gb.frequency;
    let mut rng: RngStream = derive_stream(7, "post-scaling");
    let n = 100_000;
    let mut hits = 0usize;
    for _ in 0..n {
        let chosen = select_postprocessing_subset(&spec.steps, table.post_scale, &mut rng).map_err(|e| e.to_string())?;
        hits += chosen.iter().filter(|c| c.variant.name == "gaussian-blur").count();
    }
    let rate = hits as f64 / n as f64;
    ensure((rate - 0.0381).abs() <= 0.004, || format!("rate {:.3}% vs 3.81%", rate * 100.0))?;
    Ok(format!("{:.3}% over {n} draws (expected {:.2}%)", rate * 100.0, expected * 100.0))
}

// 4 ---------------------------------------------------------------------

fn locality() -> Outcome {
    let table = ParameterTable::default_table();
    let model = PopulationModel::from_table(&table).unwrap();
    let pool = sources(20, 11);
    let (mut outside, mut changed_unmasked, mut masked) = (0usize, 0usize, 0usize);
    for i in 0..200 {
        let src = &pool[i % pool.len()];
        let id = format!("s{i:06}");
        let req = SynthRequest {
            image_name: &src.name,
            original: &src.image,
            regions: &src.regions,
            sources: &pool,
            model: &model,
            table: &table,
            seed: 99,
            sample_id: &id,
            record_timings: false,
        };
        let out = synthesize_sample(&req).map_err(|e| format!("{id}: {e}"))?;
        let (w, h) = src.image.dims();
        let grown: Vec<Rect> = out.record.all_rects().iter().map(|r| r.expand(1, w, h)).collect();
        for (x, y) in src.image.bounds().pixels() {
            if out.mask.get(x, y) {
                masked += 1;
                if !grown.iter().any(|r| r.contains(x, y)) {
                    outside += 1;
                }
            } else if out.tampered.get(x, y) != src.image.get(x, y) {
                changed_unmasked += 1;
            }
        }
    }
    ensure(outside == 0 && changed_unmasked == 0, || {
        format!("{outside} mask pixels outside geometry, {changed_unmasked} changed pixels outside mask")
    })?;
    Ok(format!("200 samples, {masked} mask pixels, 0 containment and 0 locality violations"))
}

// 5 ---------------------------------------------------------------------

fn fit_recovery() -> Outcome {
    let table = ParameterTable::default_table();
    let mut truth = reference_population(&table);
    truth.type_weights = CoefficientVector(vec![0.30, 0.15, 0.20, 0.10, 0.25]);
    let logs = LogSimulator::new(&table, &truth).generate(20, 50, 31);

    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let log_dir = dir.path().join("logs");
    fs::create_dir(&log_dir).unwrap();
    let mut by_tamperer: BTreeMap<&str, Vec<String>> = BTreeMap::new();
    for r in &logs {
        by_tamperer.entry(&r.tamperer_id).or_default().push(r.to_line());
    }
    for (who, lines) in &by_tamperer {
        fs::write(log_dir.join(format!("{who}.tsv")), lines.join("\n")).unwrap();
    }
    let truth_path = dir.path().join("truth.json");
    fs::write(&truth_path, truth.to_json()).unwrap();
    let fitted_path = dir.path().join("fitted.json");
    let (code, text) = cli(&["fit", "--logs", s(&log_dir), "--out", s(&fitted_path), "--reference", s(&truth_path)]);
    ensure(code == 0, || format!("fit exit {code}: {text}"))?;
    let fitted = PopulationModel::from_json(&fs::read_to_string(&fitted_path).unwrap()).map_err(|e| e.to_string())?;

    let mut max_err: f64 = 0.0;
    for t in TamperType::ALL {
        let err = (fitted.type_weights.get(t) - truth.type_weights.get(t)).abs();
        max_err = max_err.max(err);
        ensure(err <= 0.02, || format!("a_k[{t}] {:.4} vs {:.4}", fitted.type_weights.get(t), truth.type_weights.get(t)))?;
    }
    let mut checked = 0;
    for (t, cfg) in &truth.configs {
        for (op, g) in &cfg.groups {
            let Some(rep) = &g.representative else { continue };
            if g.shares.get(rep).copied().unwrap_or(0.0) < fitted.population_threshold {
                continue;
            }
            checked += 1;
            let got = fitted.representative(*t, *op);
            ensure(got == Some(rep.as_str()), || format!("{t} {op}: fitted {got:?}, truth {rep}"))?;
        }
    }
    let d = tamperkit::model::coefficient_distance(&truth.type_weights, &fitted.type_weights).map_err(|e| e.to_string())?;
    ensure(d < 0.03, || format!("coefficient_distance {d:.4}"))?;
    let printed = text.lines().find(|l| l.starts_with("coefficient_distance")).unwrap_or("").to_string();
    ensure(!printed.is_empty(), || "distance not printed".into())?;
    Ok(format!("max |Δa_k| {max_err:.4}, {checked} representatives correct, {printed}"))
}

// 6 ---------------------------------------------------------------------

fn log(who: &str, sample: usize, variant: &str) -> EditLogRecord {
    EditLogRecord::parse_line(&format!("{who}\t{who}-{sample}\treplacement\t2.1\t{variant}\titerations=1")).unwrap()
}

/// One tamperer with `n` samples, `k` of which use solid-color-fill.
fn individual_share(k: usize, n: usize) -> Result<bool, String> {
    let logs: Vec<EditLogRecord> =
        (0..n).map(|j| log("t", j, if j < k { "solid-color-fill" } else { "content-aware-fill" })).collect();
    let m = fit_individual(&logs, 0.02).map_err(|e| e.to_string())?;
    let g = &m.configs[&TamperType::Replacement].groups[&OpId::new(2, 1)];
    Ok(g.retained.iter().any(|v| v == "solid-color-fill"))
}

/// `n` tamperers, `k` of whom use healing-brush as their representative.
fn population_share(k: usize, n: usize) -> Result<bool, String> {
    let models = (0..n)
        .map(|i| {
            let who = format!("t{i:04}");
            let v = if i < k { "healing-brush" } else { "content-aware-fill" };
            fit_individual(&[log(&who, 0, v)], 0.02).map_err(|e| e.to_string())
        })
        .collect::<Result<Vec<_>, _>>()?;
    let pop = aggregate_population(&models, 0.05).map_err(|e| e.to_string())?;
    let g = &pop.configs[&TamperType::Replacement].groups[&OpId::new(2, 1)];
    Ok(g.shares.contains_key("healing-brush"))
}

fn threshold_semantics() -> Outcome {
    ensure(individual_share(20, 1000)?, || "individual 2.0% dropped".into())?;
    ensure(!individual_share(19, 1000)?, || "individual 1.9% retained".into())?;
    ensure(population_share(50, 1000)?, || "population 5.0% dropped".into())?;
    ensure(!population_share(49, 1000)?, || "population 4.9% retained".into())?;
    Ok("2.0% / 5.0% retained, 1.9% / 4.9% dropped".into())
}

// 7 ---------------------------------------------------------------------

fn f1_oracle(pred: &[bool], gt: &[bool]) -> f64 {
    let tp = pred.iter().zip(gt).filter(|(p, g)| **p && **g).count() as f64;
    let fp = pred.iter().zip(gt).filter(|(p, g)| **p && !**g).count() as f64;
    let fneg = pred.iter().zip(gt).filter(|(p, g)| !**p && **g).count() as f64;
    if tp + fp + fneg == 0.0 {
        1.0
    } else {
        2.0 * tp / (2.0 * tp + fp + fneg)
    }
}

/// All positive/negative pairs; ties count one half.
fn auc_oracle(scores: &[f64], gt: &[bool]) -> Option<f64> {
    let pos: Vec<f64> = scores.iter().zip(gt).filter(|(_, g)| **g).map(|(s, _)| *s).collect();
    let neg: Vec<f64> = scores.iter().zip(gt).filter(|(_, g)| !**g).map(|(s, _)| *s).collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut wins = 0.0;
    for p in &pos {
        for n in &neg {
            wins += if p > n { 1.0 } else if p == n { 0.5 } else { 0.0 };
        }
    }
    Some(wins / (pos.len() * neg.len()) as f64)
}

fn bits(code: u32, n: usize) -> Vec<bool> {
    (0..n).map(|i| code >> i & 1 == 1).collect()
}

fn compare(w: u32, h: u32, pred: &[bool], gt: &[bool], scores: &[f64]) -> Result<(), String> {
    let pm = PixelMask::from_bits(w, h, pred.to_vec()).unwrap();
    let gm = PixelMask::from_bits(w, h, gt.to_vec()).unwrap();
    let f1 = pixel_f1(&pm, &gm).map_err(|e| e.to_string())?;
    ensure((f1 - f1_oracle(pred, gt)).abs() < 1e-9, || format!("{w}x{h} F1 {f1} vs {}", f1_oracle(pred, gt)))?;
    match (pixel_auc(scores, &gm), auc_oracle(scores, gt)) {
        (Ok(a), Some(b)) => ensure((a - b).abs() < 1e-9, || format!("{w}x{h} AUC {a} vs {b}")),
        (Err(DatasetError::SingleClass), None) => Ok(()),
        (a, b) => Err(format!("{w}x{h} AUC {a:?} vs oracle {b:?}")),
    }
}

fn metric_oracles() -> Outcome {
    let mut cases = 0usize;
    // Exhaustive over every (pred, gt) pair for 2x2 and 3x3.
    for (w, h) in [(2u32, 2u32), (3, 3)] {
        let n = (w * h) as usize;
        for pc in 0..1u32 << n {
            let pred = bits(pc, n);
            let scores: Vec<f64> = pred.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
            for gc in 0..1u32 << n {
                compare(w, h, &pred, &bits(gc, n), &scores)?;
                cases += 1;
            }
        }
    }
    // 4x4: every mask against a fixed spread of 257 partners, both ways.
    let partners: Vec<u32> = (0..=256u32).map(|k| (k * 255) % 65_536).chain([65_535]).collect();
    for a in 0..1u32 << 16 {
        let am = bits(a, 16);
        let scores: Vec<f64> = am.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
        for &b in &partners {
            let bm = bits(b, 16);
            compare(4, 4, &am, &bm, &scores)?;
            let bs: Vec<f64> = bm.iter().map(|b| if *b { 1.0 } else { 0.0 }).collect();
            compare(4, 4, &bm, &am, &bs)?;
            cases += 2;
        }
    }
    // 50 random 32x32 cases with graded, partly tied scores.
    let mut rng = derive_stream(5, "metrics");
    for _ in 0..50 {
        let gt: Vec<bool> = (0..1024).map(|_| rng.bernoulli(0.3)).collect();
        let scores: Vec<f64> = gt
            .iter()
            .map(|g| ((rng.next_f64() * 0.8 + if *g { 0.2 } else { 0.0 }) * 16.0).floor() / 16.0)
            .collect();
        let pred: Vec<bool> = scores.iter().map(|s| *s >= 0.5).collect();
        compare(32, 32, &pred, &gt, &scores)?;
        cases += 1;
    }
    Ok(format!("{cases} mask pairs match the brute-force oracles"))
}

// 8 ---------------------------------------------------------------------

fn raster_identities() -> Outcome {
    let mut rng = derive_stream(3, "identity");
    let img = ImageBuffer::from_raw(48, 32, (0..48 * 32 * 3).map(|_| rng.range_i64(0, 255) as u8).collect()).unwrap();
    let region = RegionGeometry::rect(Rect::new(6, 5, 30, 20));
    let mut kernel = [0i32; 25];
    kernel[12] = 1;
    let filtered = apply_filter(&img, &region, &FilterSpec::Custom { kernel, scale: 1, offset: 0 }, &mut rng)
        .map_err(|e| e.to_string())?;
    ensure(filtered == img, || "identity kernel changed pixels".into())?;

    let layer = Layer::opaque(img.crop(region.rect).unwrap());
    let moved = transform_layer(&layer, Scale::Factor(1.0), 0.0).map_err(|e| e.to_string())?;
    ensure(moved == layer, || "scale 1.0 / 0 degrees changed the layer".into())?;

    let neutral = [
        ColorSpec::Balance { sliders: [0, 0, 0] },
        ColorSpec::Curves(CurveKind::Identity),
        ColorSpec::HueSaturation { hue: 0, saturation: 0, lightness: 0 },
        ColorSpec::Levels { channel: Channel::Rgb, input: (0, 255), output: (0, 255) },
    ];
    for spec in &neutral {
        let out = apply_color_adjustment(&img, &region, spec).map_err(|e| e.to_string())?;
        ensure(out == img, || format!("{spec:?} changed pixels"))?;
    }

    for distribution in [NoiseDistribution::Uniform, NoiseDistribution::Gaussian] {
        for monochromatic in [false, true] {
            let spec = EffectSpec::Noise { amount: 0.0, distribution, monochromatic };
            let (out, _) = apply_effect(&img, &region, &spec, &mut rng).map_err(|e| e.to_string())?;
            ensure(out == img, || format!("0% noise {distribution:?} mono={monochromatic} changed pixels"))?;
        }
    }

    let monotone = |lut: &[u8; 256]| lut.windows(2).all(|w| w[0] <= w[1]);
    for kind in [CurveKind::Identity, CurveKind::RaiseHighlights, CurveKind::LowerShadows] {
        ensure(monotone(&curve_lut(kind)), || format!("curve {kind:?} not monotone"))?;
    }
    ensure(curve_lut(CurveKind::Identity).iter().enumerate().all(|(i, v)| *v as usize == i), || {
        "identity curve is not the identity".into()
    })?;
    let mut luts = 0;
    for ilo in (0..=250u8).step_by(25) {
        for ihi in (ilo + 5..=255).step_by(25) {
            for (olo, ohi) in [(0u8, 255u8), (20, 200), (100, 110)] {
                ensure(monotone(&levels_lut((ilo, ihi), (olo, ohi))), || {
                    format!("levels ({ilo},{ihi})->({olo},{ohi}) not monotone")
                })?;
                luts += 1;
            }
        }
    }
    Ok(format!("identity kernel, 0°/1.0x, 4 neutral colour specs, 4 zero-noise specs unchanged; 3 curves and {luts} level maps monotone over 256 inputs"))
}

// 9 ---------------------------------------------------------------------

fn replay() -> Outcome {
    let table = ParameterTable::default_table();
    let model = PopulationModel::from_table(&table).unwrap();
    let pool = sources(20, 21);
    let mut rng = derive_stream(77, "replay-pick");
    for k in 0..50 {
        let src = &pool[rng.index(pool.len())];
        let id = format!("r{k:03}-{}", rng.range_i64(0, 1_000_000));
        let req = SynthRequest {
            image_name: &src.name,
            original: &src.image,
            regions: &src.regions,
            sources: &pool,
            model: &model,
            table: &table,
            seed: rng.range_i64(0, i64::MAX) as u64,
            sample_id: &id,
            record_timings: false,
        };
        let out = synthesize_sample(&req).map_err(|e| format!("{id}: {e}"))?;
        let record = SampleRecord::from_json(&out.record.to_json()).map_err(|e| e.to_string())?;
        let (again, mask) = replay_sample(&record, &src.image, &pool).map_err(|e| format!("{id}: {e}"))?;
        ensure(again.as_raw() == out.tampered.as_raw(), || format!("{id}: replayed image differs"))?;
        ensure(mask == out.mask, || format!("{id}: replayed mask differs"))?;
    }
    Ok("50 records replayed byte-exactly".into())
}

// 10 --------------------------------------------------------------------

/// Replacement logs for 67 tamperers x 250 samples whose per-tamperer
/// shares average to the aggregate frequencies `targets`.
fn fig2_logs(dir: &Path) -> Vec<(&'static str, &'static str, f64)> {
    // (op, variant, aggregate share). Removal variants other than
    // content-aware fill split the remainder in table proportion; the other
    // concealment steps sit at table values.
    let targets: Vec<(&str, &str, f64)> = vec![
        ("2.1", "content-aware-fill", 0.617),
        ("2.1", "solid-color-fill", 0.096),
        ("2.1", "background-clone", 0.095),
        ("2.1", "clone-stamp", 0.104),
        ("2.1", "healing-brush", 0.088),
        ("5.1", "sharpen", 0.1269),
        ("5.2", "gaussian-blur", 0.397),
        ("5.2", "surface-blur", 0.076),
        ("5.2", "motion-blur", 0.0763),
        ("5.3", "outer-glow", 0.1368),
        ("5.4", "noise", 0.349),
        ("5.5", "stroke", 0.102),
        ("5.6", "drop-shadow", 0.0881),
    ];
    let (tamperers, per) = (67usize, 250usize);
    let total = tamperers * per;
    let mut rng = derive_stream(2, "fig2");
    // samples[i][j] = op -> variant
    let mut samples: Vec<Vec<BTreeMap<&str, &str>>> = vec![vec![BTreeMap::new(); per]; tamperers];
    let mut by_op: BTreeMap<&str, Vec<(&str, f64)>> = BTreeMap::new();
    for (op, v, f) in &targets {
        by_op.entry(op).or_default().push((v, *f));
    }
    for (op, variants) in &by_op {
        // One label per (tamperer, sample) slot with exact whole-corpus
        // counts, shuffled so per-tamperer shares vary around them. Equal
        // sample counts keep the mean of per-tamperer shares exact.
        let mut labels: Vec<Option<&str>> = Vec::with_capacity(total);
        for (v, f) in variants {
            let count = (f * total as f64).round() as usize;
            labels.extend(std::iter::repeat(Some(*v)).take(count));
        }
        assert!(labels.len() <= total, "{op} shares exceed 1");
        labels.resize(total, None);
        for i in (1..total).rev() {
            labels.swap(i, rng.index(i + 1));
        }
        for (k, label) in labels.iter().enumerate() {
            if let Some(v) = label {
                samples[k / per][k % per].insert(op, v);
            }
        }
    }
    for (i, own) in samples.iter().enumerate() {
        let who = format!("T{i:02}");
        let mut lines = Vec::new();
        for (j, ops) in own.iter().enumerate() {
            let sid = format!("{who}-{j:03}");
            for (op, v) in [("1.1", "text-region-selection"), ("1.2", "text-forgery-control"), ("3.1", "font-properties")] {
                lines.push(format!("{who}\t{sid}\treplacement\t{op}\t{v}\t"));
            }
            for (op, v) in ops {
                lines.push(format!("{who}\t{sid}\treplacement\t{op}\t{v}\t"));
            }
        }
        fs::write(dir.join(format!("{who}.tsv")), lines.join("\n") + "\n").unwrap();
    }
    targets
}

fn fig2() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let logs = dir.path().join("logs");
    fs::create_dir(&logs).unwrap();
    fig2_logs(&logs);
    let json = dir.path().join("report.json");
    let (code, text) = cli(&["report", "--logs", s(&logs), "--json", s(&json)]);
    ensure(code == 0, || format!("report exit {code}"))?;
    let report: serde_json::Value = serde_json::from_str(&fs::read_to_string(&json).unwrap()).unwrap();
    let rep = report["types"]
        .as_array()
        .and_then(|ts| ts.iter().find(|t| t["type_id"] == "replacement"))
        .ok_or("no replacement summary")?;
    let top = rep["top_operations"].as_array().ok_or("no top operations")?;
    ensure(top.len() == 8, || format!("{} bars", top.len()))?;
    let expected = [("content-aware-fill", 61.7), ("gaussian-blur", 39.7), ("noise", 34.9)];
    for (k, (name, pct)) in expected.iter().enumerate() {
        let got = top[k]["variant"].as_str().unwrap_or("");
        let f = top[k]["frequency"].as_f64().unwrap_or(0.0) * 100.0;
        ensure(got == *name && (f - pct).abs() < 0.05, || format!("bar {k}: {got} {f:.2}% vs {name} {pct}%"))?;
    }
    let section: Vec<&str> = text
        .lines()
        .skip_while(|l| !l.starts_with("[replacement]"))
        .skip(1)
        .take(3)
        .collect();
    let shown = section.join(" | ");
    for (name, pct) in expected {
        ensure(shown.contains(name) && shown.contains(&format!("{pct:.1}%")), || format!("text shows `{shown}`"))?;
    }
    Ok(format!("top Replacement bars: {}", shown.split_whitespace().collect::<Vec<_>>().join(" ")))
}

fn main() {
    let criteria: Vec<(&str, fn() -> Outcome)> = vec![
        ("determinism", determinism),
        ("frequency fidelity", frequency_fidelity),
        ("post-scaling", post_scaling),
        ("locality & mask soundness", locality),
        ("fit recovery", fit_recovery),
        ("threshold semantics", threshold_semantics),
        ("metric oracles", metric_oracles),
        ("raster identities", raster_identities),
        ("replay", replay),
        ("top replacement operations", fig2),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|p| name.contains(p.as_str())) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into()));
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS [{:>2}] {name} ({secs:.1}s): {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL [{:>2}] {name} ({secs:.1}s): {why}", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
