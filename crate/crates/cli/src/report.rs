use std::fs;
use std::io::Write;
use std::path::Path;

use tamperkit::dataset::{
    decode_mask, frequency_report, load_image, frequency_report_from_logs, load_edit_logs, pixel_auc, pixel_f1, read_manifest,
    read_record, MaskMetrics, SampleMetric, SamplePaths,
};
use tamperkit::raster::PixelMask;

use crate::{emit, load_table, CliError, CmdResult, Exit, ReportArgs};

pub fn cmd_report(args: &ReportArgs, out: &mut dyn Write) -> CmdResult {
    let mut report = match (&args.dataset, &args.logs) {
        (_, Some(logs)) => {
            let table = load_table(args.table.as_deref())?;
            let set = load_edit_logs(logs)?;
            let records: Vec<_> = set.all().cloned().collect();
            frequency_report_from_logs(&records, &table)
        }
        (Some(dir), None) => {
            let manifest = read_manifest(dir)?;
            let table = load_table(args.table.as_deref().or(manifest.table.as_deref()))?;
            let records = manifest.samples.iter().map(|id| read_record(dir, id)).collect::<Result<Vec<_>, _>>()?;
            if records.is_empty() {
                return Err(CliError(format!("{} holds no samples", dir.display())));
            }
            let mut report = frequency_report(&records, &table);
            if let Some(pred) = &args.pred_masks {
                report.masks = Some(mask_metrics(dir, pred, &manifest.samples)?);
            }
            report
        }
        (None, None) => return Err(CliError("give a dataset directory or --logs".into())),
    };
    if args.logs.is_some() && args.pred_masks.is_some() {
        log::warn!("--pred-masks needs a dataset; ignored");
        report.masks = None;
    }

    emit(out, report.to_text());
    let failing = report.failing_groups(args.alpha);
    let tested = report.groups.iter().filter(|g| g.chi_square.is_some()).count();
    emit(out, format!("chi-square: {tested} groups tested, {} with p <= {}", failing.len(), args.alpha));
    for g in &failing {
        emit(out, format!("  {} {}", g.type_id, g.op_id));
    }
    if let Some(path) = &args.json {
        fs::write(path, report.to_json()).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    }
    Ok(if args.strict && !failing.is_empty() { Exit::CheckFailed } else { Exit::Success })
}

/// Scores `{pred}/{id}.png` against each ground-truth mask. Grey levels
/// are AUC scores; the binary prediction thresholds them at 128.
fn mask_metrics(root: &Path, pred: &Path, ids: &[String]) -> Result<MaskMetrics, CliError> {
    let mut per_sample = Vec::new();
    for id in ids {
        let p = pred.join(format!("{id}.png"));
        if !p.exists() {
            log::warn!("{}: no predicted mask", p.display());
            continue;
        }
        let gt_path = SamplePaths::new(root, id).mask;
        let gt = decode_mask(&fs::read(&gt_path)?).map_err(|e| CliError(format!("{}: {e}", gt_path.display())))?;
        let gray = load_image(&p)?;
        let scores: Vec<f64> = gray.as_raw().chunks_exact(3).map(|c| c[0] as f64 / 255.0).collect();
        let bin = PixelMask::from_bits(gray.width(), gray.height(), scores.iter().map(|s| *s >= 0.5).collect())
            .map_err(|e| CliError(e.to_string()))?;
        let f1 = pixel_f1(&bin, &gt)?;
        let auc = pixel_auc(&scores, &gt).ok();
        per_sample.push(SampleMetric { sample_id: id.clone(), f1, auc });
    }
    if per_sample.is_empty() {
        return Err(CliError(format!("no predicted masks found in {}", pred.display())));
    }
    let mean_f1 = per_sample.iter().map(|s| s.f1).sum::<f64>() / per_sample.len() as f64;
    let aucs: Vec<f64> = per_sample.iter().filter_map(|s| s.auc).collect();
    let mean_auc = (!aucs.is_empty()).then(|| aucs.iter().sum::<f64>() / aucs.len() as f64);
    Ok(MaskMetrics { per_sample, mean_f1, mean_auc })
}
