use std::fs;
use std::io::Write;

use tamperkit::dataset::{load_edit_logs, DatasetError};
use tamperkit::model::{aggregate_population, coefficient_distance, fit_individual, TamperType};

use crate::{emit, load_model, CliError, CmdResult, Exit, FitArgs};

pub fn cmd_fit(args: &FitArgs, out: &mut dyn Write) -> CmdResult {
    emit(
        out,
        format!(
            "individual-threshold {} population-threshold {}",
            args.individual_threshold, args.population_threshold
        ),
    );
    if args.out.exists() && !args.overwrite {
        return Err(DatasetError::Exists(args.out.clone()).into());
    }
    let logs = load_edit_logs(&args.logs)?;
    if logs.duplicates > 0 {
        log::warn!("{} duplicate log lines ignored", logs.duplicates);
    }
    emit(out, format!("{} tamperers, {} records", logs.by_tamperer.len(), logs.record_count()));

    let individuals = logs
        .by_tamperer
        .values()
        .map(|records| fit_individual(records, args.individual_threshold))
        .collect::<Result<Vec<_>, _>>()?;
    let model = aggregate_population(&individuals, args.population_threshold)?;

    emit(out, format!("\n{:<12} {:>8}", "type", "a_k"));
    for t in TamperType::ALL {
        emit(out, format!("{:<12} {:>8.4}", t.as_str(), model.type_weights.get(t)));
    }
    emit(out, "\nrepresentatives");
    for (t, cfg) in &model.configs {
        for (op, g) in &cfg.groups {
            let rep = g.representative.as_deref().unwrap_or("-");
            emit(out, format!("  {:<12} {:<4} {}", t.as_str(), op.to_string(), rep));
        }
    }
    if let Some(reference) = &args.reference {
        let truth = load_model(reference)?;
        let d = coefficient_distance(&truth.type_weights, &model.type_weights)?;
        emit(out, format!("\ncoefficient_distance {d:.6}"));
    }

    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError(format!("{}: {e}", dir.display())))?;
    }
    fs::write(&args.out, model.to_json()).map_err(|e| CliError(format!("{}: {e}", args.out.display())))?;
    emit(out, format!("wrote {}", args.out.display()));
    Ok(Exit::Success)
}
