use std::fs;
use std::io::Write;

use tamperkit::dataset::{encode_png, read_manifest, read_sample};
use tamperkit::pipeline::replay_sample;

use crate::validate::load_sources;
use crate::{emit, CliError, CmdResult, Exit, ReplayArgs};

pub fn cmd_replay(args: &ReplayArgs, out: &mut dyn Write) -> CmdResult {
    let manifest = read_manifest(&args.dataset)?;
    let stored = read_sample(&args.dataset, &args.sample_id)?;
    let sources = load_sources(&manifest)?;
    let original = sources
        .iter()
        .find(|s| s.name == stored.record.image)
        .ok_or_else(|| CliError(format!("original `{}` is not in the manifest", stored.record.image)))?;
    let (tampered, mask) = replay_sample(&stored.record, &original.image, &sources)?;
    if let Some(path) = &args.out {
        fs::write(path, encode_png(&tampered)?).map_err(|e| CliError(format!("{}: {e}", path.display())))?;
    }
    let image_ok = tampered == stored.tampered;
    let mask_ok = mask == stored.mask;
    emit(
        out,
        format!(
            "{}: image {}, mask {}",
            args.sample_id,
            if image_ok { "identical" } else { "DIFFERS" },
            if mask_ok { "identical" } else { "DIFFERS" }
        ),
    );
    Ok(if image_ok && mask_ok { Exit::Success } else { Exit::CheckFailed })
}
