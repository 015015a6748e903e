//! Edit-log ingestion. A log directory holds `*.tsv` or `*.log` files of
//! [`EditLogRecord`] lines; blank lines and `#` comments are skipped.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use super::DatasetError;
use crate::model::{EditLogRecord, OpId, TamperType};

/// Records grouped by tamperer, in file order within each group.
#[derive(Clone, Debug, Default)]
pub struct LogSet {
    pub by_tamperer: BTreeMap<String, Vec<EditLogRecord>>,
    /// Repeated `(tamperer, sample, op)` lines that were dropped.
    pub duplicates: usize,
}

impl LogSet {
    pub fn record_count(&self) -> usize {
        self.by_tamperer.values().map(Vec::len).sum()
    }

    pub fn all(&self) -> impl Iterator<Item = &EditLogRecord> {
        self.by_tamperer.values().flatten()
    }

    /// Distinct samples per type for one tamperer.
    pub fn sample_counts(&self, tamperer: &str) -> BTreeMap<TamperType, usize> {
        let mut seen: BTreeSet<(TamperType, &str)> = BTreeSet::new();
        for r in self.by_tamperer.get(tamperer).into_iter().flatten() {
            seen.insert((r.type_id, r.sample_id.as_str()));
        }
        let mut out = BTreeMap::new();
        for (t, _) in seen {
            *out.entry(t).or_insert(0) += 1;
        }
        out
    }

    fn push(&mut self, r: EditLogRecord, seen: &mut BTreeSet<(String, String, OpId)>) {
        if !seen.insert((r.tamperer_id.clone(), r.sample_id.clone(), r.op_id)) {
            log::warn!("duplicate log line for {} {} {}; keeping the first", r.tamperer_id, r.sample_id, r.op_id);
            self.duplicates += 1;
            return;
        }
        self.by_tamperer.entry(r.tamperer_id.clone()).or_default().push(r);
    }
}

/// Parses one log document; `path` only labels errors.
pub fn parse_edit_log(text: &str, path: &Path) -> Result<Vec<EditLogRecord>, DatasetError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let l = line.trim_end_matches('\r');
        if l.trim().is_empty() || l.trim_start().starts_with('#') {
            continue;
        }
        let r = EditLogRecord::parse_line(l)
            .map_err(|message| DatasetError::BadLine { path: path.to_path_buf(), line: i + 1, message })?;
        out.push(r);
    }
    Ok(out)
}

/// Reads every log file under `dir` (or `dir` itself if it is a file), in
/// path order.
pub fn load_edit_logs(dir: &Path) -> Result<LogSet, DatasetError> {
    let files: Vec<PathBuf> = if dir.is_file() {
        vec![dir.to_path_buf()]
    } else {
        let mut v = Vec::new();
        for entry in std::fs::read_dir(dir).map_err(|e| DatasetError::io(dir, e))? {
            let p = entry.map_err(|e| DatasetError::io(dir, e))?.path();
            if p.is_file() && matches!(p.extension().and_then(|e| e.to_str()), Some("tsv" | "log")) {
                v.push(p);
            }
        }
        v.sort();
        v
    };
    let mut set = LogSet::default();
    let mut seen = BTreeSet::new();
    for f in &files {
        let text = std::fs::read_to_string(f).map_err(|e| DatasetError::io(f, e))?;
        for r in parse_edit_log(&text, f)? {
            set.push(r, &mut seen);
        }
    }
    if set.record_count() == 0 {
        return Err(DatasetError::NoLogs(dir.to_path_buf()));
    }
    for (t, recs) in &set.by_tamperer {
        log::debug!("{t}: {} records, samples per type {:?}", recs.len(), set.sample_counts(t));
    }
    Ok(set)
}
