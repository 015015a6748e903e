//! Empirical operation frequencies against the configured table.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::model::{EditLogRecord, OpId, ParameterTable, Phase, TamperType, TamperingTypeSpec, VariantGroup};
use crate::pipeline::SampleRecord;

/// Two-sided 95% normal quantile.
const Z95: f64 = 1.959_963_984_540_054;

/// Bars per type in the top-operations listing.
pub const TOP_OPERATIONS: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariantRow {
    pub variant: String,
    pub count: usize,
    pub empirical: f64,
    pub configured: f64,
    /// Wilson score interval; collapses to the point estimate below two
    /// trials.
    pub ci_low: f64,
    pub ci_high: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// One variant group. The "none" cell makes the rows plus residual sum to
/// `trials`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub type_id: TamperType,
    pub op_id: OpId,
    pub phase: Phase,
    pub trials: usize,
    pub rows: Vec<VariantRow>,
    pub none_count: usize,
    pub none_configured: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub chi_square: Option<ChiSquareTest>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TopOperation {
    pub op_id: OpId,
    pub variant: String,
    pub frequency: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeSummary {
    pub type_id: TamperType,
    pub samples: usize,
    /// Most used non-mandatory operations, descending.
    pub top_operations: Vec<TopOperation>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMetric {
    pub sample_id: String,
    pub f1: f64,
    /// Undefined when the ground truth holds one class.
    pub auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MaskMetrics {
    pub per_sample: Vec<SampleMetric>,
    pub mean_f1: f64,
    pub mean_auc: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `records` or `logs`.
    pub source: String,
    pub units: usize,
    pub types: Vec<TypeSummary>,
    pub groups: Vec<GroupReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masks: Option<MaskMetrics>,
}

impl MetricsReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    /// Groups whose chi-square p-value is at or below `alpha`.
    pub fn failing_groups(&self, alpha: f64) -> Vec<&GroupReport> {
        self.groups.iter().filter(|g| g.chi_square.as_ref().is_some_and(|c| c.p_value <= alpha)).collect()
    }

    pub fn type_summary(&self, t: TamperType) -> Option<&TypeSummary> {
        self.types.iter().find(|s| s.type_id == t)
    }

    /// Aligned-column rendering.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "source: {}  units: {}", self.source, self.units);
        for s in &self.types {
            let _ = writeln!(out, "\n[{}] {} samples, top operations", s.type_id, s.samples);
            for op in &s.top_operations {
                let _ = writeln!(out, "  {:<4} {:<28} {:>6.1}%", op.op_id.to_string(), op.variant, op.frequency * 100.0);
            }
        }
        let _ = writeln!(
            out,
            "\n{:<12} {:<4} {:<28} {:>7} {:>9} {:>9} {:>19} {:>10}",
            "type", "op", "variant", "count", "empir.%", "config.%", "95% CI", "p"
        );
        for g in &self.groups {
            let p = g.chi_square.as_ref().map_or("-".to_string(), |c| format!("{:.4}", c.p_value));
            for (i, r) in g.rows.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "{:<12} {:<4} {:<28} {:>7} {:>9.2} {:>9.2} {:>19} {:>10}",
                    if i == 0 { g.type_id.as_str() } else { "" },
                    if i == 0 { g.op_id.to_string() } else { String::new() },
                    r.variant,
                    r.count,
                    r.empirical * 100.0,
                    r.configured * 100.0,
                    format!("[{:.2}, {:.2}]", r.ci_low * 100.0, r.ci_high * 100.0),
                    if i == 0 { p.as_str() } else { "" },
                );
            }
            if g.none_count > 0 || g.none_configured > 0.0 {
                let _ = writeln!(
                    out,
                    "{:<12} {:<4} {:<28} {:>7} {:>9.2} {:>9.2}",
                    "",
                    "",
                    "(none)",
                    g.none_count,
                    share(g.none_count, g.trials) * 100.0,
                    g.none_configured * 100.0
                );
            }
        }
        if let Some(m) = &self.masks {
            let _ = writeln!(out, "\n{:<16} {:>8} {:>8}", "sample", "F1", "AUC");
            for s in &m.per_sample {
                let auc = s.auc.map_or("-".to_string(), |a| format!("{a:.4}"));
                let _ = writeln!(out, "{:<16} {:>8.4} {:>8}", s.sample_id, s.f1, auc);
            }
            let auc = m.mean_auc.map_or("-".to_string(), |a| format!("{a:.4}"));
            let _ = writeln!(out, "{:<16} {:>8.4} {:>8}", "mean", m.mean_f1, auc);
        }
        out
    }
}

fn share(k: usize, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

fn wilson(k: usize, n: usize) -> (f64, f64) {
    let p = share(k, n);
    if n < 2 {
        return (p, p);
    }
    let n = n as f64;
    let z2 = Z95 * Z95;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z95 / (1.0 + z2 / n) * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt();
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Pearson goodness of fit over cells with positive expectation. An
/// observation in a zero-probability cell gives p = 0.
fn chi_square(observed: &[usize], probs: &[f64]) -> Option<ChiSquareTest> {
    let n: usize = observed.iter().sum();
    if n < 2 {
        return None;
    }
    if observed.iter().zip(probs).any(|(o, p)| *o > 0 && *p <= 0.0) {
        return Some(ChiSquareTest { statistic: f64::INFINITY, dof: 0, p_value: 0.0 });
    }
    let cells: Vec<(f64, f64)> =
        observed.iter().zip(probs).filter(|(_, p)| **p > 0.0).map(|(o, p)| (*o as f64, p * n as f64)).collect();
    if cells.len() < 2 {
        return None;
    }
    let statistic: f64 = cells.iter().map(|(o, e)| (o - e).powi(2) / e).sum();
    let dof = cells.len() - 1;
    let dist = ChiSquared::new(dof as f64).expect("dof >= 1");
    Some(ChiSquareTest { statistic, dof, p_value: dist.sf(statistic) })
}

/// Marginal probability of each variant and of "none" in one unit.
/// `post_scale` is applied to post-processing groups when given.
fn configured(group: &VariantGroup, phase: Phase, post_scale: Option<f64>) -> (Vec<f64>, f64) {
    let mass = group.mass();
    match (phase, post_scale) {
        (Phase::Post, Some(s)) if mass > 0.0 => {
            let incl = (s * mass).min(1.0);
            (group.variants.iter().map(|v| incl * v.frequency / mass).collect(), 1.0 - incl)
        }
        _ => (group.variants.iter().map(|v| v.frequency).collect(), group.residual_none),
    }
}

/// One unit of observation: the variant chosen per group, if any.
type Unit = BTreeMap<OpId, String>;

fn group_reports(
    spec: &TamperingTypeSpec,
    units: &[&Unit],
    post_scale: Option<f64>,
) -> Vec<GroupReport> {
    spec.steps
        .iter()
        .flat_map(|step| step.groups.iter().map(move |g| (step.phase, g)))
        .map(|(phase, g)| {
            let trials = units.len();
            let counts: Vec<usize> = g
                .variants
                .iter()
                .map(|v| units.iter().filter(|u| u.get(&g.op_id) == Some(&v.name)).count())
                .collect();
            let none_count = trials - counts.iter().sum::<usize>().min(trials);
            let (probs, none_configured) = configured(g, phase, post_scale);
            let rows = g
                .variants
                .iter()
                .zip(&counts)
                .zip(&probs)
                .map(|((v, &count), &configured)| {
                    let (ci_low, ci_high) = wilson(count, trials);
                    VariantRow { variant: v.name.clone(), count, empirical: share(count, trials), configured, ci_low, ci_high }
                })
                .collect();
            let mut observed = counts.clone();
            observed.push(none_count);
            let mut expected = probs.clone();
            expected.push(none_configured);
            GroupReport {
                type_id: spec.type_id,
                op_id: g.op_id,
                phase,
                trials,
                rows,
                none_count,
                none_configured,
                chi_square: chi_square(&observed, &expected),
            }
        })
        .collect()
}

/// Ranks `(op, variant)` pairs by frequency, dropping those every unit
/// uses, and keeps the first [`TOP_OPERATIONS`].
fn top_operations(freqs: BTreeMap<(OpId, String), f64>) -> Vec<TopOperation> {
    let mut ops: Vec<TopOperation> = freqs
        .into_iter()
        .filter(|(_, f)| *f < 1.0 - 1e-12)
        .map(|((op_id, variant), frequency)| TopOperation { op_id, variant, frequency })
        .collect();
    ops.sort_by(|a, b| b.frequency.total_cmp(&a.frequency).then(a.op_id.cmp(&b.op_id)));
    ops.truncate(TOP_OPERATIONS);
    ops
}

fn pooled_frequencies(units: &[&Unit]) -> BTreeMap<(OpId, String), f64> {
    let mut counts: BTreeMap<(OpId, String), usize> = BTreeMap::new();
    for u in units {
        for (op, v) in u.iter() {
            *counts.entry((*op, v.clone())).or_default() += 1;
        }
    }
    counts.into_iter().map(|(k, c)| (k, share(c, units.len()))).collect()
}

/// Empirical frequencies of synthesized plans. One unit is one plan item;
/// post-processing rows are compared against their scaled inclusion
/// probability.
pub fn frequency_report(records: &[SampleRecord], table: &ParameterTable) -> MetricsReport {
    let mut by_type: BTreeMap<TamperType, Vec<Unit>> = BTreeMap::new();
    for r in records {
        for item in &r.plan.items {
            let unit = item.ops.iter().map(|o| (o.op_id, o.variant.clone())).collect();
            by_type.entry(item.type_id).or_default().push(unit);
        }
    }
    let units = by_type.values().map(Vec::len).sum();
    let mut types = Vec::new();
    let mut groups = Vec::new();
    for spec in &table.types {
        let Some(us) = by_type.get(&spec.type_id) else { continue };
        let us: Vec<&Unit> = us.iter().collect();
        groups.extend(group_reports(spec, &us, Some(table.post_scale)));
        types.push(TypeSummary {
            type_id: spec.type_id,
            samples: us.len(),
            top_operations: top_operations(pooled_frequencies(&us)),
        });
    }
    MetricsReport { source: "records".into(), units, types, groups, masks: None }
}

/// Usage frequencies of edit logs. One unit is one `(tamperer, sample)`.
/// Group rows pool all units; the top-operation listing averages each
/// tamperer's own share, so every tamperer weighs the same.
pub fn frequency_report_from_logs(logs: &[EditLogRecord], table: &ParameterTable) -> MetricsReport {
    let mut samples: BTreeMap<(TamperType, &str, &str), Unit> = BTreeMap::new();
    for r in logs {
        samples
            .entry((r.type_id, r.tamperer_id.as_str(), r.sample_id.as_str()))
            .or_default()
            .entry(r.op_id)
            .or_insert_with(|| r.variant.clone());
    }
    let mut types = Vec::new();
    let mut groups = Vec::new();
    for spec in &table.types {
        let us: Vec<(&str, &Unit)> =
            samples.iter().filter(|((t, _, _), _)| *t == spec.type_id).map(|((_, who, _), u)| (*who, u)).collect();
        if us.is_empty() {
            continue;
        }
        let all: Vec<&Unit> = us.iter().map(|(_, u)| *u).collect();
        groups.extend(group_reports(spec, &all, None));

        let tamperers: BTreeSet<&str> = us.iter().map(|(w, _)| *w).collect();
        let mut mean: BTreeMap<(OpId, String), f64> = BTreeMap::new();
        for who in &tamperers {
            let own: Vec<&Unit> = us.iter().filter(|(w, _)| w == who).map(|(_, u)| *u).collect();
            for (k, f) in pooled_frequencies(&own) {
                *mean.entry(k).or_default() += f / tamperers.len() as f64;
            }
        }
        types.push(TypeSummary { type_id: spec.type_id, samples: all.len(), top_operations: top_operations(mean) });
    }
    MetricsReport { source: "logs".into(), units: samples.len(), types, groups, masks: None }
}
