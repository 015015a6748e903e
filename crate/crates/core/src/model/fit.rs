//! Individual and population model fitting from editing logs.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{CoefficientVector, EditLogRecord, ModelError, OpId, ParameterTable, TamperType};

pub const DEFAULT_INDIVIDUAL_THRESHOLD: f64 = 0.02;
pub const DEFAULT_POPULATION_THRESHOLD: f64 = 0.05;
pub const MODEL_FORMAT_VERSION: u32 = 1;

// Shares are ratios of counts; a share whose exact value equals the
// threshold must count as meeting it.
const SHARE_EPS: f64 = 1e-12;

fn meets(share: f64, threshold: f64) -> bool {
    share + SHARE_EPS >= threshold
}

fn check_threshold(t: f64) -> Result<(), ModelError> {
    if t > 0.0 && t < 1.0 {
        Ok(())
    } else {
        Err(ModelError::BadThreshold(t))
    }
}

/// Range and mode summary of the values one parameter took.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamStats {
    pub count: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub min: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub max: Option<f64>,
    pub mode: String,
}

impl ParamStats {
    fn from_values<'a>(values: impl IntoIterator<Item = &'a str>) -> Option<Self> {
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let (mut min, mut max) = (None::<f64>, None::<f64>);
        let mut numeric = true;
        let mut n = 0;
        for v in values {
            n += 1;
            *counts.entry(v).or_default() += 1;
            match v.parse::<f64>() {
                Ok(x) if numeric => {
                    min = Some(min.map_or(x, |m| m.min(x)));
                    max = Some(max.map_or(x, |m| m.max(x)));
                }
                _ => numeric = false,
            }
        }
        let mode = most_common(&counts)?.to_string();
        if !numeric {
            min = None;
            max = None;
        }
        Some(Self { count: n, min, max, mode })
    }

    fn merge(stats: &[&ParamStats]) -> Option<Self> {
        let mut modes: BTreeMap<&str, usize> = BTreeMap::new();
        for s in stats {
            *modes.entry(s.mode.as_str()).or_default() += s.count;
        }
        let all_numeric = stats.iter().all(|s| s.min.is_some());
        Some(Self {
            count: stats.iter().map(|s| s.count).sum(),
            min: all_numeric.then(|| stats.iter().filter_map(|s| s.min).fold(f64::INFINITY, f64::min)),
            max: all_numeric
                .then(|| stats.iter().filter_map(|s| s.max).fold(f64::NEG_INFINITY, f64::max)),
            mode: most_common(&modes)?.to_string(),
        })
    }
}

/// Key with the highest count; ties go to the lexicographically smallest key.
fn most_common<K: Ord + Copy>(counts: &BTreeMap<K, usize>) -> Option<K> {
    let mut best: Option<(K, usize)> = None;
    for (&k, &c) in counts {
        if best.is_none_or(|(_, bc)| c > bc) {
            best = Some((k, c));
        }
    }
    best.map(|(k, _)| k)
}

/// Per-group summary of one tamperer's behaviour within one type.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroupConfig {
    /// Share of this type's samples that used each observed variant.
    pub usage: BTreeMap<String, f64>,
    /// Variants whose usage meets the individual threshold, most used first.
    pub retained: Vec<String>,
    pub representative: Option<String>,
    /// Parameter summaries for retained variants.
    pub stats: BTreeMap<String, BTreeMap<String, ParamStats>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TypeConfig {
    pub samples: usize,
    pub groups: BTreeMap<OpId, GroupConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct IndividualModel {
    pub tamperer_id: String,
    pub samples: usize,
    pub threshold: f64,
    pub type_weights: CoefficientVector,
    pub configs: BTreeMap<TamperType, TypeConfig>,
}

impl IndividualModel {
    pub fn representative(&self, t: TamperType, op: OpId) -> Option<&str> {
        self.configs.get(&t)?.groups.get(&op)?.representative.as_deref()
    }
}

/// Fits one tamperer's model: type weights are sample shares, and per group
/// the representative is the most used variant among those used in at
/// least `threshold` of that type's samples.
pub fn fit_individual(logs: &[EditLogRecord], threshold: f64) -> Result<IndividualModel, ModelError> {
    check_threshold(threshold)?;
    let first = logs.first().ok_or(ModelError::EmptyLogs)?;
    if let Some(other) = logs.iter().find(|r| r.tamperer_id != first.tamperer_id) {
        return Err(ModelError::MixedTamperers(first.tamperer_id.clone(), other.tamperer_id.clone()));
    }

    // sample id -> (type, records)
    let mut samples: BTreeMap<&str, (TamperType, Vec<&EditLogRecord>)> = BTreeMap::new();
    for r in logs {
        let entry = samples.entry(r.sample_id.as_str()).or_insert((r.type_id, Vec::new()));
        if entry.0 != r.type_id {
            log::warn!(
                "sample {} of tamperer {} mixes types {} and {}; keeping {}",
                r.sample_id,
                r.tamperer_id,
                entry.0,
                r.type_id,
                entry.0
            );
            continue;
        }
        entry.1.push(r);
    }

    let total = samples.len();
    let mut per_type: BTreeMap<TamperType, Vec<&Vec<&EditLogRecord>>> = BTreeMap::new();
    for (t, recs) in samples.values() {
        per_type.entry(*t).or_default().push(recs);
    }

    let mut weights = vec![0.0; TamperType::ALL.len()];
    let mut configs = BTreeMap::new();
    for (t, sample_recs) in per_type {
        let n = sample_recs.len();
        weights[t.index()] = n as f64 / total as f64;

        // op -> variant -> number of samples using it
        let mut counts: BTreeMap<OpId, BTreeMap<&str, usize>> = BTreeMap::new();
        // op -> variant -> param -> values
        let mut values: BTreeMap<OpId, BTreeMap<&str, BTreeMap<&str, Vec<&str>>>> = BTreeMap::new();
        for recs in &sample_recs {
            let mut used: BTreeSet<(OpId, &str)> = BTreeSet::new();
            for r in recs.iter() {
                if used.insert((r.op_id, r.variant.as_str())) {
                    *counts.entry(r.op_id).or_default().entry(r.variant.as_str()).or_default() += 1;
                }
                let pv = values.entry(r.op_id).or_default().entry(r.variant.as_str()).or_default();
                for (k, v) in &r.params {
                    pv.entry(k.as_str()).or_default().push(v.as_str());
                }
            }
        }

        let mut groups = BTreeMap::new();
        for (op, vc) in counts {
            let usage: BTreeMap<String, f64> =
                vc.iter().map(|(v, c)| (v.to_string(), *c as f64 / n as f64)).collect();
            let mut retained: Vec<(&str, usize)> = vc
                .iter()
                .filter(|(_, &c)| meets(c as f64 / n as f64, threshold))
                .map(|(v, c)| (*v, *c))
                .collect();
            retained.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(b.0)));
            let stats = retained
                .iter()
                .map(|(v, _)| {
                    let per_param = values
                        .get(&op)
                        .and_then(|m| m.get(v))
                        .map(|params| {
                            params
                                .iter()
                                .filter_map(|(p, vals)| {
                                    ParamStats::from_values(vals.iter().copied()).map(|s| (p.to_string(), s))
                                })
                                .collect()
                        })
                        .unwrap_or_default();
                    (v.to_string(), per_param)
                })
                .collect();
            groups.insert(
                op,
                GroupConfig {
                    usage,
                    representative: retained.first().map(|(v, _)| v.to_string()),
                    retained: retained.into_iter().map(|(v, _)| v.to_string()).collect(),
                    stats,
                },
            );
        }
        configs.insert(t, TypeConfig { samples: n, groups });
    }

    Ok(IndividualModel {
        tamperer_id: first.tamperer_id.clone(),
        samples: total,
        threshold,
        type_weights: CoefficientVector(weights),
        configs,
    })
}

/// Population-level summary of one group.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationGroupConfig {
    /// Fraction of all individuals whose representative is each variant,
    /// restricted to variants meeting the population threshold.
    pub shares: BTreeMap<String, f64>,
    pub representative: Option<String>,
    /// Mean per-individual usage of every observed variant, over the
    /// individuals that performed this type.
    pub mean_usage: BTreeMap<String, f64>,
    pub stats: BTreeMap<String, BTreeMap<String, ParamStats>>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationTypeConfig {
    pub individuals: usize,
    pub groups: BTreeMap<OpId, PopulationGroupConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PopulationModel {
    pub format_version: u32,
    pub individuals: usize,
    pub samples: usize,
    pub individual_threshold: f64,
    pub population_threshold: f64,
    /// Normalized type weights.
    pub type_weights: CoefficientVector,
    pub configs: BTreeMap<TamperType, PopulationTypeConfig>,
    /// When set, numeric parameters of representative variants are sampled
    /// from the fitted min/max instead of the table's declared range.
    #[serde(default)]
    pub override_ranges: bool,
}

impl PopulationModel {
    /// A model carrying only the table's type weights and no fitted
    /// configurations.
    pub fn from_table(table: &ParameterTable) -> Result<Self, ModelError> {
        Self::with_weights(table.type_weights.clone())
    }

    pub fn with_weights(weights: CoefficientVector) -> Result<Self, ModelError> {
        Ok(Self {
            format_version: MODEL_FORMAT_VERSION,
            individuals: 0,
            samples: 0,
            individual_threshold: DEFAULT_INDIVIDUAL_THRESHOLD,
            population_threshold: DEFAULT_POPULATION_THRESHOLD,
            type_weights: weights.normalized()?,
            configs: BTreeMap::new(),
            override_ranges: false,
        })
    }

    pub fn representative(&self, t: TamperType, op: OpId) -> Option<&str> {
        self.configs.get(&t)?.groups.get(&op)?.representative.as_deref()
    }

    /// Fitted numeric range for a representative variant's parameter, if
    /// range overriding is enabled and the model has one.
    pub fn range_override(&self, t: TamperType, op: OpId, variant: &str, param: &str) -> Option<(f64, f64)> {
        if !self.override_ranges {
            return None;
        }
        let g = self.configs.get(&t)?.groups.get(&op)?;
        if g.representative.as_deref() != Some(variant) {
            return None;
        }
        let s = g.stats.get(variant)?.get(param)?;
        Some((s.min?, s.max?))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("population model serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, ModelError> {
        #[derive(Deserialize)]
        struct Header {
            format_version: u32,
        }
        let h: Header = serde_json::from_str(text)?;
        if h.format_version != MODEL_FORMAT_VERSION {
            return Err(ModelError::FormatVersion(h.format_version));
        }
        let m: Self = serde_json::from_str(text)?;
        m.type_weights.normalized()?;
        Ok(m)
    }
}

/// Aggregates individual models: type weights are summed then normalized,
/// and a group's representative is the most widely shared individual
/// representative among those shared by at least `threshold` of all
/// individuals.
pub fn aggregate_population(models: &[IndividualModel], threshold: f64) -> Result<PopulationModel, ModelError> {
    check_threshold(threshold)?;
    if models.is_empty() {
        return Err(ModelError::EmptyPopulation);
    }
    let n_ind = models.len();

    let mut summed = vec![0.0; TamperType::ALL.len()];
    for m in models {
        for (s, w) in summed.iter_mut().zip(&m.type_weights.0) {
            *s += w;
        }
    }
    let type_weights = CoefficientVector(summed).normalized()?;

    let mut configs = BTreeMap::new();
    for t in TamperType::ALL {
        let performers: Vec<&TypeConfig> = models.iter().filter_map(|m| m.configs.get(&t)).collect();
        if performers.is_empty() {
            continue;
        }
        let ops: BTreeSet<OpId> = performers.iter().flat_map(|c| c.groups.keys().copied()).collect();
        let mut groups = BTreeMap::new();
        for op in ops {
            let mut rep_counts: BTreeMap<&str, usize> = BTreeMap::new();
            let mut usage_sum: BTreeMap<&str, f64> = BTreeMap::new();
            for c in &performers {
                if let Some(g) = c.groups.get(&op) {
                    if let Some(r) = &g.representative {
                        *rep_counts.entry(r.as_str()).or_default() += 1;
                    }
                    for (v, u) in &g.usage {
                        *usage_sum.entry(v.as_str()).or_default() += u;
                    }
                }
            }
            let shares: BTreeMap<String, f64> = rep_counts
                .iter()
                .map(|(v, c)| (*v, *c as f64 / n_ind as f64))
                .filter(|(_, s)| meets(*s, threshold))
                .map(|(v, s)| (v.to_string(), s))
                .collect();
            let representative = shares
                .iter()
                .fold(None::<(&String, f64)>, |best, (v, s)| match best {
                    Some((_, bs)) if bs >= *s => best,
                    _ => Some((v, *s)),
                })
                .map(|(v, _)| v.clone());
            let mean_usage = usage_sum
                .into_iter()
                .map(|(v, s)| (v.to_string(), s / performers.len() as f64))
                .collect();
            let stats = shares
                .keys()
                .map(|v| {
                    let mut per_param: BTreeMap<&str, Vec<&ParamStats>> = BTreeMap::new();
                    for c in &performers {
                        if let Some(ps) = c.groups.get(&op).and_then(|g| g.stats.get(v)) {
                            for (p, s) in ps {
                                per_param.entry(p.as_str()).or_default().push(s);
                            }
                        }
                    }
                    let merged = per_param
                        .into_iter()
                        .filter_map(|(p, ss)| ParamStats::merge(&ss).map(|s| (p.to_string(), s)))
                        .collect();
                    (v.clone(), merged)
                })
                .collect();
            groups.insert(op, PopulationGroupConfig { shares, representative, mean_usage, stats });
        }
        configs.insert(t, PopulationTypeConfig { individuals: performers.len(), groups });
    }

    Ok(PopulationModel {
        format_version: MODEL_FORMAT_VERSION,
        individuals: n_ind,
        samples: models.iter().map(|m| m.samples).sum(),
        individual_threshold: models[0].threshold,
        population_threshold: threshold,
        type_weights,
        configs,
        override_ranges: false,
    })
}
