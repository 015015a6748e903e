//! Synthetic editing logs drawn from a known population model, used to
//! check that fitting recovers the model it came from.

use std::collections::BTreeMap;

use super::{
    CoefficientVector, EditLogRecord, ParameterTable, Phase, PopulationGroupConfig, PopulationModel,
    PopulationTypeConfig, TamperType, VariantGroup, MODEL_FORMAT_VERSION,
};
use crate::sampler::{derive_stream, sample_parameter, select_exclusive_variant, RngStream};

/// The population model implied by a table alone: its type weights, and
/// per group the most frequent variant (ties to the smaller name) as the
/// representative shared by everyone.
pub fn reference_population(table: &ParameterTable) -> PopulationModel {
    let mut configs = BTreeMap::new();
    for spec in &table.types {
        let mut groups = BTreeMap::new();
        for (_, g) in spec.groups() {
            let Some(rep) = argmax_variant(g) else { continue };
            groups.insert(
                g.op_id,
                PopulationGroupConfig {
                    shares: BTreeMap::from([(rep.clone(), 1.0)]),
                    representative: Some(rep),
                    mean_usage: g.variants.iter().map(|v| (v.name.clone(), v.frequency)).collect(),
                    stats: BTreeMap::new(),
                },
            );
        }
        configs.insert(spec.type_id, PopulationTypeConfig { individuals: 0, groups });
    }
    PopulationModel {
        format_version: MODEL_FORMAT_VERSION,
        individuals: 0,
        samples: 0,
        individual_threshold: super::DEFAULT_INDIVIDUAL_THRESHOLD,
        population_threshold: super::DEFAULT_POPULATION_THRESHOLD,
        type_weights: table.type_weights.normalized().unwrap_or_else(|_| CoefficientVector::uniform(5)),
        configs,
        override_ranges: false,
    }
}

fn argmax_variant(g: &VariantGroup) -> Option<String> {
    g.variants
        .iter()
        .filter(|v| v.frequency > 0.0)
        .fold(None::<(&str, f64)>, |best, v| match best {
            Some((bn, bf)) if bf > v.frequency || (bf == v.frequency && bn <= v.name.as_str()) => best,
            _ => Some((&v.name, v.frequency)),
        })
        .map(|(n, _)| n.to_string())
}

/// Generates editing logs for tamperers who share the population's
/// representatives as habits.
///
/// Each tamperer's type counts are the systematic allocation of its samples
/// over the true weights (random start), so per-individual type shares are
/// within one sample of `a_k * J`. Within a sample every group uses the
/// representative with probability `habit`; otherwise the variant is drawn
/// from the table frequencies (post-processing groups unscaled).
#[derive(Clone, Debug)]
pub struct LogSimulator<'a> {
    table: &'a ParameterTable,
    truth: &'a PopulationModel,
    habit: f64,
}

impl<'a> LogSimulator<'a> {
    pub fn new(table: &'a ParameterTable, truth: &'a PopulationModel) -> Self {
        Self { table, truth, habit: 0.6 }
    }

    pub fn with_habit(mut self, habit: f64) -> Self {
        self.habit = habit.clamp(0.0, 1.0);
        self
    }

    pub fn generate(&self, tamperers: usize, samples_each: usize, seed: u64) -> Vec<EditLogRecord> {
        let mut out = Vec::new();
        for i in 0..tamperers {
            let tid = format!("t{i:03}");
            let mut rng = derive_stream(seed, &format!("tamperer/{tid}"));
            let counts = systematic_counts(&self.truth.type_weights.0, samples_each, &mut rng);
            let mut j = 0;
            for (k, c) in counts.into_iter().enumerate() {
                for _ in 0..c {
                    let sid = format!("{tid}-j{j:04}");
                    self.sample(&tid, &sid, TamperType::ALL[k], &mut rng, &mut out);
                    j += 1;
                }
            }
        }
        out
    }

    fn sample(&self, tid: &str, sid: &str, t: TamperType, rng: &mut RngStream, out: &mut Vec<EditLogRecord>) {
        let Some(spec) = self.table.type_spec(t) else { return };
        for (step, g) in spec.groups() {
            let rep = self.truth.representative(t, g.op_id).and_then(|r| g.variant(r));
            let chosen = match rep {
                Some(v) if rng.bernoulli(self.habit) => Some(v),
                _ if step.phase == Phase::Post => {
                    if rng.bernoulli(g.mass().min(1.0)) {
                        let w: Vec<f64> = g.variants.iter().map(|v| v.frequency).collect();
                        rng.weighted_index(&w).map(|i| &g.variants[i])
                    } else {
                        None
                    }
                }
                _ => select_exclusive_variant(g, rng),
            };
            let Some(v) = chosen else { continue };
            let params = v.params.iter().map(|p| (p.name.clone(), sample_parameter(p, rng).to_string())).collect();
            out.push(EditLogRecord {
                tamperer_id: tid.to_string(),
                sample_id: sid.to_string(),
                type_id: t,
                op_id: g.op_id,
                variant: v.name.clone(),
                params,
            });
        }
    }
}

fn systematic_counts(weights: &[f64], n: usize, rng: &mut RngStream) -> Vec<usize> {
    let total: f64 = weights.iter().sum();
    let u = rng.next_f64();
    let mut cum = 0.0;
    let mut prev = u.floor() as i64;
    weights
        .iter()
        .map(|w| {
            cum += w / total * n as f64;
            let next = (u + cum + 1e-9).floor() as i64;
            let c = (next - prev).max(0) as usize;
            prev = next;
            c
        })
        .collect()
}
