//! Structured-config (TOML) form of the parameter table and its validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{
    CoefficientVector, ModelError, OpId, OperationVariant, ParamBounds, ParamSpec, ParamValue,
    ParameterTable, Phase, StepSpec, TamperType, TamperingTypeSpec, VariantGroup, SUM_TOLERANCE,
};

/// Text of the shipped `fsts-default.table`.
pub const DEFAULT_TABLE_TEXT: &str = include_str!("../../assets/fsts-default.table");

const TABLE_FORMAT_VERSION: u32 = 1;

/// A broken invariant, located by a slash-separated path into the table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TableDoc {
    #[serde(default)]
    format_version: Option<u32>,
    #[serde(default)]
    post_scale: Option<f64>,
    #[serde(default)]
    type_weights: Option<BTreeMap<String, f64>>,
    types: Vec<TypeDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct TypeDoc {
    id: String,
    steps: Vec<StepDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StepDoc {
    index: u8,
    name: String,
    phase: Phase,
    groups: Vec<GroupDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GroupDoc {
    op_id: OpId,
    variants: Vec<VariantDoc>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct VariantDoc {
    name: String,
    frequency: f64,
    #[serde(default)]
    params: Vec<ParamDoc>,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ParamDoc {
    name: String,
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    unit: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    lo: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    hi: Option<Num>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    count: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    values: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    r: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    g: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    b: Option<[i64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    value: Option<FixedDoc>,
}

#[derive(Serialize, Deserialize, Clone, Copy)]
#[serde(untagged)]
enum Num {
    Int(i64),
    Float(f64),
}

impl Num {
    fn as_f64(self) -> f64 {
        match self {
            Num::Int(v) => v as f64,
            Num::Float(v) => v,
        }
    }
}

#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum FixedDoc {
    Int(i64),
    Float(f64),
    Text(String),
    List(Vec<i64>),
}

/// Parses and validates a parameter table document.
pub fn load_parameter_table(document: &str) -> Result<ParameterTable, ModelError> {
    let doc: TableDoc = toml::from_str(document).map_err(|e| ModelError::Parse(e.to_string()))?;
    let table = from_doc(doc)?;
    for t in TamperType::ALL {
        if table.type_spec(t).is_none() {
            return Err(ModelError::MissingType(t));
        }
    }
    let violations = validate_table(&table);
    if violations.is_empty() {
        Ok(table)
    } else {
        Err(ModelError::InvalidTable(violations))
    }
}

fn from_doc(doc: TableDoc) -> Result<ParameterTable, ModelError> {
    if let Some(v) = doc.format_version {
        if v != TABLE_FORMAT_VERSION {
            return Err(ModelError::Parse(format!("unsupported table format_version {v}")));
        }
    }
    let mut types = Vec::with_capacity(doc.types.len());
    for td in doc.types {
        let type_id: TamperType = td.id.parse().map_err(ModelError::Parse)?;
        let mut steps = Vec::with_capacity(td.steps.len());
        for sd in td.steps {
            let mut groups = Vec::with_capacity(sd.groups.len());
            for gd in sd.groups {
                let mut variants = Vec::with_capacity(gd.variants.len());
                for vd in gd.variants {
                    let params = vd
                        .params
                        .into_iter()
                        .map(|p| {
                            let path = format!("{type_id}/{}/{}/{}", gd.op_id, vd.name, p.name);
                            param_from_doc(p).map_err(|e| ModelError::Parse(format!("{path}: {e}")))
                        })
                        .collect::<Result<Vec<_>, _>>()?;
                    variants.push(OperationVariant {
                        op_id: gd.op_id,
                        name: vd.name,
                        params,
                        frequency: vd.frequency,
                    });
                }
                groups.push(VariantGroup::new(gd.op_id, variants));
            }
            steps.push(StepSpec { index: sd.index, name: sd.name, phase: sd.phase, groups });
        }
        types.push(TamperingTypeSpec { type_id, steps });
    }

    let type_weights = match doc.type_weights {
        None => CoefficientVector::uniform(TamperType::ALL.len()),
        Some(map) => {
            let mut w = vec![0.0; TamperType::ALL.len()];
            let mut seen = BTreeSet::new();
            for (k, v) in map {
                let t: TamperType = k.parse().map_err(ModelError::Parse)?;
                w[t.index()] = v;
                seen.insert(t);
            }
            if let Some(t) = TamperType::ALL.into_iter().find(|t| !seen.contains(t)) {
                return Err(ModelError::Parse(format!("type_weights has no entry for `{t}`")));
            }
            CoefficientVector(w)
        }
    };

    Ok(ParameterTable { types, type_weights, post_scale: doc.post_scale.unwrap_or(0.3) })
}

fn param_from_doc(p: ParamDoc) -> Result<ParamSpec, String> {
    let need = |n: Option<Num>, field: &str| n.ok_or_else(|| format!("`{field}` is required"));
    let bounds = match p.kind.as_str() {
        "integer-range" => {
            let lo = need(p.lo, "lo")?;
            let hi = need(p.hi, "hi")?;
            match (lo, hi) {
                (Num::Int(lo), Num::Int(hi)) => {
                    ParamBounds::IntegerRange { lo, hi, count: p.count.unwrap_or(1) }
                }
                _ => return Err("integer-range bounds must be integers".into()),
            }
        }
        "real-range" => ParamBounds::RealRange {
            lo: need(p.lo, "lo")?.as_f64(),
            hi: need(p.hi, "hi")?.as_f64(),
        },
        "categorical" => ParamBounds::Categorical(p.values.ok_or("`values` is required")?),
        "color-range" => ParamBounds::ColorRange([
            p.r.ok_or("`r` is required")?,
            p.g.ok_or("`g` is required")?,
            p.b.ok_or("`b` is required")?,
        ]),
        "fixed" => ParamBounds::Fixed(match p.value.ok_or("`value` is required")? {
            FixedDoc::Int(v) => ParamValue::Int(v),
            FixedDoc::Float(v) => ParamValue::Real(v),
            FixedDoc::Text(s) => ParamValue::Text(s),
            FixedDoc::List(l) if l.len() == 3 && l.iter().all(|c| (0..=255).contains(c)) => {
                ParamValue::Color([l[0] as u8, l[1] as u8, l[2] as u8])
            }
            FixedDoc::List(l) => ParamValue::Ints(l),
        }),
        other => return Err(format!("unknown parameter kind `{other}`")),
    };
    Ok(ParamSpec { name: p.name, bounds, unit: p.unit })
}

fn param_to_doc(p: &ParamSpec) -> ParamDoc {
    let mut d = ParamDoc {
        name: p.name.clone(),
        kind: p.bounds.kind().to_string(),
        unit: p.unit.clone(),
        ..Default::default()
    };
    match &p.bounds {
        ParamBounds::IntegerRange { lo, hi, count } => {
            d.lo = Some(Num::Int(*lo));
            d.hi = Some(Num::Int(*hi));
            d.count = (*count != 1).then_some(*count);
        }
        ParamBounds::RealRange { lo, hi } => {
            d.lo = Some(Num::Float(*lo));
            d.hi = Some(Num::Float(*hi));
        }
        ParamBounds::Categorical(values) => d.values = Some(values.clone()),
        ParamBounds::ColorRange([r, g, b]) => {
            d.r = Some(*r);
            d.g = Some(*g);
            d.b = Some(*b);
        }
        ParamBounds::Fixed(v) => {
            d.value = Some(match v {
                ParamValue::Int(v) => FixedDoc::Int(*v),
                ParamValue::Real(v) => FixedDoc::Float(*v),
                ParamValue::Text(s) => FixedDoc::Text(s.clone()),
                ParamValue::Color(c) => FixedDoc::List(c.iter().map(|&x| i64::from(x)).collect()),
                ParamValue::Ints(l) => FixedDoc::List(l.clone()),
            })
        }
    }
    d
}

pub(super) fn serialize_table(table: &ParameterTable) -> String {
    let doc = TableDoc {
        format_version: Some(TABLE_FORMAT_VERSION),
        post_scale: Some(table.post_scale),
        type_weights: Some(
            TamperType::ALL
                .into_iter()
                .map(|t| (t.to_string(), table.type_weights.get(t)))
                .collect(),
        ),
        types: table
            .types
            .iter()
            .map(|t| TypeDoc {
                id: t.type_id.to_string(),
                steps: t
                    .steps
                    .iter()
                    .map(|s| StepDoc {
                        index: s.index,
                        name: s.name.clone(),
                        phase: s.phase,
                        groups: s
                            .groups
                            .iter()
                            .map(|g| GroupDoc {
                                op_id: g.op_id,
                                variants: g
                                    .variants
                                    .iter()
                                    .map(|v| VariantDoc {
                                        name: v.name.clone(),
                                        frequency: v.frequency,
                                        params: v.params.iter().map(param_to_doc).collect(),
                                    })
                                    .collect(),
                            })
                            .collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    toml::to_string(&doc).expect("parameter table serializes to TOML")
}

/// Checks every type/step/group/parameter invariant. An empty result means
/// the table is valid.
pub fn validate_table(table: &ParameterTable) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |path: String, message: String| out.push(Violation { path, message });

    let mut seen_types = BTreeSet::new();
    for t in &table.types {
        if !seen_types.insert(t.type_id) {
            push("types".into(), format!("type `{}` listed twice", t.type_id));
        }
    }
    for t in TamperType::ALL {
        if !seen_types.contains(&t) {
            push("types".into(), format!("missing type `{t}`"));
        }
    }

    if table.type_weights.0.len() != TamperType::ALL.len() {
        push(
            "type_weights".into(),
            format!("expected {} weights, found {}", TamperType::ALL.len(), table.type_weights.0.len()),
        );
    }
    for (t, w) in TamperType::ALL.iter().zip(&table.type_weights.0) {
        if !w.is_finite() || *w < 0.0 {
            push(format!("type_weights/{t}"), format!("weight {w} is negative"));
        }
    }
    if table.type_weights.sum() <= 0.0 {
        push("type_weights".into(), "weights sum to zero".into());
    }
    if !(table.post_scale > 0.0 && table.post_scale <= 1.0) {
        push("post_scale".into(), format!("post_scale {} outside (0,1]", table.post_scale));
    }

    for t in &table.types {
        let tp = t.type_id.to_string();
        if t.steps.is_empty() {
            push(tp.clone(), "no steps".into());
        }
        for pair in t.steps.windows(2) {
            if pair[1].index <= pair[0].index {
                push(
                    format!("{tp}/step {}", pair[1].index),
                    format!("step index {} does not increase on {}", pair[1].index, pair[0].index),
                );
            }
        }
        for s in &t.steps {
            let sp = format!("{tp}/step {}", s.index);
            let mut seen_ops = BTreeSet::new();
            for g in &s.groups {
                let gp = format!("{sp}/{}", g.op_id);
                if !seen_ops.insert(g.op_id) {
                    push(gp.clone(), format!("duplicate op_id {} in step {}", g.op_id, s.index));
                    continue;
                }
                if g.op_id.step != s.index {
                    push(gp.clone(), format!("op_id {} does not belong to step {}", g.op_id, s.index));
                }
                validate_group(g, &gp, &mut push);
            }
        }
    }
    out
}

fn validate_group(g: &VariantGroup, gp: &str, push: &mut impl FnMut(String, String)) {
    if g.variants.is_empty() {
        push(gp.to_string(), "group has no variants".into());
        return;
    }
    let mut names = BTreeSet::new();
    for v in &g.variants {
        let vp = format!("{gp}/{}", v.name);
        if !names.insert(v.name.as_str()) {
            push(vp.clone(), format!("duplicate variant `{}`", v.name));
        }
        if v.name.trim().is_empty() {
            push(vp.clone(), "empty variant name".into());
        }
        if v.op_id != g.op_id {
            push(vp.clone(), format!("variant op_id {} differs from group {}", v.op_id, g.op_id));
        }
        if !(0.0..=1.0).contains(&v.frequency) || v.frequency.is_nan() {
            push(vp.clone(), format!("frequency outside [0,1]: {}", v.frequency));
        }
        let mut pnames = BTreeSet::new();
        for p in &v.params {
            let pp = format!("{vp}/{}", p.name);
            if !pnames.insert(p.name.as_str()) {
                push(pp.clone(), "duplicate parameter".into());
            }
            validate_param(p, &pp, push);
        }
    }
    let mass = g.mass();
    if mass > 1.0 + SUM_TOLERANCE {
        push(gp.to_string(), format!("group frequencies sum to {mass:.6} > 1"));
    }
    if g.residual_none < 0.0 {
        push(gp.to_string(), format!("negative residual {}", g.residual_none));
    } else if mass <= 1.0 + SUM_TOLERANCE && (mass + g.residual_none - 1.0).abs() > SUM_TOLERANCE {
        push(
            gp.to_string(),
            format!("frequencies {mass:.6} plus residual {:.6} do not sum to 1", g.residual_none),
        );
    }
}

fn validate_param(p: &ParamSpec, pp: &str, push: &mut impl FnMut(String, String)) {
    match &p.bounds {
        ParamBounds::IntegerRange { lo, hi, count } => {
            if lo > hi {
                push(pp.to_string(), format!("lower bound {lo} exceeds upper bound {hi}"));
            }
            if *count == 0 {
                push(pp.to_string(), "count must be at least 1".into());
            }
        }
        ParamBounds::RealRange { lo, hi } => {
            if !(lo <= hi) {
                push(pp.to_string(), format!("lower bound {lo} exceeds upper bound {hi}"));
            }
        }
        ParamBounds::Categorical(values) => {
            if values.is_empty() {
                push(pp.to_string(), "categorical value list is empty".into());
            }
        }
        ParamBounds::ColorRange(channels) => {
            for (name, [lo, hi]) in ["r", "g", "b"].iter().zip(channels) {
                if !(0..=255).contains(lo) || !(0..=255).contains(hi) || lo > hi {
                    push(pp.to_string(), format!("channel {name} range [{lo},{hi}] invalid"));
                }
            }
        }
        ParamBounds::Fixed(_) => {}
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn group<'a>(t: &'a ParameterTable, ty: TamperType, op: &str) -> &'a VariantGroup {
        t.type_spec(ty).unwrap().group(op.parse().unwrap()).unwrap()
    }

    #[test]
    fn default_table_validates() {
        let table = ParameterTable::default_table();
        assert!(validate_table(&table).is_empty());
        assert_eq!(table.post_scale, 0.3);
        assert_eq!(table.type_weights, CoefficientVector(vec![0.2; 5]));
    }

    #[test]
    fn replacement_removal_group_matches_table() {
        let table = ParameterTable::default_table();
        let g = group(&table, TamperType::Replacement, "2.1");
        let got: Vec<(&str, f64)> = g.variants.iter().map(|v| (v.name.as_str(), v.frequency)).collect();
        assert_eq!(
            got,
            vec![
                ("content-aware-fill", 0.617),
                ("solid-color-fill", 0.096),
                ("background-clone", 0.095),
                ("clone-stamp", 0.104),
                ("healing-brush", 0.088),
            ]
        );
        assert_eq!(g.residual_none, 0.0);
    }

    #[test]
    fn copy_move_extraction_group_has_residual() {
        let table = ParameterTable::default_table();
        let g = group(&table, TamperType::CopyMove, "2.1");
        let f: Vec<f64> = g.variants.iter().map(|v| v.frequency).collect();
        assert_eq!(f, vec![0.1853, 0.2374]);
        assert!((g.residual_none - 0.5773).abs() < 1e-9);
    }

    #[test]
    fn removal_group_sums_to_one() {
        let table = ParameterTable::default_table();
        let g = group(&table, TamperType::Removal, "2.1");
        assert!((g.mass() - 1.0).abs() < 1e-9);
        assert_eq!(g.residual_none, 0.0);
    }

    #[test]
    fn every_default_group_sums_to_one_with_residual() {
        let table = ParameterTable::default_table();
        for t in &table.types {
            for (_, g) in t.groups() {
                assert!((g.mass() + g.residual_none - 1.0).abs() < 1e-6, "{} {}", t.type_id, g.op_id);
            }
        }
    }

    #[test]
    fn rejects_out_of_range_frequency() {
        let text = DEFAULT_TABLE_TEXT.replace("frequency = 0.1853", "frequency = 1.2");
        let err = load_parameter_table(&text).unwrap_err();
        assert!(err.to_string().contains("frequency outside [0,1]"), "{err}");
    }

    #[test]
    fn rejects_oversubscribed_group() {
        let text = DEFAULT_TABLE_TEXT.replace("frequency = 0.617", "frequency = 0.717");
        let err = load_parameter_table(&text).unwrap_err();
        assert!(err.to_string().contains("sum to 1.100000 > 1"), "{err}");
    }

    #[test]
    fn rejects_missing_type() {
        let cut = DEFAULT_TABLE_TEXT.find("[[types]]\nid = \"replacement\"").unwrap();
        let err = load_parameter_table(&DEFAULT_TABLE_TEXT[..cut]).unwrap_err();
        assert!(matches!(err, ModelError::MissingType(TamperType::Replacement)));
    }

    #[test]
    fn rejects_unknown_keys_and_bad_syntax() {
        let text = DEFAULT_TABLE_TEXT.replace("post_scale = 0.3", "post_scale = 0.3\nflavour = 1");
        assert!(matches!(load_parameter_table(&text), Err(ModelError::Parse(_))));
        assert!(matches!(load_parameter_table("types = ["), Err(ModelError::Parse(_))));
    }

    #[test]
    fn duplicate_op_id_is_one_violation() {
        let mut table = ParameterTable::default_table();
        let step = &mut table.types[0].steps[1];
        let mut dup = step.groups[1].clone();
        dup.op_id = step.groups[0].op_id;
        for v in &mut dup.variants {
            v.op_id = dup.op_id;
        }
        step.groups.push(dup);
        let v = validate_table(&table);
        assert_eq!(v.len(), 1, "{v:?}");
        assert!(v[0].message.contains("2.1"));
    }

    #[test]
    fn violations_name_their_path() {
        let mut table = ParameterTable::default_table();
        let g = &mut table.types[2].steps[0].groups[1];
        g.variants[0].params[0].bounds = ParamBounds::IntegerRange { lo: 20, hi: 1, count: 1 };
        let v = validate_table(&table);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].path, "removal/step 1/1.2/text-forgery-control/text_length");
    }

    #[test]
    fn serialization_round_trips() {
        let table = ParameterTable::default_table();
        let text = table.to_config_string();
        let back = load_parameter_table(&text).unwrap();
        assert_eq!(back, table);
    }
}
