//! Tampering-parameter data model.
//!
//! A [`ParameterTable`] describes, for each of the five tampering types, the
//! ordered processing steps, the mutually exclusive variant groups within each
//! step, the parameters of every variant and how often each variant is used.
//! The fitting half of the module ([`fit_individual`], [`aggregate_population`])
//! turns editing logs into per-tamperer and population-level models, and
//! [`coefficient_distance`] compares type-weight vectors.

mod fit;
mod simulate;
mod table;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use fit::{
    aggregate_population, fit_individual, GroupConfig, IndividualModel, ParamStats,
    PopulationGroupConfig, PopulationModel, PopulationTypeConfig, TypeConfig,
    DEFAULT_INDIVIDUAL_THRESHOLD, DEFAULT_POPULATION_THRESHOLD, MODEL_FORMAT_VERSION,
};
pub use simulate::{reference_population, LogSimulator};
pub use table::{load_parameter_table, validate_table, Violation, DEFAULT_TABLE_TEXT};

/// Tolerance applied to "frequencies sum to one" checks.
pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(thiserror::Error, Debug)]
pub enum ModelError {
    #[error("failed to parse parameter table: {0}")]
    Parse(String),

    #[error("parameter table is missing tampering type `{0}`")]
    MissingType(TamperType),

    #[error("invalid parameter table: {}", format_violations(.0))]
    InvalidTable(Vec<Violation>),

    #[error("no edit log records given")]
    EmptyLogs,

    #[error("edit logs mix tamperers `{0}` and `{1}`")]
    MixedTamperers(String, String),

    #[error("threshold {0} outside (0,1)")]
    BadThreshold(f64),

    #[error("no individual models to aggregate")]
    EmptyPopulation,

    #[error("coefficient vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),

    #[error("coefficient vector sums to zero")]
    ZeroVector,

    #[error("coefficient vector has a negative or non-finite entry")]
    NegativeCoefficient,

    #[error("unsupported model format version {0}")]
    FormatVersion(u32),

    #[error("model serialization failed: {0}")]
    Serde(#[from] serde_json::Error),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ")
}

/// One of the five tampering types.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TamperType {
    CopyMove,
    Splicing,
    Removal,
    Insertion,
    Replacement,
}

impl TamperType {
    pub const ALL: [TamperType; 5] = [
        TamperType::CopyMove,
        TamperType::Splicing,
        TamperType::Removal,
        TamperType::Insertion,
        TamperType::Replacement,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            TamperType::CopyMove => "copy-move",
            TamperType::Splicing => "splicing",
            TamperType::Removal => "removal",
            TamperType::Insertion => "insertion",
            TamperType::Replacement => "replacement",
        }
    }

    /// Position of this type in [`TamperType::ALL`] and in every
    /// [`CoefficientVector`].
    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for TamperType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for TamperType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        TamperType::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| format!("unknown tampering type `{s}`"))
    }
}

/// Hierarchical operation index such as `2.1`: the step number followed by
/// the position inside the step.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct OpId {
    pub step: u8,
    pub sub: u8,
}

impl OpId {
    pub fn new(step: u8, sub: u8) -> Self {
        Self { step, sub }
    }
}

impl fmt::Display for OpId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}", self.step, self.sub)
    }
}

impl FromStr for OpId {
    type Err = String;

    /// Accepts exactly `<digit>.<digit>`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let b = s.as_bytes();
        if b.len() == 3 && b[0].is_ascii_digit() && b[1] == b'.' && b[2].is_ascii_digit() {
            Ok(OpId::new(b[0] - b'0', b[2] - b'0'))
        } else {
            Err(format!("op id `{s}` does not match <digit>.<digit>"))
        }
    }
}

impl Serialize for OpId {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for OpId {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Bounds of one tunable parameter.
#[derive(Clone, Debug, PartialEq)]
pub enum ParamBounds {
    /// Inclusive integer range; `count` independent values are drawn
    /// (e.g. the 25 entries of a convolution kernel).
    IntegerRange { lo: i64, hi: i64, count: usize },
    RealRange { lo: f64, hi: f64 },
    Categorical(Vec<String>),
    /// Inclusive per-channel byte ranges, `[lo, hi]` for R, G, B.
    ColorRange([[i64; 2]; 3]),
    Fixed(ParamValue),
}

impl ParamBounds {
    pub fn kind(&self) -> &'static str {
        match self {
            ParamBounds::IntegerRange { .. } => "integer-range",
            ParamBounds::RealRange { .. } => "real-range",
            ParamBounds::Categorical(_) => "categorical",
            ParamBounds::ColorRange(_) => "color-range",
            ParamBounds::Fixed(_) => "fixed",
        }
    }

    /// Whether `value` lies within these bounds.
    pub fn contains(&self, value: &ParamValue) -> bool {
        match (self, value) {
            (ParamBounds::IntegerRange { lo, hi, count: 1 }, ParamValue::Int(v)) => {
                lo <= v && v <= hi
            }
            (ParamBounds::IntegerRange { lo, hi, count }, ParamValue::Ints(vs)) => {
                vs.len() == *count && vs.iter().all(|v| lo <= v && v <= hi)
            }
            (ParamBounds::RealRange { lo, hi }, ParamValue::Real(v)) => *lo <= *v && *v <= *hi,
            (ParamBounds::Categorical(values), ParamValue::Text(v)) => values.contains(v),
            (ParamBounds::ColorRange(ch), ParamValue::Color(c)) => ch
                .iter()
                .zip(c)
                .all(|([lo, hi], v)| *lo <= i64::from(*v) && i64::from(*v) <= *hi),
            (ParamBounds::Fixed(f), v) => f == v,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamSpec {
    pub name: String,
    pub bounds: ParamBounds,
    /// Display unit (pixels, degrees, percent, levels, characters, zones).
    pub unit: Option<String>,
}

/// A concrete parameter value, as resolved by the sampler.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamValue {
    Int(i64),
    Real(f64),
    Text(String),
    Color([u8; 3]),
    Ints(Vec<i64>),
}

impl ParamValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            ParamValue::Int(v) => Some(*v as f64),
            ParamValue::Real(v) => Some(*v),
            _ => None,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            ParamValue::Int(v) => Some(*v),
            ParamValue::Real(v) => Some(v.round() as i64),
            _ => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            ParamValue::Text(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_color(&self) -> Option<[u8; 3]> {
        match self {
            ParamValue::Color(c) => Some(*c),
            _ => None,
        }
    }

    pub fn as_ints(&self) -> Option<&[i64]> {
        match self {
            ParamValue::Ints(v) => Some(v),
            _ => None,
        }
    }
}

impl fmt::Display for ParamValue {
    /// Compact textual form used by edit logs (`key=value`).
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Int(v) => write!(f, "{v}"),
            ParamValue::Real(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
            ParamValue::Color([r, g, b]) => write!(f, "rgb({r},{g},{b})"),
            ParamValue::Ints(vs) => {
                let parts: Vec<String> = vs.iter().map(ToString::to_string).collect();
                write!(f, "[{}]", parts.join(","))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperationVariant {
    pub op_id: OpId,
    pub name: String,
    pub params: Vec<ParamSpec>,
    /// Usage frequency in [0,1].
    pub frequency: f64,
}

/// Mutually exclusive variants sharing one op id. `residual_none` is the
/// probability that the group is skipped entirely.
#[derive(Clone, Debug, PartialEq)]
pub struct VariantGroup {
    pub op_id: OpId,
    pub variants: Vec<OperationVariant>,
    pub residual_none: f64,
}

impl VariantGroup {
    /// Builds a group and derives `residual_none` from the member
    /// frequencies (clamped at zero; validation reports oversubscription).
    pub fn new(op_id: OpId, variants: Vec<OperationVariant>) -> Self {
        let mass: f64 = variants.iter().map(|v| v.frequency).sum();
        let residual = 1.0 - mass;
        let residual_none = if residual.abs() <= SUM_TOLERANCE { 0.0 } else { residual.max(0.0) };
        Self { op_id, variants, residual_none }
    }

    pub fn mass(&self) -> f64 {
        self.variants.iter().map(|v| v.frequency).sum()
    }

    pub fn variant(&self, name: &str) -> Option<&OperationVariant> {
        self.variants.iter().find(|v| v.name == name)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Main,
    Post,
}

#[derive(Clone, Debug, PartialEq)]
pub struct StepSpec {
    pub index: u8,
    pub name: String,
    pub phase: Phase,
    pub groups: Vec<VariantGroup>,
}

impl StepSpec {
    /// Post-processing steps have their frequencies multiplied by the
    /// table's `post_scale` when sampled.
    pub fn is_post_scaled(&self) -> bool {
        self.phase == Phase::Post
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TamperingTypeSpec {
    pub type_id: TamperType,
    pub steps: Vec<StepSpec>,
}

impl TamperingTypeSpec {
    pub fn groups(&self) -> impl Iterator<Item = (&StepSpec, &VariantGroup)> {
        self.steps.iter().flat_map(|s| s.groups.iter().map(move |g| (s, g)))
    }

    pub fn group(&self, op_id: OpId) -> Option<&VariantGroup> {
        self.groups().map(|(_, g)| g).find(|g| g.op_id == op_id)
    }

    pub fn step_of(&self, op_id: OpId) -> Option<&StepSpec> {
        self.groups().find(|(_, g)| g.op_id == op_id).map(|(s, _)| s)
    }
}

/// Nonnegative weights indexed by [`TamperType::index`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct CoefficientVector(pub Vec<f64>);

impl CoefficientVector {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// A one-hot vector over the five types.
    pub fn only(t: TamperType) -> Self {
        let mut v = vec![0.0; TamperType::ALL.len()];
        v[t.index()] = 1.0;
        Self(v)
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn get(&self, t: TamperType) -> f64 {
        self.0.get(t.index()).copied().unwrap_or(0.0)
    }

    pub fn normalized(&self) -> Result<Self, ModelError> {
        if self.0.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(ModelError::NegativeCoefficient);
        }
        let s = self.sum();
        if s <= 0.0 {
            return Err(ModelError::ZeroVector);
        }
        Ok(Self(self.0.iter().map(|v| v / s).collect()))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParameterTable {
    pub types: Vec<TamperingTypeSpec>,
    pub type_weights: CoefficientVector,
    pub post_scale: f64,
}

impl ParameterTable {
    /// The shipped default table.
    pub fn default_table() -> Self {
        load_parameter_table(DEFAULT_TABLE_TEXT).expect("shipped default table is valid")
    }

    pub fn type_spec(&self, t: TamperType) -> Option<&TamperingTypeSpec> {
        self.types.iter().find(|s| s.type_id == t)
    }

    /// Serializes back to the structured config format.
    pub fn to_config_string(&self) -> String {
        table::serialize_table(self)
    }
}

/// One line of an editing log: a single operation applied in one sample.
#[derive(Clone, Debug, PartialEq)]
pub struct EditLogRecord {
    pub tamperer_id: String,
    pub sample_id: String,
    pub type_id: TamperType,
    pub op_id: OpId,
    pub variant: String,
    pub params: BTreeMap<String, String>,
}

impl EditLogRecord {
    /// Tab-separated line: `tamperer, sample, type, op, variant, k=v;k=v`.
    pub fn to_line(&self) -> String {
        let params: Vec<String> = self.params.iter().map(|(k, v)| format!("{k}={v}")).collect();
        format!(
            "{}\t{}\t{}\t{}\t{}\t{}",
            self.tamperer_id,
            self.sample_id,
            self.type_id,
            self.op_id,
            self.variant,
            params.join(";")
        )
    }

    pub fn parse_line(line: &str) -> Result<Self, String> {
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 6 && fields.len() != 5 {
            return Err(format!("expected 6 tab-separated fields, found {}", fields.len()));
        }
        for (i, f) in fields.iter().take(5).enumerate() {
            if f.trim().is_empty() {
                return Err(format!("field {} is empty", i + 1));
            }
        }
        let type_id: TamperType = fields[2].trim().parse()?;
        let op_id: OpId = fields[3].trim().parse()?;
        let mut params = BTreeMap::new();
        if let Some(p) = fields.get(5) {
            for kv in p.split(';').map(str::trim).filter(|s| !s.is_empty()) {
                let (k, v) = kv
                    .split_once('=')
                    .ok_or_else(|| format!("parameter `{kv}` is not key=value"))?;
                params.insert(k.trim().to_string(), v.trim().to_string());
            }
        }
        Ok(Self {
            tamperer_id: fields[0].trim().to_string(),
            sample_id: fields[1].trim().to_string(),
            type_id,
            op_id,
            variant: fields[4].trim().to_string(),
            params,
        })
    }
}

/// Total variation distance between the normalized forms of two coefficient
/// vectors: `0.5 * sum |a/sum(a) - b/sum(b)|`, always in [0,1].
pub fn coefficient_distance(
    a: &CoefficientVector,
    a_hat: &CoefficientVector,
) -> Result<f64, ModelError> {
    if a.0.len() != a_hat.0.len() {
        return Err(ModelError::LengthMismatch(a.0.len(), a_hat.0.len()));
    }
    let p = a.normalized()?;
    let q = a_hat.normalized()?;
    let d = 0.5 * p.0.iter().zip(&q.0).map(|(x, y)| (x - y).abs()).sum::<f64>();
    Ok(d.clamp(0.0, 1.0))
}
