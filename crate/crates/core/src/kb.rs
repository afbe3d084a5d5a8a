//! The machine-readable clinical model: drug monographs, exclusion axioms,
//! the evidence-tier order, red-flag rules, and harm weights.
//!
//! Loaded once from a JSON document and shared read-only afterwards.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ir::AtomKey;

const REFERENCE_KB: &str = include_str!("../assets/reference_kb.json");

pub const KB_VERSION: u32 = 1;

/// Evidence tiers, listed from most to least plausible under the default order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceTier {
    ObjectiveMeasurement,
    DiagnosticCriterion,
    Observation,
    Interpretation,
    SelfReport,
}

impl EvidenceTier {
    pub const DEFAULT_ORDER: [EvidenceTier; 5] = [
        EvidenceTier::ObjectiveMeasurement,
        EvidenceTier::DiagnosticCriterion,
        EvidenceTier::Observation,
        EvidenceTier::Interpretation,
        EvidenceTier::SelfReport,
    ];

    pub fn label(self) -> &'static str {
        match self {
            EvidenceTier::ObjectiveMeasurement => "objective measurement",
            EvidenceTier::DiagnosticCriterion => "diagnostic criterion",
            EvidenceTier::Observation => "observation",
            EvidenceTier::Interpretation => "interpretation",
            EvidenceTier::SelfReport => "self-report",
        }
    }
}

impl fmt::Display for EvidenceTier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoseRange {
    pub min: f64,
    pub max: f64,
}

impl DoseRange {
    /// Closed interval: both bounds are admissible.
    pub fn contains(&self, value: f64) -> bool {
        self.min <= value && value <= self.max
    }

    pub fn center(&self) -> f64 {
        (self.min + self.max) / 2.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Indication {
    pub diagnosis: String,
    /// `None` when the model has no benefit evidence for this indication.
    #[serde(default)]
    pub benefit_supported: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Contraindication {
    /// Patient carries this attribute (matched by canonical key).
    Attribute(String),
    /// Patient age is at or above the threshold.
    AgeAtLeast(f64),
}

impl Contraindication {
    pub fn applies_to(&self, patient: &PatientProfile) -> bool {
        match self {
            Contraindication::Attribute(attr) => {
                let key = AtomKey::new(attr);
                patient.attributes.iter().any(|a| AtomKey::new(a) == key)
            }
            Contraindication::AgeAtLeast(threshold) => {
                patient.age.is_some_and(|age| age >= *threshold)
            }
        }
    }
}

impl fmt::Display for Contraindication {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Contraindication::Attribute(a) => write!(f, "{a}"),
            Contraindication::AgeAtLeast(t) => write!(f, "age >= {t}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DrugMonograph {
    pub name: String,
    /// mg/m² per day.
    pub standard_dose: DoseRange,
    pub max_duration_days: u32,
    #[serde(default)]
    pub indications: Vec<Indication>,
    #[serde(default)]
    pub contraindications: Vec<Contraindication>,
}

impl DrugMonograph {
    pub fn indication(&self, diagnosis: &str) -> Option<&Indication> {
        let key = AtomKey::new(diagnosis);
        self.indications
            .iter()
            .find(|i| AtomKey::new(&i.diagnosis) == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExclusionAxiom {
    pub atoms: Vec<String>,
    #[serde(default)]
    pub rationale: String,
}

impl ExclusionAxiom {
    pub fn keys(&self) -> BTreeSet<AtomKey> {
        self.atoms.iter().map(|a| AtomKey::new(a)).collect()
    }

    pub fn contains(&self, key: &AtomKey) -> bool {
        self.atoms.iter().any(|a| &AtomKey::new(a) == key)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RedFlagRule {
    pub syndrome: String,
    pub required_findings: Vec<String>,
    pub mandated_action: String,
    pub assumed_grade: u8,
}

impl RedFlagRule {
    pub fn required_keys(&self) -> BTreeSet<AtomKey> {
        self.required_findings.iter().map(|f| AtomKey::new(f)).collect()
    }
}

/// On-disk layout of the clinical model.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KbDocument {
    pub kb_version: u32,
    #[serde(default)]
    pub drugs: Vec<DrugMonograph>,
    #[serde(default)]
    pub exclusion_axioms: Vec<ExclusionAxiom>,
    #[serde(default)]
    pub tiers: Option<Vec<EvidenceTier>>,
    #[serde(default)]
    pub red_flags: Vec<RedFlagRule>,
    #[serde(default)]
    pub harm_weights: Option<Vec<f64>>,
    #[serde(default)]
    pub general_regularities: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("schema error at line {line}, column {column}: {message}")]
    Schema {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("consistency error in `{field}`: {message}")]
    Consistency { field: String, message: String },
}

impl ModelError {
    fn consistency(field: impl Into<String>, message: impl Into<String>) -> Self {
        ModelError::Consistency {
            field: field.into(),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("drug `{drug}` is not in the clinical model")]
pub struct KbMiss {
    pub drug: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
#[error("severity grade {0} outside 1..=5")]
pub struct GradeOutOfRange(pub u8);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Constraint {
    DoseRange,
    Duration,
    Indication,
    Contraindication,
}

impl fmt::Display for Constraint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Constraint::DoseRange => "dose-range",
            Constraint::Duration => "duration",
            Constraint::Indication => "indication",
            Constraint::Contraindication => "contraindication",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub constraint: Constraint,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdmissibilityResult {
    pub violations: Vec<Violation>,
}

impl AdmissibilityResult {
    pub fn is_admissible(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn violates(&self, c: Constraint) -> bool {
        self.violations.iter().any(|v| v.constraint == c)
    }
}

/// A fully assembled ⟨drug, dose, diagnosis, schedule⟩ configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimenTuple {
    pub drug: String,
    /// mg/m² per day.
    pub dose: f64,
    pub diagnosis: String,
    pub duration_days: u32,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PatientProfile {
    pub age: Option<f64>,
    pub attributes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClinicalModel {
    pub drugs: Vec<DrugMonograph>,
    pub exclusion_axioms: Vec<ExclusionAxiom>,
    /// Tiers from most to least plausible.
    pub tier_order: [EvidenceTier; 5],
    pub red_flags: Vec<RedFlagRule>,
    /// Harm weight for grades 1..=5.
    pub harm_weights: [f64; 5],
    pub general_regularities: BTreeSet<AtomKey>,
}

impl ClinicalModel {
    /// The bundled reference model covering the worked clinical problems.
    pub fn reference() -> Self {
        Self::from_json_str(REFERENCE_KB).expect("bundled reference KB is valid")
    }

    pub fn reference_json() -> &'static str {
        REFERENCE_KB
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ModelError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_json_str(&text)
    }

    pub fn from_json_str(text: &str) -> Result<Self, ModelError> {
        let doc: KbDocument = serde_json::from_str(text).map_err(|e| ModelError::Schema {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_document(doc)
    }

    pub fn from_document(doc: KbDocument) -> Result<Self, ModelError> {
        if doc.kb_version != KB_VERSION {
            return Err(ModelError::consistency(
                "kb_version",
                format!("expected {KB_VERSION}, found {}", doc.kb_version),
            ));
        }

        let tier_order = match doc.tiers {
            None => EvidenceTier::DEFAULT_ORDER,
            Some(tiers) => {
                let distinct: HashSet<_> = tiers.iter().collect();
                if tiers.len() != 5 || distinct.len() != 5 {
                    return Err(ModelError::consistency(
                        "tiers",
                        "must list each of the five evidence tiers exactly once",
                    ));
                }
                [tiers[0], tiers[1], tiers[2], tiers[3], tiers[4]]
            }
        };

        let harm_weights = match doc.harm_weights {
            None => default_harm_weights(),
            Some(w) => {
                if w.len() != 5 {
                    return Err(ModelError::consistency(
                        "harm_weights",
                        format!("expected 5 weights, found {}", w.len()),
                    ));
                }
                if w.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
                    return Err(ModelError::consistency(
                        "harm_weights",
                        "weights must be positive and finite",
                    ));
                }
                if w.windows(2).any(|p| p[0] >= p[1]) {
                    return Err(ModelError::consistency(
                        "harm_weights",
                        "weights must be strictly increasing in grade",
                    ));
                }
                [w[0], w[1], w[2], w[3], w[4]]
            }
        };

        let mut names = HashSet::new();
        for (i, drug) in doc.drugs.iter().enumerate() {
            let field = format!("drugs[{i}]");
            if drug.name.trim().is_empty() {
                return Err(ModelError::consistency(format!("{field}.name"), "empty"));
            }
            if !names.insert(AtomKey::new(&drug.name)) {
                return Err(ModelError::consistency(
                    format!("{field}.name"),
                    format!("duplicate drug `{}`", drug.name),
                ));
            }
            let range = drug.standard_dose;
            if !(range.min.is_finite() && range.max.is_finite() && range.min > 0.0) {
                return Err(ModelError::consistency(
                    format!("{field}.standard_dose"),
                    format!("`{}`: bounds must be positive", drug.name),
                ));
            }
            if range.min > range.max {
                return Err(ModelError::consistency(
                    format!("{field}.standard_dose"),
                    format!("`{}`: min {} exceeds max {}", drug.name, range.min, range.max),
                ));
            }
            if drug.max_duration_days < 1 {
                return Err(ModelError::consistency(
                    format!("{field}.max_duration_days"),
                    format!("`{}`: must be at least 1", drug.name),
                ));
            }
            let mut dx = HashSet::new();
            for (j, ind) in drug.indications.iter().enumerate() {
                if !dx.insert(AtomKey::new(&ind.diagnosis)) {
                    return Err(ModelError::consistency(
                        format!("{field}.indications[{j}]"),
                        format!("duplicate diagnosis `{}`", ind.diagnosis),
                    ));
                }
            }
        }

        for (i, ax) in doc.exclusion_axioms.iter().enumerate() {
            if ax.keys().len() < 2 {
                return Err(ModelError::consistency(
                    format!("exclusion_axioms[{i}].atoms"),
                    "an exclusion axiom needs at least two distinct atoms",
                ));
            }
        }

        for (i, rule) in doc.red_flags.iter().enumerate() {
            if rule.required_findings.is_empty() {
                return Err(ModelError::consistency(
                    format!("red_flags[{i}].required_findings"),
                    "must not be empty",
                ));
            }
            if !(1..=5).contains(&rule.assumed_grade) {
                return Err(ModelError::consistency(
                    format!("red_flags[{i}].assumed_grade"),
                    format!("grade {} outside 1..=5", rule.assumed_grade),
                ));
            }
        }

        Ok(ClinicalModel {
            drugs: doc.drugs,
            exclusion_axioms: doc.exclusion_axioms,
            tier_order,
            red_flags: doc.red_flags,
            harm_weights,
            general_regularities: doc
                .general_regularities
                .iter()
                .map(|r| AtomKey::new(r))
                .collect(),
        })
    }

    pub fn to_document(&self) -> KbDocument {
        KbDocument {
            kb_version: KB_VERSION,
            drugs: self.drugs.clone(),
            exclusion_axioms: self.exclusion_axioms.clone(),
            tiers: Some(self.tier_order.to_vec()),
            red_flags: self.red_flags.clone(),
            harm_weights: Some(self.harm_weights.to_vec()),
            general_regularities: self
                .general_regularities
                .iter()
                .map(|k| k.as_str().to_string())
                .collect(),
        }
    }

    pub fn drug(&self, name: &str) -> Option<&DrugMonograph> {
        let key = AtomKey::new(name);
        self.drugs.iter().find(|d| AtomKey::new(&d.name) == key)
    }

    /// drug → diagnoses it is indicated for.
    pub fn indication_map(&self) -> BTreeMap<String, BTreeSet<String>> {
        self.drugs
            .iter()
            .map(|d| {
                (
                    d.name.clone(),
                    d.indications.iter().map(|i| i.diagnosis.clone()).collect(),
                )
            })
            .collect()
    }

    /// Position of `tier` under π; 0 is the most plausible.
    pub fn tier_rank(&self, tier: EvidenceTier) -> usize {
        self.tier_order
            .iter()
            .position(|t| *t == tier)
            .expect("tier order is a permutation")
    }

    /// True iff `a` strictly outranks `b` under π.
    pub fn dominates(&self, a: EvidenceTier, b: EvidenceTier) -> bool {
        self.tier_rank(a) < self.tier_rank(b)
    }

    pub fn is_general_regularity(&self, key: &AtomKey) -> bool {
        self.general_regularities.contains(key)
    }

    /// Exclusion axioms whose atom set is contained in `atoms`.
    pub fn conflicts(&self, atoms: &BTreeSet<AtomKey>) -> Vec<&ExclusionAxiom> {
        self.exclusion_axioms
            .iter()
            .filter(|ax| ax.atoms.iter().all(|a| atoms.contains(&AtomKey::new(a))))
            .collect()
    }

    pub fn harm_weight(&self, grade: u8) -> Result<f64, GradeOutOfRange> {
        if (1..=5).contains(&grade) {
            Ok(self.harm_weights[usize::from(grade - 1)])
        } else {
            Err(GradeOutOfRange(grade))
        }
    }

    /// Same model with every harm weight multiplied by `factor`.
    pub fn with_scaled_harm(&self, factor: f64) -> Self {
        let mut m = self.clone();
        for w in &mut m.harm_weights {
            *w *= factor;
        }
        m
    }

    pub fn red_flag_for(&self, syndrome: &AtomKey) -> Option<&RedFlagRule> {
        self.red_flags
            .iter()
            .find(|r| &AtomKey::new(&r.syndrome) == syndrome)
    }

    /// Checks the tuple against dose range, duration, indication and
    /// contraindication constraints, returning every violated one.
    pub fn admissible(
        &self,
        tuple: &RegimenTuple,
        patient: &PatientProfile,
    ) -> Result<AdmissibilityResult, KbMiss> {
        let drug = self.drug(&tuple.drug).ok_or_else(|| KbMiss {
            drug: tuple.drug.clone(),
        })?;
        let mut violations = Vec::new();

        let range = drug.standard_dose;
        if !range.contains(tuple.dose) {
            let direction = if tuple.dose > range.max { "above" } else { "below" };
            violations.push(Violation {
                constraint: Constraint::DoseRange,
                detail: format!(
                    "{} mg/m2/day is {direction} the standard range [{}, {}] ({:.1}x the standard {})",
                    fmt_num(tuple.dose),
                    fmt_num(range.min),
                    fmt_num(range.max),
                    tuple.dose / range.center(),
                    fmt_num(range.center()),
                ),
            });
        }
        if tuple.duration_days > drug.max_duration_days {
            violations.push(Violation {
                constraint: Constraint::Duration,
                detail: format!(
                    "{} days exceeds the maximum course of {} days",
                    tuple.duration_days, drug.max_duration_days
                ),
            });
        }
        if drug.indication(&tuple.diagnosis).is_none() {
            violations.push(Violation {
                constraint: Constraint::Indication,
                detail: format!("{} is not indicated for {}", drug.name, tuple.diagnosis),
            });
        }
        for ci in &drug.contraindications {
            if ci.applies_to(patient) {
                violations.push(Violation {
                    constraint: Constraint::Contraindication,
                    detail: format!("{} is contraindicated with {ci}", drug.name),
                });
            }
        }
        Ok(AdmissibilityResult { violations })
    }
}

/// Default A(grade) = 10^(grade-1).
pub fn default_harm_weights() -> [f64; 5] {
    [1.0, 10.0, 100.0, 1000.0, 10000.0]
}

pub(crate) fn fmt_num(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{x}")
    }
}
