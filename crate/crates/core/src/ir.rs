//! Structured premise representations: the contract between extraction and
//! reasoning. Solvers only ever see these, never raw text.

use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::kb::EvidenceTier;
use crate::types::ReasoningFamily;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomId(pub String);

impl AtomId {
    pub fn new(id: impl Into<String>) -> Self {
        AtomId(id.into())
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for AtomId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for AtomId {
    fn from(s: &str) -> Self {
        AtomId(s.to_string())
    }
}

/// Canonical matching key: lowercase with whitespace runs collapsed.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomKey(String);

impl AtomKey {
    pub fn new(text: &str) -> Self {
        let mut out = String::with_capacity(text.len());
        for word in text.split_whitespace() {
            if !out.is_empty() {
                out.push(' ');
            }
            out.extend(word.chars().flat_map(char::to_lowercase));
        }
        AtomKey(out)
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    /// True when one key is a word-boundary prefix of the other.
    pub fn shares_prefix_with(&self, other: &AtomKey) -> bool {
        fn is_word_prefix(short: &str, long: &str) -> bool {
            long.starts_with(short)
                && (long.len() == short.len() || long.as_bytes()[short.len()] == b' ')
        }
        if self.0.is_empty() || other.0.is_empty() {
            return false;
        }
        is_word_prefix(&self.0, &other.0) || is_word_prefix(&other.0, &self.0)
    }
}

impl fmt::Display for AtomKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

/// Where an atom's content comes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AtomSource {
    Premise,
    Statement,
    /// Background knowledge invoked by the extractor or solver; admissible
    /// only when the clinical model lists it as a general regularity.
    Knowledge,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub id: AtomId,
    pub text: String,
    pub source: AtomSource,
}

impl Atom {
    pub fn new(id: &str, text: &str, source: AtomSource) -> Self {
        Self {
            id: AtomId::new(id),
            text: text.to_string(),
            source,
        }
    }

    pub fn key(&self) -> AtomKey {
        AtomKey::new(&self.text)
    }

    pub fn is_grounded(&self) -> bool {
        matches!(self.source, AtomSource::Premise | AtomSource::Statement)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AtomTable(pub Vec<Atom>);

impl AtomTable {
    pub fn get(&self, id: &AtomId) -> Option<&Atom> {
        self.0.iter().find(|a| &a.id == id)
    }

    pub fn contains(&self, id: &AtomId) -> bool {
        self.get(id).is_some()
    }

    /// Key of the atom's text, if the atom is in the table.
    pub fn key_of(&self, id: &AtomId) -> Option<AtomKey> {
        self.get(id).map(Atom::key)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Atom> {
        self.0.iter()
    }

    pub fn push(&mut self, atom: Atom) {
        self.0.push(atom);
    }

    pub fn remove(&mut self, id: &AtomId) -> Option<Atom> {
        let pos = self.0.iter().position(|a| &a.id == id)?;
        Some(self.0.remove(pos))
    }

    pub fn knowledge_atoms(&self) -> Vec<AtomId> {
        self.0
            .iter()
            .filter(|a| a.source == AtomSource::Knowledge)
            .map(|a| a.id.clone())
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Causal
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    Causal,
    Associational,
    Tolerability,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalClaim {
    pub treatment: AtomId,
    pub outcome: AtomId,
    pub kind: ClaimKind,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CausalEvidence {
    pub has_comparator: bool,
    pub temporality_established: bool,
    pub confounding_controlled: bool,
    pub interventional: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub comparator_shows_effect: Option<bool>,
    /// Premise atoms grounding the evidence flags (design, comparator arm, result).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<AtomId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalIr {
    pub atoms: AtomTable,
    pub claims: Vec<CausalClaim>,
    pub evidence: CausalEvidence,
    /// Adverse-event rates reported alongside the causal question.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub reported_events: Vec<RiskEvent>,
}

// ---------------------------------------------------------------------------
// Compositional
// ---------------------------------------------------------------------------

/// A typed value tied to the atom it was read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grounded<T> {
    pub value: T,
    pub atom: AtomId,
}

impl<T> Grounded<T> {
    pub fn new(value: T, atom: &str) -> Self {
        Self {
            value,
            atom: AtomId::new(atom),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum DoseUnit {
    #[serde(rename = "mg/m2/day")]
    MgPerM2PerDay,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dose {
    pub value: f64,
    pub unit: DoseUnit,
}

impl Dose {
    pub fn mg_m2_day(value: f64) -> Self {
        Self {
            value,
            unit: DoseUnit::MgPerM2PerDay,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub duration_days: u32,
    pub frequency: String,
}

impl Schedule {
    pub fn daily(duration_days: u32) -> Self {
        Self {
            duration_days,
            frequency: "daily".into(),
        }
    }
}

/// The tuple ⟨drug, dose, diagnosis, schedule⟩. A missing factor leaves the
/// configuration underdetermined.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Regimen {
    pub drug: Option<Grounded<String>>,
    pub dose: Option<Grounded<Dose>>,
    pub diagnosis: Option<Grounded<String>>,
    pub schedule: Option<Grounded<Schedule>>,
}

impl Regimen {
    pub fn factor_count(&self) -> usize {
        self.drug.is_some() as usize
            + self.dose.is_some() as usize
            + self.diagnosis.is_some() as usize
            + self.schedule.is_some() as usize
    }

    pub fn factor_atoms(&self) -> Vec<AtomId> {
        let mut out = Vec::new();
        if let Some(g) = &self.drug {
            out.push(g.atom.clone());
        }
        if let Some(g) = &self.dose {
            out.push(g.atom.clone());
        }
        if let Some(g) = &self.diagnosis {
            out.push(g.atom.clone());
        }
        if let Some(g) = &self.schedule {
            out.push(g.atom.clone());
        }
        out
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Patient {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub age: Option<Grounded<f64>>,
    #[serde(default)]
    pub attributes: Vec<Grounded<String>>,
}

impl Patient {
    pub fn atoms(&self) -> Vec<AtomId> {
        self.age
            .iter()
            .map(|g| g.atom.clone())
            .chain(self.attributes.iter().map(|g| g.atom.clone()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompositionalIr {
    pub atoms: AtomTable,
    #[serde(rename = "tuple")]
    pub regimen: Regimen,
    #[serde(default)]
    pub patient: Patient,
    pub asserted_benefit: AtomId,
}

// ---------------------------------------------------------------------------
// Epistemic
// ---------------------------------------------------------------------------

/// K_a(φ): proposition φ reported by agent a, at an evidence tier.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Commitment {
    pub agent: String,
    pub proposition: AtomId,
    pub tier: EvidenceTier,
}

impl Commitment {
    pub fn new(agent: &str, proposition: &str, tier: EvidenceTier) -> Self {
        Self {
            agent: agent.to_string(),
            proposition: AtomId::new(proposition),
            tier,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Asserts,
    Denies,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpistemicIr {
    pub atoms: AtomTable,
    pub commitments: Vec<Commitment>,
    pub statement: AtomId,
    pub polarity: Polarity,
}

// ---------------------------------------------------------------------------
// Risk
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Likelihood {
    Probability(f64),
    /// k events among n patients.
    Frequency { k: u32, n: u32 },
}

impl Likelihood {
    pub fn probability(&self) -> f64 {
        match *self {
            Likelihood::Probability(p) => p,
            Likelihood::Frequency { k, n } => {
                if n == 0 {
                    f64::NAN
                } else {
                    f64::from(k) / f64::from(n)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskEvent {
    pub event: AtomId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub likelihood: Option<Likelihood>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub severity_grade: Option<u8>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RiskClaim {
    /// `higher` carries more expected harm than `lower`; with no `lower`,
    /// `higher` is claimed to be the dominant risk.
    Ordering {
        higher: AtomId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        lower: Option<AtomId>,
    },
    /// `action` is required to exclude `condition`.
    ExclusionRequired { condition: AtomId, action: String },
    /// The listed events make up the dominant risk profile.
    Profile { events: Vec<AtomId> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TreatmentOutcome {
    pub treatment: AtomId,
    pub outcome: AtomId,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RiskIr {
    pub atoms: AtomTable,
    #[serde(default)]
    pub events: Vec<RiskEvent>,
    #[serde(default)]
    pub latent_findings: Vec<AtomId>,
    #[serde(default)]
    pub excluded_conditions: Vec<AtomId>,
    pub claim: RiskClaim,
    /// Set when the statement is phrased as a treatment → outcome relation.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub treatment_outcome: Option<TreatmentOutcome>,
}

// ---------------------------------------------------------------------------
// Union
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum StructuredPremise {
    #[serde(rename = "causal_attribution")]
    Causal(CausalIr),
    #[serde(rename = "compositional_grounding")]
    Compositional(CompositionalIr),
    #[serde(rename = "epistemic_verification")]
    Epistemic(EpistemicIr),
    #[serde(rename = "risk_state_abstraction")]
    Risk(RiskIr),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum IrError {
    #[error("duplicate atom id `{0}`")]
    DuplicateAtom(AtomId),
    #[error("`{field}` references unknown atom `{id}`")]
    UnknownAtom { field: String, id: AtomId },
    #[error("causal IR has no claims")]
    NoClaims,
    #[error("comparator_shows_effect is set but has_comparator is false")]
    EffectWithoutComparator,
    #[error("dose must be positive, got {0}")]
    NonPositiveDose(f64),
    #[error("schedule duration must be at least one day")]
    ZeroDuration,
    #[error("epistemic IR has no commitments")]
    NoCommitments,
    #[error("probability for `{event}` outside [0, 1]: {value}")]
    ProbabilityOutOfRange { event: AtomId, value: f64 },
    #[error("frequency for `{event}` is {k}/{n}")]
    BadFrequency { event: AtomId, k: u32, n: u32 },
    #[error("severity grade for `{event}` must be 1..5, got {grade}")]
    GradeOutOfRange { event: AtomId, grade: u8 },
}

impl StructuredPremise {
    pub fn family(&self) -> ReasoningFamily {
        match self {
            StructuredPremise::Causal(_) => ReasoningFamily::CausalAttribution,
            StructuredPremise::Compositional(_) => ReasoningFamily::CompositionalGrounding,
            StructuredPremise::Epistemic(_) => ReasoningFamily::EpistemicVerification,
            StructuredPremise::Risk(_) => ReasoningFamily::RiskStateAbstraction,
        }
    }

    pub fn atoms(&self) -> &AtomTable {
        match self {
            StructuredPremise::Causal(ir) => &ir.atoms,
            StructuredPremise::Compositional(ir) => &ir.atoms,
            StructuredPremise::Epistemic(ir) => &ir.atoms,
            StructuredPremise::Risk(ir) => &ir.atoms,
        }
    }

    pub fn atoms_mut(&mut self) -> &mut AtomTable {
        match self {
            StructuredPremise::Causal(ir) => &mut ir.atoms,
            StructuredPremise::Compositional(ir) => &mut ir.atoms,
            StructuredPremise::Epistemic(ir) => &mut ir.atoms,
            StructuredPremise::Risk(ir) => &mut ir.atoms,
        }
    }

    /// Every atom reference in the IR, with the field it sits in.
    pub fn references(&self) -> Vec<(String, AtomId)> {
        let mut refs = Vec::new();
        let mut push = |field: &str, id: &AtomId| refs.push((field.to_string(), id.clone()));
        match self {
            StructuredPremise::Causal(ir) => {
                for (i, c) in ir.claims.iter().enumerate() {
                    push(&format!("claims[{i}].treatment"), &c.treatment);
                    push(&format!("claims[{i}].outcome"), &c.outcome);
                }
                for (i, a) in ir.evidence.support.iter().enumerate() {
                    push(&format!("evidence.support[{i}]"), a);
                }
                for (i, e) in ir.reported_events.iter().enumerate() {
                    push(&format!("reported_events[{i}].event"), &e.event);
                }
            }
            StructuredPremise::Compositional(ir) => {
                let r = &ir.regimen;
                if let Some(g) = &r.drug {
                    push("tuple.drug", &g.atom);
                }
                if let Some(g) = &r.dose {
                    push("tuple.dose", &g.atom);
                }
                if let Some(g) = &r.diagnosis {
                    push("tuple.diagnosis", &g.atom);
                }
                if let Some(g) = &r.schedule {
                    push("tuple.schedule", &g.atom);
                }
                if let Some(g) = &ir.patient.age {
                    push("patient.age", &g.atom);
                }
                for (i, g) in ir.patient.attributes.iter().enumerate() {
                    push(&format!("patient.attributes[{i}]"), &g.atom);
                }
                push("asserted_benefit", &ir.asserted_benefit);
            }
            StructuredPremise::Epistemic(ir) => {
                for (i, c) in ir.commitments.iter().enumerate() {
                    push(&format!("commitments[{i}].proposition"), &c.proposition);
                }
                push("statement", &ir.statement);
            }
            StructuredPremise::Risk(ir) => {
                for (i, e) in ir.events.iter().enumerate() {
                    push(&format!("events[{i}].event"), &e.event);
                }
                for (i, a) in ir.latent_findings.iter().enumerate() {
                    push(&format!("latent_findings[{i}]"), a);
                }
                for (i, a) in ir.excluded_conditions.iter().enumerate() {
                    push(&format!("excluded_conditions[{i}]"), a);
                }
                match &ir.claim {
                    RiskClaim::Ordering { higher, lower } => {
                        push("claim.higher", higher);
                        if let Some(l) = lower {
                            push("claim.lower", l);
                        }
                    }
                    RiskClaim::ExclusionRequired { condition, .. } => {
                        push("claim.condition", condition)
                    }
                    RiskClaim::Profile { events } => {
                        for (i, e) in events.iter().enumerate() {
                            push(&format!("claim.events[{i}]"), e);
                        }
                    }
                }
                if let Some(to) = &ir.treatment_outcome {
                    push("treatment_outcome.treatment", &to.treatment);
                    push("treatment_outcome.outcome", &to.outcome);
                }
            }
        }
        refs
    }

    pub fn validate(&self) -> Result<(), IrError> {
        let mut seen = HashSet::new();
        for atom in self.atoms().iter() {
            if !seen.insert(&atom.id) {
                return Err(IrError::DuplicateAtom(atom.id.clone()));
            }
        }
        for (field, id) in self.references() {
            if !self.atoms().contains(&id) {
                return Err(IrError::UnknownAtom { field, id });
            }
        }
        match self {
            StructuredPremise::Causal(ir) => {
                if ir.claims.is_empty() {
                    return Err(IrError::NoClaims);
                }
                if ir.evidence.comparator_shows_effect.is_some() && !ir.evidence.has_comparator {
                    return Err(IrError::EffectWithoutComparator);
                }
                validate_events(&ir.reported_events)?;
            }
            StructuredPremise::Compositional(ir) => {
                if let Some(d) = &ir.regimen.dose {
                    if d.value.value.is_nan() || d.value.value <= 0.0 {
                        return Err(IrError::NonPositiveDose(d.value.value));
                    }
                }
                if let Some(s) = &ir.regimen.schedule {
                    if s.value.duration_days < 1 {
                        return Err(IrError::ZeroDuration);
                    }
                }
            }
            StructuredPremise::Epistemic(ir) => {
                if ir.commitments.is_empty() {
                    return Err(IrError::NoCommitments);
                }
            }
            StructuredPremise::Risk(ir) => validate_events(&ir.events)?,
        }
        Ok(())
    }

    /// Drops every element that depends on `id` and removes the atom from the
    /// table. Returns false when a reference the decision cannot do without
    /// (statement atom, claimed event, asserted benefit) was removed.
    pub fn remove_atom(&mut self, id: &AtomId) -> bool {
        let mut decidable = true;
        match self {
            StructuredPremise::Causal(ir) => {
                ir.claims.retain(|c| &c.treatment != id && &c.outcome != id);
                ir.evidence.support.retain(|a| a != id);
                ir.reported_events.retain(|e| &e.event != id);
            }
            StructuredPremise::Compositional(ir) => {
                let r = &mut ir.regimen;
                if r.drug.as_ref().is_some_and(|g| &g.atom == id) {
                    r.drug = None;
                }
                if r.dose.as_ref().is_some_and(|g| &g.atom == id) {
                    r.dose = None;
                }
                if r.diagnosis.as_ref().is_some_and(|g| &g.atom == id) {
                    r.diagnosis = None;
                }
                if r.schedule.as_ref().is_some_and(|g| &g.atom == id) {
                    r.schedule = None;
                }
                if ir.patient.age.as_ref().is_some_and(|g| &g.atom == id) {
                    ir.patient.age = None;
                }
                ir.patient.attributes.retain(|g| &g.atom != id);
                if &ir.asserted_benefit == id {
                    decidable = false;
                }
            }
            StructuredPremise::Epistemic(ir) => {
                ir.commitments.retain(|c| &c.proposition != id);
                if &ir.statement == id {
                    decidable = false;
                }
            }
            StructuredPremise::Risk(ir) => {
                ir.events.retain(|e| &e.event != id);
                ir.latent_findings.retain(|a| a != id);
                ir.excluded_conditions.retain(|a| a != id);
                if ir
                    .treatment_outcome
                    .as_ref()
                    .is_some_and(|t| &t.treatment == id || &t.outcome == id)
                {
                    ir.treatment_outcome = None;
                }
                match &mut ir.claim {
                    RiskClaim::Ordering { higher, lower } => {
                        if higher == id || lower.as_ref() == Some(id) {
                            decidable = false;
                        }
                    }
                    RiskClaim::ExclusionRequired { condition, .. } => {
                        if condition == id {
                            decidable = false;
                        }
                    }
                    RiskClaim::Profile { events } => {
                        events.retain(|e| e != id);
                        if events.is_empty() {
                            decidable = false;
                        }
                    }
                }
            }
        }
        self.atoms_mut().remove(id);
        decidable
    }

    /// Points every reference to `from` at `to` instead, then drops `from`
    /// from the table. Typed compositional values are re-read from the
    /// replacement atom's text; a value that cannot be re-read is dropped.
    pub fn replace_atom(&mut self, from: &AtomId, to: &AtomId) {
        let replacement_text = self.atoms().get(to).map(|a| a.text.clone());
        let swap = |a: &mut AtomId| {
            if a == from {
                *a = to.clone();
            }
        };
        match self {
            StructuredPremise::Causal(ir) => {
                for c in &mut ir.claims {
                    swap(&mut c.treatment);
                    swap(&mut c.outcome);
                }
                ir.evidence.support.iter_mut().for_each(swap);
                for e in &mut ir.reported_events {
                    swap(&mut e.event);
                }
            }
            StructuredPremise::Compositional(ir) => {
                let text = replacement_text.unwrap_or_default();
                let r = &mut ir.regimen;
                if let Some(g) = r.drug.as_mut().filter(|g| &g.atom == from) {
                    g.atom = to.clone();
                    g.value = text.trim().to_lowercase();
                }
                if r.dose.as_ref().is_some_and(|g| &g.atom == from) {
                    r.dose = first_number(&text)
                        .filter(|v| *v > 0.0)
                        .map(|v| Grounded {
                            value: Dose::mg_m2_day(v),
                            atom: to.clone(),
                        });
                }
                if let Some(g) = r.diagnosis.as_mut().filter(|g| &g.atom == from) {
                    g.atom = to.clone();
                    g.value = text.trim().to_lowercase();
                }
                if r.schedule.as_ref().is_some_and(|g| &g.atom == from) {
                    let frequency = r
                        .schedule
                        .as_ref()
                        .map(|g| g.value.frequency.clone())
                        .unwrap_or_default();
                    r.schedule = first_number(&text)
                        .filter(|v| *v >= 1.0 && v.fract() == 0.0)
                        .map(|v| Grounded {
                            value: Schedule {
                                duration_days: v as u32,
                                frequency,
                            },
                            atom: to.clone(),
                        });
                }
                if ir.patient.age.as_ref().is_some_and(|g| &g.atom == from) {
                    ir.patient.age = first_number(&text).map(|v| Grounded {
                        value: v,
                        atom: to.clone(),
                    });
                }
                for g in &mut ir.patient.attributes {
                    if &g.atom == from {
                        g.atom = to.clone();
                        g.value = text.trim().to_lowercase();
                    }
                }
                swap(&mut ir.asserted_benefit);
            }
            StructuredPremise::Epistemic(ir) => {
                for c in &mut ir.commitments {
                    swap(&mut c.proposition);
                }
                swap(&mut ir.statement);
            }
            StructuredPremise::Risk(ir) => {
                for e in &mut ir.events {
                    swap(&mut e.event);
                }
                ir.latent_findings.iter_mut().for_each(swap);
                ir.excluded_conditions.iter_mut().for_each(swap);
                match &mut ir.claim {
                    RiskClaim::Ordering { higher, lower } => {
                        swap(higher);
                        if let Some(l) = lower {
                            swap(l);
                        }
                    }
                    RiskClaim::ExclusionRequired { condition, .. } => swap(condition),
                    RiskClaim::Profile { events } => events.iter_mut().for_each(swap),
                }
                if let Some(t) = &mut ir.treatment_outcome {
                    swap(&mut t.treatment);
                    swap(&mut t.outcome);
                }
            }
        }
        if from != to {
            self.atoms_mut().remove(from);
        }
    }
}

fn validate_events(events: &[RiskEvent]) -> Result<(), IrError> {
    for e in events {
        match e.likelihood {
            Some(Likelihood::Probability(p)) if !(0.0..=1.0).contains(&p) => {
                return Err(IrError::ProbabilityOutOfRange {
                    event: e.event.clone(),
                    value: p,
                })
            }
            Some(Likelihood::Frequency { k, n }) if n == 0 || k > n => {
                return Err(IrError::BadFrequency {
                    event: e.event.clone(),
                    k,
                    n,
                })
            }
            _ => {}
        }
        if let Some(g) = e.severity_grade {
            if !(1..=5).contains(&g) {
                return Err(IrError::GradeOutOfRange {
                    event: e.event.clone(),
                    grade: g,
                });
            }
        }
    }
    Ok(())
}

/// First decimal number appearing in `text`, if any.
pub(crate) fn first_number(text: &str) -> Option<f64> {
    let bytes = text.as_bytes();
    let start = bytes.iter().position(u8::is_ascii_digit)?;
    let mut end = start;
    let mut seen_dot = false;
    while end < bytes.len() {
        match bytes[end] {
            b'0'..=b'9' => end += 1,
            b'.' if !seen_dot && end + 1 < bytes.len() && bytes[end + 1].is_ascii_digit() => {
                seen_dot = true;
                end += 1;
            }
            _ => break,
        }
    }
    text[start..end].parse().ok()
}
