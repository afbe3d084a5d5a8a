//! Domain types shared by every stage of the pipeline.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::ir::{AtomId, StructuredPremise};

/// The four inference families an item can be routed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ReasoningFamily {
    CausalAttribution,
    CompositionalGrounding,
    EpistemicVerification,
    RiskStateAbstraction,
}

impl ReasoningFamily {
    pub const ALL: [ReasoningFamily; 4] = [
        ReasoningFamily::CausalAttribution,
        ReasoningFamily::CompositionalGrounding,
        ReasoningFamily::EpistemicVerification,
        ReasoningFamily::RiskStateAbstraction,
    ];

    /// Canonical step sequence a trace of this family must follow.
    pub fn schema(self) -> &'static [StepKind] {
        use StepKind::*;
        match self {
            ReasoningFamily::CausalAttribution => &[
                ParseClaims,
                CheckComparator,
                CheckTemporality,
                CheckConfounding,
                Decide,
            ],
            ReasoningFamily::CompositionalGrounding => {
                &[ExtractFactors, AssembleTuple, CheckAdmissibility, Decide]
            }
            ReasoningFamily::EpistemicVerification => &[
                ListCommitments,
                RankTiers,
                ResolveConflicts,
                CheckEntailment,
                Decide,
            ],
            ReasoningFamily::RiskStateAbstraction => &[
                ClassifyEvents,
                IntegrateSeverityLikelihood,
                RankOrFlag,
                Decide,
            ],
        }
    }

    pub fn index(self) -> usize {
        match self {
            ReasoningFamily::CausalAttribution => 0,
            ReasoningFamily::CompositionalGrounding => 1,
            ReasoningFamily::EpistemicVerification => 2,
            ReasoningFamily::RiskStateAbstraction => 3,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            ReasoningFamily::CausalAttribution => "causal_attribution",
            ReasoningFamily::CompositionalGrounding => "compositional_grounding",
            ReasoningFamily::EpistemicVerification => "epistemic_verification",
            ReasoningFamily::RiskStateAbstraction => "risk_state_abstraction",
        }
    }

    /// Human-facing name, as used in prompts and reports.
    pub fn title(self) -> &'static str {
        match self {
            ReasoningFamily::CausalAttribution => "Causal Attribution",
            ReasoningFamily::CompositionalGrounding => "Compositional Grounding",
            ReasoningFamily::EpistemicVerification => "Epistemic Verification",
            ReasoningFamily::RiskStateAbstraction => "Risk State Abstraction",
        }
    }

    /// Short prefix used in item ids.
    pub fn short(self) -> &'static str {
        match self {
            ReasoningFamily::CausalAttribution => "causal",
            ReasoningFamily::CompositionalGrounding => "comp",
            ReasoningFamily::EpistemicVerification => "epis",
            ReasoningFamily::RiskStateAbstraction => "risk",
        }
    }
}

impl fmt::Display for ReasoningFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown reasoning family `{0}`")]
pub struct UnknownFamily(pub String);

impl FromStr for ReasoningFamily {
    type Err = UnknownFamily;

    /// Accepts snake_case ids, titles, and the short aliases (`causal`, `comp`, ...).
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .trim()
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .map(|c| c.to_ascii_lowercase())
            .collect();
        let family = match norm.as_str() {
            "causalattribution" | "causal" => ReasoningFamily::CausalAttribution,
            "compositionalgrounding" | "compositional" | "comp" => {
                ReasoningFamily::CompositionalGrounding
            }
            "epistemicverification" | "epistemic" | "epis" => {
                ReasoningFamily::EpistemicVerification
            }
            "riskstateabstraction" | "riskabstraction" | "risk" => {
                ReasoningFamily::RiskStateAbstraction
            }
            _ => return Err(UnknownFamily(s.to_string())),
        };
        Ok(family)
    }
}

/// Three-way NLI label. There is deliberately no abstain value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Entailment,
    Contradiction,
    Neutral,
}

impl Verdict {
    pub const ALL: [Verdict; 3] = [Verdict::Entailment, Verdict::Contradiction, Verdict::Neutral];

    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Entailment => "entailment",
            Verdict::Contradiction => "contradiction",
            Verdict::Neutral => "neutral",
        }
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Verdict {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "entailment" | "entailed" => Ok(Verdict::Entailment),
            "contradiction" | "contradicted" => Ok(Verdict::Contradiction),
            "neutral" | "undetermined" => Ok(Verdict::Neutral),
            other => Err(format!("unknown verdict `{other}`")),
        }
    }
}

/// Kinds of reasoning steps. Each family uses its own subset, with `Decide`
/// shared by all four.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepKind {
    // causal
    ParseClaims,
    CheckComparator,
    CheckTemporality,
    CheckConfounding,
    // compositional
    ExtractFactors,
    AssembleTuple,
    CheckAdmissibility,
    // epistemic
    ListCommitments,
    RankTiers,
    ResolveConflicts,
    CheckEntailment,
    // risk
    ClassifyEvents,
    IntegrateSeverityLikelihood,
    RankOrFlag,
    // shared
    Decide,
}

impl StepKind {
    pub const ALL: [StepKind; 15] = [
        StepKind::ParseClaims,
        StepKind::CheckComparator,
        StepKind::CheckTemporality,
        StepKind::CheckConfounding,
        StepKind::ExtractFactors,
        StepKind::AssembleTuple,
        StepKind::CheckAdmissibility,
        StepKind::ListCommitments,
        StepKind::RankTiers,
        StepKind::ResolveConflicts,
        StepKind::CheckEntailment,
        StepKind::ClassifyEvents,
        StepKind::IntegrateSeverityLikelihood,
        StepKind::RankOrFlag,
        StepKind::Decide,
    ];

    pub fn belongs_to(self, family: ReasoningFamily) -> bool {
        family.schema().contains(&self)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceStep {
    pub kind: StepKind,
    pub cited_atoms: Vec<AtomId>,
    pub note: String,
}

impl TraceStep {
    pub fn new(kind: StepKind, cited_atoms: Vec<AtomId>, note: impl Into<String>) -> Self {
        Self {
            kind,
            cited_atoms,
            note: note.into(),
        }
    }
}

/// Ordered schema steps with the atoms each one relied on. This is the unit
/// the verifier audits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReasoningTrace {
    pub family: ReasoningFamily,
    pub steps: Vec<TraceStep>,
    pub proposed_verdict: Verdict,
}

impl ReasoningTrace {
    pub fn kinds(&self) -> Vec<StepKind> {
        self.steps.iter().map(|s| s.kind).collect()
    }

    pub fn cited_atoms(&self) -> impl Iterator<Item = &AtomId> {
        self.steps.iter().flat_map(|s| s.cited_atoms.iter())
    }
}

/// A premise/statement pair, optionally carrying gold annotations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NliItem {
    pub id: String,
    #[serde(rename = "premise")]
    pub premise_text: String,
    #[serde(rename = "statement")]
    pub statement_text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_family: Option<ReasoningFamily>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_verdict: Option<Verdict>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gold_ir: Option<StructuredPremise>,
    /// Name of the template that produced the item, if generated.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub template: Option<String>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ItemError {
    #[error("item id is empty")]
    EmptyId,
    #[error("item `{0}` has an empty premise")]
    EmptyPremise(String),
    #[error("item `{0}` has an empty statement")]
    EmptyStatement(String),
    #[error("item `{id}`: gold IR is tagged {ir} but gold family is {gold}")]
    FamilyMismatch {
        id: String,
        ir: ReasoningFamily,
        gold: String,
    },
    #[error("item `{id}`: {source}")]
    InvalidIr {
        id: String,
        source: crate::ir::IrError,
    },
}

impl NliItem {
    pub fn validate(&self) -> Result<(), ItemError> {
        if self.id.trim().is_empty() {
            return Err(ItemError::EmptyId);
        }
        if self.premise_text.trim().is_empty() {
            return Err(ItemError::EmptyPremise(self.id.clone()));
        }
        if self.statement_text.trim().is_empty() {
            return Err(ItemError::EmptyStatement(self.id.clone()));
        }
        if let Some(ir) = &self.gold_ir {
            if self.gold_family != Some(ir.family()) {
                return Err(ItemError::FamilyMismatch {
                    id: self.id.clone(),
                    ir: ir.family(),
                    gold: self
                        .gold_family
                        .map(|f| f.to_string())
                        .unwrap_or_else(|| "absent".into()),
                });
            }
            ir.validate().map_err(|source| ItemError::InvalidIr {
                id: self.id.clone(),
                source,
            })?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn schemas_end_in_decide_and_are_distinct() {
        for family in ReasoningFamily::ALL {
            let schema = family.schema();
            assert_eq!(schema.last(), Some(&StepKind::Decide));
            let mut seen = schema.to_vec();
            seen.sort();
            seen.dedup();
            assert_eq!(seen.len(), schema.len());
        }
    }

    #[test]
    fn every_step_kind_belongs_to_some_family() {
        for kind in StepKind::ALL {
            assert!(ReasoningFamily::ALL.iter().any(|f| kind.belongs_to(*f)));
        }
    }

    #[test]
    fn family_parses_titles_and_aliases() {
        assert_eq!(
            "Risk State Abstraction".parse::<ReasoningFamily>().unwrap(),
            ReasoningFamily::RiskStateAbstraction
        );
        assert_eq!(
            "causal".parse::<ReasoningFamily>().unwrap(),
            ReasoningFamily::CausalAttribution
        );
        assert!("temporal".parse::<ReasoningFamily>().is_err());
    }
}
