//! Routes an item to exactly one reasoning family from the inferential
//! signatures present in its structured premise.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::ir::{AtomKey, StructuredPremise};
use crate::kb::ClinicalModel;
use crate::types::ReasoningFamily;

/// Which family signatures an item exhibits.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SignatureFeatures {
    /// A treatment → outcome claim is being made.
    pub causal_claim_present: bool,
    /// At least two interacting factors among drug, dose, diagnosis, schedule.
    pub multi_factor_configuration: bool,
    /// Commitments that are mutually exclusive, or held at different tiers
    /// about the same proposition.
    pub conflicting_assertions: bool,
    /// Explicit frequencies/severities, or red-flag findings not ruled out.
    pub risk_comparison_or_latent: bool,
}

impl SignatureFeatures {
    pub fn matched(&self) -> Vec<ReasoningFamily> {
        PRECEDENCE
            .iter()
            .copied()
            .filter(|f| self.has(*f))
            .collect()
    }

    pub fn count(&self) -> usize {
        self.matched().len()
    }

    pub fn has(&self, family: ReasoningFamily) -> bool {
        match family {
            ReasoningFamily::CausalAttribution => self.causal_claim_present,
            ReasoningFamily::CompositionalGrounding => self.multi_factor_configuration,
            ReasoningFamily::EpistemicVerification => self.conflicting_assertions,
            ReasoningFamily::RiskStateAbstraction => self.risk_comparison_or_latent,
        }
    }

    pub fn only(family: ReasoningFamily) -> Self {
        let mut f = SignatureFeatures::default();
        f.set(family, true);
        f
    }

    pub fn set(&mut self, family: ReasoningFamily, value: bool) {
        match family {
            ReasoningFamily::CausalAttribution => self.causal_claim_present = value,
            ReasoningFamily::CompositionalGrounding => self.multi_factor_configuration = value,
            ReasoningFamily::EpistemicVerification => self.conflicting_assertions = value,
            ReasoningFamily::RiskStateAbstraction => self.risk_comparison_or_latent = value,
        }
    }
}

/// Highest precedence first.
pub const PRECEDENCE: [ReasoningFamily; 4] = [
    ReasoningFamily::CompositionalGrounding,
    ReasoningFamily::RiskStateAbstraction,
    ReasoningFamily::EpistemicVerification,
    ReasoningFamily::CausalAttribution,
];

pub fn precedence_rank(family: ReasoningFamily) -> usize {
    PRECEDENCE.iter().position(|f| *f == family).unwrap()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutingSource {
    Planner,
    Oracle,
    Forced,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RoutingDecision {
    pub family: ReasoningFamily,
    pub matched: SignatureFeatures,
    pub precedence_applied: bool,
    pub source: RoutingSource,
    /// No signature matched and the fallback family was used.
    #[serde(default)]
    pub defaulted: bool,
}

impl RoutingDecision {
    pub fn oracle(family: ReasoningFamily, matched: SignatureFeatures) -> Self {
        Self {
            family,
            precedence_applied: matched.count() >= 2,
            matched,
            source: RoutingSource::Oracle,
            defaulted: false,
        }
    }

    pub fn forced(family: ReasoningFamily, matched: SignatureFeatures) -> Self {
        Self {
            source: RoutingSource::Forced,
            ..Self::oracle(family, matched)
        }
    }
}

/// Rule-based signature detection over a structured premise.
pub fn extract_signatures(ir: &StructuredPremise, model: &ClinicalModel) -> SignatureFeatures {
    let mut f = SignatureFeatures::default();
    match ir {
        StructuredPremise::Causal(c) => {
            f.causal_claim_present = !c.claims.is_empty();
            f.risk_comparison_or_latent = c
                .reported_events
                .iter()
                .any(|e| e.likelihood.is_some() || e.severity_grade.is_some());
        }
        StructuredPremise::Compositional(c) => {
            f.multi_factor_configuration = c.regimen.factor_count() >= 2;
        }
        StructuredPremise::Epistemic(e) => {
            let keys: BTreeSet<AtomKey> = e
                .commitments
                .iter()
                .filter_map(|c| e.atoms.key_of(&c.proposition))
                .collect();
            let incompatible = !model.conflicts(&keys).is_empty();
            let mut tiers_by_prop: BTreeMap<AtomKey, BTreeSet<_>> = BTreeMap::new();
            for c in &e.commitments {
                if let Some(k) = e.atoms.key_of(&c.proposition) {
                    tiers_by_prop.entry(k).or_default().insert(c.tier);
                }
            }
            let tier_disagreement = tiers_by_prop.values().any(|t| t.len() >= 2);
            f.conflicting_assertions = e.commitments.len() >= 2 && (incompatible || tier_disagreement);
        }
        StructuredPremise::Risk(r) => {
            let explicit = r
                .events
                .iter()
                .any(|e| e.likelihood.is_some() || e.severity_grade.is_some());
            f.risk_comparison_or_latent = explicit || !r.latent_findings.is_empty();
            f.causal_claim_present = r.treatment_outcome.is_some();
        }
    }
    f
}

/// Picks the highest-precedence matched family. With nothing matched the
/// item falls back to causal attribution and the decision is marked
/// `defaulted`.
pub fn route(features: SignatureFeatures) -> RoutingDecision {
    match PRECEDENCE.iter().find(|f| features.has(**f)) {
        Some(&family) => RoutingDecision {
            family,
            matched: features,
            precedence_applied: features.count() >= 2,
            source: RoutingSource::Planner,
            defaulted: false,
        },
        None => RoutingDecision {
            family: ReasoningFamily::CausalAttribution,
            matched: features,
            precedence_applied: false,
            source: RoutingSource::Planner,
            defaulted: true,
        },
    }
}

pub fn plan(ir: &StructuredPremise, model: &ClinicalModel) -> RoutingDecision {
    route(extract_signatures(ir, model))
}
