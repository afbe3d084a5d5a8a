use crate::ir::{AtomSource, CausalEvidence, CausalIr, ClaimKind};
use crate::kb::ClinicalModel;
use crate::types::{ReasoningFamily, StepKind, TraceStep, Verdict};

use super::{trace, Solved};

/// The five evidence flags a causal decision reads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvidenceFlags {
    pub has_comparator: bool,
    pub temporality_established: bool,
    pub confounding_controlled: bool,
    pub interventional: bool,
    /// Only meaningful with a comparator; ignored otherwise.
    pub comparator_shows_effect: Option<bool>,
}

impl EvidenceFlags {
    /// Full interventional contrast: randomised (or otherwise manipulated)
    /// exposure against a comparator, correct temporal order, confounding
    /// controlled, and an effect relative to the comparator.
    pub fn full_interventional_support(&self) -> bool {
        self.interventional
            && self.has_comparator
            && self.temporality_established
            && self.confounding_controlled
            && self.effect() == Some(true)
    }

    fn effect(&self) -> Option<bool> {
        if self.has_comparator {
            self.comparator_shows_effect
        } else {
            None
        }
    }
}

impl From<&CausalEvidence> for EvidenceFlags {
    fn from(e: &CausalEvidence) -> Self {
        Self {
            has_comparator: e.has_comparator,
            temporality_established: e.temporality_established,
            confounding_controlled: e.confounding_controlled,
            interventional: e.interventional,
            comparator_shows_effect: e.comparator_shows_effect,
        }
    }
}

/// Verdict for one claim. Causal claims are entailed only under full
/// interventional support and contradicted only when a comparator shows no
/// effect; an unsupported causal claim stays neutral. Associational and
/// tolerability claims are entailed when their outcome is premise-grounded.
pub fn decide_causal_claim(kind: ClaimKind, flags: &EvidenceFlags, outcome_grounded: bool) -> Verdict {
    match kind {
        ClaimKind::Causal => {
            if flags.full_interventional_support() {
                Verdict::Entailment
            } else if flags.effect() == Some(false) {
                Verdict::Contradiction
            } else {
                Verdict::Neutral
            }
        }
        ClaimKind::Associational | ClaimKind::Tolerability => {
            if outcome_grounded {
                Verdict::Entailment
            } else {
                Verdict::Neutral
            }
        }
    }
}

/// Contradiction dominates Neutral, which dominates Entailment.
fn combine(verdicts: &[Verdict]) -> Verdict {
    if verdicts.is_empty() {
        Verdict::Neutral
    } else if verdicts.contains(&Verdict::Contradiction) {
        Verdict::Contradiction
    } else if verdicts.contains(&Verdict::Neutral) {
        Verdict::Neutral
    } else {
        Verdict::Entailment
    }
}

fn yes_no(b: bool) -> &'static str {
    if b {
        "yes"
    } else {
        "no"
    }
}

fn kind_name(k: ClaimKind) -> &'static str {
    match k {
        ClaimKind::Causal => "causal",
        ClaimKind::Associational => "associational",
        ClaimKind::Tolerability => "tolerability",
    }
}

pub fn solve_causal(ir: &CausalIr, _model: &ClinicalModel) -> Solved {
    let flags = EvidenceFlags::from(&ir.evidence);
    let text = |id| ir.atoms.get(id).map(|a| a.text.as_str()).unwrap_or("?");

    let mut parse_cites = Vec::new();
    let mut parsed = Vec::new();
    for c in &ir.claims {
        parse_cites.push(c.treatment.clone());
        parse_cites.push(c.outcome.clone());
        parsed.push(format!(
            "{} -> {} ({})",
            text(&c.treatment),
            text(&c.outcome),
            kind_name(c.kind)
        ));
    }
    parse_cites.extend(ir.atoms.knowledge_atoms());
    parse_cites.dedup();
    let parse_note = if parsed.is_empty() {
        "no treatment-outcome claims".to_string()
    } else {
        parsed.join("; ")
    };

    let comparator_note = format!(
        "comparator: {}; effect vs comparator: {}",
        yes_no(flags.has_comparator),
        match flags.effect() {
            Some(true) => "shown",
            Some(false) => "not shown",
            None => "n/a",
        }
    );
    let temporality_note = format!(
        "exposure precedes outcome: {}",
        yes_no(flags.temporality_established)
    );
    let confounding_note = format!(
        "confounding controlled: {}; interventional assignment: {}",
        yes_no(flags.confounding_controlled),
        yes_no(flags.interventional)
    );

    let per_claim: Vec<Verdict> = ir
        .claims
        .iter()
        .map(|c| {
            let grounded = ir
                .atoms
                .get(&c.outcome)
                .is_some_and(|a| a.source == AtomSource::Premise);
            decide_causal_claim(c.kind, &flags, grounded)
        })
        .collect();
    let verdict = combine(&per_claim);
    let decide_note = if per_claim.is_empty() {
        format!("nothing to evaluate; overall {verdict}")
    } else {
        let parts: Vec<String> = ir
            .claims
            .iter()
            .zip(&per_claim)
            .map(|(c, v)| format!("{} claim: {v}", kind_name(c.kind)))
            .collect();
        format!("{}; overall {verdict}", parts.join(", "))
    };

    let steps = vec![
        TraceStep::new(StepKind::ParseClaims, parse_cites, parse_note),
        TraceStep::new(StepKind::CheckComparator, ir.evidence.support.clone(), comparator_note),
        TraceStep::new(StepKind::CheckTemporality, Vec::new(), temporality_note),
        TraceStep::new(StepKind::CheckConfounding, Vec::new(), confounding_note),
        TraceStep::new(
            StepKind::Decide,
            ir.claims.iter().map(|c| c.outcome.clone()).collect(),
            decide_note,
        ),
    ];
    trace(ReasoningFamily::CausalAttribution, steps, verdict)
}
