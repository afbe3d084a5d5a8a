use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ir::{AtomId, AtomKey, RiskClaim, RiskIr};
use crate::kb::{fmt_num, ClinicalModel, GradeOutOfRange};
use crate::types::{ReasoningFamily, StepKind, TraceStep, Verdict};

use super::{trace, SolveError, Solved};

/// Relative tolerance under which two expected harms count as tied.
pub const HARM_TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredEvent {
    pub event: AtomId,
    pub probability: f64,
    pub grade: u8,
    pub expected_harm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmRanking {
    /// Events with both a likelihood and a grade, in input order.
    pub scored: Vec<ScoredEvent>,
    /// Indices into `scored`, highest expected harm first.
    pub order: Vec<usize>,
    /// Consecutive runs of `order` whose harms are tied.
    pub tie_groups: Vec<Vec<AtomId>>,
    /// Events missing a likelihood or a grade.
    pub unscored: Vec<AtomId>,
}

impl HarmRanking {
    pub fn ordered_events(&self) -> Vec<AtomId> {
        self.order.iter().map(|&i| self.scored[i].event.clone()).collect()
    }

    pub fn harm_of(&self, event: &AtomId) -> Option<f64> {
        self.scored
            .iter()
            .find(|s| &s.event == event)
            .map(|s| s.expected_harm)
    }

    /// Index of the tie group holding `event`; 0 is the most harmful.
    pub fn group_of(&self, event: &AtomId) -> Option<usize> {
        self.tie_groups.iter().position(|g| g.contains(event))
    }

    pub fn top_group(&self) -> Option<&Vec<AtomId>> {
        self.tie_groups.first()
    }
}

pub fn harms_tied(a: f64, b: f64) -> bool {
    (a - b).abs() <= HARM_TIE_TOLERANCE * a.abs().max(b.abs())
}

/// Expected harm per event: probability × harm weight of its grade.
pub fn expected_harm(ir: &RiskIr, model: &ClinicalModel) -> Result<HarmRanking, GradeOutOfRange> {
    let mut scored = Vec::new();
    let mut unscored = Vec::new();
    for e in &ir.events {
        match (&e.likelihood, e.severity_grade) {
            (Some(l), Some(g)) => {
                let p = l.probability();
                scored.push(ScoredEvent {
                    event: e.event.clone(),
                    probability: p,
                    grade: g,
                    expected_harm: p * model.harm_weight(g)?,
                });
            }
            _ => unscored.push(e.event.clone()),
        }
    }
    let mut order: Vec<usize> = (0..scored.len()).collect();
    order.sort_by(|&a, &b| scored[b].expected_harm.total_cmp(&scored[a].expected_harm));

    let mut tie_groups: Vec<Vec<AtomId>> = Vec::new();
    let mut prev: Option<f64> = None;
    for &i in &order {
        let h = scored[i].expected_harm;
        match (prev, tie_groups.last_mut()) {
            (Some(p), Some(g)) if harms_tied(p, h) => g.push(scored[i].event.clone()),
            _ => tie_groups.push(vec![scored[i].event.clone()]),
        }
        prev = Some(h);
    }
    Ok(HarmRanking {
        scored,
        order,
        tie_groups,
        unscored,
    })
}

fn text(ir: &RiskIr, id: &AtomId) -> String {
    ir.atoms
        .get(id)
        .map(|a| a.text.clone())
        .unwrap_or_else(|| id.to_string())
}

fn decide_ordering(r: &HarmRanking, higher: &AtomId, lower: Option<&AtomId>) -> (Verdict, String) {
    let Some(h) = r.harm_of(higher) else {
        return (Verdict::Neutral, "claimed event lacks likelihood or grade".into());
    };
    match lower {
        Some(lower) => match r.harm_of(lower) {
            None => (Verdict::Neutral, "compared event lacks likelihood or grade".into()),
            Some(l) if harms_tied(h, l) => (Verdict::Neutral, "expected harms are tied".into()),
            Some(l) if h > l => (Verdict::Entailment, "claimed order matches the ranking".into()),
            Some(_) => (Verdict::Contradiction, "claimed order inverts the ranking".into()),
        },
        None => {
            let top = r.top_group().expect("at least the claimed event is scored");
            if !top.contains(higher) {
                (Verdict::Contradiction, "another event carries more expected harm".into())
            } else if top.len() > 1 {
                (Verdict::Neutral, "dominant risk is tied".into())
            } else if !r.unscored.is_empty() {
                (Verdict::Neutral, "unscored events leave dominance undetermined".into())
            } else {
                (Verdict::Entailment, "claimed event is the dominant risk".into())
            }
        }
    }
}

fn decide_profile(r: &HarmRanking, events: &[AtomId]) -> (Verdict, String) {
    if events.iter().any(|e| r.harm_of(e).is_none()) {
        return (Verdict::Neutral, "a profiled event lacks likelihood or grade".into());
    }
    let claimed: BTreeSet<&AtomId> = events.iter().collect();
    let top: BTreeSet<&AtomId> = r.top_group().map(|g| g.iter().collect()).unwrap_or_default();
    if claimed.is_disjoint(&top) {
        (Verdict::Contradiction, "no profiled event is among the most harmful".into())
    } else if claimed == top && r.unscored.is_empty() {
        (Verdict::Entailment, "profile equals the most harmful tie group".into())
    } else {
        (Verdict::Neutral, "profile only partly matches the most harmful group".into())
    }
}

pub fn solve_risk(ir: &RiskIr, model: &ClinicalModel) -> Result<Solved, SolveError> {
    let ranking = expected_harm(ir, model)?;

    let mut classify_cites: Vec<AtomId> = ir.events.iter().map(|e| e.event.clone()).collect();
    classify_cites.extend(ir.latent_findings.iter().cloned());
    classify_cites.extend(ir.excluded_conditions.iter().cloned());
    classify_cites.extend(ir.atoms.knowledge_atoms());
    let mut classify = Vec::new();
    if !ir.events.is_empty() {
        classify.push(format!(
            "events: {}",
            ir.events.iter().map(|e| text(ir, &e.event)).collect::<Vec<_>>().join(", ")
        ));
    }
    if !ir.latent_findings.is_empty() {
        classify.push(format!(
            "findings: {}",
            ir.latent_findings.iter().map(|a| text(ir, a)).collect::<Vec<_>>().join(", ")
        ));
    }
    if !ir.excluded_conditions.is_empty() {
        classify.push(format!(
            "excluded: {}",
            ir.excluded_conditions.iter().map(|a| text(ir, a)).collect::<Vec<_>>().join(", ")
        ));
    }
    if classify.is_empty() {
        classify.push("nothing to classify".into());
    }

    let integrate_cites = ranking.scored.iter().map(|s| s.event.clone()).collect();
    let mut integrate: Vec<String> = ranking
        .order
        .iter()
        .map(|&i| {
            let s = &ranking.scored[i];
            format!(
                "{}: {:.4} x A({}) = {}",
                text(ir, &s.event),
                s.probability,
                s.grade,
                fmt_num(s.expected_harm)
            )
        })
        .collect();
    if !ranking.unscored.is_empty() {
        integrate.push(format!(
            "unscored: {}",
            ranking.unscored.iter().map(|a| text(ir, a)).collect::<Vec<_>>().join(", ")
        ));
    }
    if integrate.is_empty() {
        integrate.push("no quantified events".into());
    }

    let (rank_cites, rank_note, verdict, reason) = match &ir.claim {
        RiskClaim::Ordering { higher, lower } => {
            let groups = ranking
                .tie_groups
                .iter()
                .map(|g| g.iter().map(|a| text(ir, a)).collect::<Vec<_>>().join(" = "))
                .collect::<Vec<_>>()
                .join(" > ");
            let (v, why) = decide_ordering(&ranking, higher, lower.as_ref());
            let cites = std::iter::once(higher.clone()).chain(lower.iter().cloned()).collect();
            (cites, format!("ranking: {groups}"), v, why)
        }
        RiskClaim::Profile { events } => {
            let (v, why) = decide_profile(&ranking, events);
            let top = ranking
                .top_group()
                .map(|g| g.iter().map(|a| text(ir, a)).collect::<Vec<_>>().join(", "))
                .unwrap_or_default();
            (events.clone(), format!("most harmful: {top}"), v, why)
        }
        RiskClaim::ExclusionRequired { condition, action } => {
            let cond_key = ir
                .atoms
                .key_of(condition)
                .unwrap_or_else(|| AtomKey::new(condition.as_str()));
            let excluded: BTreeSet<AtomKey> = ir
                .excluded_conditions
                .iter()
                .filter_map(|a| ir.atoms.key_of(a))
                .collect();
            let latent: BTreeSet<AtomKey> = ir
                .latent_findings
                .iter()
                .filter_map(|a| ir.atoms.key_of(a))
                .collect();
            let mut cites = vec![condition.clone()];
            cites.extend(ir.latent_findings.iter().cloned());
            match model.red_flag_for(&cond_key) {
                _ if excluded.contains(&cond_key) => (
                    cites,
                    format!("{cond_key} already excluded"),
                    Verdict::Contradiction,
                    "condition has been ruled out".to_string(),
                ),
                None => (
                    cites,
                    format!("no red-flag rule for {cond_key}"),
                    Verdict::Neutral,
                    "no rule mandates an action".to_string(),
                ),
                Some(rule) => {
                    let required = rule.required_keys();
                    let missing: Vec<_> = required.difference(&latent).map(|k| k.to_string()).collect();
                    let note = format!(
                        "red flags for {}: {}; severity grade {} (A = {}); mandated: {}",
                        rule.syndrome,
                        if missing.is_empty() {
                            "all present, condition not excluded".to_string()
                        } else {
                            format!("missing {}", missing.join(", "))
                        },
                        rule.assumed_grade,
                        fmt_num(model.harm_weight(rule.assumed_grade)?),
                        rule.mandated_action
                    );
                    let (v, why) = if !missing.is_empty() {
                        (Verdict::Neutral, "red-flag findings incomplete")
                    } else if AtomKey::new(action) == AtomKey::new(&rule.mandated_action) {
                        (Verdict::Entailment, "mandated action matches")
                    } else {
                        (Verdict::Neutral, "stated action is not the mandated one")
                    };
                    (cites, note, v, why.to_string())
                }
            }
        }
    };

    let steps = vec![
        TraceStep::new(StepKind::ClassifyEvents, classify_cites, classify.join("; ")),
        TraceStep::new(StepKind::IntegrateSeverityLikelihood, integrate_cites, integrate.join("; ")),
        TraceStep::new(StepKind::RankOrFlag, rank_cites, rank_note),
        TraceStep::new(StepKind::Decide, Vec::new(), format!("{reason}; {verdict}")),
    ];
    Ok(trace(ReasoningFamily::RiskStateAbstraction, steps, verdict))
}
