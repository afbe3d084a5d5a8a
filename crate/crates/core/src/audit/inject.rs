//! Fault injection for exercising the verifier and refiner: IR-level
//! fabrications (background atoms the model does not admit) and trace-level
//! deviations (stray citations, dropped, foreign, or swapped steps).

use serde::{Deserialize, Serialize};

use crate::ir::*;
use crate::kb::{ClinicalModel, Contraindication, EvidenceTier};
use crate::solvers::solve;
use crate::types::{NliItem, ReasoningFamily, ReasoningTrace, TraceStep, Verdict};

fn fresh_id(ir: &StructuredPremise, base: &str) -> AtomId {
    let mut id = AtomId::new(base);
    let mut n = 1;
    while ir.atoms().contains(&id) {
        id = AtomId::new(format!("{base}_{n}"));
        n += 1;
    }
    id
}

/// Adds an unadmitted background atom and an IR element built on it, chosen
/// per family so that it can sway the verdict. Returns the new IR and the
/// fabricated atom.
pub fn fabricate_in_ir(ir: &StructuredPremise, model: &ClinicalModel) -> (StructuredPremise, AtomId) {
    let mut out = ir.clone();
    let id = fresh_id(ir, "fab");
    match &mut out {
        StructuredPremise::Causal(c) => {
            let treatment = c
                .claims
                .first()
                .map(|cl| cl.treatment.clone())
                .unwrap_or_else(|| id.clone());
            c.atoms
                .push(Atom::new(id.as_str(), "sustained symptom improvement", AtomSource::Knowledge));
            c.claims.push(CausalClaim {
                treatment,
                outcome: id.clone(),
                kind: ClaimKind::Associational,
            });
        }
        StructuredPremise::Compositional(c) => {
            let attr = c
                .regimen
                .drug
                .as_ref()
                .and_then(|d| model.drug(&d.value))
                .and_then(|d| {
                    d.contraindications.iter().find_map(|ci| match ci {
                        Contraindication::Attribute(a) => Some(a.clone()),
                        Contraindication::AgeAtLeast(_) => None,
                    })
                })
                .unwrap_or_else(|| "severe renal impairment".to_string());
            c.atoms.push(Atom::new(id.as_str(), &attr, AtomSource::Knowledge));
            c.patient.attributes.push(Grounded {
                value: attr,
                atom: id.clone(),
            });
        }
        StructuredPremise::Epistemic(e) => {
            let text = e
                .atoms
                .get(&e.statement)
                .map(|a| a.text.clone())
                .unwrap_or_else(|| e.statement.to_string());
            e.atoms.push(Atom::new(id.as_str(), &text, AtomSource::Knowledge));
            e.commitments.push(Commitment {
                agent: "unattributed".into(),
                proposition: id.clone(),
                tier: EvidenceTier::ObjectiveMeasurement,
            });
        }
        StructuredPremise::Risk(r) => {
            r.atoms
                .push(Atom::new(id.as_str(), "fatal hemorrhage", AtomSource::Knowledge));
            r.events.push(RiskEvent {
                event: id.clone(),
                likelihood: Some(Likelihood::Probability(0.5)),
                severity_grade: Some(5),
            });
        }
    }
    (out, id)
}

/// Points the regimen's dose at an invented atom. None for non-compositional
/// IR or a regimen without a dose.
pub fn misassemble_dose(ir: &StructuredPremise) -> Option<(StructuredPremise, AtomId)> {
    let id = fresh_id(ir, "fab_dose");
    let mut out = ir.clone();
    let StructuredPremise::Compositional(c) = &mut out else {
        return None;
    };
    let dose = c.regimen.dose.as_mut()?;
    let value = dose.value.value * 2.0;
    c.atoms.push(Atom::new(
        id.as_str(),
        &format!("{} mg/m2 daily", crate::kb::fmt_num(value)),
        AtomSource::Knowledge,
    ));
    *dose = Grounded {
        value: Dose::mg_m2_day(value),
        atom: id.clone(),
    };
    Some((out, id))
}

pub fn inject_citation(trace: &ReasoningTrace, step: usize, atom: &str) -> ReasoningTrace {
    let mut t = trace.clone();
    let i = step.min(t.steps.len().saturating_sub(1));
    t.steps[i].cited_atoms.push(AtomId::new(atom));
    t
}

pub fn delete_step(trace: &ReasoningTrace, step: usize) -> ReasoningTrace {
    let mut t = trace.clone();
    t.steps.remove(step.min(t.steps.len() - 1));
    t
}

/// Inserts the first step of another family's schema at `at`.
pub fn insert_foreign_step(trace: &ReasoningTrace, at: usize) -> ReasoningTrace {
    let mut t = trace.clone();
    let foreign = ReasoningFamily::ALL
        .iter()
        .find(|f| **f != trace.family)
        .map(|f| f.schema()[0])
        .expect("four families");
    t.steps
        .insert(at.min(t.steps.len()), TraceStep::new(foreign, Vec::new(), "stray step"));
    t
}

/// Swaps steps `at` and `at + 1`.
pub fn swap_adjacent(trace: &ReasoningTrace, at: usize) -> ReasoningTrace {
    let mut t = trace.clone();
    let i = at.min(t.steps.len().saturating_sub(2));
    t.steps.swap(i, i + 1);
    t
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Injection {
    /// Unadmitted background atom added to the IR.
    IrFabrication,
    /// Citation of an atom that exists nowhere.
    FabricatedCitation,
    MissingStep,
    ForeignStep,
    SwappedSteps,
}

impl Injection {
    pub const ALL: [Injection; 5] = [
        Injection::IrFabrication,
        Injection::FabricatedCitation,
        Injection::MissingStep,
        Injection::ForeignStep,
        Injection::SwappedSteps,
    ];

    pub fn is_fact(self) -> bool {
        matches!(self, Injection::IrFabrication | Injection::FabricatedCitation)
    }
}

/// One trace to audit, with the ground truth about what was injected.
#[derive(Debug, Clone, PartialEq)]
pub struct AuditCase {
    pub item_id: String,
    pub ir: StructuredPremise,
    pub trace: ReasoningTrace,
    pub injection: Option<Injection>,
    pub gold_verdict: Verdict,
}

/// Builds `n` audit cases by cycling over `items` (which need gold IR and
/// verdict): every third case is left clean, the rest rotate through the
/// injection kinds.
pub fn audit_suite(items: &[NliItem], model: &ClinicalModel, n: usize) -> Vec<AuditCase> {
    let usable: Vec<&NliItem> = items
        .iter()
        .filter(|i| i.gold_ir.is_some() && i.gold_verdict.is_some())
        .collect();
    assert!(!usable.is_empty(), "audit suite needs items with gold IR");
    let mut out = Vec::with_capacity(n);
    let mut k = 0usize;
    for c in 0..n {
        let item = usable[c % usable.len()];
        let ir = item.gold_ir.clone().unwrap();
        let family = ir.family();
        let injection = if c % 3 == 0 {
            None
        } else {
            let j = Injection::ALL[k % Injection::ALL.len()];
            k += 1;
            Some(j)
        };
        let (ir, trace) = match injection {
            Some(Injection::IrFabrication) => {
                let (fab, _) = fabricate_in_ir(&ir, model);
                let (_, t) = solve(family, &fab, model).expect("fixture solvable");
                (fab, t)
            }
            other => {
                let (_, t) = solve(family, &ir, model).expect("fixture solvable");
                let len = t.steps.len();
                let t = match other {
                    None | Some(Injection::IrFabrication) => t,
                    Some(Injection::FabricatedCitation) => {
                        inject_citation(&t, c % len, &format!("unreported finding {c}"))
                    }
                    Some(Injection::MissingStep) => delete_step(&t, c % len),
                    Some(Injection::ForeignStep) => insert_foreign_step(&t, c % (len + 1)),
                    Some(Injection::SwappedSteps) => swap_adjacent(&t, c % (len - 1)),
                };
                (ir, t)
            }
        };
        out.push(AuditCase {
            item_id: item.id.clone(),
            ir,
            trace,
            injection,
            gold_verdict: item.gold_verdict.unwrap(),
        });
    }
    out
}
