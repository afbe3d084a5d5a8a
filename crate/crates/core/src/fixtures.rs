//! Hand-built items with gold structured premises: the four worked clinical
//! problems and a few routing fixtures. Used by tests, the corpus generator
//! (as pinned items) and the CLI's smoke paths.

use crate::ir::*;
use crate::kb::EvidenceTier;
use crate::types::{NliItem, ReasoningFamily, Verdict};

fn item(
    id: &str,
    premise: &str,
    statement: &str,
    family: ReasoningFamily,
    verdict: Verdict,
    ir: StructuredPremise,
) -> NliItem {
    NliItem {
        id: id.to_string(),
        premise_text: premise.to_string(),
        statement_text: statement.to_string(),
        gold_family: Some(family),
        gold_verdict: Some(verdict),
        gold_ir: Some(ir),
        template: None,
    }
}

/// Tolerability is grounded but efficacy has no comparator.
pub fn problem_6() -> NliItem {
    let ir = CausalIr {
        atoms: AtomTable(vec![
            Atom::new("t", "the drug", AtomSource::Statement),
            Atom::new("y_eff", "effective", AtomSource::Statement),
            Atom::new(
                "ae_total",
                "Adverse Events Summary: Total: 4/12 (33.33%)",
                AtomSource::Premise,
            ),
            Atom::new("y_tol", "All events were Grade 1 or 2", AtomSource::Premise),
            Atom::new("k1", "causal claims require comparator outcomes", AtomSource::Knowledge),
        ]),
        claims: vec![
            CausalClaim {
                treatment: AtomId::new("t"),
                outcome: AtomId::new("y_eff"),
                kind: ClaimKind::Causal,
            },
            CausalClaim {
                treatment: AtomId::new("t"),
                outcome: AtomId::new("y_tol"),
                kind: ClaimKind::Tolerability,
            },
        ],
        evidence: CausalEvidence {
            support: vec![AtomId::new("ae_total")],
            ..CausalEvidence::default()
        },
        reported_events: vec![],
    };
    item(
        "problem-6",
        "Adverse Events Summary: Total: 4/12 (33.33%). Headache 2/12 (16.67%), Pruritus 1/12 (8.33%), Mild anemia 1/12 (8.33%). All events were Grade 1 or 2.",
        "The drug was effective and well tolerated, with only mild side effects reported.",
        ReasoningFamily::CausalAttribution,
        Verdict::Neutral,
        StructuredPremise::Causal(ir),
    )
}

/// Overdosed, over-long fludarabine course in an elderly patient.
pub fn problem_12() -> NliItem {
    let ir = CompositionalIr {
        atoms: AtomTable(vec![
            Atom::new("drug", "Fludarabine", AtomSource::Premise),
            Atom::new("dose", "120 mg/m2 daily", AtomSource::Premise),
            Atom::new("schedule", "14 days", AtomSource::Premise),
            Atom::new("dx", "CLL", AtomSource::Premise),
            Atom::new("elderly", "elderly", AtomSource::Premise),
            Atom::new(
                "benefit",
                "induce remission, improve blood counts, and prolong survival",
                AtomSource::Statement,
            ),
            Atom::new(
                "k1",
                "standard fludarabine dose is 25 mg/m2/day for 5 days",
                AtomSource::Knowledge,
            ),
            Atom::new(
                "k2",
                "fludarabine overdose causes severe myelotoxicity in elderly patients",
                AtomSource::Knowledge,
            ),
        ]),
        regimen: Regimen {
            drug: Some(Grounded::new("fludarabine".into(), "drug")),
            dose: Some(Grounded::new(Dose::mg_m2_day(120.0), "dose")),
            diagnosis: Some(Grounded::new("chronic lymphocytic leukemia".into(), "dx")),
            schedule: Some(Grounded::new(Schedule::daily(14), "schedule")),
        },
        patient: Patient {
            age: None,
            attributes: vec![Grounded::new("elderly".into(), "elderly")],
        },
        asserted_benefit: AtomId::new("benefit"),
    };
    item(
        "problem-12",
        "Fludarabine 120 mg/m2 daily x14 days for CLL in an elderly patient.",
        "The treatment is expected to induce remission, improve blood counts, and prolong survival.",
        ReasoningFamily::CompositionalGrounding,
        Verdict::Contradiction,
        StructuredPremise::Compositional(ir),
    )
}

/// A physician's diagnosis against higher-tier objective evidence.
pub fn problem_16() -> NliItem {
    let ir = EpistemicIr {
        atoms: AtomTable(vec![
            Atom::new("endo", "endoscopy normal", AtomSource::Premise),
            Atom::new("gerd", "GERD-consistent symptoms", AtomSource::Premise),
            Atom::new("dx_mi", "myocardial infarction present", AtomSource::Premise),
            Atom::new("s", "myocardial infarction present", AtomSource::Statement),
            Atom::new("k1", "MI requires ECG/troponins", AtomSource::Knowledge),
        ]),
        commitments: vec![
            Commitment::new("endoscopist", "endo", EvidenceTier::ObjectiveMeasurement),
            Commitment::new("patient", "gerd", EvidenceTier::Observation),
            Commitment::new("physician", "dx_mi", EvidenceTier::Interpretation),
        ],
        statement: AtomId::new("s"),
        polarity: Polarity::Asserts,
    };
    item(
        "problem-16",
        "A 45-year-old man complains of chest discomfort after meals and occasional regurgitation. Endoscopy is normal. Despite the absence of cardiac symptoms, the physician diagnoses myocardial infarction and starts anticoagulation therapy.",
        "The patient has myocardial infarction.",
        ReasoningFamily::EpistemicVerification,
        Verdict::Contradiction,
        StructuredPremise::Epistemic(ir),
    )
}

/// Cauda equina red flags with no imaging.
pub fn problem_39() -> NliItem {
    let ir = RiskIr {
        atoms: AtomTable(vec![
            Atom::new("f1", "saddle anesthesia", AtomSource::Premise),
            Atom::new("f2", "urinary retention", AtomSource::Premise),
            Atom::new("f3", "bilateral leg weakness", AtomSource::Premise),
            Atom::new("f4", "reflexes reduced", AtomSource::Premise),
            Atom::new("no_img", "no imaging performed", AtomSource::Premise),
            Atom::new("ces", "cauda equina syndrome", AtomSource::Statement),
            Atom::new(
                "k1",
                "cauda equina syndrome requires emergency imaging",
                AtomSource::Knowledge,
            ),
        ]),
        events: vec![],
        latent_findings: ["f1", "f2", "f3", "f4"].iter().map(|s| AtomId::new(*s)).collect(),
        excluded_conditions: vec![],
        claim: RiskClaim::ExclusionRequired {
            condition: AtomId::new("ces"),
            action: "emergency MRI".into(),
        },
        treatment_outcome: None,
    };
    item(
        "problem-39",
        "A 55-year-old man with acute severe low back pain reports saddle anesthesia, urinary retention, and bilateral leg weakness. Reflexes reduced. No imaging performed.",
        "Emergency MRI is required to exclude cauda equina syndrome.",
        ReasoningFamily::RiskStateAbstraction,
        Verdict::Entailment,
        StructuredPremise::Risk(ir),
    )
}

pub fn worked_problems() -> Vec<NliItem> {
    vec![problem_6(), problem_12(), problem_16(), problem_39()]
}

/// One causal claim from a single-arm study: no comparator, nothing else.
pub fn single_arm_causal_ir() -> CausalIr {
    CausalIr {
        atoms: AtomTable(vec![
            Atom::new("t", "drug X", AtomSource::Premise),
            Atom::new("y", "tumour response", AtomSource::Statement),
            Atom::new("design", "single-arm study of 30 patients", AtomSource::Premise),
        ]),
        claims: vec![CausalClaim {
            treatment: AtomId::new("t"),
            outcome: AtomId::new("y"),
            kind: ClaimKind::Causal,
        }],
        evidence: CausalEvidence {
            support: vec![AtomId::new("design")],
            ..CausalEvidence::default()
        },
        reported_events: vec![],
    }
}

pub fn single_arm_causal() -> StructuredPremise {
    StructuredPremise::Causal(single_arm_causal_ir())
}

/// A harm comparison phrased as "the drug causes ...": both the causal and
/// the risk signature fire, and precedence picks risk.
pub fn causally_phrased_risk() -> StructuredPremise {
    StructuredPremise::Risk(RiskIr {
        atoms: AtomTable(vec![
            Atom::new("t", "the drug", AtomSource::Statement),
            Atom::new("neutropenia", "neutropenia", AtomSource::Premise),
            Atom::new("fatigue", "fatigue", AtomSource::Premise),
        ]),
        events: vec![
            RiskEvent {
                event: AtomId::new("neutropenia"),
                likelihood: Some(Likelihood::Frequency { k: 3, n: 40 }),
                severity_grade: Some(3),
            },
            RiskEvent {
                event: AtomId::new("fatigue"),
                likelihood: Some(Likelihood::Frequency { k: 12, n: 40 }),
                severity_grade: Some(1),
            },
        ],
        latent_findings: vec![],
        excluded_conditions: vec![],
        claim: RiskClaim::Ordering {
            higher: AtomId::new("neutropenia"),
            lower: Some(AtomId::new("fatigue")),
        },
        treatment_outcome: Some(TreatmentOutcome {
            treatment: AtomId::new("t"),
            outcome: AtomId::new("neutropenia"),
        }),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fixtures_validate() {
        for it in worked_problems() {
            it.validate().unwrap();
        }
        single_arm_causal().validate().unwrap();
        causally_phrased_risk().validate().unwrap();
    }
}
