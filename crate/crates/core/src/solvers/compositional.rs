use crate::ir::CompositionalIr;
use crate::kb::{fmt_num, ClinicalModel, PatientProfile, RegimenTuple};
use crate::types::{ReasoningFamily, StepKind, TraceStep, Verdict};

use super::{trace, SolveError, Solved};

/// Judges asserted benefit against the joint drug/dose/diagnosis/schedule
/// configuration. An incomplete tuple is underdetermined and yields Neutral.
pub fn solve_compositional(ir: &CompositionalIr, model: &ClinicalModel) -> Result<Solved, SolveError> {
    let r = &ir.regimen;
    let atom_text = |id| ir.atoms.get(id).map(|a| a.text.as_str()).unwrap_or("?");

    let mut extract_cites = r.factor_atoms();
    extract_cites.extend(ir.patient.atoms());
    extract_cites.extend(ir.atoms.knowledge_atoms());
    let mut factors = Vec::new();
    if let Some(d) = &r.drug {
        factors.push(format!("drug {}", d.value));
    }
    if let Some(d) = &r.dose {
        factors.push(format!("dose {} mg/m2/day", fmt_num(d.value.value)));
    }
    if let Some(s) = &r.schedule {
        factors.push(format!("{} x{} days", s.value.frequency, s.value.duration_days));
    }
    if let Some(d) = &r.diagnosis {
        factors.push(format!("for {}", d.value));
    }
    if let Some(a) = &ir.patient.age {
        factors.push(format!("age {}", fmt_num(a.value)));
    }
    for a in &ir.patient.attributes {
        factors.push(a.value.clone());
    }
    let extract_note = if factors.is_empty() {
        "no factors".to_string()
    } else {
        factors.join(", ")
    };

    let tuple = match (&r.drug, &r.dose, &r.diagnosis, &r.schedule) {
        (Some(drug), Some(dose), Some(dx), Some(s)) => Some(RegimenTuple {
            drug: drug.value.clone(),
            dose: dose.value.value,
            diagnosis: dx.value.clone(),
            duration_days: s.value.duration_days,
        }),
        _ => None,
    };
    let patient = PatientProfile {
        age: ir.patient.age.as_ref().map(|g| g.value),
        attributes: ir.patient.attributes.iter().map(|g| g.value.clone()).collect(),
    };

    let (assemble_note, check_note, verdict, reason) = match &tuple {
        None => {
            let mut missing = Vec::new();
            if r.drug.is_none() {
                missing.push("drug");
            }
            if r.dose.is_none() {
                missing.push("dose");
            }
            if r.diagnosis.is_none() {
                missing.push("diagnosis");
            }
            if r.schedule.is_none() {
                missing.push("schedule");
            }
            (
                format!("incomplete tuple, missing {}", missing.join(", ")),
                "not checked".to_string(),
                Verdict::Neutral,
                "configuration underdetermined".to_string(),
            )
        }
        Some(t) => {
            let result = model.admissible(t, &patient)?;
            let assemble = format!(
                "<{}, {} mg/m2/day, {}, {} days>",
                t.drug,
                fmt_num(t.dose),
                t.diagnosis,
                t.duration_days
            );
            if !result.is_admissible() {
                let check = result
                    .violations
                    .iter()
                    .map(|v| format!("{}: {}", v.constraint, v.detail))
                    .collect::<Vec<_>>()
                    .join("; ");
                (
                    assemble,
                    check,
                    Verdict::Contradiction,
                    "benefit asserted over an inadmissible configuration".to_string(),
                )
            } else {
                let benefit = model
                    .drug(&t.drug)
                    .and_then(|d| d.indication(&t.diagnosis))
                    .and_then(|i| i.benefit_supported);
                let (v, why) = match benefit {
                    Some(true) => (Verdict::Entailment, "benefit supported for this indication"),
                    _ => (Verdict::Neutral, "benefit not established for this indication"),
                };
                (assemble, "admissible".to_string(), v, why.to_string())
            }
        }
    };

    let steps = vec![
        TraceStep::new(StepKind::ExtractFactors, extract_cites, extract_note),
        TraceStep::new(StepKind::AssembleTuple, r.factor_atoms(), assemble_note),
        TraceStep::new(StepKind::CheckAdmissibility, ir.patient.atoms(), check_note),
        TraceStep::new(
            StepKind::Decide,
            vec![ir.asserted_benefit.clone()],
            format!("{} {reason}; {verdict}", atom_text(&ir.asserted_benefit)),
        ),
    ];
    Ok(trace(ReasoningFamily::CompositionalGrounding, steps, verdict))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ir::{Dose, Grounded, Schedule, StructuredPremise};
    use crate::kb::KbMiss;

    fn p12() -> CompositionalIr {
        match fixtures::problem_12().gold_ir.unwrap() {
            StructuredPremise::Compositional(c) => c,
            _ => unreachable!(),
        }
    }

    #[test]
    fn problem_12_is_contradiction() {
        let (v, t) = solve_compositional(&p12(), &ClinicalModel::reference()).unwrap();
        assert_eq!(v, Verdict::Contradiction);
        assert!(t.steps[2].note.contains("dose-range"));
        assert!(t.steps[2].note.contains("duration"));
    }

    #[test]
    fn standard_regimen_is_entailed() {
        let mut ir = p12();
        ir.regimen.dose = Some(Grounded::new(Dose::mg_m2_day(25.0), "dose"));
        ir.regimen.schedule = Some(Grounded::new(Schedule::daily(5), "schedule"));
        assert_eq!(
            solve_compositional(&ir, &ClinicalModel::reference()).unwrap().0,
            Verdict::Entailment
        );
    }

    #[test]
    fn unknown_benefit_is_neutral() {
        let mut ir = p12();
        ir.regimen.drug = Some(Grounded::new("cytarabine".to_string(), "drug"));
        ir.regimen.dose = Some(Grounded::new(Dose::mg_m2_day(150.0), "dose"));
        ir.regimen.schedule = Some(Grounded::new(Schedule::daily(7), "schedule"));
        ir.regimen.diagnosis = Some(Grounded::new("acute lymphoblastic leukemia".to_string(), "dx"));
        assert_eq!(
            solve_compositional(&ir, &ClinicalModel::reference()).unwrap().0,
            Verdict::Neutral
        );
    }

    #[test]
    fn missing_schedule_is_neutral() {
        let mut ir = p12();
        ir.regimen.schedule = None;
        let (v, t) = solve_compositional(&ir, &ClinicalModel::reference()).unwrap();
        assert_eq!(v, Verdict::Neutral);
        assert!(t.steps[1].note.contains("missing schedule"));
    }

    #[test]
    fn unknown_drug_is_kb_miss() {
        let mut ir = p12();
        ir.regimen.drug = Some(Grounded::new("unobtainium".to_string(), "drug"));
        assert_eq!(
            solve_compositional(&ir, &ClinicalModel::reference()),
            Err(SolveError::KbMiss(KbMiss {
                drug: "unobtainium".into()
            }))
        );
    }
}
