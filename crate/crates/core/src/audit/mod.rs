//! Trace audit: fact and pattern verification, then minimal refinement.

pub mod inject;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ir::{AtomId, AtomKey, AtomSource, StructuredPremise};
use crate::kb::ClinicalModel;
use crate::solvers::Solver;
use crate::types::{ReasoningFamily, ReasoningTrace, StepKind, TraceStep, Verdict};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FactKind {
    /// In the IR, but background knowledge the model does not admit.
    Unsupported,
    /// Not in the IR at all, and not an admitted regularity.
    Fabricated,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FactViolation {
    pub step: usize,
    pub atom: AtomId,
    pub kind: FactKind,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PatternStatus {
    Missing,
    OutOfOrder,
    WrongFamilyStep,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PatternViolation {
    /// The schema step concerned; for a foreign step, the step found.
    pub expected: StepKind,
    pub status: PatternStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierReport {
    pub fact_violations: Vec<FactViolation>,
    pub pattern_violations: Vec<PatternViolation>,
    pub valid: bool,
}

impl VerifierReport {
    pub fn new(fact_violations: Vec<FactViolation>, pattern_violations: Vec<PatternViolation>) -> Self {
        let valid = fact_violations.is_empty() && pattern_violations.is_empty();
        Self {
            fact_violations,
            pattern_violations,
            valid,
        }
    }
}

/// Checks that every cited atom is premise-grounded or an admitted general
/// regularity. Each (step, atom) citation is reported at most once.
pub fn verify_facts(trace: &ReasoningTrace, ir: &StructuredPremise, model: &ClinicalModel) -> Vec<FactViolation> {
    let atoms = ir.atoms();
    let mut out = Vec::new();
    for (step, s) in trace.steps.iter().enumerate() {
        let mut seen = BTreeSet::new();
        for id in &s.cited_atoms {
            if !seen.insert(id) {
                continue;
            }
            let kind = match atoms.get(id) {
                None if model.is_general_regularity(&AtomKey::new(id.as_str())) => None,
                None => Some(FactKind::Fabricated),
                Some(a) if a.source == AtomSource::Knowledge && !model.is_general_regularity(&a.key()) => {
                    Some(FactKind::Unsupported)
                }
                Some(_) => None,
            };
            if let Some(kind) = kind {
                out.push(FactViolation {
                    step,
                    atom: id.clone(),
                    kind,
                });
            }
        }
    }
    out
}

/// Indices of a longest strictly increasing subsequence of `seq`.
fn longest_increasing(seq: &[usize]) -> BTreeSet<usize> {
    let n = seq.len();
    let mut len = vec![1usize; n];
    let mut prev = vec![usize::MAX; n];
    for i in 0..n {
        for j in 0..i {
            if seq[j] < seq[i] && len[j] + 1 > len[i] {
                len[i] = len[j] + 1;
                prev[i] = j;
            }
        }
    }
    let mut keep = BTreeSet::new();
    if let Some(mut i) = (0..n).max_by_key(|&i| (len[i], std::cmp::Reverse(i))) {
        loop {
            keep.insert(i);
            if prev[i] == usize::MAX {
                break;
            }
            i = prev[i];
        }
    }
    keep
}

/// Compares step kinds with the family schema. Foreign steps, absent schema
/// steps, and schema steps outside a longest in-order run (or repeated) are
/// reported.
pub fn verify_pattern(trace: &ReasoningTrace, family: ReasoningFamily) -> Vec<PatternViolation> {
    let schema = family.schema();
    let mut out = Vec::new();
    let mut first_seen: Vec<(StepKind, usize)> = Vec::new();
    for s in &trace.steps {
        match schema.iter().position(|k| *k == s.kind) {
            None => out.push(PatternViolation {
                expected: s.kind,
                status: PatternStatus::WrongFamilyStep,
            }),
            Some(_) if first_seen.iter().any(|(k, _)| *k == s.kind) => out.push(PatternViolation {
                expected: s.kind,
                status: PatternStatus::OutOfOrder,
            }),
            Some(pos) => first_seen.push((s.kind, pos)),
        }
    }
    let positions: Vec<usize> = first_seen.iter().map(|(_, p)| *p).collect();
    let keep = longest_increasing(&positions);
    for (i, (kind, _)) in first_seen.iter().enumerate() {
        if !keep.contains(&i) {
            out.push(PatternViolation {
                expected: *kind,
                status: PatternStatus::OutOfOrder,
            });
        }
    }
    for kind in schema {
        if !first_seen.iter().any(|(k, _)| k == kind) {
            out.push(PatternViolation {
                expected: *kind,
                status: PatternStatus::Missing,
            });
        }
    }
    out
}

pub fn verify(trace: &ReasoningTrace, family: ReasoningFamily, ir: &StructuredPremise, model: &ClinicalModel) -> VerifierReport {
    VerifierReport::new(verify_facts(trace, ir, model), verify_pattern(trace, family))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EditKind {
    RemoveAtom,
    ReplaceAtom,
    InsertStep,
    ReorderSteps,
    RemoveStep,
}

impl fmt::Display for EditKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            EditKind::RemoveAtom => "remove_atom",
            EditKind::ReplaceAtom => "replace_atom",
            EditKind::InsertStep => "insert_step",
            EditKind::ReorderSteps => "reorder_steps",
            EditKind::RemoveStep => "remove_step",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Edit {
    pub kind: EditKind,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementOutcome {
    pub edits: Vec<Edit>,
    pub changed: bool,
    pub final_verdict: Verdict,
    pub re_solved: bool,
    pub refined_trace: ReasoningTrace,
    pub refined_ir: StructuredPremise,
}

/// The unique premise atom whose key shares a word prefix with `key`.
fn replacement_for(ir: &StructuredPremise, violating: &AtomId, key: &AtomKey) -> Option<AtomId> {
    let mut hits = ir
        .atoms()
        .iter()
        .filter(|a| a.source == AtomSource::Premise && &a.id != violating && a.key().shares_prefix_with(key));
    let first = hits.next()?;
    hits.next().is_none().then(|| first.id.clone())
}

/// Applies minimal corrections for the reported violations and re-derives
/// the verdict with `solver` on the cleaned IR. A valid report is a fixed
/// point. Unsupported atoms that live in the IR are removed together with
/// the elements built on them; citations of atoms absent from the IR are
/// redirected to a unique premise atom sharing their key prefix, or dropped.
pub fn refine(
    trace: &ReasoningTrace,
    report: &VerifierReport,
    ir: &StructuredPremise,
    model: &ClinicalModel,
    solver: &dyn Solver,
) -> RefinementOutcome {
    if report.valid {
        return RefinementOutcome {
            edits: Vec::new(),
            changed: false,
            final_verdict: trace.proposed_verdict,
            re_solved: false,
            refined_trace: trace.clone(),
            refined_ir: ir.clone(),
        };
    }

    let mut cleaned = ir.clone();
    let mut edits = Vec::new();
    let mut decidable = true;
    let mut handled = BTreeSet::new();
    for v in &report.fact_violations {
        if !handled.insert(v.atom.clone()) {
            continue;
        }
        match v.kind {
            FactKind::Unsupported => {
                let text = cleaned.atoms().get(&v.atom).map(|a| a.text.clone()).unwrap_or_default();
                decidable &= cleaned.remove_atom(&v.atom);
                edits.push(Edit {
                    kind: EditKind::RemoveAtom,
                    detail: format!("{} \"{}\"", v.atom, text),
                });
            }
            FactKind::Fabricated => {
                let key = AtomKey::new(v.atom.as_str());
                match replacement_for(&cleaned, &v.atom, &key) {
                    Some(to) => edits.push(Edit {
                        kind: EditKind::ReplaceAtom,
                        detail: format!("{} -> {}", v.atom, to),
                    }),
                    None => edits.push(Edit {
                        kind: EditKind::RemoveAtom,
                        detail: format!("{} (citation)", v.atom),
                    }),
                }
            }
        }
    }
    for p in &report.pattern_violations {
        let kind = match p.status {
            PatternStatus::Missing => EditKind::InsertStep,
            PatternStatus::OutOfOrder => EditKind::ReorderSteps,
            PatternStatus::WrongFamilyStep => EditKind::RemoveStep,
        };
        edits.push(Edit {
            kind,
            detail: format!("{:?}", p.expected),
        });
    }

    let family = trace.family;
    let (verdict, mut refined_trace) = match solver.solve(family, &cleaned, model) {
        Ok(solved) => solved,
        Err(e) => neutral_trace(family, &format!("re-solve failed: {e}")),
    };
    let final_verdict = if decidable { verdict } else { Verdict::Neutral };
    if !decidable {
        refined_trace.proposed_verdict = Verdict::Neutral;
        if let Some(last) = refined_trace.steps.last_mut() {
            last.note = format!("undecidable after removing unsupported atoms; {}", Verdict::Neutral);
        }
    }
    RefinementOutcome {
        changed: !edits.is_empty(),
        edits,
        final_verdict,
        re_solved: true,
        refined_trace,
        refined_ir: cleaned,
    }
}

fn neutral_trace(family: ReasoningFamily, note: &str) -> (Verdict, ReasoningTrace) {
    let steps = family
        .schema()
        .iter()
        .map(|&k| TraceStep::new(k, Vec::new(), note))
        .collect();
    (
        Verdict::Neutral,
        ReasoningTrace {
            family,
            steps,
            proposed_verdict: Verdict::Neutral,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::solvers::{solve, FormalSolver};

    fn solved(item: &crate::types::NliItem) -> (StructuredPremise, ReasoningTrace) {
        let ir = item.gold_ir.clone().unwrap();
        let (_, t) = solve(ir.family(), &ir, &ClinicalModel::reference()).unwrap();
        (ir, t)
    }

    #[test]
    fn clean_traces_verify() {
        let m = ClinicalModel::reference();
        for item in fixtures::worked_problems() {
            let (ir, t) = solved(&item);
            let r = verify(&t, ir.family(), &ir, &m);
            assert!(r.valid, "{}: {r:?}", item.id);
        }
    }

    #[test]
    fn problem_16_regularity_is_admitted() {
        let (ir, t) = solved(&fixtures::problem_16());
        assert!(t.steps[0].cited_atoms.contains(&AtomId::new("k1")));
        assert!(verify_facts(&t, &ir, &ClinicalModel::reference()).is_empty());
    }

    #[test]
    fn injected_citation_is_fabricated() {
        let (ir, mut t) = solved(&fixtures::problem_16());
        t.steps[1].cited_atoms.push(AtomId::new("troponin elevated"));
        t.steps[1].cited_atoms.push(AtomId::new("troponin elevated"));
        let v = verify_facts(&t, &ir, &ClinicalModel::reference());
        assert_eq!(
            v,
            vec![FactViolation {
                step: 1,
                atom: AtomId::new("troponin elevated"),
                kind: FactKind::Fabricated
            }]
        );
    }

    #[test]
    fn pattern_checks() {
        let (_, t) = solved(&fixtures::problem_6());
        assert!(verify_pattern(&t, ReasoningFamily::CausalAttribution).is_empty());

        let mut missing = t.clone();
        missing.steps.remove(1);
        assert_eq!(
            verify_pattern(&missing, ReasoningFamily::CausalAttribution),
            vec![PatternViolation {
                expected: StepKind::CheckComparator,
                status: PatternStatus::Missing
            }]
        );

        let (_, mut risk) = solved(&fixtures::problem_39());
        risk.steps.insert(2, TraceStep::new(StepKind::RankTiers, vec![], ""));
        assert_eq!(
            verify_pattern(&risk, ReasoningFamily::RiskStateAbstraction),
            vec![PatternViolation {
                expected: StepKind::RankTiers,
                status: PatternStatus::WrongFamilyStep
            }]
        );

        let mut swapped = t.clone();
        swapped.steps.swap(1, 2);
        let v = verify_pattern(&swapped, ReasoningFamily::CausalAttribution);
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].status, PatternStatus::OutOfOrder);
    }

    #[test]
    fn valid_report_is_a_fixed_point() {
        let m = ClinicalModel::reference();
        let (ir, t) = solved(&fixtures::problem_12());
        let report = verify(&t, ir.family(), &ir, &m);
        let out = refine(&t, &report, &ir, &m, &FormalSolver);
        assert!(!out.changed && !out.re_solved && out.edits.is_empty());
        assert_eq!(out.final_verdict, t.proposed_verdict);
    }

    #[test]
    fn unique_prefix_match_is_a_replacement() {
        let m = ClinicalModel::reference();
        let (ir, mut t) = solved(&fixtures::problem_16());
        t.steps[3].cited_atoms.push(AtomId::new("Endoscopy normal at follow-up"));
        let report = verify(&t, ir.family(), &ir, &m);
        let out = refine(&t, &report, &ir, &m, &FormalSolver);
        assert_eq!(out.edits[0].kind, EditKind::ReplaceAtom);
        assert_eq!(out.edits[0].detail, "Endoscopy normal at follow-up -> endo");
        assert!(out.re_solved);
        assert_eq!(out.final_verdict, Verdict::Contradiction);
    }
}
