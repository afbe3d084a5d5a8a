use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::ir::{AtomKey, AtomTable, Commitment, EpistemicIr, Polarity};
use crate::kb::{ClinicalModel, EvidenceTier, ExclusionAxiom};
use crate::types::{ReasoningFamily, StepKind, TraceStep, Verdict};

use super::{trace, Solved};

/// A commitment dropped because keeping it would trigger `axiom` against
/// evidence retained at `outranked_by` or better.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Discard {
    pub commitment: Commitment,
    pub axiom: ExclusionAxiom,
    pub outranked_by: EvidenceTier,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McsResult {
    pub retained: Vec<Commitment>,
    pub discarded: Vec<Discard>,
    /// Commitments kept by some but not all preferred subsets, grouped by the
    /// axioms that connect them.
    pub unresolved: Vec<Vec<Commitment>>,
}

impl McsResult {
    pub fn retained_keys(&self, atoms: &AtomTable) -> BTreeSet<AtomKey> {
        self.retained.iter().map(|c| key_of(atoms, c)).collect()
    }

    pub fn unresolved_keys(&self, atoms: &AtomTable) -> BTreeSet<AtomKey> {
        self.unresolved
            .iter()
            .flatten()
            .map(|c| key_of(atoms, c))
            .collect()
    }
}

fn key_of(atoms: &AtomTable, c: &Commitment) -> AtomKey {
    atoms
        .key_of(&c.proposition)
        .unwrap_or_else(|| AtomKey::new(c.proposition.as_str()))
}

type Mask = u64;

fn keys_of(mask: Mask, keys: &[AtomKey]) -> BTreeSet<AtomKey> {
    (0..keys.len())
        .filter(|i| mask >> i & 1 == 1)
        .map(|i| keys[i].clone())
        .collect()
}

/// Preferred conflict-free subsets: tier by tier in π order, keep as many
/// commitments of the current tier as the earlier choices allow. Every
/// partial selection that reaches the maximum survives to the next tier, so
/// the result is the full set of lexicographic optima.
fn preferred_subsets(keys: &[AtomKey], tiers: &[EvidenceTier], model: &ClinicalModel) -> Vec<Mask> {
    let consistent = |m: Mask| model.conflicts(&keys_of(m, keys)).is_empty();
    let mut frontier: Vec<Mask> = vec![0];
    for tier in model.tier_order {
        let members: Vec<usize> = (0..keys.len()).filter(|&i| tiers[i] == tier).collect();
        if members.is_empty() {
            continue;
        }
        let mut best = 0u32;
        let mut next: BTreeSet<Mask> = BTreeSet::new();
        for &base in &frontier {
            for pick in 0u64..(1u64 << members.len()) {
                let n = pick.count_ones();
                if n < best {
                    continue;
                }
                let mut m = base;
                for (j, &i) in members.iter().enumerate() {
                    if pick >> j & 1 == 1 {
                        m |= 1 << i;
                    }
                }
                if !consistent(m) {
                    continue;
                }
                if n > best {
                    best = n;
                    next.clear();
                }
                next.insert(m);
            }
        }
        frontier = next.into_iter().collect();
    }
    frontier
}

/// Splits `members` into groups connected by shared exclusion axioms.
fn conflict_groups(members: &[usize], keys: &[AtomKey], model: &ClinicalModel) -> Vec<Vec<usize>> {
    let linked = |a: usize, b: usize| {
        model
            .exclusion_axioms
            .iter()
            .any(|ax| ax.contains(&keys[a]) && ax.contains(&keys[b]))
    };
    let mut groups: Vec<Vec<usize>> = Vec::new();
    let mut seen = vec![false; members.len()];
    for start in 0..members.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        let mut group = vec![members[start]];
        let mut k = 0;
        while k < group.len() {
            for j in 0..members.len() {
                if !seen[j] && linked(group[k], members[j]) {
                    seen[j] = true;
                    group.push(members[j]);
                }
            }
            k += 1;
        }
        group.sort_unstable();
        groups.push(group);
    }
    groups
}

/// Conflict resolution over an evidence set: a commitment is retained when
/// every most-preferred conflict-free subset keeps it, discarded when none
/// does, and unresolved otherwise (same-tier ties).
pub fn maximal_consistent_set(
    commitments: &[Commitment],
    atoms: &AtomTable,
    model: &ClinicalModel,
) -> McsResult {
    assert!(
        commitments.len() < Mask::BITS as usize,
        "fewer than {} commitments per item",
        Mask::BITS
    );
    let keys: Vec<AtomKey> = commitments.iter().map(|c| key_of(atoms, c)).collect();
    let tiers: Vec<EvidenceTier> = commitments.iter().map(|c| c.tier).collect();
    let optima = preferred_subsets(&keys, &tiers, model);

    let all = optima.iter().fold(Mask::MAX, |acc, m| acc & m);
    let any = optima.iter().fold(0, |acc, m| acc | m);
    let reference = optima[0];

    let mut retained = Vec::new();
    let mut discarded = Vec::new();
    let mut open = Vec::new();
    for (i, c) in commitments.iter().enumerate() {
        if all >> i & 1 == 1 {
            retained.push(c.clone());
        } else if any >> i & 1 == 1 {
            open.push(i);
        } else {
            // Adding i to a preferred subset must trigger some axiom, or that
            // subset would not be preferred.
            let with = keys_of(reference | 1 << i, &keys);
            let axiom = model
                .conflicts(&with)
                .into_iter()
                .find(|ax| ax.contains(&keys[i]))
                .expect("discarded commitment conflicts with a preferred subset");
            let outranked_by = (0..keys.len())
                .filter(|&j| reference >> j & 1 == 1 && axiom.contains(&keys[j]))
                .map(|j| tiers[j])
                .min_by_key(|t| model.tier_rank(*t))
                .unwrap_or(c.tier);
            discarded.push(Discard {
                commitment: c.clone(),
                axiom: axiom.clone(),
                outranked_by,
            });
        }
    }
    let unresolved = conflict_groups(&open, &keys, model)
        .into_iter()
        .map(|g| g.into_iter().map(|i| commitments[i].clone()).collect())
        .collect();
    McsResult {
        retained,
        discarded,
        unresolved,
    }
}

fn describe(atoms: &AtomTable, c: &Commitment) -> String {
    let text = atoms
        .get(&c.proposition)
        .map(|a| a.text.as_str())
        .unwrap_or(c.proposition.as_str());
    format!("{} ({}, {})", text, c.agent, c.tier)
}

pub fn solve_epistemic(ir: &EpistemicIr, model: &ClinicalModel) -> Solved {
    let atoms = &ir.atoms;
    let mcs = maximal_consistent_set(&ir.commitments, atoms, model);

    let mut list_cites: Vec<_> = ir.commitments.iter().map(|c| c.proposition.clone()).collect();
    list_cites.extend(atoms.knowledge_atoms());
    let list_note = ir
        .commitments
        .iter()
        .map(|c| describe(atoms, c))
        .collect::<Vec<_>>()
        .join("; ");

    let mut ranked = ir.commitments.clone();
    ranked.sort_by_key(|c| model.tier_rank(c.tier));
    let rank_note = format!(
        "tier order: {}",
        ranked
            .iter()
            .map(|c| describe(atoms, c))
            .collect::<Vec<_>>()
            .join(" > ")
    );

    let mut resolve_notes = Vec::new();
    for d in &mcs.discarded {
        resolve_notes.push(format!(
            "discard {}: conflicts with {}-tier evidence ({})",
            describe(atoms, &d.commitment),
            d.outranked_by,
            d.axiom.atoms.join(" / ")
        ));
    }
    for g in &mcs.unresolved {
        resolve_notes.push(format!(
            "unresolved tie: {}",
            g.iter().map(|c| describe(atoms, c)).collect::<Vec<_>>().join(" vs ")
        ));
    }
    if resolve_notes.is_empty() {
        resolve_notes.push("no exclusion axiom triggered".into());
    }
    let resolve_cites = mcs
        .discarded
        .iter()
        .map(|d| d.commitment.proposition.clone())
        .chain(mcs.unresolved.iter().flatten().map(|c| c.proposition.clone()))
        .collect();

    let s_key = atoms
        .key_of(&ir.statement)
        .unwrap_or_else(|| AtomKey::new(ir.statement.as_str()));
    let retained = mcs.retained_keys(atoms);
    let supports = retained.contains(&s_key);
    let mut extended = retained.clone();
    extended.insert(s_key.clone());
    let refuting = model.conflicts(&extended);
    let tied = !supports && mcs.unresolved_keys(atoms).contains(&s_key);

    let (check_note, raw) = if tied {
        ("statement sits in an unresolved same-tier conflict".to_string(), Verdict::Neutral)
    } else if supports {
        ("retained evidence contains the statement".to_string(), Verdict::Entailment)
    } else if let Some(ax) = refuting.first() {
        (
            format!("retained evidence plus the statement triggers {}", ax.atoms.join(" / ")),
            Verdict::Contradiction,
        )
    } else {
        ("retained evidence neither contains nor excludes the statement".to_string(), Verdict::Neutral)
    };
    let verdict = match (ir.polarity, raw) {
        (Polarity::Denies, Verdict::Entailment) => Verdict::Contradiction,
        (Polarity::Denies, Verdict::Contradiction) => Verdict::Entailment,
        (_, v) => v,
    };
    let check_cites = std::iter::once(ir.statement.clone())
        .chain(mcs.retained.iter().map(|c| c.proposition.clone()))
        .collect();
    let decide_note = match ir.polarity {
        Polarity::Asserts => format!("{verdict}"),
        Polarity::Denies => format!("statement denies the proposition; {verdict}"),
    };

    let steps = vec![
        TraceStep::new(StepKind::ListCommitments, list_cites, list_note),
        TraceStep::new(StepKind::RankTiers, Vec::new(), rank_note),
        TraceStep::new(StepKind::ResolveConflicts, resolve_cites, resolve_notes.join("; ")),
        TraceStep::new(StepKind::CheckEntailment, check_cites, check_note),
        TraceStep::new(StepKind::Decide, vec![ir.statement.clone()], decide_note),
    ];
    trace(ReasoningFamily::EpistemicVerification, steps, verdict)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::ir::{Atom, AtomId, AtomSource, StructuredPremise};

    fn p16() -> EpistemicIr {
        match fixtures::problem_16().gold_ir.unwrap() {
            StructuredPremise::Epistemic(e) => e,
            _ => unreachable!(),
        }
    }

    #[test]
    fn problem_16_discards_the_diagnosis() {
        let ir = p16();
        let model = ClinicalModel::reference();
        let mcs = maximal_consistent_set(&ir.commitments, &ir.atoms, &model);
        let tiers: Vec<_> = mcs.retained.iter().map(|c| c.tier).collect();
        assert_eq!(tiers, vec![EvidenceTier::ObjectiveMeasurement, EvidenceTier::Observation]);
        assert_eq!(mcs.discarded.len(), 1);
        assert_eq!(mcs.discarded[0].commitment.tier, EvidenceTier::Interpretation);
        assert_eq!(mcs.discarded[0].outranked_by, EvidenceTier::ObjectiveMeasurement);
        assert!(mcs.unresolved.is_empty());
        let (v, t) = solve_epistemic(&ir, &model);
        assert_eq!(v, Verdict::Contradiction);
        assert_eq!(t.kinds(), ReasoningFamily::EpistemicVerification.schema());
    }

    #[test]
    fn denial_flips_the_verdict() {
        let mut ir = p16();
        ir.polarity = Polarity::Denies;
        assert_eq!(solve_epistemic(&ir, &ClinicalModel::reference()).0, Verdict::Entailment);
    }

    #[test]
    fn conflict_free_input_is_kept_whole() {
        let atoms = AtomTable(vec![
            Atom::new("a", "endoscopy normal", AtomSource::Premise),
            Atom::new("b", "ferritin within normal range", AtomSource::Premise),
            Atom::new("s", "Endoscopy normal", AtomSource::Statement),
        ]);
        let ir = EpistemicIr {
            atoms,
            commitments: vec![
                Commitment::new("lab", "a", EvidenceTier::ObjectiveMeasurement),
                Commitment::new("lab", "b", EvidenceTier::ObjectiveMeasurement),
            ],
            statement: AtomId::new("s"),
            polarity: Polarity::Asserts,
        };
        let model = ClinicalModel::reference();
        let mcs = maximal_consistent_set(&ir.commitments, &ir.atoms, &model);
        assert_eq!(mcs.retained, ir.commitments);
        assert!(mcs.discarded.is_empty() && mcs.unresolved.is_empty());
        assert_eq!(solve_epistemic(&ir, &model).0, Verdict::Entailment);
    }

    #[test]
    fn same_tier_conflict_is_unresolved() {
        let ir = EpistemicIr {
            atoms: AtomTable(vec![
                Atom::new("a", "troponin elevated", AtomSource::Premise),
                Atom::new("b", "troponin normal", AtomSource::Premise),
                Atom::new("s", "troponin elevated", AtomSource::Statement),
            ]),
            commitments: vec![
                Commitment::new("lab a", "a", EvidenceTier::ObjectiveMeasurement),
                Commitment::new("lab b", "b", EvidenceTier::ObjectiveMeasurement),
            ],
            statement: AtomId::new("s"),
            polarity: Polarity::Asserts,
        };
        let model = ClinicalModel::reference();
        let mcs = maximal_consistent_set(&ir.commitments, &ir.atoms, &model);
        assert!(mcs.retained.is_empty() && mcs.discarded.is_empty());
        assert_eq!(mcs.unresolved, vec![ir.commitments.clone()]);
        assert_eq!(solve_epistemic(&ir, &model).0, Verdict::Neutral);
    }
}
