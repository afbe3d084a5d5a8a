//! Synthetic template corpus: seeded instantiation of parametric templates
//! with gold family, gold IR and gold verdict, plus JSONL persistence with a
//! drift guard on load.
//!
//! Slot ranges (doses, cohort sizes, event frequencies, scenario lists) are
//! reconstructions chosen to exercise every branch of each decision
//! procedure; the template builders below are their only documentation.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::fixtures;
use crate::ir::*;
use crate::kb::{fmt_num, ClinicalModel, Contraindication, EvidenceTier};
use crate::solvers::{expected_harm, harms_tied, solve};
use crate::types::{NliItem, ReasoningFamily, Verdict};

pub const CORPUS_VERSION: u32 = 1;
pub const TEMPLATE_VERSION: u32 = 1;

pub struct TemplateInfo {
    pub name: &'static str,
    pub family: ReasoningFamily,
    /// Deliberately carries more than one routing signature.
    pub stress: bool,
}

const fn t(name: &'static str, family: ReasoningFamily, stress: bool) -> TemplateInfo {
    TemplateInfo { name, family, stress }
}

use ReasoningFamily::{
    CausalAttribution as Causal, CompositionalGrounding as Comp, EpistemicVerification as Epis,
    RiskStateAbstraction as Risk,
};

pub const TEMPLATES: &[TemplateInfo] = &[
    t("pinned/problem-6", Causal, false),
    t("causal/rct-effect", Causal, false),
    t("causal/rct-null", Causal, false),
    t("causal/cohort-null", Causal, false),
    t("causal/cohort-unadjusted", Causal, false),
    t("causal/single-arm", Causal, false),
    t("causal/association", Causal, false),
    t("causal/ungrounded-association", Causal, false),
    t("stress/causal-with-harms", Causal, true),
    t("pinned/problem-12", Comp, false),
    t("compositional/standard", Comp, false),
    t("compositional/overdose", Comp, false),
    t("compositional/overlong", Comp, false),
    t("compositional/contraindicated", Comp, false),
    t("compositional/off-indication", Comp, false),
    t("compositional/unproven-benefit", Comp, false),
    t("compositional/missing-schedule", Comp, false),
    t("pinned/problem-16", Epis, false),
    t("epistemic/overruled-diagnosis", Epis, false),
    t("epistemic/denied-diagnosis", Epis, false),
    t("epistemic/affirmed-finding", Epis, false),
    t("epistemic/same-tier-conflict", Epis, false),
    t("epistemic/unrelated-statement", Epis, false),
    t("pinned/problem-39", Risk, false),
    t("risk/ordering", Risk, false),
    t("risk/dominant", Risk, false),
    t("risk/profile", Risk, false),
    t("risk/unscored", Risk, false),
    t("risk/red-flag", Risk, false),
    t("risk/red-flag-excluded", Risk, false),
    t("risk/red-flag-partial", Risk, false),
    t("stress/risk-causal-phrasing", Risk, true),
];

pub fn template_info(name: &str) -> Option<&'static TemplateInfo> {
    TEMPLATES.iter().find(|t| t.name == name)
}

pub fn is_stress_template(name: &str) -> bool {
    template_info(name).is_some_and(|t| t.stress)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub corpus_version: u32,
    pub seed: u64,
    pub per_family: usize,
    /// Template name → version.
    pub templates: BTreeMap<String, u32>,
    pub counts: BTreeMap<ReasoningFamily, usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub manifest: Manifest,
    pub items: Vec<NliItem>,
}

impl Corpus {
    pub fn items_of(&self, family: ReasoningFamily) -> impl Iterator<Item = &NliItem> {
        self.items.iter().filter(move |i| i.gold_family == Some(family))
    }

    /// One manifest line followed by one line per item.
    pub fn to_jsonl(&self) -> String {
        let mut out = serde_json::to_string(&self.manifest).expect("manifest serialises");
        out.push('\n');
        for item in &self.items {
            out.push_str(&serde_json::to_string(item).expect("item serialises"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        fs::write(path, self.to_jsonl())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GenerateError {
    #[error("per_family must be at least 1")]
    EmptyRequest,
    #[error("template `{template}` does not fit the clinical model: {detail}")]
    TemplateKbMismatch { template: String, detail: String },
}

fn mismatch(template: &str, detail: impl Into<String>) -> GenerateError {
    GenerateError::TemplateKbMismatch {
        template: template.to_string(),
        detail: detail.into(),
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("corpus line {line}: {message}")]
pub struct SchemaError {
    pub line: usize,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub id: String,
    pub stored: Verdict,
    /// `None` when the solver could not run (e.g. the drug left the model).
    pub current: Option<Verdict>,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{} item(s) no longer match their gold verdict (first: `{}`)", .drifted.len(), .drifted[0].id)]
pub struct GoldDriftError {
    pub drifted: Vec<Drift>,
}

#[derive(Debug, thiserror::Error)]
pub enum LoadError {
    #[error("reading corpus: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Schema(#[from] SchemaError),
    #[error(transparent)]
    GoldDrift(#[from] GoldDriftError),
}

pub fn load_corpus(path: impl AsRef<Path>, model: &ClinicalModel) -> Result<Corpus, LoadError> {
    parse_corpus(&fs::read_to_string(path)?, model)
}

/// Parses and re-validates a corpus, then re-solves every gold IR.
pub fn parse_corpus(text: &str, model: &ClinicalModel) -> Result<Corpus, LoadError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let schema = |line: usize, message: String| SchemaError { line: line + 1, message };

    let (n, first) = lines.next().ok_or_else(|| schema(0, "empty corpus file".into()))?;
    let manifest: Manifest =
        serde_json::from_str(first).map_err(|e| schema(n, format!("manifest: {e}")))?;
    if manifest.corpus_version != CORPUS_VERSION {
        return Err(schema(n, format!("unsupported corpus_version {}", manifest.corpus_version)).into());
    }

    let mut items = Vec::new();
    let mut seen = BTreeSet::new();
    for (n, line) in lines {
        let item: NliItem = serde_json::from_str(line).map_err(|e| schema(n, e.to_string()))?;
        if !seen.insert(item.id.clone()) {
            return Err(schema(n, format!("duplicate id `{}`", item.id)).into());
        }
        if item.gold_family.is_none() || item.gold_verdict.is_none() || item.gold_ir.is_none() {
            return Err(schema(n, format!("item `{}` lacks gold annotations", item.id)).into());
        }
        item.validate().map_err(|e| schema(n, e.to_string()))?;
        items.push(item);
    }

    let mut counts: BTreeMap<ReasoningFamily, usize> = BTreeMap::new();
    for item in &items {
        *counts.entry(item.gold_family.expect("checked")).or_default() += 1;
    }
    if counts != manifest.counts {
        return Err(schema(0, format!("family counts {counts:?} disagree with manifest {:?}", manifest.counts)).into());
    }

    let drifted: Vec<Drift> = items
        .iter()
        .filter_map(|item| {
            let stored = item.gold_verdict.expect("checked");
            let current = solve(
                item.gold_family.expect("checked"),
                item.gold_ir.as_ref().expect("checked"),
                model,
            )
            .ok()
            .map(|(v, _)| v);
            (current != Some(stored)).then(|| Drift {
                id: item.id.clone(),
                stored,
                current,
            })
        })
        .collect();
    if !drifted.is_empty() {
        return Err(GoldDriftError { drifted }.into());
    }
    Ok(Corpus { manifest, items })
}

struct Draft {
    template: &'static str,
    premise: String,
    statement: String,
    ir: StructuredPremise,
}

const TARGETS: [Verdict; 3] = [Verdict::Entailment, Verdict::Contradiction, Verdict::Neutral];

/// `per_family` items per family: the pinned worked problem, then template
/// items cycling through the three verdicts. Causal and risk give one
/// entailment and one contradiction slot per twenty items to
/// multi-signature stress templates.
pub fn generate_corpus(seed: u64, per_family: usize, model: &ClinicalModel) -> Result<Corpus, GenerateError> {
    if per_family == 0 {
        return Err(GenerateError::EmptyRequest);
    }
    check_kb(model)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut items = Vec::new();
    let mut counts = BTreeMap::new();

    for family in ReasoningFamily::ALL {
        let (pinned, pinned_name) = match family {
            Causal => (fixtures::problem_6(), "pinned/problem-6"),
            Comp => (fixtures::problem_12(), "pinned/problem-12"),
            Epis => (fixtures::problem_16(), "pinned/problem-16"),
            Risk => (fixtures::problem_39(), "pinned/problem-39"),
        };
        check_gold(&pinned, pinned_name, model)?;
        items.push(NliItem {
            template: Some(pinned_name.to_string()),
            ..pinned
        });

        let stress_n = match family {
            Causal | Risk => per_family / 20,
            _ => 0,
        };
        for i in 0..per_family - 1 {
            let target = TARGETS[i % 3];
            let stress = target != Verdict::Neutral && i / 3 < stress_n;
            let draft = match family {
                Causal => causal_draft(&mut rng, target, stress),
                Comp => compositional_draft(&mut rng, target, model)?,
                Epis => epistemic_draft(&mut rng, target),
                Risk => risk_draft(&mut rng, target, stress, model)?,
            };
            let item = NliItem {
                id: format!("{}-{:03}", family.short(), i + 1),
                premise_text: draft.premise,
                statement_text: draft.statement,
                gold_family: Some(family),
                gold_verdict: Some(target),
                gold_ir: Some(draft.ir),
                template: Some(draft.template.to_string()),
            };
            debug_assert!(template_info(draft.template).is_some_and(|t| t.family == family));
            check_gold(&item, draft.template, model)?;
            items.push(item);
        }
        counts.insert(family, per_family);
    }

    let manifest = Manifest {
        corpus_version: CORPUS_VERSION,
        seed,
        per_family,
        templates: TEMPLATES.iter().map(|t| (t.name.to_string(), TEMPLATE_VERSION)).collect(),
        counts,
    };
    Ok(Corpus { manifest, items })
}

/// The verdict rule must agree with the solver on what the builder produced.
fn check_gold(item: &NliItem, template: &str, model: &ClinicalModel) -> Result<(), GenerateError> {
    item.validate().map_err(|e| mismatch(template, e.to_string()))?;
    let family = item.gold_family.expect("templates set a family");
    let got = solve(family, item.gold_ir.as_ref().expect("templates set an IR"), model)
        .map_err(|e| mismatch(template, format!("{}: {e}", item.id)))?
        .0;
    if Some(got) != item.gold_verdict {
        return Err(mismatch(
            template,
            format!("{}: solver gives {got}, template expects {}", item.id, item.gold_verdict.expect("set")),
        ));
    }
    Ok(())
}

fn check_kb(model: &ClinicalModel) -> Result<(), GenerateError> {
    for (drug, _) in COMP_DRUGS {
        if model.drug(drug).is_none() {
            return Err(mismatch("compositional/*", format!("drug `{drug}` is not in the model")));
        }
    }
    for s in EPISTEMIC_SCENARIOS {
        let keys = [AtomKey::new(s.finding), AtomKey::new(s.diagnosis)].into_iter().collect();
        if model.conflicts(&keys).is_empty() {
            return Err(mismatch(
                "epistemic/*",
                format!("no exclusion axiom covers `{}` vs `{}`", s.finding, s.diagnosis),
            ));
        }
    }
    for (a, b, _, _) in SAME_TIER_CONFLICTS {
        let keys = [AtomKey::new(a), AtomKey::new(b)].into_iter().collect();
        if model.conflicts(&keys).is_empty() {
            return Err(mismatch("epistemic/same-tier-conflict", format!("`{a}` and `{b}` do not conflict")));
        }
    }
    if model.red_flags.is_empty() {
        return Err(mismatch("risk/red-flag", "the model has no red-flag rules"));
    }
    Ok(())
}

fn capitalize(s: &str) -> String {
    let mut c = s.chars();
    match c.next() {
        Some(f) => f.to_uppercase().chain(c).collect(),
        None => String::new(),
    }
}

/// Indefinite article before a spoken number.
fn article(n: u32) -> &'static str {
    if n == 8 || n == 11 || n == 18 || (80..90).contains(&n) {
        "an"
    } else {
        "a"
    }
}

fn pick<'a, T>(rng: &mut ChaCha8Rng, xs: &'a [T]) -> &'a T {
    xs.choose(rng).expect("non-empty slot domain")
}

// ---- causal ---------------------------------------------------------------

/// (treatment, outcome, condition)
const CAUSAL_PAIRS: &[(&str, &str, &str)] = &[
    ("atorvastatin", "LDL cholesterol reduction", "hypercholesterolaemia"),
    ("metformin", "HbA1c reduction", "type 2 diabetes"),
    ("ondansetron", "reduced postoperative nausea", "elective surgery"),
    ("lisinopril", "blood pressure reduction", "hypertension"),
    ("omeprazole", "ulcer healing", "peptic ulcer disease"),
    ("melatonin", "shorter sleep onset", "primary insomnia"),
    ("amoxicillin", "symptom resolution", "acute otitis media"),
    ("sertraline", "remission of depressive symptoms", "major depression"),
];

const COHORT_SIZES: &[u32] = &[40, 60, 80, 120, 200, 240, 300];

fn causal_draft(rng: &mut ChaCha8Rng, target: Verdict, stress: bool) -> Draft {
    let &(drug, outcome, condition) = pick(rng, CAUSAL_PAIRS);
    let n = *pick(rng, COHORT_SIZES);
    let weeks = rng.random_range(4..=24);
    let lo = rng.random_range(10..=40u32);
    let gap = rng.random_range(12..=30u32);

    let mut atoms = vec![
        Atom::new("t", drug, AtomSource::Premise),
        Atom::new("design", "", AtomSource::Premise),
    ];
    let mut kind = ClaimKind::Causal;
    let mut outcome_source = AtomSource::Statement;
    let mut ev = CausalEvidence::default();
    let rct = |ev: &mut CausalEvidence, effect: bool| {
        ev.interventional = true;
        ev.has_comparator = true;
        ev.temporality_established = true;
        ev.confounding_controlled = true;
        ev.comparator_shows_effect = Some(effect);
    };

    let (template, design, statement) = match (target, stress) {
        (Verdict::Entailment, _) | (Verdict::Contradiction, true) if stress || rng.random_bool(0.7) => {
            let effect = target == Verdict::Entailment;
            rct(&mut ev, effect);
            let (a, b, p) = if effect {
                (lo + gap, lo, format!("p < 0.0{}", rng.random_range(1..=5)))
            } else {
                (lo + 1, lo, format!("p = 0.{}", rng.random_range(41..=89)))
            };
            (
                if stress {
                    "stress/causal-with-harms"
                } else if effect {
                    "causal/rct-effect"
                } else {
                    "causal/rct-null"
                },
                format!(
                    "A randomised, placebo-controlled trial enrolled {n} adults with {condition}. After {weeks} weeks, {} was seen in {a}% of the {drug} arm and {b}% of the placebo arm ({p}).",
                    outcome.to_lowercase()
                ),
                format!("{} causes {} in {condition}.", capitalize(drug), outcome.to_lowercase()),
            )
        }
        (Verdict::Entailment, _) => {
            kind = ClaimKind::Associational;
            outcome_source = AtomSource::Premise;
            ev.temporality_established = true;
            (
                "causal/association",
                format!(
                    "In a single-arm study of {n} patients with {condition} given {drug}, {lo}% showed {} at {weeks} weeks.",
                    outcome.to_lowercase()
                ),
                format!("{} use was associated with {} in this study.", capitalize(drug), outcome.to_lowercase()),
            )
        }
        (Verdict::Contradiction, _) => {
            rct(&mut ev, false);
            if rng.random_bool(0.5) {
                (
                    "causal/rct-null",
                    format!(
                        "A randomised, placebo-controlled trial of {drug} in {n} adults with {condition} found {} in {}% of the treated arm and {lo}% of the placebo arm after {weeks} weeks (p = 0.{}).",
                        outcome.to_lowercase(),
                        lo + 1,
                        rng.random_range(41..=89)
                    ),
                    format!("{} causes {} in {condition}.", capitalize(drug), outcome.to_lowercase()),
                )
            } else {
                ev.interventional = false;
                (
                    "causal/cohort-null",
                    format!(
                        "A prospective cohort of {n} patients with {condition} found no difference in {} between {drug} users and non-users ({}% vs {lo}%) after adjustment for age and comorbidity.",
                        outcome.to_lowercase(),
                        lo + 1
                    ),
                    format!("{} causes {} in {condition}.", capitalize(drug), outcome.to_lowercase()),
                )
            }
        }
        (_, _) => match rng.random_range(0..3) {
            0 => {
                ev.has_comparator = true;
                ev.temporality_established = true;
                ev.comparator_shows_effect = Some(true);
                (
                    "causal/cohort-unadjusted",
                    format!(
                        "In a retrospective cohort of {n} patients with {condition}, those taking {drug} had {} more often ({}% vs {lo}%); the analysis did not adjust for confounders.",
                        outcome.to_lowercase(),
                        lo + gap
                    ),
                    format!("{} causes {} in {condition}.", capitalize(drug), outcome.to_lowercase()),
                )
            }
            1 => {
                ev.temporality_established = true;
                (
                    "causal/single-arm",
                    format!(
                        "In a single-arm study of {n} patients with {condition} given {drug}, {lo}% showed {} at {weeks} weeks.",
                        outcome.to_lowercase()
                    ),
                    format!("{} causes {} in {condition}.", capitalize(drug), outcome.to_lowercase()),
                )
            }
            _ => {
                kind = ClaimKind::Associational;
                ev.temporality_established = true;
                (
                    "causal/ungrounded-association",
                    format!(
                        "In a single-arm study of {n} patients with {condition} given {drug}, adverse events were mild and no patient stopped treatment."
                    ),
                    format!("{} use was associated with {} in this study.", capitalize(drug), outcome.to_lowercase()),
                )
            }
        },
    };

    let mut premise = design.clone();
    atoms[1].text = design;
    atoms.push(Atom::new("y", &outcome.to_lowercase(), outcome_source));
    ev.support = vec![AtomId::new("design")];

    let mut reported_events = Vec::new();
    if stress {
        let mut names: Vec<&(&str, u8, u8)> = ADVERSE_EVENTS.iter().collect();
        names.sort_by_key(|_| rng.random::<u32>());
        let mut parts = Vec::new();
        for (i, &&(name, glo, ghi)) in names.iter().take(2).enumerate() {
            let id = format!("ae{}", i + 1);
            let k = rng.random_range(1..=n / 4);
            let g = rng.random_range(glo..=ghi);
            atoms.push(Atom::new(&id, name, AtomSource::Premise));
            reported_events.push(RiskEvent {
                event: AtomId::new(&id),
                likelihood: Some(Likelihood::Frequency { k, n }),
                severity_grade: Some(g),
            });
            parts.push(format!("{name} {k}/{n} (grade {g})"));
        }
        premise.push_str(&format!(" Adverse events in the {drug} arm: {}.", parts.join(", ")));
    }

    Draft {
        template,
        premise,
        statement,
        ir: StructuredPremise::Causal(CausalIr {
            atoms: AtomTable(atoms),
            claims: vec![CausalClaim {
                treatment: AtomId::new("t"),
                outcome: AtomId::new("y"),
                kind,
            }],
            evidence: ev,
            reported_events,
        }),
    }
}

// ---- compositional ----------------------------------------------------------

/// Drugs the templates draw from, with the prose form used in premises.
const COMP_DRUGS: &[(&str, &str)] = &[
    ("fludarabine", "Fludarabine"),
    ("cytarabine", "Cytarabine"),
    ("bendamustine", "Bendamustine"),
    ("etoposide", "Etoposide"),
    ("azacitidine", "Azacitidine"),
    ("decitabine", "Decitabine"),
];

const OTHER_DIAGNOSES: &[&str] = &[
    "rheumatoid arthritis",
    "multiple sclerosis",
    "chronic lymphocytic leukemia",
    "acute myeloid leukemia",
    "small cell lung cancer",
    "myelodysplastic syndrome",
    "hodgkin lymphoma",
];

struct CompSlots {
    drug: String,
    prose: &'static str,
    dose: f64,
    days: Option<u32>,
    diagnosis: String,
    age: u32,
    attribute: Option<String>,
}

fn compositional_draft(
    rng: &mut ChaCha8Rng,
    target: Verdict,
    model: &ClinicalModel,
) -> Result<Draft, GenerateError> {
    let supported = |d: &str| -> Vec<String> {
        model
            .drug(d)
            .map(|m| {
                m.indications
                    .iter()
                    .filter(|i| i.benefit_supported == Some(true))
                    .map(|i| i.diagnosis.clone())
                    .collect()
            })
            .unwrap_or_default()
    };
    let with_support: Vec<&(&str, &str)> = COMP_DRUGS.iter().filter(|(d, _)| !supported(d).is_empty()).collect();
    if with_support.is_empty() {
        return Err(mismatch("compositional/standard", "no template drug has a supported indication"));
    }
    let &&(drug, prose) = pick(rng, &with_support);
    let mono = model.drug(drug).expect("checked in check_kb");
    let dose = rng.random_range(mono.standard_dose.min.ceil() as u32..=mono.standard_dose.max.floor() as u32) as f64;
    let days = rng.random_range(1..=mono.max_duration_days.max(1));
    let mut s = CompSlots {
        drug: drug.to_string(),
        prose,
        dose,
        days: Some(days),
        diagnosis: pick(rng, &supported(drug)).clone(),
        age: rng.random_range(35..=80),
        attribute: None,
    };

    let template = match target {
        Verdict::Entailment => "compositional/standard",
        Verdict::Contradiction => match rng.random_range(0..4) {
            0 => {
                s.dose = (mono.standard_dose.max * rng.random_range(2..=5) as f64).round();
                "compositional/overdose"
            }
            1 => {
                s.days = Some(mono.max_duration_days + rng.random_range(2..=10));
                "compositional/overlong"
            }
            2 => {
                let attrs: Vec<&String> = mono
                    .contraindications
                    .iter()
                    .filter_map(|c| match c {
                        Contraindication::Attribute(a) => Some(a),
                        _ => None,
                    })
                    .collect();
                match attrs.choose(rng) {
                    Some(a) => {
                        s.attribute = Some((*a).clone());
                        "compositional/contraindicated"
                    }
                    None => {
                        s.dose = (mono.standard_dose.max * 3.0).round();
                        "compositional/overdose"
                    }
                }
            }
            _ => {
                let off: Vec<&&str> = OTHER_DIAGNOSES.iter().filter(|d| mono.indication(d).is_none()).collect();
                let dx = off.choose(rng).ok_or_else(|| {
                    mismatch("compositional/off-indication", format!("{drug} is indicated for every listed diagnosis"))
                })?;
                s.diagnosis = dx.to_string();
                "compositional/off-indication"
            }
        },
        _ => {
            let unproven: Vec<(&str, &str, String)> = COMP_DRUGS
                .iter()
                .filter_map(|&(d, p)| {
                    let m = model.drug(d)?;
                    let i = m.indications.iter().find(|i| i.benefit_supported.is_none())?;
                    Some((d, p, i.diagnosis.clone()))
                })
                .collect();
            if !unproven.is_empty() && rng.random_bool(0.5) {
                let (d, p, dx) = pick(rng, &unproven).clone();
                let m = model.drug(d).expect("filtered");
                s.drug = d.to_string();
                s.prose = p;
                s.dose = rng.random_range(m.standard_dose.min.ceil() as u32..=m.standard_dose.max.floor() as u32) as f64;
                s.days = Some(rng.random_range(1..=m.max_duration_days.max(1)));
                s.diagnosis = dx;
                "compositional/unproven-benefit"
            } else {
                s.days = None;
                "compositional/missing-schedule"
            }
        }
    };
    if s.attribute.is_none() && mono.contraindications.iter().any(|c| matches!(c, Contraindication::AgeAtLeast(a) if (s.age as f64) >= *a)) {
        s.age = 60;
    }
    Ok(compositional_from_slots(template, &s))
}

fn compositional_from_slots(template: &'static str, s: &CompSlots) -> Draft {
    let dose_text = format!("{} mg/m2 daily", fmt_num(s.dose));
    let mut atoms = vec![
        Atom::new("drug", s.prose, AtomSource::Premise),
        Atom::new("dose", &dose_text, AtomSource::Premise),
        Atom::new("dx", &s.diagnosis, AtomSource::Premise),
        Atom::new("age", &format!("{}-year-old", s.age), AtomSource::Premise),
    ];
    let mut premise = format!("{} {dose_text}", s.prose);
    if let Some(d) = s.days {
        atoms.push(Atom::new("schedule", &format!("{d} days"), AtomSource::Premise));
        premise.push_str(&format!(" x{d} {}", if d == 1 { "day" } else { "days" }));
    }
    premise.push_str(&format!(" for {} in {} {}-year-old patient", s.diagnosis, article(s.age), s.age));
    let mut attributes = Vec::new();
    if let Some(a) = &s.attribute {
        atoms.push(Atom::new("attr", a, AtomSource::Premise));
        attributes.push(Grounded::new(a.clone(), "attr"));
        premise.push_str(&format!(" with {a}"));
    }
    premise.push('.');
    if s.days.is_none() {
        premise.push_str(" The planned course length is not recorded.");
    }
    let benefit = format!("improve outcomes in {}", s.diagnosis);
    atoms.push(Atom::new("benefit", &benefit, AtomSource::Statement));

    Draft {
        template,
        premise,
        statement: format!("The treatment is expected to {benefit}."),
        ir: StructuredPremise::Compositional(CompositionalIr {
            atoms: AtomTable(atoms),
            regimen: Regimen {
                drug: Some(Grounded::new(s.drug.clone(), "drug")),
                dose: Some(Grounded::new(Dose::mg_m2_day(s.dose), "dose")),
                diagnosis: Some(Grounded::new(s.diagnosis.clone(), "dx")),
                schedule: s.days.map(|d| Grounded::new(Schedule::daily(d), "schedule")),
            },
            patient: Patient {
                age: Some(Grounded::new(s.age as f64, "age")),
                attributes,
            },
            asserted_benefit: AtomId::new("benefit"),
        }),
    }
}

// ---- epistemic --------------------------------------------------------------

struct Scenario {
    symptom: &'static str,
    finding: &'static str,
    finding_sentence: &'static str,
    measured_by: &'static str,
    diagnosis: &'static str,
    condition: &'static str,
}

const EPISTEMIC_SCENARIOS: &[Scenario] = &[
    Scenario {
        symptom: "central chest pain",
        finding: "serial troponins normal",
        finding_sentence: "Serial troponins are normal.",
        measured_by: "laboratory",
        diagnosis: "myocardial infarction present",
        condition: "myocardial infarction",
    },
    Scenario {
        symptom: "thirst and tiredness",
        finding: "hba1c within normal range",
        finding_sentence: "HbA1c is within the normal range.",
        measured_by: "laboratory",
        diagnosis: "type 2 diabetes present",
        condition: "type 2 diabetes",
    },
    Scenario {
        symptom: "cough and fever",
        finding: "chest radiograph clear",
        finding_sentence: "The chest radiograph is clear.",
        measured_by: "radiologist",
        diagnosis: "lobar pneumonia present",
        condition: "lobar pneumonia",
    },
    Scenario {
        symptom: "wrist pain after a fall",
        finding: "wrist radiograph shows no fracture",
        finding_sentence: "The wrist radiograph shows no fracture.",
        measured_by: "radiologist",
        diagnosis: "wrist fracture present",
        condition: "a wrist fracture",
    },
    Scenario {
        symptom: "calf swelling",
        finding: "compression ultrasound negative",
        finding_sentence: "Compression ultrasound of the leg is negative.",
        measured_by: "sonographer",
        diagnosis: "deep vein thrombosis present",
        condition: "deep vein thrombosis",
    },
    Scenario {
        symptom: "dysuria",
        finding: "urine culture negative",
        finding_sentence: "The urine culture is negative.",
        measured_by: "laboratory",
        diagnosis: "urinary tract infection present",
        condition: "a urinary tract infection",
    },
    Scenario {
        symptom: "fatigue and weight gain",
        finding: "tsh within normal range",
        finding_sentence: "TSH is within the normal range.",
        measured_by: "laboratory",
        diagnosis: "primary hypothyroidism present",
        condition: "primary hypothyroidism",
    },
    Scenario {
        symptom: "tiredness and pallor",
        finding: "ferritin within normal range",
        finding_sentence: "Ferritin is within the normal range.",
        measured_by: "laboratory",
        diagnosis: "iron deficiency anemia present",
        condition: "iron deficiency anemia",
    },
];

/// (reading A, reading B, premise, statement asserting A)
const SAME_TIER_CONFLICTS: &[(&str, &str, &str, &str)] = &[
    (
        "troponin elevated",
        "troponin normal",
        "Two laboratories analyse the same blood sample: the first reports troponin elevated, the second reports troponin normal.",
        "The troponin is elevated.",
    ),
    (
        "serum potassium elevated",
        "serum potassium normal",
        "Two analysers run on the same sample disagree: one reports serum potassium elevated, the other serum potassium normal.",
        "The serum potassium is elevated.",
    ),
    (
        "d-dimer elevated",
        "d-dimer normal",
        "The same specimen is processed twice: one run reports D-dimer elevated, the other D-dimer normal.",
        "The D-dimer is elevated.",
    ),
    (
        "ecg shows st elevation",
        "ecg normal",
        "Two cardiologists read the same tracing: one reports that the ECG shows ST elevation, the other that the ECG is normal.",
        "The ECG shows ST elevation.",
    ),
];

const UNRELATED_CONDITIONS: &[&str] = &["hypertension", "asthma", "migraine", "osteoarthritis"];

fn epistemic_draft(rng: &mut ChaCha8Rng, target: Verdict) -> Draft {
    if target == Verdict::Neutral && rng.random_bool(0.5) {
        let &(a, b, premise, statement) = pick(rng, SAME_TIER_CONFLICTS);
        return Draft {
            template: "epistemic/same-tier-conflict",
            premise: premise.to_string(),
            statement: statement.to_string(),
            ir: StructuredPremise::Epistemic(EpistemicIr {
                atoms: AtomTable(vec![
                    Atom::new("r1", a, AtomSource::Premise),
                    Atom::new("r2", b, AtomSource::Premise),
                    Atom::new("s", a, AtomSource::Statement),
                ]),
                commitments: vec![
                    Commitment::new("first reader", "r1", EvidenceTier::ObjectiveMeasurement),
                    Commitment::new("second reader", "r2", EvidenceTier::ObjectiveMeasurement),
                ],
                statement: AtomId::new("s"),
                polarity: Polarity::Asserts,
            }),
        };
    }

    let sc = pick(rng, EPISTEMIC_SCENARIOS);
    let age = rng.random_range(25..=80);
    let sex = *pick(rng, &["man", "woman"]);
    let (believer, tier, believes) = if rng.random_bool(0.7) {
        ("physician", EvidenceTier::Interpretation, format!("The physician diagnoses {}.", sc.condition))
    } else {
        ("patient", EvidenceTier::SelfReport, format!("The patient is convinced of having {}.", sc.condition))
    };
    let premise = format!(
        "{} {age}-year-old {sex} presents with {}. {} {believes}",
        capitalize(article(age)),
        sc.symptom, sc.finding_sentence
    );

    let (template, s_text, polarity, statement) = match target {
        Verdict::Contradiction => (
            "epistemic/overruled-diagnosis",
            sc.diagnosis.to_string(),
            Polarity::Asserts,
            format!("The patient has {}.", sc.condition),
        ),
        Verdict::Entailment if rng.random_bool(0.5) => (
            "epistemic/denied-diagnosis",
            sc.diagnosis.to_string(),
            Polarity::Denies,
            format!("The patient does not have {}.", sc.condition),
        ),
        Verdict::Entailment => (
            "epistemic/affirmed-finding",
            sc.finding.to_string(),
            Polarity::Asserts,
            sc.finding_sentence.to_string(),
        ),
        Verdict::Neutral => {
            let other = *pick(rng, UNRELATED_CONDITIONS);
            (
                "epistemic/unrelated-statement",
                format!("{other} present"),
                Polarity::Asserts,
                format!("The patient has {other}."),
            )
        }
    };

    Draft {
        template,
        premise,
        statement,
        ir: StructuredPremise::Epistemic(EpistemicIr {
            atoms: AtomTable(vec![
                Atom::new("symptom", sc.symptom, AtomSource::Premise),
                Atom::new("finding", sc.finding, AtomSource::Premise),
                Atom::new("dx", sc.diagnosis, AtomSource::Premise),
                Atom::new("s", &s_text, AtomSource::Statement),
            ]),
            commitments: vec![
                Commitment::new("patient", "symptom", EvidenceTier::SelfReport),
                Commitment::new(sc.measured_by, "finding", EvidenceTier::ObjectiveMeasurement),
                Commitment::new(believer, "dx", tier),
            ],
            statement: AtomId::new("s"),
            polarity,
        }),
    }
}

// ---- risk -------------------------------------------------------------------

/// (event, lowest grade, highest grade)
const ADVERSE_EVENTS: &[(&str, u8, u8)] = &[
    ("nausea", 1, 2),
    ("fatigue", 1, 2),
    ("headache", 1, 2),
    ("rash", 1, 3),
    ("diarrhoea", 1, 3),
    ("alopecia", 1, 1),
    ("neutropenia", 3, 4),
    ("hepatotoxicity", 3, 4),
    ("QT prolongation", 3, 4),
    ("pancreatitis", 3, 4),
    ("anaphylaxis", 4, 5),
    ("Stevens-Johnson syndrome", 4, 5),
];

const RISK_DRUGS: &[&str] = &["carboplatin", "clozapine", "allopurinol", "amiodarone", "methotrexate", "valproate"];

fn risk_draft(
    rng: &mut ChaCha8Rng,
    target: Verdict,
    stress: bool,
    model: &ClinicalModel,
) -> Result<Draft, GenerateError> {
    if !stress && rng.random_bool(0.4) {
        return Ok(red_flag_draft(rng, target, model));
    }
    let drug = *pick(rng, RISK_DRUGS);
    let n = *pick(rng, COHORT_SIZES);
    let unscored = target == Verdict::Neutral;
    let count = if unscored { 3 } else { rng.random_range(2..=3) };

    // Resample until every pair of scored events is strictly ordered.
    let mut attempt = 0;
    let (atoms, events, ranking) = loop {
        attempt += 1;
        if attempt > 200 {
            return Err(mismatch("risk/ordering", "could not draw untied expected harms"));
        }
        let mut pool: Vec<&(&str, u8, u8)> = ADVERSE_EVENTS.iter().collect();
        pool.sort_by_key(|_| rng.random::<u32>());
        let mut atoms = Vec::new();
        let mut events = Vec::new();
        for (i, &&(name, glo, ghi)) in pool.iter().take(count).enumerate() {
            let id = format!("e{}", i + 1);
            atoms.push(Atom::new(&id, name, AtomSource::Premise));
            events.push(RiskEvent {
                event: AtomId::new(&id),
                likelihood: Some(Likelihood::Frequency {
                    k: rng.random_range(1..=n / 3),
                    n,
                }),
                severity_grade: (!(unscored && i == count - 1)).then(|| rng.random_range(glo..=ghi)),
            });
        }
        let probe = RiskIr {
            atoms: AtomTable(atoms.clone()),
            events: events.clone(),
            latent_findings: vec![],
            excluded_conditions: vec![],
            claim: RiskClaim::Profile { events: vec![] },
            treatment_outcome: None,
        };
        let ranking = expected_harm(&probe, model).map_err(|e| mismatch("risk/ordering", e.to_string()))?;
        let harms: Vec<f64> = ranking.order.iter().map(|&i| ranking.scored[i].expected_harm).collect();
        if harms.windows(2).all(|w| !harms_tied(w[0], w[1])) {
            break (atoms, events, ranking);
        }
    };
    let ordered = ranking.ordered_events();
    let name = |id: &AtomId| atoms.iter().find(|a| &a.id == id).expect("own atom").text.clone();
    let top = ordered[0].clone();
    let second = ordered[1].clone();

    let (template, claim, statement) = if stress {
        let (hi, lo) = if target == Verdict::Entailment { (&top, &second) } else { (&second, &top) };
        (
            "stress/risk-causal-phrasing",
            RiskClaim::Ordering {
                higher: hi.clone(),
                lower: Some(lo.clone()),
            },
            format!(
                "{} causes {}, which is a greater risk than its {}.",
                capitalize(drug),
                name(hi),
                name(lo)
            ),
        )
    } else {
        match target {
            Verdict::Neutral => {
                let unscored_id = ranking.unscored[0].clone();
                (
                    "risk/unscored",
                    RiskClaim::Ordering {
                        higher: unscored_id.clone(),
                        lower: Some(top.clone()),
                    },
                    format!("{} poses a greater risk than {} for these patients.", capitalize(&name(&unscored_id)), name(&top)),
                )
            }
            _ => {
                let entail = target == Verdict::Entailment;
                match rng.random_range(0..3) {
                    0 => {
                        let (hi, lo) = if entail { (&top, &second) } else { (&second, &top) };
                        (
                            "risk/ordering",
                            RiskClaim::Ordering {
                                higher: hi.clone(),
                                lower: Some(lo.clone()),
                            },
                            format!("{} poses a greater risk than {} for these patients.", capitalize(&name(hi)), name(lo)),
                        )
                    }
                    1 => {
                        let hi = if entail { &top } else { &second };
                        (
                            "risk/dominant",
                            RiskClaim::Ordering {
                                higher: hi.clone(),
                                lower: None,
                            },
                            format!("{} is the dominant risk of {drug}.", capitalize(&name(hi))),
                        )
                    }
                    _ => {
                        let claimed: Vec<AtomId> = if entail { vec![top.clone()] } else { ordered[1..].to_vec() };
                        let names: Vec<String> = claimed.iter().map(&name).collect();
                        (
                            "risk/profile",
                            RiskClaim::Profile { events: claimed },
                            format!("The main risk of {drug} is {}.", names.join(" and ")),
                        )
                    }
                }
            }
        }
    };

    let parts: Vec<String> = events
        .iter()
        .map(|e| {
            let Some(Likelihood::Frequency { k, n }) = e.likelihood else { unreachable!() };
            let grade = match e.severity_grade {
                Some(g) => format!("grade {g}"),
                None => "grade not reported".to_string(),
            };
            format!("{} in {k}/{n} ({grade})", name(&e.event))
        })
        .collect();
    let premise = format!(
        "In a safety cohort of {n} patients treated with {drug}, adverse events were {}.",
        parts.join(", ")
    );

    let mut atoms = atoms;
    let treatment_outcome = stress.then(|| {
        atoms.push(Atom::new("t", drug, AtomSource::Statement));
        let outcome = match &claim {
            RiskClaim::Ordering { higher, .. } => higher.clone(),
            _ => unreachable!(),
        };
        TreatmentOutcome {
            treatment: AtomId::new("t"),
            outcome,
        }
    });

    Ok(Draft {
        template,
        premise,
        statement,
        ir: StructuredPremise::Risk(RiskIr {
            atoms: AtomTable(atoms),
            events,
            latent_findings: vec![],
            excluded_conditions: vec![],
            claim,
            treatment_outcome,
        }),
    })
}

fn red_flag_draft(rng: &mut ChaCha8Rng, target: Verdict, model: &ClinicalModel) -> Draft {
    let rule = pick(rng, &model.red_flags);
    let age = rng.random_range(20..=75);
    let mut findings: Vec<&str> = rule.required_findings.iter().map(String::as_str).collect();
    let template = match target {
        Verdict::Entailment => "risk/red-flag",
        Verdict::Contradiction => "risk/red-flag-excluded",
        _ => {
            let keep = rng.random_range(1..findings.len().max(2));
            findings.truncate(keep);
            "risk/red-flag-partial"
        }
    };

    let mut atoms: Vec<Atom> = findings
        .iter()
        .enumerate()
        .map(|(i, f)| Atom::new(&format!("f{}", i + 1), f, AtomSource::Premise))
        .collect();
    let latent_findings = atoms.iter().map(|a| a.id.clone()).collect();
    atoms.push(Atom::new("cond", &rule.syndrome, AtomSource::Statement));

    let mut premise = format!(
        "{} {age}-year-old patient presents with {}.",
        capitalize(article(age)),
        findings.join(", ")
    );
    let mut excluded_conditions = Vec::new();
    if template == "risk/red-flag-excluded" {
        atoms.push(Atom::new("ruled_out", &rule.syndrome, AtomSource::Premise));
        excluded_conditions.push(AtomId::new("ruled_out"));
        premise.push_str(&format!(" Investigation earlier today excluded {}.", rule.syndrome));
    } else {
        premise.push_str(" No investigations have been performed yet.");
    }

    Draft {
        template,
        premise,
        statement: format!("{} is required to exclude {}.", capitalize(&rule.mandated_action), rule.syndrome),
        ir: StructuredPremise::Risk(RiskIr {
            atoms: AtomTable(atoms),
            events: vec![],
            latent_findings,
            excluded_conditions,
            claim: RiskClaim::ExclusionRequired {
                condition: AtomId::new("cond"),
                action: rule.mandated_action.clone(),
            },
            treatment_outcome: None,
        }),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::extract_signatures;

    fn reference() -> ClinicalModel {
        ClinicalModel::reference()
    }

    #[test]
    fn eighty_items_twenty_per_family() {
        let c = generate_corpus(1, 20, &reference()).unwrap();
        assert_eq!(c.items.len(), 80);
        for f in ReasoningFamily::ALL {
            assert_eq!(c.items_of(f).count(), 20);
            assert_eq!(c.manifest.counts[&f], 20);
        }
        let ids: BTreeSet<_> = c.items.iter().map(|i| &i.id).collect();
        assert_eq!(ids.len(), 80);
    }

    #[test]
    fn every_family_covers_every_verdict() {
        let c = generate_corpus(7, 20, &reference()).unwrap();
        for f in ReasoningFamily::ALL {
            for v in TARGETS {
                let n = c.items_of(f).filter(|i| i.gold_verdict == Some(v)).count();
                assert!(n >= 3, "{f} has {n} {v}");
            }
        }
    }

    #[test]
    fn worked_problems_are_pinned_verbatim() {
        let c = generate_corpus(3, 5, &reference()).unwrap();
        for p in fixtures::worked_problems() {
            let found = c.items.iter().find(|i| i.id == p.id).expect("pinned");
            assert_eq!(found.premise_text, p.premise_text);
            assert_eq!(found.gold_ir, p.gold_ir);
        }
    }

    #[test]
    fn single_signature_purity() {
        let m = reference();
        for seed in 0..5 {
            let c = generate_corpus(seed, 20, &m).unwrap();
            for item in &c.items {
                let sig = extract_signatures(item.gold_ir.as_ref().unwrap(), &m);
                let stress = is_stress_template(item.template.as_deref().unwrap());
                if stress {
                    assert!(sig.count() >= 2, "{}", item.id);
                } else if item.id != "problem-6" {
                    assert_eq!(sig.count(), 1, "{} {:?}", item.id, sig);
                    assert!(sig.has(item.gold_family.unwrap()), "{}", item.id);
                }
            }
        }
    }

    #[test]
    fn round_trip_through_jsonl() {
        let m = reference();
        let c = generate_corpus(11, 6, &m).unwrap();
        let back = parse_corpus(&c.to_jsonl(), &m).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn duplicate_id_is_a_schema_error() {
        let m = reference();
        let c = generate_corpus(2, 3, &m).unwrap();
        let mut text = c.to_jsonl();
        let dup = text.lines().nth(1).unwrap().to_string();
        text.push_str(&dup);
        text.push('\n');
        match parse_corpus(&text, &m) {
            Err(LoadError::Schema(e)) => assert!(e.message.contains("duplicate id")),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_drug_is_a_template_mismatch() {
        let mut doc = reference().to_document();
        doc.drugs.retain(|d| d.name != "etoposide");
        let m = ClinicalModel::from_document(doc).unwrap();
        assert!(matches!(
            generate_corpus(1, 4, &m),
            Err(GenerateError::TemplateKbMismatch { .. })
        ));
    }

    #[test]
    fn stress_slots_scale_with_size() {
        let c = generate_corpus(5, 60, &reference()).unwrap();
        let stress = |f| c.items_of(f).filter(|i| is_stress_template(i.template.as_deref().unwrap())).count();
        assert_eq!(stress(ReasoningFamily::CausalAttribution), 6);
        assert_eq!(stress(ReasoningFamily::RiskStateAbstraction), 6);
        assert_eq!(stress(ReasoningFamily::EpistemicVerification), 0);
    }

    #[test]
    fn reweighted_harms_drift_risk_items() {
        // An older model that barely separates grades: rankings follow frequency.
        let mut doc = reference().to_document();
        doc.harm_weights = Some(vec![1.0, 1.01, 1.02, 1.03, 1.04]);
        let old = ClinicalModel::from_document(doc).unwrap();
        let mut drifted = 0;
        for seed in 0..5 {
            let c = generate_corpus(seed, 20, &old).unwrap();
            match parse_corpus(&c.to_jsonl(), &reference()) {
                Ok(_) => {}
                Err(LoadError::GoldDrift(d)) => {
                    for x in &d.drifted {
                        let item = c.items.iter().find(|i| i.id == x.id).unwrap();
                        assert_eq!(item.gold_family, Some(ReasoningFamily::RiskStateAbstraction));
                        drifted += 1;
                    }
                }
                Err(other) => panic!("{other:?}"),
            }
        }
        assert!(drifted > 0);
    }
}
