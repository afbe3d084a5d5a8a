//! Family-specific decision procedures. Each maps a structured premise and
//! the clinical model to a verdict plus a schema-conformant trace.

mod causal;
mod compositional;
mod epistemic;
mod risk;

pub use causal::{decide_causal_claim, solve_causal, EvidenceFlags};
pub use compositional::solve_compositional;
pub use epistemic::{maximal_consistent_set, solve_epistemic, Discard, McsResult};
pub use risk::{expected_harm, harms_tied, solve_risk, HarmRanking, ScoredEvent, HARM_TIE_TOLERANCE};

use crate::ir::StructuredPremise;
use crate::kb::{ClinicalModel, GradeOutOfRange, KbMiss};
use crate::types::{ReasoningFamily, ReasoningTrace, TraceStep, Verdict};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SolveError {
    #[error(transparent)]
    KbMiss(#[from] KbMiss),
    #[error(transparent)]
    GradeOutOfRange(#[from] GradeOutOfRange),
}

pub type Solved = (Verdict, ReasoningTrace);

/// Anything that can play the solver role in the pipeline.
pub trait Solver: Send + Sync {
    fn solve(
        &self,
        family: ReasoningFamily,
        ir: &StructuredPremise,
        model: &ClinicalModel,
    ) -> Result<Solved, SolveError>;
}

/// The deterministic procedures in this module.
#[derive(Debug, Clone, Copy, Default)]
pub struct FormalSolver;

impl Solver for FormalSolver {
    fn solve(
        &self,
        family: ReasoningFamily,
        ir: &StructuredPremise,
        model: &ClinicalModel,
    ) -> Result<Solved, SolveError> {
        solve(family, ir, model)
    }
}

pub const MISSING_STRUCTURE: &str = "MissingStructure";

/// Runs `family`'s procedure on `ir`. When the IR belongs to another family
/// the procedure has nothing to work with: the trace walks the family's
/// schema, notes the missing structure, and the verdict is Neutral.
pub fn solve(
    family: ReasoningFamily,
    ir: &StructuredPremise,
    model: &ClinicalModel,
) -> Result<Solved, SolveError> {
    match (family, ir) {
        (ReasoningFamily::CausalAttribution, StructuredPremise::Causal(c)) => {
            Ok(solve_causal(c, model))
        }
        (ReasoningFamily::CompositionalGrounding, StructuredPremise::Compositional(c)) => {
            solve_compositional(c, model)
        }
        (ReasoningFamily::EpistemicVerification, StructuredPremise::Epistemic(e)) => {
            Ok(solve_epistemic(e, model))
        }
        (ReasoningFamily::RiskStateAbstraction, StructuredPremise::Risk(r)) => solve_risk(r, model),
        _ => Ok(mismatch(family, ir)),
    }
}

fn mismatch(family: ReasoningFamily, ir: &StructuredPremise) -> Solved {
    let steps = family
        .schema()
        .iter()
        .map(|&kind| {
            TraceStep::new(
                kind,
                Vec::new(),
                format!(
                    "{MISSING_STRUCTURE}: premise is structured as {}, not {}",
                    ir.family(),
                    family
                ),
            )
        })
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

pub(crate) fn trace(family: ReasoningFamily, steps: Vec<TraceStep>, verdict: Verdict) -> Solved {
    (
        verdict,
        ReasoningTrace {
            family,
            steps,
            proposed_verdict: verdict,
        },
    )
}
