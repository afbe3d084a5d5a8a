//! One item through planner → solver → verifier → refiner.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::audit::{refine, verify, RefinementOutcome, VerifierReport};
use crate::backend::{Backend, BackendError};
use crate::ir::StructuredPremise;
use crate::kb::ClinicalModel;
use crate::planner::{extract_signatures, plan, RoutingDecision, RoutingSource};
use crate::solvers::{FormalSolver, SolveError, Solver};
use crate::types::{ItemError, NliItem, ReasoningFamily, ReasoningTrace, Verdict};

/// How the reasoning family is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "family")]
pub enum Condition {
    /// Routed by the planner (or the backend's classifier).
    Carenli,
    /// Gold family supplied; routing bypassed.
    OraclePlanner,
    /// Every item sent to one family.
    ForcedFamily(ReasoningFamily),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Input,
    Classify,
    Extract,
    Route,
    Solve,
    Baseline,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Input => "input",
            Stage::Classify => "classify",
            Stage::Extract => "extract",
            Stage::Route => "route",
            Stage::Solve => "solve",
            Stage::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PipelineErrorKind {
    #[error(transparent)]
    InvalidItem(#[from] ItemError),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error("item `{0}` has no gold family")]
    MissingGoldFamily(String),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{stage} stage: {kind}")]
pub struct PipelineError {
    pub stage: Stage,
    pub kind: PipelineErrorKind,
}

impl PipelineError {
    fn at(stage: Stage, kind: impl Into<PipelineErrorKind>) -> Self {
        Self {
            stage,
            kind: kind.into(),
        }
    }

    pub fn is_backend_exhaustion(&self) -> bool {
        matches!(&self.kind, PipelineErrorKind::Backend(e) if e.is_exhaustion())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineResult {
    pub item_id: String,
    pub routing: RoutingDecision,
    pub ir: StructuredPremise,
    pub initial_verdict: Verdict,
    pub trace: ReasoningTrace,
    pub verifier_report: VerifierReport,
    pub refinement: RefinementOutcome,
    pub final_verdict: Verdict,
}

pub fn run_pipeline(
    item: &NliItem,
    model: &ClinicalModel,
    condition: Condition,
    backend: &dyn Backend,
) -> Result<PipelineResult, PipelineError> {
    run_pipeline_with(item, model, condition, backend, &FormalSolver)
}

/// As [`run_pipeline`], with a caller-supplied solver.
pub fn run_pipeline_with(
    item: &NliItem,
    model: &ClinicalModel,
    condition: Condition,
    backend: &dyn Backend,
    solver: &dyn Solver,
) -> Result<PipelineResult, PipelineError> {
    if condition == Condition::OraclePlanner && item.gold_family.is_none() {
        return Err(PipelineError::at(
            Stage::Route,
            PipelineErrorKind::MissingGoldFamily(item.id.clone()),
        ));
    }
    item.validate().map_err(|e| PipelineError::at(Stage::Input, e))?;

    let extract = |hint: Option<ReasoningFamily>| backend.extract_ir(item, hint).map_err(|e| PipelineError::at(Stage::Extract, e));
    let (ir, routing) = match condition {
        Condition::Carenli if backend.is_mock() => {
            let ir = extract(None)?;
            let routing = plan(&ir, model);
            (ir, routing)
        }
        Condition::Carenli => {
            let family = backend
                .classify_family(item)
                .map_err(|e| PipelineError::at(Stage::Classify, e))?;
            let ir = extract(Some(family))?;
            let matched = extract_signatures(&ir, model);
            let routing = RoutingDecision {
                family,
                precedence_applied: matched.count() >= 2,
                matched,
                source: RoutingSource::Planner,
                defaulted: false,
            };
            (ir, routing)
        }
        Condition::OraclePlanner => {
            let family = item.gold_family.expect("checked above");
            let ir = extract(Some(family))?;
            let matched = extract_signatures(&ir, model);
            (ir, RoutingDecision::oracle(family, matched))
        }
        Condition::ForcedFamily(family) => {
            let ir = extract(Some(family))?;
            let matched = extract_signatures(&ir, model);
            (ir, RoutingDecision::forced(family, matched))
        }
    };

    let (initial_verdict, trace) = solver
        .solve(routing.family, &ir, model)
        .map_err(|e| PipelineError::at(Stage::Solve, e))?;
    let verifier_report = verify(&trace, routing.family, &ir, model);
    let refinement = refine(&trace, &verifier_report, &ir, model, solver);
    Ok(PipelineResult {
        item_id: item.id.clone(),
        routing,
        final_verdict: refinement.final_verdict,
        ir,
        initial_verdict,
        trace,
        verifier_report,
        refinement,
    })
}
