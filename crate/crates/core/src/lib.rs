//! Clinical natural-language inference by reasoning-family routing: a
//! planner picks one of four inferential schemas, a family solver decides
//! the verdict over a structured premise, and a verifier audits the trace.

pub mod fixtures;
pub mod harness;
pub mod ir;
pub mod kb;
pub mod pipeline;
pub mod planner;
pub mod solvers;
pub mod audit;
pub mod corpus;
pub mod backend;
pub mod types;

pub use ir::StructuredPremise;
pub use kb::ClinicalModel;
pub use types::{NliItem, ReasoningFamily, ReasoningTrace, Verdict};
