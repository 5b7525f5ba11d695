//! Constraint-based fault localization for single Python functions.
//!
//! The pipeline: anchor extraction and an executable light SSA form
//! ([`ssa`]), a typed constraint IR with schema validation and grounding
//! ([`ir`]), prompt construction and pluggable inference backends
//! ([`inference`]), source-level instrumentation ([`instrument`]), the
//! violation spectrum and suspiciousness scores ([`spectrum`]), counterfactual
//! verification ([`counterfactual`]), and a pytest-driven harness
//! ([`harness`]).

pub mod python;
pub mod ssa;
pub mod ir;
pub mod instrument;
pub mod records;
pub mod spectrum;
pub mod inference;
pub mod counterfactual;
pub mod harness;
