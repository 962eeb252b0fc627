//! Problem definitions, hypothesis falsifiers and the oracle catalog.

mod assumptions;
mod catalog;
mod functions;
mod problem;

pub use assumptions::{check_assumption, AssumptionReport, SampleBox, Violation, CHECK_TOLERANCE};
pub use catalog::{catalog_lookup, catalog_names, catalog_problem, closed_form, ClosedFormValue};
pub use functions::{
    Modulus, ModulusReport, PathView, ScalarFunction, TerminalCondition, VectorFunction,
};
pub use problem::{build_problem, AuxField, Hypotheses, Hypothesis, Problem, ProblemSpec, TimeFunction};
