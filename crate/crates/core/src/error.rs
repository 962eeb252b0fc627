use alloc::boxed::Box;
use alloc::string::String;

use crate::model::Hypothesis;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("{module}: invalid {what}: {reason}")]
    Invalid {
        module: &'static str,
        what: &'static str,
        reason: String,
    },
    #[error("{module}: dimension mismatch in {context}: expected {expected}, got {actual}")]
    Dimension {
        module: &'static str,
        context: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("model: unknown catalog entry `{0}`")]
    UnknownCatalog(String),
    #[error("model: no closed form registered for `{0}`")]
    NoClosedForm(String),
    #[error("model: hypothesis {tag} needs {missing}")]
    MissingData {
        tag: Hypothesis,
        missing: &'static str,
    },
    #[error("regularize: envelope index {n} must exceed the growth constant {c}")]
    EnvelopeIndex { n: f64, c: f64 },
    #[error(
        "solver: implicit step did not converge at outer {outer}, inner {inner}, node {node} \
         (last update {residual:e})"
    )]
    NonConvergence {
        outer: usize,
        inner: usize,
        node: usize,
        residual: f64,
    },
    #[error("solver: non-finite {quantity} at outer {outer}, inner {inner}, node {node}")]
    NonFinite {
        quantity: &'static str,
        outer: usize,
        inner: usize,
        node: usize,
    },
    #[error("harness: solutions do not share one noise bundle and grid")]
    Provenance,
    #[error("schemes: rung {rung} failed: {source}")]
    Rung { rung: usize, source: Box<Error> },
}

impl Error {
    pub(crate) fn invalid(module: &'static str, what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            module,
            what,
            reason: reason.into(),
        }
    }
}
