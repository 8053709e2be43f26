use std::path::PathBuf;

use crate::extsrc::CallLog;

/// Errors raised anywhere in the assessment pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("missing relation `{relation}` (expected {path})")]
    MissingRelation { relation: String, path: PathBuf },

    #[error("schema mismatch: {0}")]
    SchemaMismatch(String),

    #[error("{relation}: row {row}, column `{column}`: {message}")]
    ValueParse {
        relation: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("unsafe rule for `{predicate}`: variable `{variable}` is not bound by a positive atom or a constant equality")]
    SafetyViolation { predicate: String, variable: String },

    #[error("recursion detected: {}", cycle.join(" -> "))]
    RecursionDetected { cycle: Vec<String> },

    #[error("arity mismatch for `{predicate}`: expected {expected}, found {found}")]
    ArityMismatch {
        predicate: String,
        expected: usize,
        found: usize,
    },

    #[error("type error: {0}")]
    Type(String),

    #[error("built-in `{atom}` in a rule for `{predicate}` has an unbound variable")]
    UnboundBuiltin { predicate: String, atom: String },

    #[error("no view definition for `{0}`")]
    MissingViewDefinition(String),

    #[error("query is not a union of conjunctive queries over the source schema: {0}")]
    NonConjunctiveQuery(String),

    #[error("unknown predicate `{0}`")]
    UnknownPredicate(String),

    #[error("view for `{view}` cannot be inverted: variable `{variable}` of `{atom}` is neither exported nor fixed to a constant")]
    UninvertibleView {
        view: String,
        atom: String,
        variable: String,
    },

    #[error("no legal contextual instance exists: {0}")]
    NoLegalInstance(String),

    #[error("domain too large for bounded enumeration: {0}")]
    DomainTooLarge(String),

    #[error("binding violation: `{predicate}` requires position {position} bound")]
    BindingViolation { predicate: String, position: usize },

    #[error("external source `{0}` is already registered")]
    DuplicateSource(String),

    #[error("unknown external source `{0}`")]
    UnknownSource(String),

    #[error("external source `{source_name}` failed: {message}")]
    ResolverFailure {
        source_name: String,
        message: String,
        log: Box<CallLog>,
    },

    #[error("the instance under assessment is empty")]
    EmptyBase,

    #[error("quality instance is not contained in the instance under assessment (relation `{0}`)")]
    ContainmentViolation(String),

    #[error("invalid contextual system: {0}")]
    InvalidSystem(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
