//! Context-based data quality assessment.
//!
//! An instance under assessment is mapped into a contextual schema, where
//! quality predicates and quality views define its ideal, clean version.
//! The crate computes those quality versions, certain quality answers to
//! conjunctive queries, and distance-based quality measures. Queries are
//! rewritten by view unfolding, open sources are handled through inverse
//! rules over a minimal legal contextual instance, and binding-restricted
//! external sources are reached through magic-sets rewriting.

pub mod context;
pub mod datalog;
pub mod error;
pub mod extsrc;
pub mod lci;
pub mod magic;
pub mod metrics;
pub mod relmodel;
pub mod unfold;

pub use error::{Error, Result};
