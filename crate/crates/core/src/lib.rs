//! Command understanding for general-purpose service robots: λ-calculus
//! logical forms, a knowledge-base anonymizer and deanonymizer, a shallow
//! synchronous grammar for corpus generation, text metrics, corpus splits
//! and the two non-neural baselines.

pub mod anonymizer;
pub mod baselines;
pub mod bundled;
pub mod corpus;
pub mod deanonymizer;
pub mod grammar;
pub mod logic;
pub mod metrics;
pub mod ontology;
pub mod text;

pub use anonymizer::{anonymize, deanonymize_command, AnonymizedCommand, Replacement};
pub use logic::{exact_match, parse_lf, print_lf, LfTokenSeq, LogicalForm, PredicateRegistry};
pub use ontology::Ontology;
