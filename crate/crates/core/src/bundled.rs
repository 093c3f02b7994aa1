//! Data shipped with the crate: predicate registry, ontology, mini-grammar,
//! a small paraphrase fixture and toy word vectors.

use crate::corpus::{CorpusPair, DataOrigin, Dataset};
use crate::grammar::{load_grammar, SynchronousGrammar};
use crate::logic::PredicateRegistry;
use crate::ontology::Ontology;

pub const PREDICATES: &str = include_str!("../data/predicates.tsv");
pub const ONTOLOGY: &str = include_str!("../data/ontology.txt");
pub const GRAMMAR: &str = include_str!("../data/grammar.txt");
/// Concrete crowd-style paraphrases of generated commands, JSON lines.
pub const PARAPHRASES: &str = include_str!("../data/paraphrases.jsonl");
/// 50 words, 10 dimensions, `word v1 .. v10` per line.
pub const VECTORS: &str = include_str!("../data/vectors.txt");

pub fn registry() -> PredicateRegistry {
    PredicateRegistry::bundled()
}

pub fn ontology() -> Ontology {
    Ontology::parse(ONTOLOGY).expect("bundled ontology parses")
}

pub fn grammar() -> SynchronousGrammar {
    load_grammar(GRAMMAR, &registry()).expect("bundled grammar loads")
}

/// The paraphrase fixture, concrete (not anonymized).
pub fn paraphrases() -> Vec<CorpusPair> {
    Dataset::from_jsonl(DataOrigin::Paraphrased, PARAPHRASES, &registry())
        .expect("bundled paraphrases parse")
        .pairs
}
