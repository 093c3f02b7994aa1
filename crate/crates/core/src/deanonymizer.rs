//! Fills the class tokens of a predicted logical form with concrete entity
//! text, asking the user through a [`SlotResolver`] whenever the binding is
//! not unique.

use std::collections::{HashMap, VecDeque};

use thiserror::Error;

use crate::anonymizer::AnonymizedCommand;
use crate::logic::{class_token, LogicalForm, TokenKind};
use crate::ontology::{Ontology, OntologyError};

/// A question about one class-token slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotQuery {
    pub class: String,
    pub candidates: Vec<String>,
    pub prompt: String,
    /// Index of the class token within the printed logical form.
    pub slot_path: usize,
}

impl SlotQuery {
    pub fn new(class: &str, candidates: Vec<String>, slot_path: usize) -> SlotQuery {
        let mut prompt = format!("Which {} did you mean?", class_token(class));
        for (i, c) in candidates.iter().enumerate() {
            prompt.push_str(&format!(" [{}] {}", i + 1, c));
        }
        if candidates.is_empty() {
            prompt.push_str(" (type a value):");
        } else {
            prompt.push_str(" (or type a new value):");
        }
        SlotQuery {
            class: class.to_string(),
            candidates,
            prompt,
            slot_path,
        }
    }
}

/// Answers slot queries. `None` means the user declined.
pub trait SlotResolver {
    fn resolve(&mut self, query: &SlotQuery) -> Option<String>;
}

impl<F: FnMut(&SlotQuery) -> Option<String>> SlotResolver for F {
    fn resolve(&mut self, query: &SlotQuery) -> Option<String> {
        self(query)
    }
}

/// Answers from a fixed queue and records every query it was asked.
#[derive(Debug, Clone, Default)]
pub struct ScriptedResolver {
    answers: VecDeque<String>,
    pub asked: Vec<SlotQuery>,
}

impl ScriptedResolver {
    pub fn new<S: Into<String>>(answers: impl IntoIterator<Item = S>) -> ScriptedResolver {
        ScriptedResolver {
            answers: answers.into_iter().map(Into::into).collect(),
            asked: Vec::new(),
        }
    }
}

impl SlotResolver for ScriptedResolver {
    fn resolve(&mut self, query: &SlotQuery) -> Option<String> {
        self.asked.push(query.clone());
        self.answers.pop_front()
    }
}

/// Always picks the first candidate; declines when there is none.
#[derive(Debug, Clone, Copy, Default)]
pub struct FirstCandidate;

impl SlotResolver for FirstCandidate {
    fn resolve(&mut self, query: &SlotQuery) -> Option<String> {
        query.candidates.first().cloned()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DeanonymizeError {
    #[error("resolver declined to fill {class} slot at token {slot_path}")]
    ResolverAborted { class: String, slot_path: usize },
    #[error(transparent)]
    Ontology(#[from] OntologyError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Deanonymized {
    pub lf: LogicalForm,
    pub ontology: Ontology,
    /// Number of slot queries issued.
    pub queries: usize,
}

/// Replaces every class token in `lf` with a string literal.
///
/// A class whose token occurs exactly once in the form and whose span occurs
/// exactly once in the replacement map is bound silently. Every other slot
/// is put to the resolver, with the map's spans of that class as
/// candidates. Answers absent from the ontology are added to it.
pub fn deanonymize_lf(
    lf: &LogicalForm,
    ac: &AnonymizedCommand,
    resolver: &mut dyn SlotResolver,
    ont: &Ontology,
) -> Result<Deanonymized, DeanonymizeError> {
    let slots: Vec<(usize, String)> = lf
        .print_tagged()
        .into_iter()
        .enumerate()
        .filter(|(_, (kind, _))| *kind == TokenKind::Class)
        .map(|(i, _)| i)
        .zip(lf.class_tokens().into_iter().map(str::to_string))
        .collect();

    let mut lf_counts: HashMap<&str, usize> = HashMap::new();
    for (_, class) in &slots {
        *lf_counts.entry(class.as_str()).or_default() += 1;
    }
    for r in &ac.replacements {
        if !lf_counts.contains_key(r.class.as_str()) {
            log::warn!(
                "replacement `{}` ({}) has no slot in the predicted form",
                r.span.join(" "),
                class_token(&r.class)
            );
        }
    }

    let mut fills = Vec::with_capacity(slots.len());
    let mut ontology = ont.clone();
    let mut queries = 0;
    for (slot_path, class) in &slots {
        let spans: Vec<String> = ac.spans_for(class).into_iter().map(|s| s.join(" ")).collect();
        let value = if lf_counts[class.as_str()] == 1 && spans.len() == 1 {
            spans[0].clone()
        } else {
            queries += 1;
            let query = SlotQuery::new(class, spans, *slot_path);
            let answer = resolver
                .resolve(&query)
                .map(|a| a.split_whitespace().collect::<Vec<_>>().join(" ").to_lowercase())
                .filter(|a| !a.is_empty())
                .ok_or_else(|| DeanonymizeError::ResolverAborted {
                    class: class.clone(),
                    slot_path: *slot_path,
                })?;
            if ontology.has_class(class) && !ontology.contains(class, &answer) {
                ontology = ontology.add_entity(class, &answer)?;
            }
            answer
        };
        fills.push(value);
    }

    let mut next = fills.into_iter();
    let filled = lf.map_class_tokens(&mut |_| LogicalForm::StringLit(next.next().expect("one fill per slot")));
    Ok(Deanonymized {
        lf: filled,
        ontology,
        queries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::anonymizer::anonymize;
    use crate::bundled;
    use crate::logic::parse_lf_str;
    use crate::text::tokenize_command;

    fn lf(text: &str) -> LogicalForm {
        parse_lf_str(text, &bundled::registry()).unwrap()
    }

    #[test]
    fn unique_classes_fill_without_dialogue() {
        let ont = bundled::ontology();
        let ac = anonymize(&tokenize_command("bring me a red apple from the kitchen"), &ont);
        let form = lf("( bring ( λ $1 e ( is_a $1 \"<object>\" ) ( at $1 \"<location>\" ) ) )");
        let mut resolver = ScriptedResolver::default();
        let out = deanonymize_lf(&form, &ac, &mut resolver, &ont).unwrap();
        assert!(resolver.asked.is_empty());
        assert_eq!(out.queries, 0);
        assert_eq!(
            out.lf.to_string(),
            "( bring ( λ $1 e ( is_a $1 \" apple \" ) ( at $1 \" kitchen \" ) ) )"
        );
        assert_eq!(out.ontology.version(), ont.version());
    }

    #[test]
    fn repeated_class_asks_per_slot() {
        let ont = bundled::ontology();
        let ac = anonymize(
            &tokenize_command("move the apple from the kitchen counter to the dining table"),
            &ont,
        );
        let form = lf("( guide ( λ $1 e ( is_a $1 \"<object>\" ) ( at $1 \"<location>\" ) ) \"<location>\" )");
        let mut resolver = ScriptedResolver::new(["kitchen counter", "dining table"]);
        let out = deanonymize_lf(&form, &ac, &mut resolver, &ont).unwrap();
        assert_eq!(resolver.asked.len(), 2);
        for q in &resolver.asked {
            assert_eq!(q.class, "location");
            assert_eq!(q.candidates, vec!["kitchen counter", "dining table"]);
        }
        assert_eq!(
            resolver.asked[0].prompt,
            "Which <location> did you mean? [1] kitchen counter [2] dining table (or type a new value):"
        );
        assert!(out.lf.class_tokens().is_empty());
        assert_eq!(out.lf.string_literals(), vec!["apple", "kitchen counter", "dining table"]);
    }

    #[test]
    fn failed_anonymization_asks_free_text_and_learns() {
        let ont = bundled::ontology();
        let ac = anonymize(&tokenize_command("follow the guy in the red shirt"), &ont);
        assert!(ac.is_unanonymized());
        let form = lf("( follow ( λ $1 e ( person $1 ) ( name $1 \"<name>\" ) ) )");
        let mut resolver = ScriptedResolver::new(["Bill"]);
        let ont = Ontology::parse("#class name\nbob\n").unwrap();
        let out = deanonymize_lf(&form, &ac, &mut resolver, &ont).unwrap();
        assert_eq!(resolver.asked.len(), 1);
        assert!(resolver.asked[0].candidates.is_empty());
        assert_eq!(out.lf.string_literals(), vec!["bill"]);
        assert_eq!(out.ontology.lookup_span(&["bill"]), Some("name"));
        assert_eq!(out.ontology.version(), ont.version() + 1);
    }

    #[test]
    fn known_answer_does_not_bump_version() {
        let ont = bundled::ontology();
        let ac = AnonymizedCommand::default();
        let form = lf("( go \"<room>\" )");
        let mut resolver = ScriptedResolver::new(["kitchen"]);
        let out = deanonymize_lf(&form, &ac, &mut resolver, &ont).unwrap();
        assert_eq!(out.ontology.version(), ont.version());
    }

    #[test]
    fn declined_query_aborts() {
        let ont = bundled::ontology();
        let ac = AnonymizedCommand::default();
        let form = lf("( go \"<room>\" )");
        let mut resolver = ScriptedResolver::default();
        let err = deanonymize_lf(&form, &ac, &mut resolver, &ont).unwrap_err();
        assert_eq!(
            err,
            DeanonymizeError::ResolverAborted {
                class: "room".into(),
                slot_path: 3
            }
        );
    }

    #[test]
    fn map_entries_without_slots_are_ignored() {
        let ont = bundled::ontology();
        let ac = anonymize(&tokenize_command("go to the kitchen with the apple"), &ont);
        let form = lf("( go \"<location>\" )");
        let out = deanonymize_lf(&form, &ac, &mut FirstCandidate, &ont).unwrap();
        assert_eq!(out.lf.to_string(), "( go \" kitchen \" )");
        assert_eq!(out.queries, 0);
    }
}
