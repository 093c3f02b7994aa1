//! Replaces ontology-known spans in a command with class tokens and keeps the
//! correspondence needed to undo the replacement.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::logic::{class_of_token, class_token};
use crate::ontology::Ontology;

/// One replaced span: `position` indexes the anonymized token sequence.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Replacement {
    pub class: String,
    pub span: Vec<String>,
    pub position: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AnonymizedCommand {
    pub tokens: Vec<String>,
    /// Sorted by strictly increasing position.
    pub replacements: Vec<Replacement>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AnonymizeError {
    #[error("replacement {index} points at position {position} which is not a matching class token")]
    InconsistentPositions { index: usize, position: usize },
}

impl AnonymizedCommand {
    /// True when nothing was replaced (anonymization failed).
    pub fn is_unanonymized(&self) -> bool {
        self.replacements.is_empty()
    }

    /// Spans replaced for `class`, in command order.
    pub fn spans_for(&self, class: &str) -> Vec<&[String]> {
        self.replacements
            .iter()
            .filter(|r| r.class == class)
            .map(|r| r.span.as_slice())
            .collect()
    }
}

/// Greedy longest-match, left-to-right replacement of ontology spans over
/// lowercase tokens. Tokens with no match pass through unchanged.
pub fn anonymize<S: AsRef<str>>(command: &[S], ont: &Ontology) -> AnonymizedCommand {
    let words: Vec<String> = command.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let max_span = ont.max_span();
    let mut out = AnonymizedCommand::default();
    let mut i = 0;
    while i < words.len() {
        let longest = (1..=max_span.min(words.len() - i)).rev().find_map(|len| {
            let span = &words[i..i + len];
            let classes = ont.lookup_all(span);
            let first = classes.first()?;
            if classes.len() > 1 {
                log::warn!(
                    "`{}` is listed under {:?}; using `{first}`",
                    span.join(" "),
                    classes
                );
            }
            Some((len, first.to_string()))
        });
        match longest {
            Some((len, class)) => {
                out.replacements.push(Replacement {
                    class: class.clone(),
                    span: words[i..i + len].to_vec(),
                    position: out.tokens.len(),
                });
                out.tokens.push(class_token(&class));
                i += len;
            }
            None => {
                out.tokens.push(words[i].clone());
                i += 1;
            }
        }
    }
    out
}

/// Restores the command by substituting each recorded span back at its
/// position.
pub fn deanonymize_command(ac: &AnonymizedCommand) -> Result<Vec<String>, AnonymizeError> {
    let mut out = Vec::with_capacity(ac.tokens.len());
    let mut next = 0;
    for (index, r) in ac.replacements.iter().enumerate() {
        let bad = AnonymizeError::InconsistentPositions {
            index,
            position: r.position,
        };
        if r.position < next || r.position >= ac.tokens.len() {
            return Err(bad);
        }
        if class_of_token(&ac.tokens[r.position]) != Some(r.class.as_str()) {
            return Err(bad);
        }
        out.extend_from_slice(&ac.tokens[next..r.position]);
        out.extend(r.span.iter().cloned());
        next = r.position + 1;
    }
    out.extend_from_slice(&ac.tokens[next..]);
    Ok(out)
}
