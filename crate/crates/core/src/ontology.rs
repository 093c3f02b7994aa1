//! The robot's knowledge base: entity surface forms grouped by class.
//!
//! An [`Ontology`] is an immutable snapshot. Mutations return a new snapshot
//! and leave the original untouched, so readers can keep using a snapshot
//! while a dialogue session produces updated ones.

use std::collections::HashMap;
use std::sync::Arc;

use indexmap::{IndexMap, IndexSet};
use thiserror::Error;

use crate::text::{join_tokens, tokenize_command};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum OntologyError {
    #[error("unknown class `{0}`")]
    UnknownClass(String),
    #[error("line {line}: entity listed before any `#class` header")]
    EntityBeforeHeader { line: usize },
    #[error("line {line}: malformed class header")]
    MalformedHeader { line: usize },
    #[error("empty surface form")]
    EmptySurface,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
struct Data {
    classes: IndexMap<String, IndexSet<String>>,
    /// Surface → classes in declaration order.
    index: HashMap<String, Vec<usize>>,
    max_span: usize,
    version: u64,
}

impl Data {
    fn insert(&mut self, class_idx: usize, surface: String) -> bool {
        let (_, members) = self.classes.get_index_mut(class_idx).expect("valid class index");
        if !members.insert(surface.clone()) {
            return false;
        }
        self.max_span = self.max_span.max(surface.split(' ').count());
        let classes = self.index.entry(surface).or_default();
        classes.push(class_idx);
        classes.sort_unstable();
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Ontology {
    data: Arc<Data>,
}

fn normalize_surface<S: AsRef<str>>(tokens: &[S]) -> String {
    let words: Vec<String> = tokens
        .iter()
        .flat_map(|t| t.as_ref().split_whitespace().map(str::to_lowercase).collect::<Vec<_>>())
        .collect();
    join_tokens(&words)
}

impl Ontology {
    pub fn new<S: AsRef<str>>(classes: &[S]) -> Ontology {
        let mut data = Data::default();
        for c in classes {
            data.classes.entry(c.as_ref().to_string()).or_default();
        }
        Ontology { data: Arc::new(data) }
    }

    /// Parses the plain-text format: `#class <name>` header lines, each
    /// followed by one entity per line. Blank lines and `//` comments are
    /// ignored. A surface may be listed under several classes.
    pub fn parse(text: &str) -> Result<Ontology, OntologyError> {
        let mut data = Data::default();
        let mut current: Option<usize> = None;
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with("//") {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix("#class") {
                let name = rest.trim();
                if name.is_empty() || name.contains(char::is_whitespace) || !rest.starts_with(char::is_whitespace) {
                    return Err(OntologyError::MalformedHeader { line });
                }
                let entry = data.classes.entry(name.to_string());
                current = Some(entry.index());
                entry.or_default();
                continue;
            }
            let class_idx = current.ok_or(OntologyError::EntityBeforeHeader { line })?;
            let surface = join_tokens(&tokenize_command(trimmed));
            if surface.is_empty() {
                continue;
            }
            data.insert(class_idx, surface);
        }
        Ok(Ontology { data: Arc::new(data) })
    }

    /// Writes the `#class` text format; `parse(to_text())` reproduces the
    /// same classes and entities.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (class, members) in &self.data.classes {
            out.push_str("#class ");
            out.push_str(class);
            out.push('\n');
            for m in members {
                out.push_str(m);
                out.push('\n');
            }
        }
        out
    }

    pub fn version(&self) -> u64 {
        self.data.version
    }

    pub fn classes(&self) -> impl Iterator<Item = &str> {
        self.data.classes.keys().map(String::as_str)
    }

    pub fn has_class(&self, class: &str) -> bool {
        self.data.classes.contains_key(class)
    }

    /// Entities of `class` in insertion order.
    pub fn entities(&self, class: &str) -> Option<impl Iterator<Item = &str>> {
        self.data.classes.get(class).map(|m| m.iter().map(String::as_str))
    }

    pub fn entity_count(&self, class: &str) -> usize {
        self.data.classes.get(class).map_or(0, IndexSet::len)
    }

    /// Longest entity, in tokens.
    pub fn max_span(&self) -> usize {
        self.data.max_span
    }

    /// Class of an exact case-insensitive entity match; the first declared
    /// class wins when a surface is listed under several.
    pub fn lookup_span<S: AsRef<str>>(&self, tokens: &[S]) -> Option<&str> {
        self.lookup_all(tokens).into_iter().next()
    }

    /// Every class listing the span, in declaration order.
    pub fn lookup_all<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<&str> {
        let key = normalize_surface(tokens);
        self.data.index.get(&key).map_or_else(Vec::new, |idxs| {
            idxs.iter()
                .map(|&i| self.data.classes.get_index(i).expect("indexed class").0.as_str())
                .collect()
        })
    }

    pub fn contains(&self, class: &str, surface: &str) -> bool {
        let key = normalize_surface(&[surface]);
        self.data.classes.get(class).is_some_and(|m| m.contains(&key))
    }

    /// Returns a snapshot with `surface` added to `class`. The version only
    /// advances when the entity was not already present.
    pub fn add_entity(&self, class: &str, surface: &str) -> Result<Ontology, OntologyError> {
        let class_idx = self
            .data
            .classes
            .get_index_of(class)
            .ok_or_else(|| OntologyError::UnknownClass(class.to_string()))?;
        let key = normalize_surface(&[surface]);
        if key.is_empty() {
            return Err(OntologyError::EmptySurface);
        }
        if self.data.classes[class_idx].contains(&key) {
            return Ok(self.clone());
        }
        let mut data = (*self.data).clone();
        data.insert(class_idx, key);
        data.version += 1;
        Ok(Ontology { data: Arc::new(data) })
    }
}
