use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use thiserror::Error;

const BUNDLED: &str = include_str!("../../data/predicates.tsv");

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PredicateKind {
    Action,
    Descriptive,
}

impl fmt::Display for PredicateKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PredicateKind::Action => "action",
            PredicateKind::Descriptive => "descriptive",
        })
    }
}

impl FromStr for PredicateKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, ()> {
        match s {
            "action" => Ok(PredicateKind::Action),
            "descriptive" => Ok(PredicateKind::Descriptive),
            _ => Err(()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PredicateSig {
    pub arity: usize,
    pub kind: PredicateKind,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum RegistryError {
    #[error("line {line}: expected `name<TAB>arity<TAB>action|descriptive`")]
    Malformed { line: usize },
    #[error("line {line}: duplicate predicate `{name}`")]
    Duplicate { line: usize, name: String },
}

/// Predicate symbol → (arity, kind).
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct PredicateRegistry {
    entries: IndexMap<String, PredicateSig>,
}

impl PredicateRegistry {
    /// The registry shipped with the crate: 7 actions and 20 descriptive
    /// predicates.
    pub fn bundled() -> PredicateRegistry {
        PredicateRegistry::parse(BUNDLED).expect("bundled predicate registry is well formed")
    }

    /// Parses the TSV registry format. Blank lines and lines starting with
    /// `#` are skipped.
    pub fn parse(text: &str) -> Result<PredicateRegistry, RegistryError> {
        let mut entries = IndexMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let trimmed = raw.trim();
            if trimmed.is_empty() || trimmed.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = trimmed.split('\t').map(str::trim).collect();
            let [name, arity, kind] = fields.as_slice() else {
                return Err(RegistryError::Malformed { line });
            };
            let arity = arity.parse().map_err(|_| RegistryError::Malformed { line })?;
            let kind = kind.parse().map_err(|_| RegistryError::Malformed { line })?;
            if name.is_empty() {
                return Err(RegistryError::Malformed { line });
            }
            if entries.insert(name.to_string(), PredicateSig { arity, kind }).is_some() {
                return Err(RegistryError::Duplicate {
                    line,
                    name: name.to_string(),
                });
            }
        }
        Ok(PredicateRegistry { entries })
    }

    pub fn insert(&mut self, name: &str, arity: usize, kind: PredicateKind) {
        self.entries.insert(name.to_string(), PredicateSig { arity, kind });
    }

    pub fn get(&self, name: &str) -> Option<PredicateSig> {
        self.entries.get(name).copied()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, PredicateSig)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn count_kind(&self, kind: PredicateKind) -> usize {
        self.entries.values().filter(|s| s.kind == kind).count()
    }

    pub fn to_tsv(&self) -> String {
        self.entries
            .iter()
            .map(|(name, sig)| format!("{name}\t{}\t{}\n", sig.arity, sig.kind))
            .collect()
    }
}
