//! Shallow synchronous context-free grammar.
//!
//! Some productions carry a semantic template: a logical form with
//! `{$nt}` placeholders naming nonterminals of the production's right-hand
//! side. Expanding the grammar produces commands and, through the single
//! templated production on each derivation path, their logical forms.
//!
//! File format:
//!
//! ```text
//! // comment
//! #entity $object object
//! #category 1
//! $main = $bring | please $bring
//! $bring = $vbbring me the $object : ( bring ( λ $1 e ( is_a $1 "{$object}" ) ) )
//! $vbbring = bring | fetch
//! ```
//!
//! The first rule after a `#category` header is that category's start
//! symbol. A line may repeat a left-hand side to add alternatives; a
//! template after `:` applies to every alternative on that line. The k-th
//! `{$nt}` in a template binds to the k-th `$nt` of the right-hand side.

mod earley;
mod expand;

use std::collections::HashMap;
use std::fmt;

use indexmap::IndexMap;
use thiserror::Error;

use crate::logic::{parse_lf, tokenize_lf, LfError, LfTokenSeq, LogicalForm, PredicateRegistry};

pub use earley::chart_parse;
pub use expand::{enumerate_anonymized, sample_pair, sample_pair_with_rng, CategoryStats, Enumeration};

/// Derivations deeper than this are treated as non-terminating.
pub const MAX_DEPTH: usize = 32;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Symbol {
    Terminal(String),
    Nonterminal(String),
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Symbol::Terminal(t) => f.write_str(t),
            Symbol::Nonterminal(n) => write!(f, "${n}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum TemplatePart {
    Token(String),
    /// Index into the production's right-hand side.
    Slot(usize),
}

/// Semantic template with placeholders resolved to right-hand-side
/// positions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Template {
    pub source: String,
    parts: Vec<TemplatePart>,
}

impl Template {
    /// Fills each slot with the words its right-hand-side symbol yielded
    /// and parses the result.
    pub fn instantiate(
        &self,
        yields: &[Vec<String>],
        registry: &PredicateRegistry,
    ) -> Result<LogicalForm, LfError> {
        let mut tokens = Vec::new();
        for part in &self.parts {
            match part {
                TemplatePart::Token(t) => tokens.push(t.clone()),
                TemplatePart::Slot(i) => tokens.extend(yields[*i].iter().cloned()),
            }
        }
        parse_lf(&LfTokenSeq(tokens), registry)
    }

    /// Right-hand-side positions referenced by placeholders.
    pub fn slots(&self) -> impl Iterator<Item = usize> + '_ {
        self.parts.iter().filter_map(|p| match p {
            TemplatePart::Slot(i) => Some(*i),
            TemplatePart::Token(_) => None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Production {
    pub lhs: String,
    pub rhs: Vec<Symbol>,
    pub template: Option<Template>,
    pub category: u8,
    pub line: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Kind {
    Surface,
    Semantic,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GrammarError {
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    #[error("line {line}: unknown nonterminal ${name}")]
    UnknownNonterminal { line: usize, name: String },
    #[error("line {line}: placeholder {{${name}}} has no matching ${name} on the right-hand side")]
    PlaceholderNotInRhs { line: usize, name: String },
    #[error("line {line}: ${name} is not a surface nonterminal and cannot appear under a template")]
    DeepTemplate { line: usize, name: String },
    #[error("line {line}: more than one semantic child in an untemplated production")]
    MultipleSemanticChildren { line: usize },
    #[error("${name} mixes templated and template-free derivations")]
    MixedSemantics { name: String },
    #[error("line {line}: malformed template: {source}")]
    BadTemplate { line: usize, source: LfError },
    #[error("derivation from ${nonterminal} exceeds depth {MAX_DEPTH}")]
    Nonterminating { nonterminal: String },
    #[error("ontology has no entities for class `{0}`")]
    EmptyOntologyClass(String),
    #[error("grammar declares no categories")]
    NoCategories,
}

#[derive(Debug, Clone)]
pub struct SynchronousGrammar {
    productions: Vec<Production>,
    by_lhs: IndexMap<String, Vec<usize>>,
    starts: Vec<(u8, String)>,
    entities: IndexMap<String, String>,
    kinds: HashMap<String, Kind>,
    registry: PredicateRegistry,
    chart: earley::ChartGrammar,
}

fn parse_nonterminal(word: &str) -> Option<&str> {
    let name = word.strip_prefix('$')?;
    (!name.is_empty() && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '_')).then_some(name)
}

fn syntax(line: usize, message: impl Into<String>) -> GrammarError {
    GrammarError::Syntax {
        line,
        message: message.into(),
    }
}

/// Parses and validates a grammar file.
pub fn load_grammar(text: &str, registry: &PredicateRegistry) -> Result<SynchronousGrammar, GrammarError> {
    let mut productions: Vec<Production> = Vec::new();
    let mut starts: Vec<(u8, String)> = Vec::new();
    let mut entities: IndexMap<String, String> = IndexMap::new();
    let mut entity_lines: HashMap<String, usize> = HashMap::new();
    let mut category: Option<u8> = None;
    let mut need_start = false;
    // (line, template source, tokens) kept for placeholder resolution
    let mut raw_templates: Vec<Option<(String, Vec<String>)>> = Vec::new();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() || trimmed.starts_with("//") {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#category") {
            let n: u8 = rest
                .trim()
                .parse()
                .map_err(|_| syntax(line, "expected `#category <number>`"))?;
            if starts.iter().any(|(c, _)| *c == n) {
                return Err(syntax(line, format!("category {n} declared twice")));
            }
            category = Some(n);
            need_start = true;
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#entity") {
            let fields: Vec<&str> = rest.split_whitespace().collect();
            let [nt, class] = fields.as_slice() else {
                return Err(syntax(line, "expected `#entity $nonterminal class`"));
            };
            let nt = parse_nonterminal(nt).ok_or_else(|| syntax(line, "bad nonterminal name"))?;
            entities.insert(nt.to_string(), class.to_string());
            entity_lines.insert(nt.to_string(), line);
            continue;
        }
        if trimmed.starts_with('#') {
            return Err(syntax(line, "unknown directive"));
        }

        let Some(cat) = category else {
            return Err(syntax(line, "rule before any `#category` header"));
        };
        let (lhs_text, body) = trimmed
            .split_once('=')
            .ok_or_else(|| syntax(line, "expected `$nonterminal = ...`"))?;
        let lhs = parse_nonterminal(lhs_text.trim())
            .ok_or_else(|| syntax(line, "left-hand side must be a single $nonterminal"))?
            .to_string();
        let (alts_text, template_text) = match body.split_once(':') {
            Some((a, t)) => (a, Some(t.trim())),
            None => (body, None),
        };
        if template_text == Some("") {
            return Err(syntax(line, "empty template"));
        }
        if need_start {
            starts.push((cat, lhs.clone()));
            need_start = false;
        }
        for alt in alts_text.split('|') {
            let words: Vec<&str> = alt.split_whitespace().collect();
            if words.is_empty() {
                return Err(syntax(line, "empty alternative"));
            }
            let mut rhs = Vec::with_capacity(words.len());
            for w in words {
                if w.starts_with('$') {
                    let nt = parse_nonterminal(w).ok_or_else(|| syntax(line, format!("bad nonterminal `{w}`")))?;
                    rhs.push(Symbol::Nonterminal(nt.to_string()));
                } else {
                    rhs.push(Symbol::Terminal(w.to_lowercase()));
                }
            }
            productions.push(Production {
                lhs: lhs.clone(),
                rhs,
                template: None,
                category: cat,
                line,
            });
            raw_templates.push(template_text.map(|t| (t.to_string(), tokenize_lf(t))));
        }
    }

    if starts.is_empty() {
        return Err(GrammarError::NoCategories);
    }

    let mut by_lhs: IndexMap<String, Vec<usize>> = IndexMap::new();
    for (idx, p) in productions.iter().enumerate() {
        if entities.contains_key(&p.lhs) {
            return Err(syntax(p.line, format!("${} is an entity nonterminal and cannot have rules", p.lhs)));
        }
        by_lhs.entry(p.lhs.clone()).or_default().push(idx);
    }
    for p in &productions {
        for s in &p.rhs {
            if let Symbol::Nonterminal(n) = s {
                if !by_lhs.contains_key(n) && !entities.contains_key(n) {
                    return Err(GrammarError::UnknownNonterminal {
                        line: p.line,
                        name: n.clone(),
                    });
                }
            }
        }
    }

    // Resolve placeholders.
    for (p, raw) in productions.iter_mut().zip(raw_templates) {
        let Some((source, tokens)) = raw else { continue };
        let mut seen: HashMap<String, usize> = HashMap::new();
        let mut parts = Vec::with_capacity(tokens.len());
        for tok in tokens {
            let inner = tok.strip_prefix('{').and_then(|t| t.strip_suffix('}'));
            match inner {
                Some(inner) => {
                    let name = parse_nonterminal(inner)
                        .ok_or_else(|| syntax(p.line, format!("bad placeholder `{tok}`")))?;
                    let k = seen.entry(name.to_string()).or_insert(0);
                    let pos = p
                        .rhs
                        .iter()
                        .enumerate()
                        .filter(|(_, s)| matches!(s, Symbol::Nonterminal(n) if n == name))
                        .map(|(i, _)| i)
                        .nth(*k)
                        .ok_or_else(|| GrammarError::PlaceholderNotInRhs {
                            line: p.line,
                            name: name.to_string(),
                        })?;
                    *k += 1;
                    parts.push(TemplatePart::Slot(pos));
                }
                None => parts.push(TemplatePart::Token(tok)),
            }
        }
        p.template = Some(Template { source, parts });
    }

    let mut grammar = SynchronousGrammar {
        productions,
        by_lhs,
        starts,
        entities,
        kinds: HashMap::new(),
        registry: registry.clone(),
        chart: earley::ChartGrammar::default(),
    };
    grammar.classify()?;
    grammar.check_templates()?;
    grammar.chart = earley::ChartGrammar::build(&grammar);
    Ok(grammar)
}

impl SynchronousGrammar {
    /// Assigns Surface/Semantic to every nonterminal and checks that each
    /// derivation passes through at most one template.
    fn classify(&mut self) -> Result<(), GrammarError> {
        let mut kinds: HashMap<String, Kind> = self.entities.keys().map(|k| (k.clone(), Kind::Surface)).collect();

        let prod_kind = |p: &Production, kinds: &HashMap<String, Kind>| -> Result<Option<Kind>, GrammarError> {
            let mut semantic_children = 0;
            for s in &p.rhs {
                if let Symbol::Nonterminal(n) = s {
                    match kinds.get(n) {
                        None => return Ok(None),
                        Some(Kind::Semantic) => semantic_children += 1,
                        Some(Kind::Surface) => {}
                    }
                }
            }
            match (&p.template, semantic_children) {
                (Some(_), 0) => Ok(Some(Kind::Semantic)),
                (Some(_), _) => {
                    let name = p
                        .rhs
                        .iter()
                        .find_map(|s| match s {
                            Symbol::Nonterminal(n) if kinds.get(n) == Some(&Kind::Semantic) => Some(n.clone()),
                            _ => None,
                        })
                        .expect("semantic child exists");
                    Err(GrammarError::DeepTemplate { line: p.line, name })
                }
                (None, 0) => Ok(Some(Kind::Surface)),
                (None, 1) => Ok(Some(Kind::Semantic)),
                (None, _) => Err(GrammarError::MultipleSemanticChildren { line: p.line }),
            }
        };

        let resolve = |kinds: &mut HashMap<String, Kind>, optimistic: bool| -> Result<bool, GrammarError> {
            let mut changed = false;
            for (nt, prods) in &self.by_lhs {
                if kinds.contains_key(nt) {
                    continue;
                }
                let mut known = Vec::new();
                let mut pending = false;
                for &i in prods {
                    match prod_kind(&self.productions[i], kinds)? {
                        Some(k) => known.push(k),
                        None => pending = true,
                    }
                }
                if pending && !optimistic {
                    continue;
                }
                if pending && known.is_empty() {
                    continue;
                }
                let kind = if known.contains(&Kind::Semantic) {
                    Kind::Semantic
                } else {
                    Kind::Surface
                };
                kinds.insert(nt.clone(), kind);
                changed = true;
                if optimistic {
                    return Ok(true);
                }
            }
            Ok(changed)
        };

        loop {
            while resolve(&mut kinds, false)? {}
            if kinds.len() == self.by_lhs.len() + self.entities.len() {
                break;
            }
            if !resolve(&mut kinds, true)? {
                // Nonterminals that only derive each other have no finite
                // expansion. Settle one by its own templates and go on;
                // enumeration reports the non-termination later.
                let (nt, prods) = self
                    .by_lhs
                    .iter()
                    .find(|(nt, _)| !kinds.contains_key(*nt))
                    .expect("some nonterminal is unresolved");
                let templated = prods.iter().any(|&i| self.productions[i].template.is_some());
                kinds.insert(nt.clone(), if templated { Kind::Semantic } else { Kind::Surface });
            }
        }

        // Every production must agree with its left-hand side.
        for (nt, prods) in &self.by_lhs {
            let want = kinds[nt];
            for &i in prods {
                let got = prod_kind(&self.productions[i], &kinds)?.expect("all kinds known");
                if got != want {
                    return Err(GrammarError::MixedSemantics { name: nt.clone() });
                }
            }
        }
        self.kinds = kinds;
        Ok(())
    }

    fn check_templates(&self) -> Result<(), GrammarError> {
        for p in &self.productions {
            let Some(t) = &p.template else { continue };
            for slot in t.slots() {
                if let Symbol::Nonterminal(n) = &p.rhs[slot] {
                    if self.kinds[n] != Kind::Surface {
                        return Err(GrammarError::DeepTemplate {
                            line: p.line,
                            name: n.clone(),
                        });
                    }
                }
            }
            // Instantiate with class-token stand-ins to validate structure.
            let yields: Vec<Vec<String>> = p.rhs.iter().map(|_| vec!["<slot>".to_string()]).collect();
            t.instantiate(&yields, &self.registry)
                .map_err(|source| GrammarError::BadTemplate { line: p.line, source })?;
        }
        Ok(())
    }

    pub fn productions(&self) -> &[Production] {
        &self.productions
    }

    /// Productions of `nt` in file order.
    pub fn alternatives(&self, nt: &str) -> &[usize] {
        self.by_lhs.get(nt).map_or(&[], Vec::as_slice)
    }

    /// `(category, start nonterminal)` in declaration order.
    pub fn starts(&self) -> &[(u8, String)] {
        &self.starts
    }

    pub fn categories(&self) -> Vec<u8> {
        self.starts.iter().map(|(c, _)| *c).collect()
    }

    /// Entity nonterminal → ontology class.
    pub fn entity_classes(&self) -> &IndexMap<String, String> {
        &self.entities
    }

    pub fn entity_class(&self, nt: &str) -> Option<&str> {
        self.entities.get(nt).map(String::as_str)
    }

    pub fn registry(&self) -> &PredicateRegistry {
        &self.registry
    }

    pub fn annotation_count(&self) -> usize {
        self.productions.iter().filter(|p| p.template.is_some()).count()
    }

    fn is_semantic(&self, nt: &str) -> bool {
        self.kinds.get(nt) == Some(&Kind::Semantic)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;

    fn load(text: &str) -> Result<SynchronousGrammar, GrammarError> {
        load_grammar(text, &bundled::registry())
    }

    const BRING: &str = "#entity $object object\n#category 1\n$bring = $vbbring me the $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n$vbbring = bring | fetch\n";

    #[test]
    fn accepts_annotation_example() {
        let g = load(BRING).unwrap();
        assert_eq!(g.annotation_count(), 1);
        assert_eq!(g.starts(), &[(1, "bring".to_string())]);
        assert_eq!(g.alternatives("vbbring").len(), 2);
    }

    #[test]
    fn placeholder_must_be_in_rhs() {
        let text = "#entity $object object\n#entity $room room\n#category 1\n$go = go to the $object : ( go \"{$room}\" )\n";
        assert_eq!(
            load(text).unwrap_err(),
            GrammarError::PlaceholderNotInRhs {
                line: 4,
                name: "room".into()
            }
        );
    }

    #[test]
    fn placeholder_under_semantic_nonterminal_is_deep() {
        let text = "#entity $object object\n#category 1\n\
            $top = do $inner : ( bring ( λ $1 e ( is_a $1 \"{$inner}\" ) ) )\n\
            $inner = get $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n";
        assert!(matches!(load(text).unwrap_err(), GrammarError::DeepTemplate { line: 3, .. }));
    }

    #[test]
    fn unknown_nonterminal() {
        let text = "#category 1\n$go = go to $nowhere : ( go \"x\" )\n";
        assert_eq!(
            load(text).unwrap_err(),
            GrammarError::UnknownNonterminal {
                line: 2,
                name: "nowhere".into()
            }
        );
    }

    #[test]
    fn syntax_errors_carry_line() {
        assert!(matches!(load("$a = b\n").unwrap_err(), GrammarError::Syntax { line: 1, .. }));
        assert!(matches!(
            load("#category 1\n$a = b | | c\n").unwrap_err(),
            GrammarError::Syntax { line: 2, .. }
        ));
        assert!(matches!(
            load("#category one\n").unwrap_err(),
            GrammarError::Syntax { line: 1, .. }
        ));
        assert_eq!(load("// nothing\n").unwrap_err(), GrammarError::NoCategories);
    }

    #[test]
    fn two_semantic_children_rejected() {
        let text = "#entity $object object\n#category 1\n$top = $a and $a\n\
            $a = get $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n";
        assert_eq!(
            load(text).unwrap_err(),
            GrammarError::MultipleSemanticChildren { line: 3 }
        );
    }

    #[test]
    fn mixed_semantics_rejected() {
        let text = "#entity $object object\n#category 1\n$top = $a | hello\n\
            $a = get $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n";
        assert_eq!(load(text).unwrap_err(), GrammarError::MixedSemantics { name: "top".into() });
    }

    #[test]
    fn malformed_template_rejected() {
        let text = "#entity $object object\n#category 1\n$a = get $object : ( teleport \"{$object}\" )\n";
        assert!(matches!(load(text).unwrap_err(), GrammarError::BadTemplate { line: 3, .. }));
    }

    #[test]
    fn bundled_grammar_has_three_categories() {
        let g = bundled::grammar();
        assert_eq!(g.categories(), vec![1, 2, 3]);
        assert!(g.annotation_count() > 20);
    }
}
