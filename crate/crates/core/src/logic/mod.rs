//! λ-calculus logical forms: the AST, its token serialization and the
//! predicate registry used to arity-check parsed forms.
//!
//! The serialized form is the target language of the neural parser, so the
//! printer is canonical: one space between tokens, quotation marks as
//! standalone tokens around literals, and no explicit conjunction symbol
//! inside λ bodies.

mod parse;
mod registry;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{parse_lf, parse_lf_str, tokenize_lf, LfError};
pub use registry::{PredicateKind, PredicateRegistry, PredicateSig, RegistryError};

/// Canonical λ token.
pub const LAMBDA: &str = "λ";
/// Canonical quotation-mark token.
pub const QUOTE: &str = "\"";

/// A λ-bound variable, printed as `$N` with `N >= 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VarId(pub u32);

impl fmt::Display for VarId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "${}", self.0)
    }
}

impl VarId {
    /// Parses `$N`; returns `None` for anything else (including `$0`).
    pub fn parse(token: &str) -> Option<VarId> {
        let digits = token.strip_prefix('$')?;
        if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
            return None;
        }
        match digits.parse::<u32>() {
            Ok(n) if n > 0 => Some(VarId(n)),
            _ => None,
        }
    }
}

/// Type marker attached to a λ binder. Only entities are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TypeMarker {
    Entity,
}

impl TypeMarker {
    pub fn as_str(self) -> &'static str {
        match self {
            TypeMarker::Entity => "e",
        }
    }

    pub fn parse(token: &str) -> Option<TypeMarker> {
        match token {
            "e" => Some(TypeMarker::Entity),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum LogicalForm {
    Application {
        predicate: String,
        args: Vec<LogicalForm>,
    },
    /// `body` is an implicit conjunction of one or more forms.
    Lambda {
        var: VarId,
        marker: TypeMarker,
        body: Vec<LogicalForm>,
    },
    Variable(VarId),
    StringLit(String),
    ClassToken(String),
}

/// What a printed token is, used for structural statistics and for locating
/// class-token slots in the token sequence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TokenKind {
    Paren,
    Quote,
    Lambda,
    Variable,
    TypeMarker,
    Predicate,
    Word,
    Class,
}

impl TokenKind {
    /// Parentheses, quotation marks and type markers.
    pub fn is_structural(self) -> bool {
        matches!(self, TokenKind::Paren | TokenKind::Quote | TokenKind::TypeMarker)
    }
}

/// Canonical token sequence of a logical form.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct LfTokenSeq(pub Vec<String>);

impl LfTokenSeq {
    pub fn from_text(text: &str) -> LfTokenSeq {
        LfTokenSeq(tokenize_lf(text))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

impl fmt::Display for LfTokenSeq {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0.join(" "))
    }
}

/// Renders a class symbol as its token, e.g. `object` → `<object>`.
pub fn class_token(class: &str) -> String {
    format!("<{class}>")
}

/// Inverse of [`class_token`].
pub fn class_of_token(token: &str) -> Option<&str> {
    let inner = token.strip_prefix('<')?.strip_suffix('>')?;
    if inner.is_empty() || inner.contains(['<', '>', ' ']) {
        None
    } else {
        Some(inner)
    }
}

impl LogicalForm {
    pub fn app(predicate: &str, args: Vec<LogicalForm>) -> LogicalForm {
        LogicalForm::Application {
            predicate: predicate.to_string(),
            args,
        }
    }

    pub fn lambda(var: u32, body: Vec<LogicalForm>) -> LogicalForm {
        LogicalForm::Lambda {
            var: VarId(var),
            marker: TypeMarker::Entity,
            body,
        }
    }

    pub fn var(n: u32) -> LogicalForm {
        LogicalForm::Variable(VarId(n))
    }

    pub fn class(class: &str) -> LogicalForm {
        LogicalForm::ClassToken(class.to_string())
    }

    pub fn lit(text: &str) -> LogicalForm {
        LogicalForm::StringLit(text.to_string())
    }

    /// Canonical token sequence.
    pub fn print(&self) -> LfTokenSeq {
        LfTokenSeq(self.print_tagged().into_iter().map(|(_, t)| t).collect())
    }

    /// Canonical tokens paired with their kind.
    pub fn print_tagged(&self) -> Vec<(TokenKind, String)> {
        let mut out = Vec::new();
        self.emit(&mut out);
        out
    }

    fn emit(&self, out: &mut Vec<(TokenKind, String)>) {
        match self {
            LogicalForm::Application { predicate, args } => {
                out.push((TokenKind::Paren, "(".into()));
                out.push((TokenKind::Predicate, predicate.clone()));
                for arg in args {
                    arg.emit(out);
                }
                out.push((TokenKind::Paren, ")".into()));
            }
            LogicalForm::Lambda { var, marker, body } => {
                out.push((TokenKind::Paren, "(".into()));
                out.push((TokenKind::Lambda, LAMBDA.into()));
                out.push((TokenKind::Variable, var.to_string()));
                out.push((TokenKind::TypeMarker, marker.as_str().into()));
                for part in body {
                    part.emit(out);
                }
                out.push((TokenKind::Paren, ")".into()));
            }
            LogicalForm::Variable(v) => out.push((TokenKind::Variable, v.to_string())),
            LogicalForm::StringLit(text) => {
                out.push((TokenKind::Quote, QUOTE.into()));
                for word in text.split_whitespace() {
                    out.push((TokenKind::Word, word.to_string()));
                }
                out.push((TokenKind::Quote, QUOTE.into()));
            }
            LogicalForm::ClassToken(class) => {
                out.push((TokenKind::Quote, QUOTE.into()));
                out.push((TokenKind::Class, class_token(class)));
                out.push((TokenKind::Quote, QUOTE.into()));
            }
        }
    }

    /// Variables not bound by an enclosing λ.
    pub fn free_variables(&self) -> BTreeSet<VarId> {
        let mut free = BTreeSet::new();
        let mut bound = Vec::new();
        self.collect_free(&mut bound, &mut free);
        free
    }

    fn collect_free(&self, bound: &mut Vec<VarId>, free: &mut BTreeSet<VarId>) {
        match self {
            LogicalForm::Application { args, .. } => {
                for arg in args {
                    arg.collect_free(bound, free);
                }
            }
            LogicalForm::Lambda { var, body, .. } => {
                bound.push(*var);
                for part in body {
                    part.collect_free(bound, free);
                }
                bound.pop();
            }
            LogicalForm::Variable(v) => {
                if !bound.contains(v) {
                    free.insert(*v);
                }
            }
            LogicalForm::StringLit(_) | LogicalForm::ClassToken(_) => {}
        }
    }

    pub fn is_closed(&self) -> bool {
        self.free_variables().is_empty()
    }

    /// Class symbols of every class token, in print order.
    pub fn class_tokens(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |lf| {
            if let LogicalForm::ClassToken(c) = lf {
                out.push(c.as_str());
            }
        });
        out
    }

    /// String literals in print order.
    pub fn string_literals(&self) -> Vec<&str> {
        let mut out = Vec::new();
        self.visit(&mut |lf| {
            if let LogicalForm::StringLit(s) = lf {
                out.push(s.as_str());
            }
        });
        out
    }

    /// Pre-order traversal.
    pub fn visit<'a>(&'a self, f: &mut impl FnMut(&'a LogicalForm)) {
        f(self);
        match self {
            LogicalForm::Application { args, .. } => args.iter().for_each(|a| a.visit(f)),
            LogicalForm::Lambda { body, .. } => body.iter().for_each(|a| a.visit(f)),
            _ => {}
        }
    }

    /// Rebuilds the form with every class token replaced by `f(class)`,
    /// visiting class tokens in print order.
    pub fn map_class_tokens(&self, f: &mut impl FnMut(&str) -> LogicalForm) -> LogicalForm {
        match self {
            LogicalForm::Application { predicate, args } => LogicalForm::Application {
                predicate: predicate.clone(),
                args: args.iter().map(|a| a.map_class_tokens(f)).collect(),
            },
            LogicalForm::Lambda { var, marker, body } => LogicalForm::Lambda {
                var: *var,
                marker: *marker,
                body: body.iter().map(|a| a.map_class_tokens(f)).collect(),
            },
            LogicalForm::ClassToken(c) => f(c),
            other => other.clone(),
        }
    }

    /// Like [`map_class_tokens`](Self::map_class_tokens) but for string
    /// literals.
    pub fn map_string_literals(&self, f: &mut impl FnMut(&str) -> LogicalForm) -> LogicalForm {
        match self {
            LogicalForm::Application { predicate, args } => LogicalForm::Application {
                predicate: predicate.clone(),
                args: args.iter().map(|a| a.map_string_literals(f)).collect(),
            },
            LogicalForm::Lambda { var, marker, body } => LogicalForm::Lambda {
                var: *var,
                marker: *marker,
                body: body.iter().map(|a| a.map_string_literals(f)).collect(),
            },
            LogicalForm::StringLit(s) => f(s),
            other => other.clone(),
        }
    }

    /// Checks predicates, arities and variable binding against a registry.
    /// Error indices refer to the canonical token sequence.
    pub fn check_registry(&self, registry: &PredicateRegistry) -> Result<(), LfError> {
        parse_lf(&self.print(), registry).map(|_| ())
    }
}

impl fmt::Display for LogicalForm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.print().fmt(f)
    }
}

/// Canonical token sequence of `lf`.
pub fn print_lf(lf: &LogicalForm) -> LfTokenSeq {
    lf.print()
}

/// Exact-match accuracy criterion: identical canonical token sequences.
pub fn exact_match(a: &LogicalForm, b: &LogicalForm) -> bool {
    a.print() == b.print()
}

/// Free variables of `lf`.
pub fn free_variables(lf: &LogicalForm) -> BTreeSet<VarId> {
    lf.free_variables()
}

/// Number of structural tokens (parentheses, quotes, type markers) and total
/// token count over a collection of forms.
pub fn structural_token_counts<'a>(forms: impl IntoIterator<Item = &'a LogicalForm>) -> (usize, usize) {
    let mut structural = 0;
    let mut total = 0;
    for lf in forms {
        for (kind, _) in lf.print_tagged() {
            total += 1;
            if kind.is_structural() {
                structural += 1;
            }
        }
    }
    (structural, total)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reg() -> PredicateRegistry {
        PredicateRegistry::bundled()
    }

    fn parse(text: &str) -> Result<LogicalForm, LfError> {
        parse_lf_str(text, &reg())
    }

    #[test]
    fn prints_go_room() {
        let lf = LogicalForm::app("go", vec![LogicalForm::class("room")]);
        assert_eq!(lf.print().to_string(), "( go \" <room> \" )");
    }

    #[test]
    fn minimal_lambda_has_one_group() {
        let lf = LogicalForm::app(
            "follow",
            vec![LogicalForm::lambda(1, vec![LogicalForm::app("person", vec![LogicalForm::var(1)])])],
        );
        let text = lf.print().to_string();
        assert_eq!(text.matches("( λ $1 e").count(), 1);
        assert_eq!(text, "( follow ( λ $1 e ( person $1 ) ) )");
    }

    #[test]
    fn two_predicate_body_prints_in_stored_order() {
        let lf = LogicalForm::app(
            "guide",
            vec![
                LogicalForm::lambda(
                    1,
                    vec![
                        LogicalForm::app("person", vec![LogicalForm::var(1)]),
                        LogicalForm::app("name", vec![LogicalForm::var(1), LogicalForm::class("name")]),
                    ],
                ),
                LogicalForm::class("location"),
            ],
        );
        assert_eq!(
            lf.print().to_string(),
            "( guide ( λ $1 e ( person $1 ) ( name $1 \" <name> \" ) ) \" <location> \" )"
        );
    }

    #[test]
    fn exact_match_cases() {
        let a = parse("( go \" <room> \" )").unwrap();
        let b = parse("( go \" <location> \" )").unwrap();
        assert!(exact_match(&a, &a));
        assert!(!exact_match(&a, &b));

        let x = parse("( bring ( λ $1 e ( is_a $1 \" <object> \" ) ( at $1 \" <location> \" ) ) )").unwrap();
        let y = parse("( bring ( λ $1 e ( at $1 \" <location> \" ) ( is_a $1 \" <object> \" ) ) )").unwrap();
        // Same conjuncts in a different order: the printer preserves order.
        assert_ne!(x.print(), y.print());
        assert!(!exact_match(&x, &y));
    }

    #[test]
    fn free_variable_cases() {
        let closed = parse("( bring ( λ $1 e ( is_a $1 \" <object> \" ) ) )").unwrap();
        assert!(closed.free_variables().is_empty());

        let open = LogicalForm::app("is_a", vec![LogicalForm::var(1), LogicalForm::class("object")]);
        assert_eq!(open.free_variables().into_iter().collect::<Vec<_>>(), vec![VarId(1)]);

        let nested = parse(
            "( bring ( λ $1 e ( λ $2 e ( is_a $2 \" <object> \" ) ( on_top_of $1 $2 ) ) ( at $1 \" <location> \" ) ) )",
        )
        .unwrap();
        assert!(nested.free_variables().is_empty());
    }

    #[test]
    fn multiword_literal_prints_one_token_per_word() {
        let lf = LogicalForm::app("go", vec![LogicalForm::lit("kitchen counter")]);
        assert_eq!(lf.print().to_string(), "( go \" kitchen counter \" )");
        assert_eq!(parse(&lf.print().to_string()).unwrap(), lf);
    }

    #[test]
    fn structural_counts() {
        let lf = parse("( go \" <room> \" )").unwrap();
        assert_eq!(structural_token_counts([&lf]), (4, 6));
    }

    #[test]
    fn class_token_helpers() {
        assert_eq!(class_token("object"), "<object>");
        assert_eq!(class_of_token("<object>"), Some("object"));
        assert_eq!(class_of_token("<>"), None);
        assert_eq!(class_of_token("object"), None);
    }
}
