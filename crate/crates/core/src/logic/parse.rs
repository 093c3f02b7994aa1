use thiserror::Error;

use super::{class_of_token, LfTokenSeq, LogicalForm, PredicateRegistry, TypeMarker, VarId, LAMBDA, QUOTE};

/// Logical-form parse failure. `index` is the offending token position.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LfError {
    #[error("empty logical form")]
    Empty,
    #[error("unbalanced parenthesis at token {index}")]
    UnbalancedParens { index: usize },
    #[error("unknown predicate `{predicate}` at token {index}")]
    UnknownPredicate { index: usize, predicate: String },
    #[error("predicate `{predicate}` at token {index} expects {expected} arguments, found {found}")]
    ArityMismatch {
        index: usize,
        predicate: String,
        expected: usize,
        found: usize,
    },
    #[error("unterminated quotation at token {index}")]
    DanglingQuote { index: usize },
    #[error("unbound variable {var} at token {index}")]
    UnboundVariable { index: usize, var: String },
    #[error("unsupported type marker `{marker}` at token {index}")]
    UnsupportedTypeMarker { index: usize, marker: String },
    #[error("empty string literal at token {index}")]
    EmptyLiteral { index: usize },
    #[error("λ with empty body at token {index}")]
    EmptyLambdaBody { index: usize },
    #[error("unexpected token `{token}` at {index}")]
    UnexpectedToken { index: usize, token: String },
}

impl LfError {
    pub fn index(&self) -> Option<usize> {
        match self {
            LfError::Empty => None,
            LfError::UnbalancedParens { index }
            | LfError::UnknownPredicate { index, .. }
            | LfError::ArityMismatch { index, .. }
            | LfError::DanglingQuote { index }
            | LfError::UnboundVariable { index, .. }
            | LfError::UnsupportedTypeMarker { index, .. }
            | LfError::EmptyLiteral { index }
            | LfError::EmptyLambdaBody { index }
            | LfError::UnexpectedToken { index, .. } => Some(*index),
        }
    }
}

/// Splits logical-form text into tokens. Parentheses, quotation marks and λ
/// are standalone tokens even when written without surrounding spaces;
/// curly quotes and TeX-style quote pairs are normalized to `"`, and the
/// word `lambda` to `λ`.
pub fn tokenize_lf(text: &str) -> Vec<String> {
    let normalized = text
        .replace("``", "\"")
        .replace("''", "\"")
        .replace(['\u{201c}', '\u{201d}', '\u{201e}', '\u{2033}'], "\"");
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<String>| {
        if !current.is_empty() {
            let word = std::mem::take(current);
            tokens.push(if word == "lambda" { LAMBDA.to_string() } else { word });
        }
    };
    for ch in normalized.chars() {
        match ch {
            '(' | ')' | '"' | 'λ' => {
                flush(&mut current, &mut tokens);
                tokens.push(ch.to_string());
            }
            c if c.is_whitespace() => flush(&mut current, &mut tokens),
            c => current.push(c),
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

/// Parses a token sequence into a logical form, checking predicates and
/// arities against `registry` and that every variable is bound.
pub fn parse_lf(tokens: &LfTokenSeq, registry: &PredicateRegistry) -> Result<LogicalForm, LfError> {
    let toks = tokens.tokens();
    if toks.is_empty() {
        return Err(LfError::Empty);
    }
    let mut parser = Parser {
        toks,
        pos: 0,
        scope: Vec::new(),
        registry,
    };
    let lf = parser.form()?;
    if parser.pos < toks.len() {
        let index = parser.pos;
        return Err(if toks[index] == ")" {
            LfError::UnbalancedParens { index }
        } else {
            LfError::UnexpectedToken {
                index,
                token: toks[index].clone(),
            }
        });
    }
    Ok(lf)
}

/// Tokenizes then parses.
pub fn parse_lf_str(text: &str, registry: &PredicateRegistry) -> Result<LogicalForm, LfError> {
    parse_lf(&LfTokenSeq::from_text(text), registry)
}

struct Parser<'a> {
    toks: &'a [String],
    pos: usize,
    scope: Vec<VarId>,
    registry: &'a PredicateRegistry,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&'a str> {
        self.toks.get(self.pos).map(String::as_str)
    }

    fn form(&mut self) -> Result<LogicalForm, LfError> {
        let index = self.pos;
        let Some(tok) = self.peek() else {
            return Err(LfError::UnbalancedParens {
                index: index.saturating_sub(1),
            });
        };
        match tok {
            "(" => {
                self.pos += 1;
                match self.peek() {
                    Some(LAMBDA) => self.lambda(index),
                    Some(_) => self.application(index),
                    None => Err(LfError::UnbalancedParens { index }),
                }
            }
            ")" => Err(LfError::UnbalancedParens { index }),
            QUOTE => self.literal(),
            LAMBDA => Err(LfError::UnexpectedToken {
                index,
                token: tok.to_string(),
            }),
            _ => match VarId::parse(tok) {
                Some(var) => {
                    self.pos += 1;
                    if self.scope.contains(&var) {
                        Ok(LogicalForm::Variable(var))
                    } else {
                        Err(LfError::UnboundVariable {
                            index,
                            var: tok.to_string(),
                        })
                    }
                }
                None => Err(LfError::UnexpectedToken {
                    index,
                    token: tok.to_string(),
                }),
            },
        }
    }

    fn lambda(&mut self, open: usize) -> Result<LogicalForm, LfError> {
        self.pos += 1; // λ
        let var_index = self.pos;
        let var = match self.peek() {
            Some(t) => VarId::parse(t).ok_or_else(|| LfError::UnexpectedToken {
                index: var_index,
                token: t.to_string(),
            })?,
            None => return Err(LfError::UnbalancedParens { index: open }),
        };
        self.pos += 1;
        let marker_index = self.pos;
        let marker = match self.peek() {
            Some(t) => TypeMarker::parse(t).ok_or_else(|| LfError::UnsupportedTypeMarker {
                index: marker_index,
                marker: t.to_string(),
            })?,
            None => return Err(LfError::UnbalancedParens { index: open }),
        };
        self.pos += 1;
        self.scope.push(var);
        let body = self.forms_until_close(open);
        self.scope.pop();
        let body = body?;
        if body.is_empty() {
            return Err(LfError::EmptyLambdaBody { index: open });
        }
        Ok(LogicalForm::Lambda { var, marker, body })
    }

    fn application(&mut self, open: usize) -> Result<LogicalForm, LfError> {
        let pred_index = self.pos;
        let predicate = self.toks[pred_index].clone();
        if matches!(predicate.as_str(), "(" | ")" | QUOTE) || VarId::parse(&predicate).is_some() {
            return Err(LfError::UnexpectedToken {
                index: pred_index,
                token: predicate,
            });
        }
        let sig = self.registry.get(&predicate).ok_or_else(|| LfError::UnknownPredicate {
            index: pred_index,
            predicate: predicate.clone(),
        })?;
        let expected = sig.arity;
        self.pos += 1;
        let args = self.forms_until_close(open)?;
        if args.len() != expected {
            return Err(LfError::ArityMismatch {
                index: pred_index,
                predicate,
                expected,
                found: args.len(),
            });
        }
        Ok(LogicalForm::Application { predicate, args })
    }

    /// Parses forms up to and including the matching `)`.
    fn forms_until_close(&mut self, open: usize) -> Result<Vec<LogicalForm>, LfError> {
        let mut forms = Vec::new();
        loop {
            match self.peek() {
                None => return Err(LfError::UnbalancedParens { index: open }),
                Some(")") => {
                    self.pos += 1;
                    return Ok(forms);
                }
                Some(_) => forms.push(self.form()?),
            }
        }
    }

    fn literal(&mut self) -> Result<LogicalForm, LfError> {
        let open = self.pos;
        self.pos += 1;
        let start = self.pos;
        while let Some(t) = self.peek() {
            if t == QUOTE {
                let words = &self.toks[start..self.pos];
                self.pos += 1;
                return match words {
                    [] => Err(LfError::EmptyLiteral { index: open }),
                    [single] => Ok(match class_of_token(single) {
                        Some(class) => LogicalForm::ClassToken(class.to_string()),
                        None => LogicalForm::StringLit(single.clone()),
                    }),
                    _ => Ok(LogicalForm::StringLit(words.join(" "))),
                };
            }
            self.pos += 1;
        }
        Err(LfError::DanglingQuote { index: open })
    }
}
