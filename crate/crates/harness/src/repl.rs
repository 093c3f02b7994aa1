//! Interactive parsing: anonymize a typed command, show the top candidate
//! forms, then fill the class tokens back in, asking when it is unclear
//! which entity goes where.

use std::io::{self, BufRead, Write};

use gpsr_core::deanonymizer::{deanonymize_lf, SlotQuery, SlotResolver};
use gpsr_core::grammar::{chart_parse, SynchronousGrammar};
use gpsr_core::text::tokenize_command;
use gpsr_core::{anonymize, parse_lf, LfTokenSeq, LogicalForm, Ontology, PredicateRegistry};
use gpsr_neural::{decode_beam, Seq2SeqModel};

/// Anything that proposes ranked logical forms for a token sequence.
pub trait CandidateParser {
    /// At most `k` candidates with scores, best first.
    fn candidates(&self, tokens: &[String], k: usize) -> Vec<(LfTokenSeq, f64)>;
}

impl CandidateParser for Seq2SeqModel {
    fn candidates(&self, tokens: &[String], k: usize) -> Vec<(LfTokenSeq, f64)> {
        let width = self.config.beam_width.max(k);
        decode_beam(self, tokens, width, self.config.max_decode_len)
            .into_iter()
            .take(k)
            .map(|h| (h.tokens, h.score))
            .collect()
    }
}

/// The generation grammar as a parser: one candidate or none.
pub struct OracleParser<'a>(pub &'a SynchronousGrammar);

impl CandidateParser for OracleParser<'_> {
    fn candidates(&self, tokens: &[String], _k: usize) -> Vec<(LfTokenSeq, f64)> {
        chart_parse(self.0, tokens).map(|lf| (lf.print(), 0.0)).into_iter().collect()
    }
}

/// Where the session talks to: prints messages and answers slot queries.
pub trait Dialogue: SlotResolver {
    fn say(&mut self, text: &str);
}

/// Terminal or piped I/O. Slot answers are read from the same input as
/// commands: a candidate number, a new value, or an empty line to give up.
pub struct Console<R, W> {
    pub input: R,
    pub output: W,
}

impl<R: BufRead, W: Write> Console<R, W> {
    fn read_line(&mut self) -> Option<String> {
        let mut line = String::new();
        match self.input.read_line(&mut line) {
            Ok(0) | Err(_) => None,
            Ok(_) => Some(line.trim().to_string()),
        }
    }
}

impl<R: BufRead, W: Write> SlotResolver for Console<R, W> {
    fn resolve(&mut self, query: &SlotQuery) -> Option<String> {
        let _ = write!(self.output, "{} ", query.prompt);
        let _ = self.output.flush();
        let answer = self.read_line()?;
        if answer.is_empty() {
            return None;
        }
        match answer.parse::<usize>() {
            Ok(n) if (1..=query.candidates.len()).contains(&n) => Some(query.candidates[n - 1].clone()),
            _ => Some(answer),
        }
    }
}

impl<R: BufRead, W: Write> Dialogue for Console<R, W> {
    fn say(&mut self, text: &str) {
        let _ = writeln!(self.output, "{text}");
    }
}

/// Scripted answers with a captured transcript, for tests and batch use.
#[derive(Debug, Default)]
pub struct Transcript {
    pub resolver: gpsr_core::deanonymizer::ScriptedResolver,
    pub lines: Vec<String>,
}

impl Transcript {
    pub fn new<S: Into<String>>(answers: impl IntoIterator<Item = S>) -> Transcript {
        Transcript {
            resolver: gpsr_core::deanonymizer::ScriptedResolver::new(answers),
            lines: Vec::new(),
        }
    }
}

impl SlotResolver for Transcript {
    fn resolve(&mut self, query: &SlotQuery) -> Option<String> {
        self.lines.push(query.prompt.clone());
        self.resolver.resolve(query)
    }
}

impl Dialogue for Transcript {
    fn say(&mut self, text: &str) {
        self.lines.push(text.to_string());
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Empty,
    Quit,
    Help,
    OntologyUpdated,
    Parsed { lf: LogicalForm, queries: usize },
    NotUnderstood,
    Failed(String),
}

pub struct Session<P> {
    pub parser: P,
    pub ontology: Ontology,
    pub registry: PredicateRegistry,
    pub top_k: usize,
}

const HELP: &str = "type a command, or: /ontology add <class> <surface words>, /help, /quit";

impl<P: CandidateParser> Session<P> {
    pub fn new(parser: P, ontology: Ontology, registry: PredicateRegistry) -> Session<P> {
        Session {
            parser,
            ontology,
            registry,
            top_k: 3,
        }
    }

    pub fn handle(&mut self, line: &str, io: &mut dyn Dialogue) -> Outcome {
        let line = line.trim();
        if line.is_empty() {
            return Outcome::Empty;
        }
        if let Some(rest) = line.strip_prefix('/') {
            return self.command(rest, io);
        }
        let tokens = tokenize_command(line);
        let ac = anonymize(&tokens, &self.ontology);
        io.say(&format!("anonymized: {}", ac.tokens.join(" ")));
        let cands = self.parser.candidates(&ac.tokens, self.top_k);
        for (i, (seq, score)) in cands.iter().enumerate() {
            io.say(&format!("  {}. [{score:.3}] {seq}", i + 1));
        }
        let Some(lf) = cands.first().and_then(|(seq, _)| parse_lf(seq, &self.registry).ok()) else {
            io.say("could not understand");
            return Outcome::NotUnderstood;
        };
        match deanonymize_lf(&lf, &ac, io, &self.ontology) {
            Ok(d) => {
                io.say(&format!("=> {}", d.lf));
                self.ontology = d.ontology;
                Outcome::Parsed {
                    lf: d.lf,
                    queries: d.queries,
                }
            }
            Err(e) => {
                io.say(&format!("could not fill the form: {e}"));
                Outcome::Failed(e.to_string())
            }
        }
    }

    fn command(&mut self, rest: &str, io: &mut dyn Dialogue) -> Outcome {
        let words: Vec<&str> = rest.split_whitespace().collect();
        match words.as_slice() {
            ["quit"] | ["exit"] => Outcome::Quit,
            ["ontology", "add", class, surface @ ..] if !surface.is_empty() => {
                let surface = surface.join(" ");
                match self.ontology.add_entity(class, &surface) {
                    Ok(o) => {
                        self.ontology = o;
                        io.say(&format!("added `{surface}` to {class}"));
                        Outcome::OntologyUpdated
                    }
                    Err(e) => {
                        io.say(&e.to_string());
                        Outcome::Failed(e.to_string())
                    }
                }
            }
            _ => {
                io.say(HELP);
                Outcome::Help
            }
        }
    }
}

/// Read-eval-print loop until end of input or `/quit`.
pub fn run<P: CandidateParser, R: BufRead, W: Write>(session: &mut Session<P>, input: R, output: W) -> io::Result<()> {
    let mut console = Console { input, output };
    console.say(HELP);
    loop {
        write!(console.output, "> ")?;
        console.output.flush()?;
        let Some(line) = console.read_line() else { break };
        if session.handle(&line, &mut console) == Outcome::Quit {
            break;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use gpsr_core::bundled;

    fn session(g: &SynchronousGrammar) -> Session<OracleParser<'_>> {
        Session::new(OracleParser(g), bundled::ontology(), bundled::registry())
    }

    #[test]
    fn empty_line_reprompts() {
        let g = bundled::grammar();
        let mut s = session(&g);
        let mut t = Transcript::default();
        assert_eq!(s.handle("   ", &mut t), Outcome::Empty);
        assert!(t.lines.is_empty());
    }

    #[test]
    fn unparseable_input_keeps_the_session_alive() {
        let g = bundled::grammar();
        let mut s = session(&g);
        let mut t = Transcript::default();
        assert_eq!(s.handle("sing me a song", &mut t), Outcome::NotUnderstood);
        assert!(t.lines.iter().any(|l| l == "could not understand"));
        assert_eq!(s.handle("/quit", &mut t), Outcome::Quit);
    }

    #[test]
    fn ontology_add_changes_anonymization() {
        let g = bundled::grammar();
        let mut s = session(&g);
        let mut t = Transcript::default();
        assert_eq!(s.handle("/ontology add object kombucha", &mut t), Outcome::OntologyUpdated);
        assert!(s.ontology.contains("object", "kombucha"));
        assert!(matches!(s.handle("/ontology add spaceship rocket", &mut t), Outcome::Failed(_)));
    }

    #[test]
    fn console_reads_answers_from_input() {
        let g = bundled::grammar();
        let mut s = session(&g);
        let input = "/help\n\n/quit\n".as_bytes();
        let mut out = Vec::new();
        run(&mut s, input, &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert!(text.matches("/ontology add").count() >= 2);
    }
}
