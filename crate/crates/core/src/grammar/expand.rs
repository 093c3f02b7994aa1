use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{GrammarError, Production, Symbol, SynchronousGrammar, MAX_DEPTH};
use crate::corpus::CorpusPair;
use crate::logic::{class_token, LogicalForm};
use crate::ontology::Ontology;

/// Per-category summary of an exhaustive expansion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategoryStats {
    /// `None` for the all-categories row.
    pub category: Option<u8>,
    pub commands: usize,
    pub logical_forms: usize,
    pub annotations: usize,
    pub avg_command_len: f64,
    pub avg_lf_len: f64,
    pub commands_per_form: f64,
    pub structural_token_fraction: f64,
}

#[derive(Debug, Clone)]
pub struct Enumeration {
    pub pairs: Vec<CorpusPair>,
    /// One row per category followed by the all-categories row.
    pub stats: Vec<CategoryStats>,
}

#[derive(Clone)]
struct SemItem {
    command: Vec<String>,
    lf: LogicalForm,
    annotation: usize,
}

struct Expander<'g> {
    g: &'g SynchronousGrammar,
    surface: HashMap<String, Rc<Vec<Vec<String>>>>,
    semantic: HashMap<String, Rc<Vec<SemItem>>>,
}

/// Cartesian product in odometer order, first position slowest.
fn for_each_combination(sizes: &[usize], mut f: impl FnMut(&[usize]) -> Result<(), GrammarError>) -> Result<(), GrammarError> {
    if sizes.contains(&0) {
        return Ok(());
    }
    let mut idx = vec![0; sizes.len()];
    loop {
        f(&idx)?;
        let mut k = sizes.len();
        loop {
            if k == 0 {
                return Ok(());
            }
            k -= 1;
            idx[k] += 1;
            if idx[k] < sizes[k] {
                break;
            }
            idx[k] = 0;
        }
    }
}

impl<'g> Expander<'g> {
    fn new(g: &'g SynchronousGrammar) -> Self {
        Expander {
            g,
            surface: HashMap::new(),
            semantic: HashMap::new(),
        }
    }

    fn surface_yields(&mut self, nt: &str, depth: usize) -> Result<Rc<Vec<Vec<String>>>, GrammarError> {
        if let Some(y) = self.surface.get(nt) {
            return Ok(y.clone());
        }
        if depth > MAX_DEPTH {
            return Err(GrammarError::Nonterminating {
                nonterminal: nt.to_string(),
            });
        }
        let out = if let Some(class) = self.g.entity_class(nt) {
            vec![vec![class_token(class)]]
        } else {
            let mut out = Vec::new();
            for &pi in self.g.alternatives(nt) {
                let p = &self.g.productions[pi];
                let parts = self.symbol_yields(p, depth)?;
                let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
                for_each_combination(&sizes, |idx| {
                    out.push(idx.iter().zip(&parts).flat_map(|(&i, p)| p[i].iter().cloned()).collect());
                    Ok(())
                })?;
            }
            out
        };
        let out = Rc::new(out);
        self.surface.insert(nt.to_string(), out.clone());
        Ok(out)
    }

    fn symbol_yields(&mut self, p: &Production, depth: usize) -> Result<Vec<Rc<Vec<Vec<String>>>>, GrammarError> {
        p.rhs
            .iter()
            .map(|s| match s {
                Symbol::Terminal(t) => Ok(Rc::new(vec![vec![t.clone()]])),
                Symbol::Nonterminal(n) => self.surface_yields(n, depth + 1),
            })
            .collect()
    }

    fn semantic_yields(&mut self, nt: &str, depth: usize) -> Result<Rc<Vec<SemItem>>, GrammarError> {
        if let Some(y) = self.semantic.get(nt) {
            return Ok(y.clone());
        }
        if depth > MAX_DEPTH {
            return Err(GrammarError::Nonterminating {
                nonterminal: nt.to_string(),
            });
        }
        let mut out = Vec::new();
        for &pi in self.g.alternatives(nt) {
            let p = &self.g.productions[pi];
            if let Some(template) = &p.template {
                let parts = self.symbol_yields(p, depth)?;
                let sizes: Vec<usize> = parts.iter().map(|p| p.len()).collect();
                let registry = self.g.registry();
                for_each_combination(&sizes, |idx| {
                    let yields: Vec<Vec<String>> = idx.iter().zip(&parts).map(|(&i, p)| p[i].clone()).collect();
                    let lf = template
                        .instantiate(&yields, registry)
                        .map_err(|source| GrammarError::BadTemplate { line: p.line, source })?;
                    out.push(SemItem {
                        command: yields.concat(),
                        lf,
                        annotation: pi,
                    });
                    Ok(())
                })?;
            } else {
                // Exactly one semantic child; the rest are surface.
                let mut surface_parts = Vec::new();
                let mut sem_pos = None;
                let mut sem_items = Rc::new(Vec::new());
                for (pos, s) in p.rhs.iter().enumerate() {
                    match s {
                        Symbol::Terminal(t) => surface_parts.push(Rc::new(vec![vec![t.clone()]])),
                        Symbol::Nonterminal(n) if self.g.is_semantic(n) => {
                            sem_pos = Some(pos);
                            sem_items = self.semantic_yields(n, depth + 1)?;
                            surface_parts.push(Rc::new(Vec::new()));
                        }
                        Symbol::Nonterminal(n) => surface_parts.push(self.surface_yields(n, depth + 1)?),
                    }
                }
                let sem_pos = sem_pos.expect("semantic production has a semantic child");
                let sizes: Vec<usize> = surface_parts
                    .iter()
                    .enumerate()
                    .map(|(i, p)| if i == sem_pos { sem_items.len() } else { p.len() })
                    .collect();
                for_each_combination(&sizes, |idx| {
                    let item = &sem_items[idx[sem_pos]];
                    let mut command = Vec::new();
                    for (i, &choice) in idx.iter().enumerate() {
                        if i == sem_pos {
                            command.extend(item.command.iter().cloned());
                        } else {
                            command.extend(surface_parts[i][choice].iter().cloned());
                        }
                    }
                    out.push(SemItem {
                        command,
                        lf: item.lf.clone(),
                        annotation: item.annotation,
                    });
                    Ok(())
                })?;
            }
        }
        let out = Rc::new(out);
        self.semantic.insert(nt.to_string(), out.clone());
        Ok(out)
    }
}

/// Every distinct anonymized (command, logical form) pair the grammar
/// produces, with entity nonterminals expanded to their class tokens.
///
/// Pairs come out in derivation order (categories in declaration order,
/// alternatives in file order). A command is kept only the first time it
/// appears, so a command shared by two categories belongs to the first.
pub fn enumerate_anonymized(g: &SynchronousGrammar) -> Result<Enumeration, GrammarError> {
    let mut ex = Expander::new(g);
    let mut seen: HashSet<Vec<String>> = HashSet::new();
    let mut seen_forms: HashSet<String> = HashSet::new();
    let mut pairs = Vec::new();
    let mut stats = Vec::new();
    let mut all_annotations = HashSet::new();

    if g.annotation_count() == 0 {
        log::warn!("grammar has no templated productions; nothing to enumerate");
    }

    for (category, start) in g.starts() {
        if !g.is_semantic(start) {
            log::warn!("category {category} start ${start} derives no templated production");
            stats.push(summarize(Some(*category), &[], 0));
            continue;
        }
        let items = ex.semantic_yields(start, 0)?;
        let mut cat_pairs = Vec::new();
        let mut annotations = HashSet::new();
        let mut forms = 0;
        for item in items.iter() {
            if !seen.insert(item.command.clone()) {
                continue;
            }
            annotations.insert(item.annotation);
            if seen_forms.insert(item.lf.print().to_string()) {
                forms += 1;
            }
            cat_pairs.push(CorpusPair {
                command: item.command.clone(),
                lf: item.lf.clone(),
                category: *category,
                anonymized: true,
            });
        }
        stats.push(summarize(Some(*category), &cat_pairs, annotations.len()).with_forms(forms));
        all_annotations.extend(annotations);
        pairs.extend(cat_pairs);
    }
    stats.push(summarize(None, &pairs, all_annotations.len()).with_forms(seen_forms.len()));
    Ok(Enumeration { pairs, stats })
}

impl CategoryStats {
    fn with_forms(mut self, forms: usize) -> Self {
        self.logical_forms = forms;
        self.commands_per_form = if forms == 0 { 0.0 } else { self.commands as f64 / forms as f64 };
        self
    }
}

fn summarize(category: Option<u8>, pairs: &[CorpusPair], annotations: usize) -> CategoryStats {
    let n = pairs.len();
    let mean = |total: usize| if n == 0 { 0.0 } else { total as f64 / n as f64 };
    let cmd_tokens: usize = pairs.iter().map(|p| p.command.len()).sum();
    let (structural, lf_tokens) = crate::logic::structural_token_counts(pairs.iter().map(|p| &p.lf));
    CategoryStats {
        category,
        commands: n,
        logical_forms: 0,
        annotations,
        avg_command_len: mean(cmd_tokens),
        avg_lf_len: mean(lf_tokens),
        commands_per_form: 0.0,
        structural_token_fraction: if lf_tokens == 0 {
            0.0
        } else {
            structural as f64 / lf_tokens as f64
        },
    }
}

/// Draws one concrete (command, logical form) pair: a category uniformly,
/// then a uniform choice among the alternatives at every step, with entity
/// nonterminals replaced by uniformly drawn ontology entities.
pub fn sample_pair(g: &SynchronousGrammar, ont: &Ontology, seed: u64) -> Result<CorpusPair, GrammarError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_pair_with_rng(g, ont, &mut rng)
}

pub fn sample_pair_with_rng<R: Rng + ?Sized>(
    g: &SynchronousGrammar,
    ont: &Ontology,
    rng: &mut R,
) -> Result<CorpusPair, GrammarError> {
    let starts: Vec<&(u8, String)> = g.starts().iter().filter(|(_, s)| g.is_semantic(s)).collect();
    if starts.is_empty() {
        return Err(GrammarError::NoCategories);
    }
    let (category, start) = starts[rng.gen_range(0..starts.len())];
    let (command, lf) = sample_nt(g, ont, start, 0, rng)?;
    Ok(CorpusPair {
        command,
        lf: lf.expect("semantic start yields a form"),
        category: *category,
        anonymized: false,
    })
}

fn sample_nt<R: Rng + ?Sized>(
    g: &SynchronousGrammar,
    ont: &Ontology,
    nt: &str,
    depth: usize,
    rng: &mut R,
) -> Result<(Vec<String>, Option<LogicalForm>), GrammarError> {
    if depth > MAX_DEPTH {
        return Err(GrammarError::Nonterminating {
            nonterminal: nt.to_string(),
        });
    }
    if let Some(class) = g.entity_class(nt) {
        let n = ont.entity_count(class);
        if n == 0 {
            return Err(GrammarError::EmptyOntologyClass(class.to_string()));
        }
        let pick = rng.gen_range(0..n);
        let surface = ont.entities(class).and_then(|mut e| e.nth(pick)).expect("index in range");
        return Ok((surface.split(' ').map(str::to_string).collect(), None));
    }
    let alts = g.alternatives(nt);
    let p = &g.productions[alts[rng.gen_range(0..alts.len())]];
    let mut yields = Vec::with_capacity(p.rhs.len());
    let mut child_lf = None;
    for s in &p.rhs {
        match s {
            Symbol::Terminal(t) => yields.push(vec![t.clone()]),
            Symbol::Nonterminal(n) => {
                let (words, lf) = sample_nt(g, ont, n, depth + 1, rng)?;
                if lf.is_some() {
                    child_lf = lf;
                }
                yields.push(words);
            }
        }
    }
    let lf = match &p.template {
        Some(t) => Some(
            t.instantiate(&yields, g.registry())
                .map_err(|source| GrammarError::BadTemplate { line: p.line, source })?,
        ),
        None => child_lf,
    };
    Ok((yields.concat(), lf))
}
