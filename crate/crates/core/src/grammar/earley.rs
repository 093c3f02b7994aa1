//! Earley recognition plus extraction of the preferred derivation.
//!
//! Among all derivations of the input, the preferred one is the first in
//! the order used by the exhaustive expansion: compare the sequences of
//! alternative indices visited in pre-order, lexicographically. These
//! sequences are prefix-free, so the preference decomposes over children
//! and can be computed span by span.

use std::collections::{HashMap, HashSet};
use std::rc::Rc;

use super::{Symbol, SynchronousGrammar};
use crate::logic::{class_token, LogicalForm};

#[derive(Debug, Clone, PartialEq, Eq)]
enum FSym {
    T(String),
    N(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Origin {
    Root,
    Entity,
    Rule(usize),
}

#[derive(Debug, Clone)]
struct FlatProd {
    lhs: usize,
    rhs: Vec<FSym>,
    /// Index among the left-hand side's alternatives.
    alt: u32,
    origin: Origin,
}

/// The grammar flattened for chart parsing. Entity nonterminals get a
/// single production yielding their class token; a synthetic root chooses
/// among the category start symbols in declaration order.
#[derive(Debug, Clone, Default)]
pub(super) struct ChartGrammar {
    prods: Vec<FlatProd>,
    by_lhs: Vec<Vec<usize>>,
    root: usize,
}

impl ChartGrammar {
    pub(super) fn build(g: &SynchronousGrammar) -> ChartGrammar {
        let mut names: HashMap<&str, usize> = HashMap::new();
        for nt in g.by_lhs.keys().chain(g.entities.keys()) {
            let n = names.len();
            names.entry(nt.as_str()).or_insert(n);
        }
        let root = names.len();
        let mut prods = Vec::new();
        let mut by_lhs = vec![Vec::new(); root + 1];
        let mut push = |p: FlatProd, by_lhs: &mut Vec<Vec<usize>>| {
            by_lhs[p.lhs].push(prods.len());
            prods.push(p);
        };
        for (nt, alts) in &g.by_lhs {
            for (alt, &pi) in alts.iter().enumerate() {
                let rhs = g.productions[pi]
                    .rhs
                    .iter()
                    .map(|s| match s {
                        Symbol::Terminal(t) => FSym::T(t.clone()),
                        Symbol::Nonterminal(n) => FSym::N(names[n.as_str()]),
                    })
                    .collect();
                push(
                    FlatProd {
                        lhs: names[nt.as_str()],
                        rhs,
                        alt: alt as u32,
                        origin: Origin::Rule(pi),
                    },
                    &mut by_lhs,
                );
            }
        }
        for (nt, class) in &g.entities {
            push(
                FlatProd {
                    lhs: names[nt.as_str()],
                    rhs: vec![FSym::T(class_token(class))],
                    alt: 0,
                    origin: Origin::Entity,
                },
                &mut by_lhs,
            );
        }
        for (alt, (_, start)) in g.starts.iter().enumerate() {
            push(
                FlatProd {
                    lhs: root,
                    rhs: vec![FSym::N(names[start.as_str()])],
                    alt: alt as u32,
                    origin: Origin::Root,
                },
                &mut by_lhs,
            );
        }
        ChartGrammar { prods, by_lhs, root }
    }
}

#[derive(Debug)]
enum Child {
    Term(String),
    Node(Rc<Deriv>),
}

#[derive(Debug)]
struct Deriv {
    prod: usize,
    children: Vec<Child>,
    /// Pre-order alternative indices.
    key: Vec<u32>,
}

impl Deriv {
    fn yield_into(&self, out: &mut Vec<String>) {
        for c in &self.children {
            match c {
                Child::Term(t) => out.push(t.clone()),
                Child::Node(d) => d.yield_into(out),
            }
        }
    }
}

type Item = (usize, usize, usize); // (production, dot, origin)

struct Chart<'a> {
    cg: &'a ChartGrammar,
    tokens: &'a [String],
    completed: HashSet<(usize, usize, usize)>,
    spans: HashSet<(usize, usize, usize)>,
    best_nt: HashMap<(usize, usize, usize), Option<Rc<Deriv>>>,
    in_progress: HashSet<(usize, usize, usize)>,
}

impl<'a> Chart<'a> {
    fn recognize(cg: &'a ChartGrammar, tokens: &'a [String]) -> Chart<'a> {
        let n = tokens.len();
        let mut sets: Vec<Vec<Item>> = vec![Vec::new(); n + 1];
        let mut seen: Vec<HashSet<Item>> = vec![HashSet::new(); n + 1];
        let mut completed = HashSet::new();
        let mut spans = HashSet::new();
        for &p in &cg.by_lhs[cg.root] {
            let item = (p, 0, 0);
            if seen[0].insert(item) {
                sets[0].push(item);
            }
        }
        for i in 0..=n {
            let mut k = 0;
            while k < sets[i].len() {
                let (p, dot, origin) = sets[i][k];
                k += 1;
                let prod = &cg.prods[p];
                match prod.rhs.get(dot) {
                    Some(FSym::N(b)) => {
                        for &q in &cg.by_lhs[*b] {
                            let item = (q, 0, i);
                            if seen[i].insert(item) {
                                sets[i].push(item);
                            }
                        }
                    }
                    Some(FSym::T(t)) => {
                        if i < n && tokens[i] == *t {
                            let item = (p, dot + 1, origin);
                            if seen[i + 1].insert(item) {
                                sets[i + 1].push(item);
                            }
                        }
                    }
                    None => {
                        completed.insert((p, origin, i));
                        spans.insert((prod.lhs, origin, i));
                        // No empty productions, so origin < i and that set is final.
                        let waiting: Vec<Item> = sets[origin]
                            .iter()
                            .filter(|(q, d, _)| cg.prods[*q].rhs.get(*d) == Some(&FSym::N(prod.lhs)))
                            .copied()
                            .collect();
                        for (q, d, o) in waiting {
                            let item = (q, d + 1, o);
                            if seen[i].insert(item) {
                                sets[i].push(item);
                            }
                        }
                    }
                }
            }
        }
        Chart {
            cg,
            tokens,
            completed,
            spans,
            best_nt: HashMap::new(),
            in_progress: HashSet::new(),
        }
    }

    fn best_nt(&mut self, nt: usize, i: usize, j: usize) -> Option<Rc<Deriv>> {
        if let Some(d) = self.best_nt.get(&(nt, i, j)) {
            return d.clone();
        }
        if !self.in_progress.insert((nt, i, j)) {
            return None; // unit cycle
        }
        let mut found = None;
        for &p in &self.cg.by_lhs[nt] {
            if !self.completed.contains(&(p, i, j)) {
                continue;
            }
            if let Some(children) = self.best_seq(p, 0, i, j) {
                let mut key = vec![self.cg.prods[p].alt];
                for c in &children {
                    if let Child::Node(d) = c {
                        key.extend_from_slice(&d.key);
                    }
                }
                found = Some(Rc::new(Deriv { prod: p, children, key }));
                break;
            }
        }
        self.in_progress.remove(&(nt, i, j));
        self.best_nt.insert((nt, i, j), found.clone());
        found
    }

    fn best_seq(&mut self, p: usize, k: usize, i: usize, j: usize) -> Option<Vec<Child>> {
        let rhs_len = self.cg.prods[p].rhs.len();
        if k == rhs_len {
            return (i == j).then(Vec::new);
        }
        let remaining = rhs_len - k - 1;
        if i + 1 + remaining > j {
            return None;
        }
        match self.cg.prods[p].rhs[k].clone() {
            FSym::T(t) => {
                if self.tokens[i] != t {
                    return None;
                }
                let mut rest = self.best_seq(p, k + 1, i + 1, j)?;
                rest.insert(0, Child::Term(t));
                Some(rest)
            }
            FSym::N(b) => {
                let mut best: Option<(Rc<Deriv>, Vec<Child>)> = None;
                for m in (i + 1)..=(j - remaining) {
                    if !self.spans.contains(&(b, i, m)) {
                        continue;
                    }
                    let Some(d) = self.best_nt(b, i, m) else { continue };
                    if best.as_ref().is_some_and(|(bd, _)| bd.key <= d.key) {
                        continue;
                    }
                    let Some(rest) = self.best_seq(p, k + 1, m, j) else { continue };
                    best = Some((d, rest));
                }
                let (d, mut rest) = best?;
                rest.insert(0, Child::Node(d));
                Some(rest)
            }
        }
    }
}

fn find_templated(g: &SynchronousGrammar, cg: &ChartGrammar, d: &Deriv) -> Option<LogicalForm> {
    if let Origin::Rule(pi) = cg.prods[d.prod].origin {
        if let Some(t) = &g.productions[pi].template {
            let yields: Vec<Vec<String>> = d
                .children
                .iter()
                .map(|c| match c {
                    Child::Term(t) => vec![t.clone()],
                    Child::Node(n) => {
                        let mut out = Vec::new();
                        n.yield_into(&mut out);
                        out
                    }
                })
                .collect();
            return t.instantiate(&yields, g.registry()).ok();
        }
    }
    d.children.iter().find_map(|c| match c {
        Child::Node(n) => find_templated(g, cg, n),
        Child::Term(_) => None,
    })
}

/// Parses an (anonymized) command against the grammar and returns the
/// instantiated template of its preferred derivation, or `None` when the
/// command is not derivable.
pub fn chart_parse<S: AsRef<str>>(g: &SynchronousGrammar, command: &[S]) -> Option<LogicalForm> {
    if command.is_empty() {
        return None;
    }
    let tokens: Vec<String> = command.iter().map(|t| t.as_ref().to_lowercase()).collect();
    let cg = &g.chart;
    let mut chart = Chart::recognize(cg, &tokens);
    let root = chart.best_nt(cg.root, 0, tokens.len())?;
    find_templated(g, cg, &root)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bundled;
    use crate::grammar::load_grammar;
    use crate::text::tokenize_command;

    #[test]
    fn parses_bring_rule() {
        let text = "#entity $object object\n#category 1\n$bring = $vbbring me the $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n$vbbring = bring | fetch\n";
        let g = load_grammar(text, &bundled::registry()).unwrap();
        let lf = chart_parse(&g, &tokenize_command("fetch me the <object>")).unwrap();
        assert_eq!(lf.to_string(), "( bring ( λ $1 e ( is_a $1 \" <object> \" ) ) )");
        assert!(chart_parse(&g, &tokenize_command("fetch me the apple")).is_none());
        assert!(chart_parse::<&str>(&g, &[]).is_none());
    }

    #[test]
    fn ambiguity_prefers_first_alternative() {
        let text = "#entity $object object\n#category 1\n\
            $top = $a | $b\n\
            $a = get the $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n\
            $b = get the $object : ( find ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n";
        let g = load_grammar(text, &bundled::registry()).unwrap();
        let lf = chart_parse(&g, &["get", "the", "<object>"]).unwrap();
        assert_eq!(lf.to_string(), "( bring ( λ $1 e ( is_a $1 \" <object> \" ) ) )");
    }

    #[test]
    fn split_ambiguity_follows_preorder() {
        // "a a a" splits as ($x=a a)($y=a) via alternative 0 of $x, or
        // ($x=a)($y=a a) via alternative 1 of $x; the former comes first.
        let text = "#entity $object object\n#category 1\n\
            $top = $x $y get $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ( at $1 \"{$x}\" ) ) )\n\
            $x = a a | a\n\
            $y = a | a a\n";
        let g = load_grammar(text, &bundled::registry()).unwrap();
        let lf = chart_parse(&g, &["a", "a", "a", "get", "<object>"]).unwrap();
        assert_eq!(lf.string_literals(), vec!["a a"]);
    }

    #[test]
    fn left_recursive_surface_rules() {
        let text = "#entity $object object\n#category 1\n\
            $top = get $adjs $object : ( bring ( λ $1 e ( is_a $1 \"{$object}\" ) ) )\n\
            $adjs = $adjs big | big\n";
        let g = load_grammar(text, &bundled::registry()).unwrap();
        assert!(chart_parse(&g, &["get", "big", "big", "big", "<object>"]).is_some());
        assert!(chart_parse(&g, &["get", "<object>"]).is_none());
    }
}
