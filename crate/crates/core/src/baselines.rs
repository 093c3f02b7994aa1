//! Non-neural reference parsers: nearest neighbor over word sets, and the
//! grammar oracle that chart-parses with the generation grammar.

use std::collections::{HashMap, HashSet};

use thiserror::Error;

use crate::corpus::CorpusPair;
use crate::grammar::{chart_parse, SynchronousGrammar};
use crate::logic::LogicalForm;
use crate::metrics::jaccard_distance;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum BaselineError {
    #[error("nearest-neighbor index is empty")]
    EmptyIndex,
}

#[derive(Debug, Clone)]
struct Entry {
    words: HashSet<String>,
    lf: LogicalForm,
}

/// Word sets of training and validation commands with their forms.
/// Entry order is the source index used for tie-breaking.
#[derive(Debug, Clone)]
pub struct KnnIndex {
    entries: Vec<Entry>,
    pub k: usize,
}

impl KnnIndex {
    pub fn build<'a>(pairs: impl IntoIterator<Item = &'a CorpusPair>, k: usize) -> KnnIndex {
        let entries = pairs
            .into_iter()
            .map(|p| Entry {
                words: p.command.iter().cloned().collect(),
                lf: p.lf.clone(),
            })
            .collect();
        KnnIndex { entries, k: k.max(1) }
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Forms the index can ever return.
    pub fn forms(&self) -> impl Iterator<Item = &LogicalForm> {
        self.entries.iter().map(|e| &e.lf)
    }
}

/// Form of the closest command by Jaccard distance. With `k > 1` the `k`
/// closest entries vote; the vote and every tie go to the smallest index.
pub fn knn_predict<S: AsRef<str>>(ix: &KnnIndex, command: &[S]) -> Result<LogicalForm, BaselineError> {
    if ix.entries.is_empty() {
        return Err(BaselineError::EmptyIndex);
    }
    let query: HashSet<String> = command.iter().map(|t| t.as_ref().to_string()).collect();
    let mut scored: Vec<(f64, usize)> = ix
        .entries
        .iter()
        .enumerate()
        .map(|(i, e)| (jaccard_distance(&query, &e.words), i))
        .collect();
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    if ix.k == 1 {
        return Ok(ix.entries[scored[0].1].lf.clone());
    }
    // votes keyed by canonical print; remember the first index per form
    let mut votes: HashMap<String, (usize, usize)> = HashMap::new();
    for &(_, i) in scored.iter().take(ix.k) {
        let v = votes.entry(ix.entries[i].lf.to_string()).or_insert((0, i));
        v.0 += 1;
        v.1 = v.1.min(i);
    }
    let (_, &(_, winner)) = votes
        .iter()
        .max_by(|a, b| a.1 .0.cmp(&b.1 .0).then(b.1 .1.cmp(&a.1 .1)))
        .expect("k >= 1");
    Ok(ix.entries[winner].lf.clone())
}

/// Chart-parses with the generation grammar; `None` counts as wrong.
pub fn oracle_predict<S: AsRef<str>>(g: &SynchronousGrammar, command: &[S]) -> Option<LogicalForm> {
    chart_parse(g, command)
}
