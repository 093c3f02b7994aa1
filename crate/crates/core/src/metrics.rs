//! String and set distances: character Levenshtein, word Jaccard, and the
//! paraphrase quality gate built on both.

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

use crate::text::tokenize_command;

/// Minimum number of character insertions, deletions and substitutions
/// turning `a` into `b`.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

/// Levenshtein distance over arbitrary sequences, e.g. word tokens.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut row: Vec<usize> = (0..=b.len()).collect();
    for (i, ca) in a.iter().enumerate() {
        let mut diag = row[0];
        row[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let up = row[j + 1];
            row[j + 1] = (diag + usize::from(ca != cb)).min(up + 1).min(row[j] + 1);
            diag = up;
        }
    }
    row[b.len()]
}

/// `1 - |a ∩ b| / |a ∪ b|`, and 0 when both are empty.
pub fn jaccard_distance<T: Eq + Hash>(a: &HashSet<T>, b: &HashSet<T>) -> f64 {
    let union = a.union(b).count();
    if union == 0 {
        return 0.0;
    }
    1.0 - a.intersection(b).count() as f64 / union as f64
}

/// Word set of a sentence, normalized like commands.
pub fn word_set(text: &str) -> HashSet<String> {
    tokenize_command(text).into_iter().collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JudgeThresholds {
    /// Too similar needs Levenshtein below this...
    pub min_levenshtein: usize,
    /// ...and Jaccard distance below this.
    pub min_jaccard: f64,
    /// Too different above this Jaccard distance.
    pub max_jaccard: f64,
}

impl Default for JudgeThresholds {
    fn default() -> Self {
        JudgeThresholds {
            min_levenshtein: 5,
            min_jaccard: 0.2,
            max_jaccard: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Verdict {
    TooSimilar,
    TooDifferent,
    Acceptable,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParaphraseJudgment {
    pub levenshtein: usize,
    pub jaccard_distance: f64,
    pub verdict: Verdict,
}

pub fn judge_paraphrase(original: &str, paraphrase: &str, cfg: &JudgeThresholds) -> ParaphraseJudgment {
    let lev = levenshtein(&original.to_lowercase(), &paraphrase.to_lowercase());
    let jac = jaccard_distance(&word_set(original), &word_set(paraphrase));
    let verdict = if lev < cfg.min_levenshtein && jac < cfg.min_jaccard {
        Verdict::TooSimilar
    } else if jac > cfg.max_jaccard {
        Verdict::TooDifferent
    } else {
        Verdict::Acceptable
    };
    ParaphraseJudgment {
        levenshtein: lev,
        jaccard_distance: jac,
        verdict,
    }
}
