//! Corpus containers, JSON-lines I/O, vocabularies and the two split
//! protocols.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use indexmap::IndexMap;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::anonymizer::anonymize;
use crate::logic::{class_token, parse_lf_str, LfError, LogicalForm, PredicateRegistry};
use crate::ontology::Ontology;
use crate::text::join_tokens;

/// A command and its logical form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CorpusPair {
    pub command: Vec<String>,
    pub lf: LogicalForm,
    pub category: u8,
    /// True when every entity in both sides is a class token.
    pub anonymized: bool,
}

impl CorpusPair {
    pub fn command_text(&self) -> String {
        join_tokens(&self.command)
    }

    pub fn lf_tokens(&self) -> Vec<String> {
        self.lf.print().0
    }
}

/// Replaces ontology spans in the command with class tokens and string
/// literals naming known entities in the form with the same class tokens.
/// Literals the ontology does not know stay as they are.
pub fn anonymize_pair(pair: &CorpusPair, ont: &Ontology) -> CorpusPair {
    let ac = anonymize(&pair.command, ont);
    let mut all = true;
    let lf = pair.lf.map_string_literals(&mut |s| {
        let words: Vec<&str> = s.split_whitespace().collect();
        match ont.lookup_span(&words) {
            Some(class) => LogicalForm::ClassToken(class.to_string()),
            None => {
                all = false;
                LogicalForm::StringLit(s.to_string())
            }
        }
    });
    CorpusPair {
        command: ac.tokens,
        lf,
        category: pair.category,
        anonymized: all,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitTag {
    Train,
    Validation,
    Test,
    Unassigned,
}

impl fmt::Display for SplitTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SplitTag::Train => "train",
            SplitTag::Validation => "validation",
            SplitTag::Test => "test",
            SplitTag::Unassigned => "unassigned",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataOrigin {
    Generated,
    Paraphrased,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
struct PairRecord {
    command: String,
    lf: String,
    category: u8,
    anonymized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    split: Option<SplitTag>,
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("line {line}: {source}")]
    Json { line: usize, source: serde_json::Error },
    #[error("line {line}: bad logical form: {source}")]
    Lf { line: usize, source: LfError },
    #[error("need at least 10 pairs to split, got {0}")]
    TooFewPairs(usize),
    #[error("need at least 10 distinct logical forms to split, got {0}")]
    TooFewForms(usize),
    #[error("split ratios must be nonnegative and sum to 1")]
    BadRatios,
}

/// Pairs from one source with a split tag per pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dataset {
    pub origin: DataOrigin,
    pub pairs: Vec<CorpusPair>,
    pub splits: Vec<SplitTag>,
}

impl Dataset {
    pub fn new(origin: DataOrigin, pairs: Vec<CorpusPair>) -> Dataset {
        let splits = vec![SplitTag::Unassigned; pairs.len()];
        Dataset { origin, pairs, splits }
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn part(&self, tag: SplitTag) -> Vec<&CorpusPair> {
        self.pairs
            .iter()
            .zip(&self.splits)
            .filter(|(_, t)| **t == tag)
            .map(|(p, _)| p)
            .collect()
    }

    pub fn count(&self, tag: SplitTag) -> usize {
        self.splits.iter().filter(|t| **t == tag).count()
    }

    /// Distinct canonical prints of the forms in one part.
    pub fn form_pool(&self, tag: SplitTag) -> HashSet<String> {
        self.part(tag).into_iter().map(|p| p.lf.to_string()).collect()
    }

    pub fn to_jsonl(&self) -> String {
        let mut out = String::new();
        for (p, t) in self.pairs.iter().zip(&self.splits) {
            let rec = PairRecord {
                command: p.command_text(),
                lf: p.lf.to_string(),
                category: p.category,
                anonymized: p.anonymized,
                split: (*t != SplitTag::Unassigned).then_some(*t),
            };
            out.push_str(&serde_json::to_string(&rec).expect("record serializes"));
            out.push('\n');
        }
        out
    }

    /// Reads JSON lines; blank lines are skipped and a missing `split`
    /// field means unassigned.
    pub fn from_jsonl(origin: DataOrigin, text: &str, registry: &PredicateRegistry) -> Result<Dataset, CorpusError> {
        let mut pairs = Vec::new();
        let mut splits = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let line_no = i + 1;
            let rec: PairRecord = serde_json::from_str(line).map_err(|source| CorpusError::Json { line: line_no, source })?;
            let lf = parse_lf_str(&rec.lf, registry).map_err(|source| CorpusError::Lf { line: line_no, source })?;
            pairs.push(CorpusPair {
                command: crate::text::tokenize_command(&rec.command),
                lf,
                category: rec.category,
                anonymized: rec.anonymized,
            });
            splits.push(rec.split.unwrap_or(SplitTag::Unassigned));
        }
        Ok(Dataset { origin, pairs, splits })
    }

    /// Per-part pair counts, for split manifests.
    pub fn manifest(&self) -> SplitManifest {
        SplitManifest {
            origin: self.origin,
            total: self.len(),
            train: self.count(SplitTag::Train),
            validation: self.count(SplitTag::Validation),
            test: self.count(SplitTag::Test),
            train_forms: self.form_pool(SplitTag::Train).len(),
            validation_forms: self.form_pool(SplitTag::Validation).len(),
            test_forms: self.form_pool(SplitTag::Test).len(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub origin: DataOrigin,
    pub total: usize,
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub train_forms: usize,
    pub validation_forms: usize,
    pub test_forms: usize,
}

/// Train/validation/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ratios {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl Default for Ratios {
    fn default() -> Self {
        Ratios {
            train: 0.7,
            validation: 0.1,
            test: 0.2,
        }
    }
}

impl Ratios {
    fn check(&self) -> Result<(), CorpusError> {
        let ok = [self.train, self.validation, self.test].iter().all(|r| *r >= 0.0)
            && (self.train + self.validation + self.test - 1.0).abs() < 1e-6;
        if ok {
            Ok(())
        } else {
            Err(CorpusError::BadRatios)
        }
    }

    /// Target train and validation sizes for `n` items; the test part takes
    /// the rest. The epsilon keeps `0.7 * 10` from flooring to 6.
    pub fn targets(&self, n: usize) -> (usize, usize) {
        let t = (self.train * n as f64 + 1e-9).floor() as usize;
        let v = (self.validation * n as f64 + 1e-9).floor() as usize;
        (t, v)
    }
}

impl FromStr for Ratios {
    type Err = CorpusError;

    /// `0.7,0.1,0.2` or `70/10/20`.
    fn from_str(s: &str) -> Result<Ratios, CorpusError> {
        let parts: Vec<f64> = s
            .split([',', '/'])
            .map(|p| p.trim().parse::<f64>())
            .collect::<Result<_, _>>()
            .map_err(|_| CorpusError::BadRatios)?;
        let [a, b, c] = parts[..] else {
            return Err(CorpusError::BadRatios);
        };
        let sum = a + b + c;
        if sum <= 0.0 {
            return Err(CorpusError::BadRatios);
        }
        let r = Ratios {
            train: a / sum,
            validation: b / sum,
            test: c / sum,
        };
        r.check()?;
        Ok(r)
    }
}

fn seeded_hash(seed: u64, key: &str) -> [u8; 32] {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(key.as_bytes());
    h.finalize().into()
}

/// Keys sorted by seeded hash, ties (never in practice) by key.
fn hash_order<'a>(keys: impl IntoIterator<Item = &'a String>, seed: u64) -> Vec<&'a String> {
    let mut v: Vec<(&String, [u8; 32])> = keys.into_iter().map(|k| (k, seeded_hash(seed, k))).collect();
    v.sort_by(|a, b| a.1.cmp(&b.1).then_with(|| a.0.cmp(b.0)));
    v.into_iter().map(|(k, _)| k).collect()
}

/// Walks groups in order and fills train, then validation, then test,
/// moving on once a part has reached its target pair count.
fn fill(order: &[&String], sizes: &IndexMap<String, usize>, targets: (usize, usize)) -> HashMap<String, SplitTag> {
    let (mut train, mut val) = (0, 0);
    let mut out = HashMap::new();
    for key in order {
        let n = sizes[key.as_str()];
        let tag = if train < targets.0 {
            train += n;
            SplitTag::Train
        } else if val < targets.1 {
            val += n;
            SplitTag::Validation
        } else {
            SplitTag::Test
        };
        out.insert((*key).clone(), tag);
    }
    out
}

/// Splits so that string-identical commands land in the same part.
pub fn split_by_command(ds: &Dataset, ratios: Ratios, seed: u64) -> Result<Dataset, CorpusError> {
    ratios.check()?;
    if ds.len() < 10 {
        return Err(CorpusError::TooFewPairs(ds.len()));
    }
    let keys: Vec<String> = ds.pairs.iter().map(CorpusPair::command_text).collect();
    let mut sizes: IndexMap<String, usize> = IndexMap::new();
    for k in &keys {
        *sizes.entry(k.clone()).or_default() += 1;
    }
    let order = hash_order(sizes.keys(), seed);
    let assign = fill(&order, &sizes, ratios.targets(ds.len()));
    let mut out = ds.clone();
    out.splits = keys.iter().map(|k| assign[k]).collect();
    Ok(out)
}

/// Splits both datasets over distinct logical forms so that each form's
/// pairs, generated and paraphrased alike, share one part. Proportions
/// follow the generated pair counts.
///
/// Paraphrases whose form never occurs in `gen` go to test with a warning,
/// which keeps every training pool free of unseen test forms.
pub fn split_by_logical_form(
    gen: &Dataset,
    para: &Dataset,
    ratios: Ratios,
    seed: u64,
) -> Result<(Dataset, Dataset), CorpusError> {
    ratios.check()?;
    let keys: Vec<String> = gen.pairs.iter().map(|p| p.lf.to_string()).collect();
    let mut sizes: IndexMap<String, usize> = IndexMap::new();
    for k in &keys {
        *sizes.entry(k.clone()).or_default() += 1;
    }
    if sizes.len() < 10 {
        return Err(CorpusError::TooFewForms(sizes.len()));
    }
    let order = hash_order(sizes.keys(), seed);
    let mut assign = fill(&order, &sizes, ratios.targets(gen.len()));

    // Keep every part nonempty by borrowing the last form of an earlier part.
    for (need, donors) in [
        (SplitTag::Validation, [SplitTag::Train, SplitTag::Test]),
        (SplitTag::Test, [SplitTag::Validation, SplitTag::Train]),
    ] {
        if assign.values().any(|t| *t == need) {
            continue;
        }
        for donor in donors {
            let members: Vec<&String> = order.iter().copied().filter(|k| assign[k.as_str()] == donor).collect();
            if members.len() > 1 {
                assign.insert(members[members.len() - 1].clone(), need);
                break;
            }
        }
    }

    let mut g = gen.clone();
    g.splits = keys.iter().map(|k| assign[k]).collect();
    let mut p = para.clone();
    p.splits = para
        .pairs
        .iter()
        .map(|pair| {
            let k = pair.lf.to_string();
            assign.get(&k).copied().unwrap_or_else(|| {
                log::warn!("paraphrase form `{k}` does not occur in the generated data; sending it to test");
                SplitTag::Test
            })
        })
        .collect();
    Ok((g, p))
}

pub const PAD: &str = "<pad>";
pub const START: &str = "<s>";
pub const END: &str = "</s>";
pub const UNK: &str = "<unk>";

/// Token/id bijection with reserved ids 0..4 for PAD, START, END and UNK.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, usize>,
}

impl From<Vec<String>> for Vocabulary {
    fn from(tokens: Vec<String>) -> Vocabulary {
        Vocabulary::from_tokens(tokens)
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Vec<String> {
        v.tokens
    }
}

impl Vocabulary {
    pub const PAD: usize = 0;
    pub const START: usize = 1;
    pub const END: usize = 2;
    pub const UNK: usize = 3;

    pub fn new() -> Vocabulary {
        Vocabulary::from_tokens([PAD, START, END, UNK].map(String::from).to_vec())
    }

    /// Rebuilds from a full token list (reserved tokens first).
    pub fn from_tokens(tokens: Vec<String>) -> Vocabulary {
        let index = tokens.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        Vocabulary { tokens, index }
    }

    pub fn insert(&mut self, token: &str) -> usize {
        if let Some(&i) = self.index.get(token) {
            return i;
        }
        self.tokens.push(token.to_string());
        self.index.insert(token.to_string(), self.tokens.len() - 1);
        self.tokens.len() - 1
    }

    pub fn id(&self, token: &str) -> usize {
        self.get(token).unwrap_or(Self::UNK)
    }

    pub fn get(&self, token: &str) -> Option<usize> {
        self.index.get(token).copied()
    }

    pub fn token(&self, id: usize) -> &str {
        self.tokens.get(id).map_or(UNK, String::as_str)
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn encode<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        tokens.iter().map(|t| self.id(t.as_ref())).collect()
    }
}

impl Default for Vocabulary {
    fn default() -> Self {
        Vocabulary::new()
    }
}

/// Source vocabulary over command tokens and target vocabulary over
/// printed form tokens, in first-occurrence order. Tokens seen fewer than
/// `min_count` times are left out and will map to UNK.
pub fn build_vocab<'a>(train: impl IntoIterator<Item = &'a CorpusPair>, min_count: usize) -> (Vocabulary, Vocabulary) {
    let mut src: IndexMap<String, usize> = IndexMap::new();
    let mut tgt: IndexMap<String, usize> = IndexMap::new();
    for p in train {
        for t in &p.command {
            *src.entry(t.clone()).or_default() += 1;
        }
        for t in p.lf_tokens() {
            *tgt.entry(t).or_default() += 1;
        }
    }
    let finish = |counts: IndexMap<String, usize>| {
        let mut v = Vocabulary::new();
        for (t, c) in counts {
            if c >= min_count {
                v.insert(&t);
            }
        }
        v
    };
    (finish(src), finish(tgt))
}

/// Class tokens of every ontology class, handy for seeding vocabularies.
pub fn class_tokens(ont: &Ontology) -> Vec<String> {
    ont.classes().map(class_token).collect()
}
