//! One cell of the evaluation matrix: pick training and test data under a
//! split, fit or consult a parser, and score exact match on the test part.

use std::collections::HashSet;
use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, ensure, Context, Result};
use gpsr_core::baselines::{knn_predict, oracle_predict, KnnIndex};
use gpsr_core::corpus::{
    anonymize_pair, split_by_command, split_by_logical_form, CorpusPair, DataOrigin, Dataset, Ratios, SplitTag,
};
use gpsr_core::grammar::{enumerate_anonymized, SynchronousGrammar};
use gpsr_core::{bundled, LfTokenSeq, Ontology};
use gpsr_neural::{build_model, predict, train, ModelConfig};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Source {
    Gen,
    Para,
    GenPlusPara,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitKind {
    Command,
    Logical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Oracle,
    Knn,
    #[serde(rename = "seq2seq")]
    Seq2Seq,
    /// Seq2seq with the pretrained vector file in the frozen channel.
    #[serde(rename = "seq2seq_vectors")]
    Seq2SeqVectors,
}

/// The four train/test combinations of the results table, in column order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    GenGen,
    GenPara,
    ParaPara,
    GenParaPara,
}

impl Regime {
    pub const ALL: [Regime; 4] = [Regime::GenGen, Regime::GenPara, Regime::ParaPara, Regime::GenParaPara];

    pub fn sources(self) -> (Source, Source) {
        match self {
            Regime::GenGen => (Source::Gen, Source::Gen),
            Regime::GenPara => (Source::Gen, Source::Para),
            Regime::ParaPara => (Source::Para, Source::Para),
            Regime::GenParaPara => (Source::GenPlusPara, Source::Para),
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Regime::GenGen => "Gen/Gen",
            Regime::GenPara => "Gen/Para",
            Regime::ParaPara => "Para/Para",
            Regime::GenParaPara => "G+P/Para",
        }
    }
}

impl SplitKind {
    pub fn label(self) -> &'static str {
        match self {
            SplitKind::Command => "C",
            SplitKind::Logical => "λ",
        }
    }
}

impl ModelKind {
    pub fn label(self) -> &'static str {
        match self {
            ModelKind::Oracle => "Grammar-oracle",
            ModelKind::Knn => "KNN",
            ModelKind::Seq2Seq => "seq2seq",
            ModelKind::Seq2SeqVectors => "seq2seq + vectors",
        }
    }

    pub fn is_neural(self) -> bool {
        matches!(self, ModelKind::Seq2Seq | ModelKind::Seq2SeqVectors)
    }
}

macro_rules! serde_from_str {
    ($($t:ty),*) => {$(
        impl FromStr for $t {
            type Err = anyhow::Error;
            fn from_str(s: &str) -> Result<Self> {
                serde_json::from_value(serde_json::Value::String(s.to_string()))
                    .with_context(|| format!("unknown {} `{s}`", stringify!($t)))
            }
        }
        impl fmt::Display for $t {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                match serde_json::to_value(self) {
                    Ok(serde_json::Value::String(s)) => f.write_str(&s),
                    _ => Err(fmt::Error),
                }
            }
        }
    )*};
}
serde_from_str!(Source, SplitKind, ModelKind, Regime);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub train: Source,
    pub test: Source,
    pub split: SplitKind,
    pub model: ModelKind,
    pub seed: u64,
}

impl ExperimentSpec {
    pub fn new(regime: Regime, split: SplitKind, model: ModelKind, seed: u64) -> ExperimentSpec {
        let (train, test) = regime.sources();
        ExperimentSpec {
            train,
            test,
            split,
            model,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.test != Source::GenPlusPara, "the test source must be gen or para");
        Ok(())
    }
}

/// Generated pairs (anonymized) and paraphrases (concrete), plus the
/// anonymized view of each paraphrase that the logical split and the leak
/// check key on.
#[derive(Debug, Clone)]
pub struct Corpora {
    pub gen: Dataset,
    pub para: Dataset,
    pub para_anonymized: Dataset,
}

impl Corpora {
    pub fn new(gen: Vec<CorpusPair>, para: Vec<CorpusPair>, ont: &Ontology) -> Corpora {
        let anon = para.iter().map(|p| anonymize_pair(p, ont)).collect();
        Corpora {
            gen: Dataset::new(DataOrigin::Generated, gen),
            para: Dataset::new(DataOrigin::Paraphrased, para),
            para_anonymized: Dataset::new(DataOrigin::Paraphrased, anon),
        }
    }

    /// The enumerated mini-grammar corpus and the paraphrase fixture.
    pub fn bundled() -> Result<Corpora> {
        let g = bundled::grammar();
        let gen = enumerate_anonymized(&g)?.pairs;
        Ok(Corpora::new(gen, bundled::paraphrases(), &bundled::ontology()))
    }
}

/// Both corpora with split tags assigned.
#[derive(Debug, Clone)]
pub struct SplitCorpora {
    pub gen: Dataset,
    pub para: Dataset,
    pub para_anonymized: Dataset,
    pub kind: SplitKind,
}

pub fn split_corpora(c: &Corpora, kind: SplitKind, ratios: Ratios, seed: u64) -> Result<SplitCorpora> {
    let (gen, para_anonymized) = match kind {
        SplitKind::Command => (
            split_by_command(&c.gen, ratios, seed)?,
            split_by_command(&c.para_anonymized, ratios, seed)?,
        ),
        SplitKind::Logical => split_by_logical_form(&c.gen, &c.para_anonymized, ratios, seed)?,
    };
    let mut para = c.para.clone();
    para.splits = para_anonymized.splits.clone();
    Ok(SplitCorpora {
        gen,
        para,
        para_anonymized,
        kind,
    })
}

/// Training, validation and test pairs for one experiment.
#[derive(Debug, Clone, Default)]
pub struct Parts {
    pub train: Vec<CorpusPair>,
    pub validation: Vec<CorpusPair>,
    pub test: Vec<CorpusPair>,
}

fn owned(ds: &Dataset, tag: SplitTag) -> Vec<CorpusPair> {
    ds.part(tag).into_iter().cloned().collect()
}

pub fn parts(sc: &SplitCorpora, train: Source, test: Source) -> Parts {
    let mut p = Parts::default();
    if matches!(train, Source::Gen | Source::GenPlusPara) {
        p.train.extend(owned(&sc.gen, SplitTag::Train));
        p.validation.extend(owned(&sc.gen, SplitTag::Validation));
    }
    if matches!(train, Source::Para | Source::GenPlusPara) {
        p.train.extend(owned(&sc.para, SplitTag::Train));
        p.validation.extend(owned(&sc.para, SplitTag::Validation));
    }
    p.test = match test {
        Source::Gen => owned(&sc.gen, SplitTag::Test),
        _ => owned(&sc.para, SplitTag::Test),
    };
    p
}

/// Anonymized forms of the training and validation pairs that also occur in
/// the paraphrase test pool. Empty means no leak.
pub fn leaked_forms(sc: &SplitCorpora, p: &Parts, ont: &Ontology) -> Vec<String> {
    let pool = sc.para_anonymized.form_pool(SplitTag::Test);
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for pair in p.train.iter().chain(&p.validation) {
        let form = anonymize_pair(pair, ont).lf.to_string();
        if pool.contains(&form) && seen.insert(form.clone()) {
            out.push(form);
        }
    }
    out
}

/// Fails if any training form sits in the paraphrase test pool under a
/// logical split. Runs before any model is fit.
pub fn leak_check(sc: &SplitCorpora, p: &Parts, ont: &Ontology) -> Result<()> {
    if sc.kind != SplitKind::Logical {
        return Ok(());
    }
    let leaked = leaked_forms(sc, p, ont);
    if !leaked.is_empty() {
        bail!("{} test form(s) leak into training, first: {}", leaked.len(), leaked[0]);
    }
    Ok(())
}

/// Settings shared by all cells of a run.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub ratios: Ratios,
    pub model: ModelConfig,
    /// Text of the pretrained vector file for `Seq2SeqVectors`.
    pub vectors: String,
    pub knn_k: usize,
}

impl Default for RunSettings {
    fn default() -> RunSettings {
        RunSettings {
            ratios: Ratios::default(),
            model: ModelConfig::desk(),
            vectors: bundled::VECTORS.to_string(),
            knn_k: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub input: String,
    /// Empty when the parser produced nothing.
    pub predicted: String,
    pub gold: String,
    pub correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub spec: ExperimentSpec,
    /// Percentage in [0, 100].
    pub accuracy: f64,
    pub correct: usize,
    pub total: usize,
    pub train_size: usize,
    pub wall_time_secs: f64,
    pub predictions: Vec<Prediction>,
}

/// Runs one experiment end to end.
pub fn run_experiment(
    spec: &ExperimentSpec,
    corpora: &Corpora,
    grammar: &SynchronousGrammar,
    ont: &Ontology,
    settings: &RunSettings,
) -> Result<Evaluation> {
    spec.validate()?;
    let start = Instant::now();
    let sc = split_corpora(corpora, spec.split, settings.ratios, spec.seed)?;
    let p = parts(&sc, spec.train, spec.test);
    leak_check(&sc, &p, ont)?;
    ensure!(!p.test.is_empty(), "the test part is empty");

    let outputs: Vec<Option<LfTokenSeq>> = match spec.model {
        ModelKind::Oracle => p.test.iter().map(|t| oracle_predict(grammar, &t.command).map(|lf| lf.print())).collect(),
        ModelKind::Knn => {
            let ix = KnnIndex::build(p.train.iter().chain(&p.validation), settings.knn_k);
            p.test
                .iter()
                .map(|t| knn_predict(&ix, &t.command).map(|lf| Some(lf.print())))
                .collect::<Result<_, _>>()?
        }
        ModelKind::Seq2Seq | ModelKind::Seq2SeqVectors => {
            let cfg = ModelConfig {
                seed: spec.seed,
                ..settings.model.clone()
            };
            let train_refs: Vec<&CorpusPair> = p.train.iter().collect();
            let val_refs: Vec<&CorpusPair> = p.validation.iter().collect();
            let vectors = (spec.model == ModelKind::Seq2SeqVectors).then_some(settings.vectors.as_str());
            let mut model = build_model(&cfg, &train_refs, vectors)?;
            train(&mut model, &train_refs, &val_refs)?;
            p.test.iter().map(|t| Some(predict(&model, &t.command))).collect()
        }
    };

    let predictions: Vec<Prediction> = p
        .test
        .iter()
        .zip(outputs)
        .map(|(t, out)| {
            let gold = t.lf.print();
            Prediction {
                input: t.command_text(),
                correct: out.as_ref() == Some(&gold),
                predicted: out.map(|o| o.to_string()).unwrap_or_default(),
                gold: gold.to_string(),
            }
        })
        .collect();
    let correct = predictions.iter().filter(|x| x.correct).count();
    Ok(Evaluation {
        spec: *spec,
        accuracy: 100.0 * correct as f64 / predictions.len() as f64,
        correct,
        total: predictions.len(),
        train_size: p.train.len(),
        wall_time_secs: start.elapsed().as_secs_f64(),
        predictions,
    })
}
