//! The results matrix: every configured (model, regime, split, seed) cell,
//! cached on disk so an interrupted run picks up where it stopped.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::{Context, Result};
use gpsr_core::corpus::Ratios;
use gpsr_core::grammar::SynchronousGrammar;
use gpsr_core::Ontology;
use gpsr_neural::ModelConfig;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::experiment::{run_experiment, Corpora, Evaluation, ExperimentSpec, ModelKind, Regime, RunSettings, SplitKind};

fn default_seeds() -> Vec<u64> {
    vec![0]
}

fn default_ratios() -> String {
    "0.7,0.1,0.2".into()
}

fn default_k() -> usize {
    1
}

/// Declarative description of a matrix run, read from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MatrixConfig {
    #[serde(default)]
    pub name: String,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_ratios")]
    pub ratios: String,
    pub models: Vec<ModelKind>,
    #[serde(default = "all_regimes")]
    pub regimes: Vec<Regime>,
    #[serde(default = "both_splits")]
    pub splits: Vec<SplitKind>,
    #[serde(default = "default_k")]
    pub knn_k: usize,
    /// Vector file for `seq2seq_vectors`; the bundled toy vectors if unset.
    #[serde(default)]
    pub vectors: Option<String>,
    #[serde(default = "ModelConfig::desk")]
    pub model: ModelConfig,
}

fn all_regimes() -> Vec<Regime> {
    Regime::ALL.to_vec()
}

fn both_splits() -> Vec<SplitKind> {
    vec![SplitKind::Command, SplitKind::Logical]
}

impl MatrixConfig {
    pub fn from_toml(text: &str) -> Result<MatrixConfig> {
        let cfg: MatrixConfig = toml::from_str(text).context("bad matrix config")?;
        cfg.ratios()?;
        anyhow::ensure!(!cfg.seeds.is_empty(), "matrix config lists no seeds");
        Ok(cfg)
    }

    pub fn ratios(&self) -> Result<Ratios> {
        self.ratios.parse().map_err(|e| anyhow::anyhow!("ratios `{}`: {e}", self.ratios))
    }

    pub fn columns(&self) -> Vec<(Regime, SplitKind)> {
        self.regimes
            .iter()
            .flat_map(|r| self.splits.iter().map(move |s| (*r, *s)))
            .collect()
    }
}

/// Outcome of one cell and seed, as listed in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellRecord {
    pub model: ModelKind,
    pub regime: Regime,
    pub split: SplitKind,
    pub seed: u64,
    /// Hash of everything the cell's result depends on.
    pub config_hash: String,
    pub accuracy: Option<f64>,
    pub correct: usize,
    pub total: usize,
    pub wall_time_secs: f64,
    pub error: Option<String>,
    /// True when the record was read from the cell cache.
    #[serde(skip)]
    pub cached: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct CachedCell {
    record: CellRecord,
    evaluation: Option<Evaluation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub model: ModelKind,
    pub label: String,
    /// Mean accuracy over seeds, `None` when any seed failed.
    pub cells: Vec<Option<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableColumn {
    pub regime: Regime,
    pub split: SplitKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsTable {
    pub columns: Vec<TableColumn>,
    pub rows: Vec<TableRow>,
}

/// Rounds to one decimal for display and JSON.
fn one_decimal(x: f64) -> f64 {
    (x * 10.0).round() / 10.0
}

impl ResultsTable {
    pub fn to_text(&self) -> String {
        let mut header = vec!["".to_string()];
        header.extend(self.columns.iter().map(|c| format!("{} {}", c.regime.label(), c.split.label())));
        let mut lines = vec![header];
        for r in &self.rows {
            let mut line = vec![r.label.clone()];
            line.extend(r.cells.iter().map(|c| match c {
                Some(v) => format!("{v:.1}"),
                None => "n/a".into(),
            }));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        for l in &lines {
            let mut row = format!("{:<w$}", l[0], w = widths[0]);
            for (cell, w) in l.iter().zip(&widths).skip(1) {
                let _ = write!(row, "  {cell:>w$}");
            }
            out.push_str(row.trim_end());
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rounded = ResultsTable {
            columns: self.columns.clone(),
            rows: self
                .rows
                .iter()
                .map(|r| TableRow {
                    cells: r.cells.iter().map(|c| c.map(one_decimal)).collect(),
                    ..r.clone()
                })
                .collect(),
        };
        serde_json::to_string_pretty(&rounded).expect("table serializes")
    }

    pub fn cell(&self, model: ModelKind, regime: Regime, split: SplitKind) -> Option<f64> {
        let col = self.columns.iter().position(|c| c.regime == regime && c.split == split)?;
        self.rows.iter().find(|r| r.model == model)?.cells[col]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub config_hash: String,
    pub corpus_hash: String,
    pub seeds: Vec<u64>,
    pub cells: Vec<CellRecord>,
    pub wall_time_secs: f64,
}

fn sha_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn corpus_hash(c: &Corpora) -> String {
    sha_hex(format!("{}\n{}", c.gen.to_jsonl(), c.para.to_jsonl()).as_bytes())
}

fn cell_hash(cfg: &MatrixConfig, corpus: &str, vectors: &str, spec: &ExperimentSpec) -> String {
    let mut key = serde_json::json!({
        "spec": spec,
        "ratios": cfg.ratios,
        "corpus": corpus,
    });
    match spec.model {
        ModelKind::Knn => key["knn_k"] = cfg.knn_k.into(),
        ModelKind::Seq2Seq => key["model"] = serde_json::to_value(&cfg.model).expect("config serializes"),
        ModelKind::Seq2SeqVectors => {
            key["model"] = serde_json::to_value(&cfg.model).expect("config serializes");
            key["vectors"] = sha_hex(vectors.as_bytes()).into();
        }
        ModelKind::Oracle => {}
    }
    sha_hex(key.to_string().as_bytes())
}

/// Runs (or loads from `out/cells`) every cell, then writes
/// `results.txt`, `results.json` and `manifest.json` under `out`.
pub fn reproduce_matrix(
    cfg: &MatrixConfig,
    corpora: &Corpora,
    grammar: &SynchronousGrammar,
    ont: &Ontology,
    out: &Path,
) -> Result<(ResultsTable, Manifest)> {
    let start = Instant::now();
    let vectors = match &cfg.vectors {
        Some(path) => fs::read_to_string(path).with_context(|| format!("reading {path}"))?,
        None => gpsr_core::bundled::VECTORS.to_string(),
    };
    let settings = RunSettings {
        ratios: cfg.ratios()?,
        model: cfg.model.clone(),
        vectors: vectors.clone(),
        knn_k: cfg.knn_k,
    };
    let cells_dir = out.join("cells");
    fs::create_dir_all(&cells_dir).with_context(|| format!("creating {}", cells_dir.display()))?;
    let corpus = corpus_hash(corpora);

    let mut records = Vec::new();
    let mut rows = Vec::new();
    for &model in &cfg.models {
        let mut cells = Vec::new();
        for (regime, split) in cfg.columns() {
            let mut accs = Vec::new();
            for &seed in &cfg.seeds {
                let spec = ExperimentSpec::new(regime, split, model, seed);
                let hash = cell_hash(cfg, &corpus, &vectors, &spec);
                let path = cells_dir.join(format!("{model}-{regime}-{split}-s{seed}-{}.json", &hash[..12]));
                let record = match load_cached(&path) {
                    Some(mut r) => {
                        r.cached = true;
                        r
                    }
                    None => {
                        let record = run_cell(&spec, corpora, grammar, ont, &settings, hash, &path)?;
                        log::info!(
                            "{} {} {} seed {seed}: {}",
                            model.label(),
                            regime.label(),
                            split.label(),
                            record.accuracy.map_or_else(|| "failed".to_string(), |a| format!("{a:.1}"))
                        );
                        record
                    }
                };
                accs.push(record.accuracy);
                records.push(record);
            }
            let mean = accs
                .iter()
                .copied()
                .collect::<Option<Vec<f64>>>()
                .map(|v| v.iter().sum::<f64>() / v.len() as f64);
            cells.push(mean);
        }
        rows.push(TableRow {
            model,
            label: model.label().to_string(),
            cells,
        });
    }

    let table = ResultsTable {
        columns: cfg
            .columns()
            .into_iter()
            .map(|(regime, split)| TableColumn { regime, split })
            .collect(),
        rows,
    };
    let manifest = Manifest {
        name: cfg.name.clone(),
        config_hash: sha_hex(toml::to_string(cfg).unwrap_or_default().as_bytes()),
        corpus_hash: corpus,
        seeds: cfg.seeds.clone(),
        cells: records,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    fs::write(out.join("results.txt"), table.to_text())?;
    fs::write(out.join("results.json"), table.to_json())?;
    fs::write(out.join("manifest.json"), serde_json::to_string_pretty(&manifest)?)?;
    Ok((table, manifest))
}

/// A cached cell that failed is run again.
fn load_cached(path: &Path) -> Option<CellRecord> {
    let text = fs::read_to_string(path).ok()?;
    let cell: CachedCell = serde_json::from_str(&text).ok()?;
    cell.record.error.is_none().then_some(cell.record)
}

fn run_cell(
    spec: &ExperimentSpec,
    corpora: &Corpora,
    grammar: &SynchronousGrammar,
    ont: &Ontology,
    settings: &RunSettings,
    config_hash: String,
    path: &Path,
) -> Result<CellRecord> {
    let start = Instant::now();
    let result = run_experiment(spec, corpora, grammar, ont, settings);
    let mut record = CellRecord {
        model: spec.model,
        regime: regime_of(spec),
        split: spec.split,
        seed: spec.seed,
        config_hash,
        accuracy: None,
        correct: 0,
        total: 0,
        wall_time_secs: start.elapsed().as_secs_f64(),
        error: None,
        cached: false,
    };
    let evaluation = match result {
        Ok(ev) => {
            record.accuracy = Some(ev.accuracy);
            record.correct = ev.correct;
            record.total = ev.total;
            Some(ev)
        }
        Err(e) => {
            log::warn!("cell failed: {e:#}");
            record.error = Some(format!("{e:#}"));
            None
        }
    };
    let cached = CachedCell {
        record: record.clone(),
        evaluation,
    };
    fs::write(path, serde_json::to_string(&cached)?).with_context(|| format!("writing {}", path.display()))?;
    Ok(record)
}

fn regime_of(spec: &ExperimentSpec) -> Regime {
    Regime::ALL
        .into_iter()
        .find(|r| r.sources() == (spec.train, spec.test))
        .expect("matrix cells come from regimes")
}

/// Loads the cached evaluation of a cell, predictions included.
pub fn load_cell_evaluation(path: &Path) -> Result<Option<Evaluation>> {
    let cell: CachedCell = serde_json::from_str(&fs::read_to_string(path)?)?;
    Ok(cell.evaluation)
}
