use std::fs;
use std::io::{self, BufRead, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use gpsr_core::corpus::{CorpusPair, DataOrigin, Dataset, Ratios};
use gpsr_core::grammar::{enumerate_anonymized, sample_pair};
use gpsr_core::metrics::{judge_paraphrase, JudgeThresholds};
use gpsr_core::text::tokenize_command;
use gpsr_core::{anonymize, bundled};
use gpsr_harness::experiment::{
    parts, run_experiment, split_corpora, Corpora, ExperimentSpec, ModelKind, Regime, RunSettings, SplitKind,
};
use gpsr_harness::matrix::{reproduce_matrix, MatrixConfig};
use gpsr_harness::repl::{self, OracleParser, Session};
use gpsr_harness::report::error_report;
use gpsr_neural::{build_model, checkpoint, train, ModelConfig};

#[derive(Parser)]
#[command(name = "gpsr", about = "Command parsing for service robots: corpora, models and experiments")]
struct Cli {
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// TOML file; its meaning depends on the subcommand.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Enumerate the bundled grammar into anonymized pairs.
    Generate {
        /// Also sample this many concrete commands.
        #[arg(long, default_value_t = 0)]
        sample: usize,
    },
    /// Assign train/validation/test tags to both corpora.
    Split {
        #[arg(long, default_value = "command")]
        kind: SplitKind,
        #[arg(long, default_value = "0.7,0.1,0.2")]
        ratios: Ratios,
    },
    /// Train a seq2seq parser and save a checkpoint. `--config` is a model TOML.
    Train {
        #[arg(long, default_value = "gen_gen")]
        regime: Regime,
        #[arg(long, default_value = "command")]
        split: SplitKind,
        #[arg(long)]
        vectors: bool,
    },
    /// Score one model on one regime and split, with an error report.
    Eval {
        #[arg(long, default_value = "oracle")]
        model: ModelKind,
        #[arg(long, default_value = "gen_gen")]
        regime: Regime,
        #[arg(long, default_value = "command")]
        split: SplitKind,
    },
    /// Run the evaluation matrix described by `--config`.
    Matrix,
    /// Interactive parsing with clarification questions.
    Repl {
        /// Seq2seq checkpoint; the grammar parser is used without one.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Anonymize stdin line by line; replacement maps go to stderr as JSON.
    Anonymize,
    /// Judge a TSV of `original<TAB>paraphrase` lines. `--config` sets thresholds.
    Judge { file: PathBuf },
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info,gpsr_core::anonymizer=error")).init();
    let cli = Cli::parse();
    match &cli.cmd {
        Cmd::Generate { sample } => generate(&cli, *sample),
        Cmd::Split { kind, ratios } => split(&cli, *kind, *ratios),
        Cmd::Train { regime, split, vectors } => train_cmd(&cli, *regime, *split, *vectors),
        Cmd::Eval { model, regime, split } => eval(&cli, *model, *regime, *split),
        Cmd::Matrix => matrix(&cli),
        Cmd::Repl { checkpoint } => repl_cmd(checkpoint.as_deref()),
        Cmd::Anonymize => anonymize_cmd(),
        Cmd::Judge { file } => judge(&cli, file),
    }
}

fn write_out(cli: &Cli, name: &str, text: &str) -> Result<PathBuf> {
    fs::create_dir_all(&cli.out).with_context(|| format!("creating {}", cli.out.display()))?;
    let path = cli.out.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(path)
}

fn read_config(cli: &Cli) -> Result<Option<String>> {
    cli.config
        .as_ref()
        .map(|p| fs::read_to_string(p).with_context(|| format!("reading {}", p.display())))
        .transpose()
}

fn model_config(cli: &Cli) -> Result<ModelConfig> {
    let cfg = match read_config(cli)? {
        Some(text) => toml::from_str(&text).context("bad model config")?,
        None => ModelConfig::desk(),
    };
    Ok(ModelConfig { seed: cli.seed, ..cfg })
}

fn generate(cli: &Cli, sample: usize) -> Result<()> {
    let g = bundled::grammar();
    let en = enumerate_anonymized(&g)?;
    let ds = Dataset::new(DataOrigin::Generated, en.pairs);
    let path = write_out(cli, "gen.jsonl", &ds.to_jsonl())?;
    println!("{} pairs -> {}", ds.len(), path.display());
    println!("{}", serde_json::to_string_pretty(&en.stats)?);
    if sample > 0 {
        let ont = bundled::ontology();
        let pairs = (0..sample)
            .map(|i| sample_pair(&g, &ont, cli.seed.wrapping_add(i as u64)))
            .collect::<Result<Vec<_>, _>>()?;
        let samples = Dataset::new(DataOrigin::Generated, pairs);
        let path = write_out(cli, "samples.jsonl", &samples.to_jsonl())?;
        println!("{sample} sampled commands -> {}", path.display());
    }
    Ok(())
}

fn split(cli: &Cli, kind: SplitKind, ratios: Ratios) -> Result<()> {
    let sc = split_corpora(&Corpora::bundled()?, kind, ratios, cli.seed)?;
    write_out(cli, &format!("gen.{kind}.jsonl"), &sc.gen.to_jsonl())?;
    write_out(cli, &format!("para.{kind}.jsonl"), &sc.para.to_jsonl())?;
    let manifest = serde_json::json!({
        "kind": kind,
        "seed": cli.seed,
        "gen": sc.gen.manifest(),
        "para": sc.para_anonymized.manifest(),
    });
    let text = serde_json::to_string_pretty(&manifest)?;
    write_out(cli, &format!("split.{kind}.json"), &text)?;
    println!("{text}");
    Ok(())
}

fn train_cmd(cli: &Cli, regime: Regime, split: SplitKind, vectors: bool) -> Result<()> {
    let cfg = model_config(cli)?;
    let sc = split_corpora(&Corpora::bundled()?, split, Ratios::default(), cli.seed)?;
    let (train_src, test_src) = regime.sources();
    let p = parts(&sc, train_src, test_src);
    gpsr_harness::experiment::leak_check(&sc, &p, &bundled::ontology())?;
    let tr: Vec<&CorpusPair> = p.train.iter().collect();
    let va: Vec<&CorpusPair> = p.validation.iter().collect();
    let mut model = build_model(&cfg, &tr, vectors.then_some(bundled::VECTORS))?;
    let report = train(&mut model, &tr, &va)?;
    fs::create_dir_all(&cli.out)?;
    let ckpt = cli.out.join("model.json");
    checkpoint::save(&model, &ckpt)?;
    write_out(cli, "train_report.json", &serde_json::to_string_pretty(&report)?)?;
    println!(
        "{} epochs ({:?}), best epoch {}, {:.1}s -> {}",
        report.epochs.len(),
        report.stop_reason,
        report.best_epoch,
        report.wall_time_secs,
        ckpt.display()
    );
    Ok(())
}

fn eval(cli: &Cli, model: ModelKind, regime: Regime, split: SplitKind) -> Result<()> {
    let settings = RunSettings {
        model: model_config(cli)?,
        ..RunSettings::default()
    };
    let spec = ExperimentSpec::new(regime, split, model, cli.seed);
    let ev = run_experiment(&spec, &Corpora::bundled()?, &bundled::grammar(), &bundled::ontology(), &settings)?;
    let inputs: Vec<String> = ev.predictions.iter().map(|p| p.input.clone()).collect();
    let preds: Vec<String> = ev.predictions.iter().map(|p| p.predicted.clone()).collect();
    let gold: Vec<String> = ev.predictions.iter().map(|p| p.gold.clone()).collect();
    let report = error_report(&inputs, &preds, &gold);
    write_out(cli, "eval.json", &serde_json::to_string_pretty(&ev)?)?;
    write_out(cli, "errors.json", &serde_json::to_string_pretty(&report)?)?;
    write_out(cli, "errors.txt", &report.to_text())?;
    println!(
        "{} {} {}: {:.1}% ({}/{})",
        model.label(),
        regime.label(),
        split.label(),
        ev.accuracy,
        ev.correct,
        ev.total
    );
    Ok(())
}

fn matrix(cli: &Cli) -> Result<()> {
    let Some(text) = read_config(cli)? else {
        bail!("matrix needs --config <file>, see configs/");
    };
    let cfg = MatrixConfig::from_toml(&text)?;
    let (table, manifest) =
        reproduce_matrix(&cfg, &Corpora::bundled()?, &bundled::grammar(), &bundled::ontology(), &cli.out)?;
    print!("{}", table.to_text());
    println!("{:.1}s, results in {}", manifest.wall_time_secs, cli.out.display());
    Ok(())
}

fn repl_cmd(ckpt: Option<&Path>) -> Result<()> {
    let stdin = io::stdin().lock();
    let stdout = io::stdout().lock();
    let (ont, reg) = (bundled::ontology(), bundled::registry());
    match ckpt {
        Some(path) => {
            let model = checkpoint::load(path)?;
            repl::run(&mut Session::new(model, ont, reg), stdin, stdout)?;
        }
        None => {
            let g = bundled::grammar();
            repl::run(&mut Session::new(OracleParser(&g), ont, reg), stdin, stdout)?;
        }
    }
    Ok(())
}

fn anonymize_cmd() -> Result<()> {
    let ont = bundled::ontology();
    let mut out = io::stdout().lock();
    let mut side = io::stderr().lock();
    for line in io::stdin().lock().lines() {
        let ac = anonymize(&tokenize_command(&line?), &ont);
        writeln!(out, "{}", ac.tokens.join(" "))?;
        writeln!(side, "{}", serde_json::to_string(&ac.replacements)?)?;
    }
    Ok(())
}

fn judge(cli: &Cli, file: &Path) -> Result<()> {
    let thresholds: JudgeThresholds = match read_config(cli)? {
        Some(text) => toml::from_str(&text).context("bad judge thresholds")?,
        None => JudgeThresholds::default(),
    };
    let text = fs::read_to_string(file).with_context(|| format!("reading {}", file.display()))?;
    let mut counts = [0usize; 3];
    for (n, line) in text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty()) {
        let Some((original, paraphrase)) = line.split_once('\t') else {
            bail!("line {}: expected original<TAB>paraphrase", n + 1);
        };
        let j = judge_paraphrase(original, paraphrase, &thresholds);
        counts[j.verdict as usize] += 1;
        println!("{}\t{:?}\t{}\t{:.3}", n + 1, j.verdict, j.levenshtein, j.jaccard_distance);
    }
    eprintln!("too similar {}, too different {}, acceptable {}", counts[0], counts[1], counts[2]);
    Ok(())
}
