//! Mini-batch training with Adam and early stopping on validation exact
//! match.

use std::time::Instant;

use gpsr_core::corpus::{build_vocab, CorpusPair};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::decode::decode_beam;
use crate::model::Seq2SeqModel;
use crate::params::Params;
use crate::vectors::parse_pretrained_vectors;
use crate::NeuralError;

/// Adam with bias correction.
#[derive(Debug, Clone)]
pub struct Adam {
    m: Params,
    v: Params,
    t: i32,
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
}

impl Adam {
    pub fn new(params: &Params, cfg: &ModelConfig) -> Adam {
        Adam {
            m: params.zeros_like(),
            v: params.zeros_like(),
            t: 0,
            lr: cfg.learning_rate,
            beta1: cfg.adam_betas.0,
            beta2: cfg.adam_betas.1,
            eps: cfg.adam_eps,
        }
    }

    pub fn learning_rate(&self) -> f64 {
        self.lr
    }

    pub fn set_learning_rate(&mut self, lr: f64) {
        self.lr = lr;
    }

    pub fn step(&mut self, params: &mut Params, grads: &Params) {
        self.t += 1;
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.t);
        let c2 = 1.0 - b2.powi(self.t);
        let lr = self.lr;
        let eps = self.eps;
        let ps = params.tensors_mut();
        let gs = grads.tensors();
        let ms = self.m.tensors_mut();
        let vs = self.v.tensors_mut();
        for (((p, g), m), v) in ps.into_iter().zip(gs).zip(ms).zip(vs) {
            for i in 0..p.1.len() {
                let gi = g.1[i];
                m.1[i] = b1 * m.1[i] + (1.0 - b1) * gi;
                v.1[i] = b2 * v.1[i] + (1.0 - b2) * gi * gi;
                let mh = m.1[i] / c1;
                let vh = v.1[i] / c2;
                p.1[i] -= lr * mh / (vh.sqrt() + eps);
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochStats {
    pub epoch: usize,
    /// Mean per-token cross-entropy over the epoch.
    pub train_loss: f64,
    /// Teacher-forced per-token accuracy on the training batches.
    pub train_token_accuracy: f64,
    /// Exact match of beam decoding, in [0, 1].
    pub validation_exact_match: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StopReason {
    MaxEpochs,
    Patience,
    PerfectValidation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochStats>,
    /// 1-based epoch whose weights were kept.
    pub best_epoch: usize,
    pub stopped_early: bool,
    pub stop_reason: StopReason,
    pub wall_time_secs: f64,
    pub config: ModelConfig,
}

/// Builds vocabularies from `train` and a freshly initialized model.
/// `vectors` is the text of a pretrained vector file for the frozen
/// channel.
pub fn build_model(cfg: &ModelConfig, train: &[&CorpusPair], vectors: Option<&str>) -> Result<Seq2SeqModel, NeuralError> {
    cfg.validate()?;
    let (src, tgt) = build_vocab(train.iter().copied(), 1);
    let frozen = match vectors {
        Some(text) => parse_pretrained_vectors(text, &src)?,
        None => ndarray::Array2::zeros((src.len(), 0)),
    };
    Ok(Seq2SeqModel::new(cfg.clone(), src, tgt, frozen))
}

/// Fraction of pairs whose top beam hypothesis equals the gold printed
/// form token for token.
pub fn exact_match_rate(model: &Seq2SeqModel, pairs: &[&CorpusPair]) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let hits = pairs
        .iter()
        .filter(|p| {
            let top = decode_beam(model, &p.command, model.config.beam_width, model.config.max_decode_len);
            top.first().is_some_and(|h| h.tokens == p.lf.print())
        })
        .count();
    hits as f64 / pairs.len() as f64
}

/// Teacher-forced per-token accuracy (END included), dropout off.
pub fn token_accuracy(model: &Seq2SeqModel, pairs: &[&CorpusPair]) -> f64 {
    let (mut correct, mut tokens) = (0, 0);
    for p in pairs {
        let src = model.encode_tokens(&p.command);
        if src.is_empty() {
            continue;
        }
        let s = model.teacher_forced(&src, &model.target_ids(&p.lf_tokens()));
        correct += s.correct;
        tokens += s.tokens;
    }
    if tokens == 0 {
        0.0
    } else {
        correct as f64 / tokens as f64
    }
}

/// Trains in place and restores the weights of the best validation epoch.
/// With an empty validation set the last epoch's weights are kept.
pub fn train(model: &mut Seq2SeqModel, train: &[&CorpusPair], validation: &[&CorpusPair]) -> Result<TrainReport, NeuralError> {
    let cfg = model.config.clone();
    cfg.validate()?;
    if train.is_empty() {
        return Err(NeuralError::EmptyTrainSet);
    }
    let examples: Vec<(Vec<usize>, Vec<usize>)> = train
        .iter()
        .filter(|p| !p.command.is_empty())
        .map(|p| (model.encode_tokens(&p.command), model.target_ids(&p.lf_tokens())))
        .collect();
    if examples.is_empty() {
        return Err(NeuralError::EmptyTrainSet);
    }
    let longest = examples.iter().map(|e| e.1.len()).max().unwrap_or(0);
    if cfg.max_decode_len < longest + 2 {
        return Err(NeuralError::InvalidConfig(format!(
            "max_decode_len {} is shorter than the longest target ({longest}) plus 2",
            cfg.max_decode_len
        )));
    }

    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f_7a1e);
    let mut adam = Adam::new(&model.params, &cfg);
    let mut order: Vec<usize> = (0..examples.len()).collect();
    let mut epochs = Vec::new();
    let mut best: Option<(f64, usize, Params)> = None;
    let mut stop_reason = StopReason::MaxEpochs;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let (mut nll, mut tokens, mut correct) = (0.0, 0usize, 0usize);
        for (bi, batch) in order.chunks(cfg.batch_size).enumerate() {
            let batch_tokens: usize = batch.iter().map(|&i| examples[i].1.len() + 1).sum();
            let scale = 1.0 / batch_tokens as f64;
            let mut grads = model.params.zeros_like();
            for &i in batch {
                let (src, tgt) = &examples[i];
                let drop = (cfg.encoder_dropout > 0.0).then_some(&mut rng);
                let s = model.loss_and_grad(src, tgt, scale, drop, &mut grads);
                nll += s.nll;
                tokens += s.tokens;
                correct += s.correct;
            }
            if !nll.is_finite() || !grads.is_finite() {
                return Err(NeuralError::NaNLoss { epoch, batch: bi });
            }
            if cfg.max_grad_norm > 0.0 {
                let norm = grads.norm();
                if norm > cfg.max_grad_norm {
                    grads.scale(cfg.max_grad_norm / norm);
                }
            }
            adam.step(&mut model.params, &grads);
        }
        adam.set_learning_rate(adam.learning_rate() * cfg.lr_decay);
        let val = if validation.is_empty() {
            0.0
        } else {
            exact_match_rate(model, validation)
        };
        let stats = EpochStats {
            epoch,
            train_loss: nll / tokens as f64,
            train_token_accuracy: correct as f64 / tokens as f64,
            validation_exact_match: val,
        };
        log::info!(
            "epoch {epoch}: loss {:.4} token acc {:.3} val em {:.3}",
            stats.train_loss,
            stats.train_token_accuracy,
            val
        );
        epochs.push(stats);
        if validation.is_empty() {
            continue;
        }
        if best.as_ref().is_none_or(|b| val > b.0) {
            best = Some((val, epoch, model.params.clone()));
        }
        let best_epoch = best.as_ref().map_or(epoch, |b| b.1);
        if cfg.stop_when_perfect && val >= 1.0 {
            stop_reason = StopReason::PerfectValidation;
            break;
        }
        if epoch - best_epoch >= cfg.patience {
            stop_reason = StopReason::Patience;
            break;
        }
    }
    let best_epoch = match best {
        Some((_, e, params)) => {
            model.params = params;
            e
        }
        None => epochs.len(),
    };
    Ok(TrainReport {
        epochs,
        best_epoch,
        stopped_early: stop_reason == StopReason::Patience,
        stop_reason,
        wall_time_secs: start.elapsed().as_secs_f64(),
        config: cfg,
    })
}
