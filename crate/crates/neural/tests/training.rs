use std::time::Instant;

use gpsr_core::bundled;
use gpsr_core::corpus::{CorpusPair, Vocabulary};
use gpsr_core::grammar::enumerate_anonymized;
use gpsr_neural::train::{token_accuracy, Adam, StopReason};
use gpsr_neural::{build_model, checkpoint, decode_beam, decode_greedy, exact_match_rate, train, ModelConfig};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn corpus() -> Vec<CorpusPair> {
    enumerate_anonymized(&bundled::grammar()).unwrap().pairs
}

/// 50 pairs spread over the whole corpus.
fn subset(pairs: &[CorpusPair]) -> Vec<&CorpusPair> {
    let mut idx: Vec<usize> = (0..pairs.len()).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(5));
    idx.truncate(50);
    idx.sort_unstable();
    idx.into_iter().map(|i| &pairs[i]).collect()
}

#[test]
fn overfits_fifty_pairs() {
    let pairs = corpus();
    let sub = subset(&pairs);
    let cfg = ModelConfig::overfit();
    let start = Instant::now();
    let mut model = build_model(&cfg, &sub, None).unwrap();
    let report = train(&mut model, &sub, &sub).unwrap();
    let secs = start.elapsed().as_secs_f64();
    eprintln!("epochs {} in {secs:.1}s", report.epochs.len());
    assert_eq!(report.stop_reason, StopReason::PerfectValidation);
    assert!(report.epochs.len() <= 150);
    assert_eq!(exact_match_rate(&model, &sub), 1.0);
    assert!(secs < 300.0);
}

fn tiny_cfg(seed: u64) -> ModelConfig {
    ModelConfig {
        tunable_embed_dim: 8,
        encoder_hidden: 8,
        decoder_hidden: 12,
        batch_size: 4,
        max_epochs: 3,
        learning_rate: 1e-2,
        seed,
        ..ModelConfig::default()
    }
}

#[test]
fn same_seed_same_weights() {
    let pairs = corpus();
    let sub: Vec<&CorpusPair> = subset(&pairs).into_iter().take(12).collect();
    let run = |seed| {
        let mut m = build_model(&tiny_cfg(seed), &sub, None).unwrap();
        train(&mut m, &sub, &sub[..4]).unwrap();
        m
    };
    let a = run(9);
    let b = run(9);
    let c = run(10);
    assert_eq!(a.params, b.params);
    assert_ne!(a.params, c.params);
}

#[test]
fn adam_leaves_untouched_rows_alone() {
    let pairs = corpus();
    let sub: Vec<&CorpusPair> = subset(&pairs).into_iter().take(6).collect();
    let cfg = tiny_cfg(1);
    let mut model = build_model(&cfg, &sub, None).unwrap();
    let before = model.params.clone();
    let mut adam = Adam::new(&model.params, &cfg);
    for _ in 0..3 {
        let mut grads = model.params.zeros_like();
        for p in &sub {
            let src = model.encode_tokens(&p.command);
            let tgt = model.target_ids(&p.lf_tokens());
            model.loss_and_grad(&src, &tgt, 1.0, None, &mut grads);
        }
        adam.step(&mut model.params, &grads);
    }
    // END is only ever predicted, never fed to the decoder.
    let end = Vocabulary::END;
    assert_eq!(model.params.tgt_embed.row(end), before.tgt_embed.row(end));
    assert_eq!(model.params.src_embed.row(Vocabulary::PAD), before.src_embed.row(Vocabulary::PAD));
    assert_ne!(model.params.out_w, before.out_w);
}

#[test]
fn frozen_channel_survives_training() {
    let pairs = corpus();
    let sub: Vec<&CorpusPair> = subset(&pairs).into_iter().take(10).collect();
    let mut model = build_model(&tiny_cfg(2), &sub, Some(bundled::VECTORS)).unwrap();
    assert_eq!(model.config.frozen_embed_dim, 10);
    let sum = model.frozen_checksum();
    train(&mut model, &sub, &[]).unwrap();
    assert_eq!(model.frozen_checksum(), sum);
}

#[test]
fn token_accuracy_climbs_early_on() {
    // Each k-epoch run is a prefix of the next since training is seeded.
    let pairs = corpus();
    let sub = subset(&pairs);
    let acc: Vec<f64> = (1..=5)
        .map(|k| {
            let cfg = ModelConfig {
                max_epochs: k,
                ..ModelConfig::overfit()
            };
            let mut model = build_model(&cfg, &sub, None).unwrap();
            train(&mut model, &sub, &[]).unwrap();
            token_accuracy(&model, &sub)
        })
        .collect();
    eprintln!("{acc:?}");
    assert!(acc.windows(2).all(|w| w[1] >= w[0]), "{acc:?}");
}

#[test]
fn beam_of_one_is_greedy_and_beam_is_sorted() {
    let pairs = corpus();
    let sub: Vec<&CorpusPair> = subset(&pairs).into_iter().take(12).collect();
    let mut model = build_model(&tiny_cfg(4), &sub, None).unwrap();
    train(&mut model, &sub, &[]).unwrap();
    let words: Vec<String> = model.src_vocab.tokens().to_vec();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let n = rng.gen_range(1..10);
        let cmd: Vec<&str> = (0..n).map(|_| words[rng.gen_range(4..words.len())].as_str()).collect();
        let g = decode_greedy(&model, &cmd, 20);
        let b = decode_beam(&model, &cmd, 1, 20);
        assert_eq!(b[0].tokens, g.tokens);
        let beam = decode_beam(&model, &cmd, 4, 20);
        assert!(beam.windows(2).all(|w| w[0].score >= w[1].score));
    }
}

#[test]
fn checkpoint_round_trip() {
    let pairs = corpus();
    let sub: Vec<&CorpusPair> = subset(&pairs).into_iter().take(5).collect();
    let model = build_model(&tiny_cfg(3), &sub, Some(bundled::VECTORS)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    checkpoint::save(&model, &path).unwrap();
    let back = checkpoint::load(&path).unwrap();
    assert_eq!(back.params, model.params);
    assert_eq!(back.frozen, model.frozen);
    assert_eq!(back.src_vocab, model.src_vocab);
    let cmd = &sub[0].command;
    assert_eq!(decode_beam(&back, cmd, 3, 30), decode_beam(&model, cmd, 3, 30));
    assert!(checkpoint::from_json("{\"format\":\"x\",\"version\":1}").is_err());
}

#[test]
fn rejects_bad_inputs() {
    let pairs = corpus();
    let sub: Vec<&CorpusPair> = subset(&pairs).into_iter().take(3).collect();
    let mut model = build_model(&tiny_cfg(0), &sub, None).unwrap();
    assert!(train(&mut model, &[], &[]).is_err());
    model.config.max_decode_len = 2;
    assert!(train(&mut model, &sub, &[]).is_err());
    let bad = ModelConfig {
        encoder_hidden: 0,
        ..ModelConfig::default()
    };
    assert!(build_model(&bad, &sub, None).is_err());
    for (decay, clip) in [(0.0, 0.0), (1.5, 0.0), (1.0, -1.0)] {
        let bad = ModelConfig {
            lr_decay: decay,
            max_grad_norm: clip,
            ..ModelConfig::default()
        };
        assert!(bad.validate().is_err(), "decay {decay} clip {clip}");
    }
}

#[test]
fn clipping_and_decay_still_learn() {
    let pairs = corpus();
    let sub: Vec<&CorpusPair> = subset(&pairs).into_iter().take(12).collect();
    let cfg = ModelConfig {
        max_epochs: 6,
        lr_decay: 0.9,
        max_grad_norm: 1.0,
        ..tiny_cfg(2)
    };
    let mut model = build_model(&cfg, &sub, None).unwrap();
    let report = train(&mut model, &sub, &[]).unwrap();
    let first = report.epochs.first().unwrap().train_loss;
    let last = report.epochs.last().unwrap().train_loss;
    assert!(last < first, "{first} -> {last}");
}
