use gpsr_core::corpus::Vocabulary;
use gpsr_neural::gradcheck::{gradient_check, rel_error};
use gpsr_neural::{ModelConfig, Seq2SeqModel};
use ndarray::Array2;

fn small_model(frozen_dim: usize, seed: u64) -> Seq2SeqModel {
    let src = Vocabulary::from_tokens(
        ["<pad>", "<s>", "</s>", "<unk>", "bring", "me", "the", "<object>", "from", "<location>"]
            .map(String::from)
            .to_vec(),
    );
    let tgt = Vocabulary::from_tokens(
        ["<pad>", "<s>", "</s>", "<unk>", "(", ")", "bring", "is_a", "$1", "<object>", "<location>"]
            .map(String::from)
            .to_vec(),
    );
    let cfg = ModelConfig {
        tunable_embed_dim: 5,
        encoder_hidden: 8,
        decoder_hidden: 8,
        encoder_dropout: 0.0,
        // larger weights so gates are away from their linear regime
        init_scale: 0.5,
        seed,
        ..ModelConfig::default()
    };
    let frozen = Array2::from_shape_fn((src.len(), frozen_dim), |(i, j)| ((i * 7 + j * 3) % 5) as f64 * 0.1 - 0.2);
    Seq2SeqModel::new(cfg, src, tgt, frozen)
}

fn batch() -> Vec<(Vec<usize>, Vec<usize>)> {
    vec![
        (vec![4, 5, 6, 7, 8, 6, 9], vec![4, 6, 4, 7, 8, 9, 5, 5]),
        (vec![4, 7], vec![4, 6, 9, 5]),
        (vec![3, 9, 9], vec![10]),
    ]
}

#[test]
fn analytic_gradient_matches_central_differences() {
    for seed in [0, 1] {
        let m = small_model(0, seed);
        let report = gradient_check(&m, &batch(), 1e-5, 1e-4).unwrap();
        assert_eq!(report.tensors.len(), 16);
        eprintln!("seed {seed}: max rel error {:e}", report.max_rel_error());
    }
}

#[test]
fn gradient_check_with_frozen_channel() {
    let m = small_model(3, 7);
    let report = gradient_check(&m, &batch(), 1e-5, 1e-4).unwrap();
    assert!(report.max_rel_error() < 1e-4);
}

#[test]
fn attention_on_a_two_token_source() {
    let m = small_model(0, 3);
    let report = gradient_check(&m, &[(vec![4, 7], vec![6, 9])], 1e-5, 1e-4).unwrap();
    let attn = report.tensors.iter().find(|t| t.name == "attn").unwrap();
    assert!(attn.max_rel_error < 1e-4, "{attn:?}");
}

#[test]
fn gradient_check_catches_a_wrong_gradient() {
    assert!(rel_error(1.0, 1.1) > 1e-4);
    assert_eq!(rel_error(0.0, 0.0), 0.0);
    assert!(rel_error(1e-9, -1e-9) < 1e-3);
}
