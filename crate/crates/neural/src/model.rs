//! The encoder-decoder: embeddings, bidirectional LSTM encoder, bridge,
//! input-feeding LSTM decoder with bilinear attention, and the
//! hand-derived backward pass of the teacher-forced loss.

use gpsr_core::corpus::Vocabulary;
use ndarray::{concatenate, s, Array1, Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::kernel::{add_outer, cell_backward, cell_forward, lstm_backward, lstm_forward, softmax, SeqCache};
use crate::params::Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Seq2SeqModel {
    pub config: ModelConfig,
    pub src_vocab: Vocabulary,
    pub tgt_vocab: Vocabulary,
    /// Frozen source channel, `|src| × frozen_embed_dim`. Never updated.
    pub frozen: Array2<f64>,
    pub params: Params,
}

/// Encoder states and the decoder's initial hidden state.
#[derive(Debug, Clone)]
pub struct Encoded {
    /// `n × 2·encoder_hidden`, forward half first.
    pub states: Array2<f64>,
    /// `states · Wᵀ` for the attention matrix `W`, so scores are `keys · h`.
    pub keys: Array2<f64>,
    pub init: Array1<f64>,
}

/// Recurrent decoder state between steps.
#[derive(Debug, Clone, PartialEq)]
pub struct DecoderState {
    pub h: Array1<f64>,
    pub c: Array1<f64>,
    /// Context vector of the previous step (fed to the next input).
    pub ctx: Array1<f64>,
}

/// Bilinear attention: `score_i = hᵀ W e_i`, softmax weights and the
/// weighted sum of encoder states.
pub fn attend(h: ArrayView1<f64>, states: ArrayView2<f64>, w: ArrayView2<f64>) -> (Array1<f64>, Array1<f64>) {
    let keys = states.dot(&w.t());
    let weights = softmax(keys.dot(&h).view());
    let ctx = weighted_rows(weights.view(), states);
    (ctx, weights)
}

/// `Σ wᵢ · rowᵢ`, walking rows so memory is read contiguously.
fn weighted_rows(w: ArrayView1<f64>, rows: ArrayView2<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(rows.ncols());
    for (wi, r) in w.iter().zip(rows.rows()) {
        out.scaled_add(*wi, &r);
    }
    out
}

/// Per-example output of a teacher-forced pass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossStats {
    /// Summed negative log-likelihood.
    pub nll: f64,
    pub tokens: usize,
    /// Teacher-forced argmax hits.
    pub correct: usize,
}

impl Seq2SeqModel {
    /// Fresh model with uniform initialization from `config.seed`. Pass an
    /// empty `frozen` (`|src| × 0`) when no pretrained vectors are used.
    pub fn new(config: ModelConfig, src_vocab: Vocabulary, tgt_vocab: Vocabulary, frozen: Array2<f64>) -> Seq2SeqModel {
        assert_eq!(frozen.nrows(), src_vocab.len(), "one frozen row per source token");
        let mut config = config;
        config.frozen_embed_dim = frozen.ncols();
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let params = Params::init(&config, src_vocab.len(), tgt_vocab.len(), &mut rng);
        Seq2SeqModel {
            config,
            src_vocab,
            tgt_vocab,
            frozen,
            params,
        }
    }

    pub fn encode_tokens<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        self.src_vocab.encode(tokens)
    }

    /// `[frozen; tunable]` row per token.
    pub fn embed(&self, ids: &[usize]) -> Array2<f64> {
        let (ef, et) = (self.frozen.ncols(), self.config.tunable_embed_dim);
        let mut out = Array2::zeros((ids.len(), ef + et));
        for (t, &id) in ids.iter().enumerate() {
            out.slice_mut(s![t, ..ef]).assign(&self.frozen.row(id));
            out.slice_mut(s![t, ef..]).assign(&self.params.src_embed.row(id));
        }
        out
    }

    fn encode_cached(&self, ids: &[usize]) -> (SeqCache, SeqCache) {
        let x = self.embed(ids);
        let rev = x.slice(s![..;-1, ..]).to_owned();
        (lstm_forward(&self.params.enc_fwd, x), lstm_forward(&self.params.enc_bwd, rev))
    }

    fn bridge_input(fwd: &SeqCache, bwd: &SeqCache) -> Array1<f64> {
        let n = fwd.x.nrows();
        concatenate![Axis(0), fwd.hs.row(n), bwd.hs.row(n)]
    }

    /// Runs the encoder. With `dropout` set, encoder outputs are masked
    /// with inverted dropout drawn from `rng`; the bridge always sees the
    /// undropped final states.
    pub fn encode(&self, ids: &[usize], dropout: Option<&mut ChaCha8Rng>) -> Encoded {
        assert!(!ids.is_empty(), "cannot encode an empty command");
        let (fwd, bwd) = self.encode_cached(ids);
        let mut states = concatenate![Axis(1), fwd.outputs(), bwd.outputs().slice(s![..;-1, ..])];
        if let Some(rng) = dropout {
            let mask = self.dropout_mask(states.raw_dim(), rng);
            states *= &mask;
        }
        let init = (self.params.bridge_w.dot(&Self::bridge_input(&fwd, &bwd)) + &self.params.bridge_b).mapv(f64::tanh);
        let keys = states.dot(&self.params.attn.t());
        Encoded { states, keys, init }
    }

    fn dropout_mask(&self, dim: ndarray::Ix2, rng: &mut ChaCha8Rng) -> Array2<f64> {
        let p = self.config.encoder_dropout;
        if p == 0.0 {
            return Array2::ones(dim);
        }
        let keep = 1.0 / (1.0 - p);
        Array2::from_shape_simple_fn(dim, || if rng.gen::<f64>() < p { 0.0 } else { keep })
    }

    pub fn initial_state(&self, enc: &Encoded) -> DecoderState {
        DecoderState {
            h: enc.init.clone(),
            c: Array1::zeros(self.config.decoder_hidden),
            ctx: Array1::zeros(enc.states.ncols()),
        }
    }

    fn decoder_input(&self, prev: usize, ctx: &Array1<f64>) -> Array1<f64> {
        concatenate![Axis(0), self.params.tgt_embed.row(prev), ctx.view()]
    }

    /// One decoding step: returns the new state and the output
    /// distribution over target tokens.
    pub fn step(&self, st: &DecoderState, prev: usize, enc: &Encoded) -> (DecoderState, Array1<f64>) {
        let p = &self.params;
        let u = self.decoder_input(prev, &st.ctx);
        let z = p.dec.wx.dot(&u) + p.dec.wh.dot(&st.h) + &p.dec.b;
        let cell = cell_forward(z, st.c.view());
        let weights = softmax(enc.keys.dot(&cell.h).view());
        let ctx = weighted_rows(weights.view(), enc.states.view());
        let o = concatenate![Axis(0), cell.h.view(), ctx.view()];
        let probs = softmax((p.out_w.dot(&o) + &p.out_b).view());
        (
            DecoderState {
                h: cell.h,
                c: cell.c,
                ctx,
            },
            probs,
        )
    }

    /// Teacher-forced loss of one pair and its gradient, scaled by
    /// `scale`, added into `grads`. `target` excludes START and END.
    pub fn loss_and_grad(
        &self,
        src: &[usize],
        target: &[usize],
        scale: f64,
        dropout: Option<&mut ChaCha8Rng>,
        grads: &mut Params,
    ) -> LossStats {
        let p = &self.params;
        let cfg = &self.config;
        let (eh, dh, et, ef) = (cfg.encoder_hidden, cfg.decoder_hidden, cfg.tunable_embed_dim, self.frozen.ncols());
        let n = src.len();

        // ---- forward
        let (fwd, bwd) = self.encode_cached(src);
        let raw = concatenate![Axis(1), fwd.outputs(), bwd.outputs().slice(s![..;-1, ..])];
        let mask = match dropout {
            Some(rng) => Some(self.dropout_mask(raw.raw_dim(), rng)),
            None => None,
        };
        let states = match &mask {
            Some(m) => &raw * m,
            None => raw,
        };
        let bridge_in = Self::bridge_input(&fwd, &bwd);
        let init = (p.bridge_w.dot(&bridge_in) + &p.bridge_b).mapv(f64::tanh);
        let keys = states.dot(&p.attn.t());

        let inputs: Vec<usize> = std::iter::once(Vocabulary::START).chain(target.iter().copied()).collect();
        let golds: Vec<usize> = target.iter().copied().chain(std::iter::once(Vocabulary::END)).collect();
        let t_len = inputs.len();
        let cd = 2 * eh;
        // decoder inputs [embedding; previous context], one row per step
        let mut us = Array2::<f64>::zeros((t_len, et + cd));
        for (j, &prev) in inputs.iter().enumerate() {
            us.slice_mut(s![j, ..et]).assign(&p.tgt_embed.row(prev));
        }
        let wx_e = p.dec.wx.slice(s![.., ..et]);
        let wx_c = p.dec.wx.slice(s![.., et..]);
        let pre = us.slice(s![.., ..et]).dot(&wx_e.t()) + &p.dec.b;
        let mut hs = Array2::<f64>::zeros((t_len + 1, dh));
        hs.row_mut(0).assign(&init);
        let mut cs = Array2::<f64>::zeros((t_len + 1, dh));
        let mut gates = Array2::<f64>::zeros((t_len, 4 * dh));
        let mut tanh_cs = Array2::<f64>::zeros((t_len, dh));
        let mut weights = Array2::<f64>::zeros((t_len, n));
        let mut ctxs = Array2::<f64>::zeros((t_len, cd));
        for j in 0..t_len {
            if j > 0 {
                let prev_ctx = ctxs.row(j - 1).to_owned();
                us.slice_mut(s![j, et..]).assign(&prev_ctx);
            }
            let z = &pre.row(j) + &wx_c.dot(&us.slice(s![j, et..])) + p.dec.wh.dot(&hs.row(j));
            let cell = cell_forward(z, cs.row(j));
            let w = softmax(keys.dot(&cell.h).view());
            let ctx = weighted_rows(w.view(), states.view());
            gates.row_mut(j).assign(&cell.gates);
            tanh_cs.row_mut(j).assign(&cell.tanh_c);
            cs.row_mut(j + 1).assign(&cell.c);
            hs.row_mut(j + 1).assign(&cell.h);
            weights.row_mut(j).assign(&w);
            ctxs.row_mut(j).assign(&ctx);
        }
        let outs = concatenate![Axis(1), hs.slice(s![1.., ..]), ctxs];
        let logits = outs.dot(&p.out_w.t()) + &p.out_b;
        let mut dlogits = Array2::<f64>::zeros(logits.raw_dim());
        let mut stats = LossStats {
            nll: 0.0,
            tokens: t_len,
            correct: 0,
        };
        for (j, &gold) in golds.iter().enumerate() {
            let probs = softmax(logits.row(j));
            stats.nll -= probs[gold].max(f64::MIN_POSITIVE).ln();
            let best = probs
                .iter()
                .enumerate()
                .fold((0, f64::NEG_INFINITY), |b, (i, &v)| if v > b.1 { (i, v) } else { b })
                .0;
            stats.correct += usize::from(best == gold);
            let mut d = dlogits.row_mut(j);
            d.assign(&probs);
            d[gold] -= 1.0;
            d *= scale;
        }

        // ---- backward: output layer for all steps at once
        let g = grads;
        g.out_w += &dlogits.t().dot(&outs);
        g.out_b += &dlogits.sum_axis(Axis(0));
        let d_outs = dlogits.dot(&p.out_w);

        // ---- decoder recurrence
        let wh_t = p.dec.wh.t().to_owned();
        let wxc_t = wx_c.t().to_owned();
        let keys_t = keys.t().to_owned();
        let mut dzs = Array2::<f64>::zeros((t_len, 4 * dh));
        let mut d_scores_all = Array2::<f64>::zeros((t_len, n));
        let mut d_ctx_all = Array2::<f64>::zeros((t_len, cd));
        let mut dh_next = Array1::<f64>::zeros(dh);
        let mut dc_next = Array1::<f64>::zeros(dh);
        let mut dctx_next = Array1::<f64>::zeros(cd);
        for j in (0..t_len).rev() {
            let mut d_h = &d_outs.slice(s![j, ..dh]) + &dh_next;
            let d_ctx = &d_outs.slice(s![j, dh..]) + &dctx_next;
            let w = weights.row(j);
            let d_w = states.dot(&d_ctx);
            let dot = w.dot(&d_w);
            let d_scores = &w * &(d_w - dot);
            d_h += &keys_t.dot(&d_scores);
            let (dz, dc_prev) = cell_backward(gates.row(j), cs.row(j), tanh_cs.row(j), d_h.view(), dc_next.view());
            dh_next = wh_t.dot(&dz);
            dc_next = dc_prev;
            dctx_next = wxc_t.dot(&dz);
            dzs.row_mut(j).assign(&dz);
            d_scores_all.row_mut(j).assign(&d_scores);
            d_ctx_all.row_mut(j).assign(&d_ctx);
        }
        g.dec.wx += &dzs.t().dot(&us);
        g.dec.wh += &dzs.t().dot(&hs.slice(s![..t_len, ..]));
        g.dec.b += &dzs.sum_axis(Axis(0));
        let d_emb = dzs.dot(&wx_e);
        for (j, &prev) in inputs.iter().enumerate() {
            g.tgt_embed.row_mut(prev).scaled_add(1.0, &d_emb.row(j));
        }

        // ---- attention: ctx = weightsᵀ·states, scores = keys·h, keys = states·Wᵀ
        let d_keys = d_scores_all.t().dot(&hs.slice(s![1.., ..]));
        g.attn += &d_keys.t().dot(&states);
        let mut d_states = weights.t().dot(&d_ctx_all) + d_keys.dot(&p.attn);

        // ---- bridge
        let d_pre = &dh_next * &init.mapv(|v| 1.0 - v * v);
        add_outer(&mut g.bridge_w, d_pre.view(), bridge_in.view());
        g.bridge_b += &d_pre;
        let d_bridge_in = p.bridge_w.t().dot(&d_pre);

        // ---- encoder
        if let Some(m) = &mask {
            d_states *= m;
        }
        let mut d_fwd = d_states.slice(s![.., ..eh]).to_owned();
        let mut d_bwd = d_states.slice(s![..;-1, eh..]).to_owned();
        d_fwd.row_mut(n - 1).scaled_add(1.0, &d_bridge_in.slice(s![..eh]));
        d_bwd.row_mut(n - 1).scaled_add(1.0, &d_bridge_in.slice(s![eh..]));
        let dx_fwd = lstm_backward(&p.enc_fwd, &fwd, &d_fwd, &mut g.enc_fwd);
        let dx_bwd = lstm_backward(&p.enc_bwd, &bwd, &d_bwd, &mut g.enc_bwd);
        for (t, &id) in src.iter().enumerate() {
            let mut row = g.src_embed.row_mut(id);
            row.scaled_add(1.0, &dx_fwd.slice(s![t, ef..]));
            row.scaled_add(1.0, &dx_bwd.slice(s![n - 1 - t, ef..]));
        }
        stats
    }

    /// Loss only (no gradient), deterministic, no dropout.
    pub fn loss(&self, src: &[usize], target: &[usize]) -> f64 {
        let mut scratch = self.params.zeros_like();
        self.loss_and_grad(src, target, 1.0, None, &mut scratch).nll
    }

    /// Teacher-forced statistics without dropout.
    pub fn teacher_forced(&self, src: &[usize], target: &[usize]) -> LossStats {
        let mut scratch = self.params.zeros_like();
        self.loss_and_grad(src, target, 1.0, None, &mut scratch)
    }

    /// Target ids of a printed form.
    pub fn target_ids<S: AsRef<str>>(&self, tokens: &[S]) -> Vec<usize> {
        self.tgt_vocab.encode(tokens)
    }

    /// Checksum of the frozen channel (FNV over bit patterns).
    pub fn frozen_checksum(&self) -> u64 {
        self.frozen
            .iter()
            .fold(0xcbf29ce484222325u64, |h, v| (h ^ v.to_bits()).wrapping_mul(0x100000001b3))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    pub(crate) fn toy_model(frozen_dim: usize) -> Seq2SeqModel {
        let src = Vocabulary::from_tokens(
            ["<pad>", "<s>", "</s>", "<unk>", "go", "to", "the", "<location>"].map(String::from).to_vec(),
        );
        let tgt = Vocabulary::from_tokens(
            ["<pad>", "<s>", "</s>", "<unk>", "(", ")", "go", "\"", "<location>"].map(String::from).to_vec(),
        );
        let cfg = ModelConfig {
            tunable_embed_dim: 4,
            encoder_hidden: 5,
            decoder_hidden: 6,
            encoder_dropout: 0.0,
            ..ModelConfig::default()
        };
        let frozen = Array2::from_shape_fn((src.len(), frozen_dim), |(i, j)| (i * 3 + j) as f64 * 0.01);
        Seq2SeqModel::new(cfg, src, tgt, frozen)
    }

    #[test]
    fn embed_concatenates_channels() {
        let m = toy_model(0);
        assert_eq!(m.embed(&[4, 5]).ncols(), 4);
        let m = toy_model(3);
        let e = m.embed(&[4]);
        assert_eq!(e.ncols(), 7);
        assert_eq!(e.slice(s![0, ..3]), m.frozen.row(4));
    }

    #[test]
    fn single_encoder_state_gets_all_attention() {
        let m = toy_model(0);
        let enc = m.encode(&[4], None);
        let (ctx, w) = attend(enc.init.view(), enc.states.view(), m.params.attn.view());
        assert_eq!(w.len(), 1);
        assert_abs_diff_eq!(w[0], 1.0, epsilon = 1e-15);
        assert_eq!(ctx, enc.states.row(0));
    }

    #[test]
    fn identical_states_get_uniform_attention() {
        let states = Array2::from_shape_fn((3, 4), |(_, j)| j as f64 * 0.3);
        let w = Array2::from_shape_fn((2, 4), |(i, j)| (i + j) as f64 * 0.1);
        let (_, weights) = attend(ndarray::array![0.2, -0.7].view(), states.view(), w.view());
        for v in weights.iter() {
            assert_abs_diff_eq!(*v, 1.0 / 3.0, epsilon = 1e-12);
        }
    }

    #[test]
    fn length_one_forward_final_is_first_output() {
        let m = toy_model(0);
        let enc = m.encode(&[6], None);
        let (fwd, _) = m.encode_cached(&[6]);
        assert_eq!(enc.states.slice(s![0, ..5]), fwd.hs.row(1));
    }

    #[test]
    fn reversed_input_mirrors_directions_with_tied_weights() {
        // With forward and backward weights made equal, reversing the input
        // mirrors the two halves of the encoder states.
        let mut m = toy_model(0);
        m.params.enc_bwd = m.params.enc_fwd.clone();
        let ids = [4, 5, 6, 7];
        let rev: Vec<usize> = ids.iter().rev().copied().collect();
        let a = m.encode(&ids, None).states;
        let b = m.encode(&rev, None).states;
        let n = ids.len();
        for t in 0..n {
            for k in 0..5 {
                assert_abs_diff_eq!(a[[t, k]], b[[n - 1 - t, 5 + k]], epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn inference_is_pure() {
        let m = toy_model(2);
        let a = m.encode(&[4, 5, 6, 7], None);
        let b = m.encode(&[4, 5, 6, 7], None);
        assert_eq!(a.states, b.states);
        assert_eq!(a.init, b.init);
    }

    #[test]
    fn initial_loss_is_near_uniform() {
        let m = toy_model(0);
        let tgt = m.target_ids(&["(", "go", "\"", "<location>", "\"", ")"]);
        let per_token = m.loss(&[4, 5, 6, 7], &tgt) / (tgt.len() + 1) as f64;
        let uniform = (m.tgt_vocab.len() as f64).ln();
        assert!((per_token - uniform).abs() < 0.2 * uniform, "{per_token} vs {uniform}");
    }
}
