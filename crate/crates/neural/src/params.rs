//! Trainable parameters, visited as named flat slices by the optimizer and
//! the gradient checker.

use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::config::ModelConfig;
use crate::kernel::{uniform, LstmParams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Params {
    /// Tunable source channel, `|src| × tunable_embed_dim`.
    pub src_embed: Array2<f64>,
    pub enc_fwd: LstmParams,
    pub enc_bwd: LstmParams,
    /// `decoder_hidden × 2·encoder_hidden`
    pub bridge_w: Array2<f64>,
    pub bridge_b: Array1<f64>,
    /// `|tgt| × tunable_embed_dim`
    pub tgt_embed: Array2<f64>,
    /// Input is `[previous target embedding; previous context]`.
    pub dec: LstmParams,
    /// Bilinear attention, `decoder_hidden × 2·encoder_hidden`.
    pub attn: Array2<f64>,
    /// `|tgt| × (decoder_hidden + 2·encoder_hidden)`
    pub out_w: Array2<f64>,
    pub out_b: Array1<f64>,
}

impl Params {
    pub fn init(cfg: &ModelConfig, src_vocab: usize, tgt_vocab: usize, rng: &mut impl Rng) -> Params {
        let s = cfg.init_scale;
        let (e, h, d, et) = (cfg.embed_dim(), cfg.encoder_hidden, cfg.decoder_hidden, cfg.tunable_embed_dim);
        let vec = |rng: &mut dyn rand::RngCore, n: usize| Array1::from_shape_simple_fn(n, || rng.gen_range(-s..s));
        let src_embed = uniform(rng, src_vocab, et, cfg.embed_init_scale);
        let enc_fwd = LstmParams::init(rng, e, h, s);
        let enc_bwd = LstmParams::init(rng, e, h, s);
        let bridge_w = uniform(rng, d, 2 * h, s);
        let bridge_b = vec(rng, d);
        let tgt_embed = uniform(rng, tgt_vocab, et, cfg.embed_init_scale);
        let dec = LstmParams::init(rng, et + 2 * h, d, s);
        let attn = uniform(rng, d, 2 * h, s);
        let out_w = uniform(rng, tgt_vocab, d + 2 * h, s);
        let out_b = vec(rng, tgt_vocab);
        Params {
            src_embed,
            enc_fwd,
            enc_bwd,
            bridge_w,
            bridge_b,
            tgt_embed,
            dec,
            attn,
            out_w,
            out_b,
        }
    }

    pub fn zeros_like(&self) -> Params {
        Params {
            src_embed: Array2::zeros(self.src_embed.raw_dim()),
            enc_fwd: self.enc_fwd.zeros_like(),
            enc_bwd: self.enc_bwd.zeros_like(),
            bridge_w: Array2::zeros(self.bridge_w.raw_dim()),
            bridge_b: Array1::zeros(self.bridge_b.raw_dim()),
            tgt_embed: Array2::zeros(self.tgt_embed.raw_dim()),
            dec: self.dec.zeros_like(),
            attn: Array2::zeros(self.attn.raw_dim()),
            out_w: Array2::zeros(self.out_w.raw_dim()),
            out_b: Array1::zeros(self.out_b.raw_dim()),
        }
    }

    pub fn tensors(&self) -> Vec<(&'static str, &[f64])> {
        let p = self;
        vec![
            ("src_embed", p.src_embed.as_slice().expect("standard layout")),
            ("enc_fwd.wx", p.enc_fwd.wx.as_slice().expect("standard layout")),
            ("enc_fwd.wh", p.enc_fwd.wh.as_slice().expect("standard layout")),
            ("enc_fwd.b", p.enc_fwd.b.as_slice().expect("standard layout")),
            ("enc_bwd.wx", p.enc_bwd.wx.as_slice().expect("standard layout")),
            ("enc_bwd.wh", p.enc_bwd.wh.as_slice().expect("standard layout")),
            ("enc_bwd.b", p.enc_bwd.b.as_slice().expect("standard layout")),
            ("bridge_w", p.bridge_w.as_slice().expect("standard layout")),
            ("bridge_b", p.bridge_b.as_slice().expect("standard layout")),
            ("tgt_embed", p.tgt_embed.as_slice().expect("standard layout")),
            ("dec.wx", p.dec.wx.as_slice().expect("standard layout")),
            ("dec.wh", p.dec.wh.as_slice().expect("standard layout")),
            ("dec.b", p.dec.b.as_slice().expect("standard layout")),
            ("attn", p.attn.as_slice().expect("standard layout")),
            ("out_w", p.out_w.as_slice().expect("standard layout")),
            ("out_b", p.out_b.as_slice().expect("standard layout")),
        ]
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut [f64])> {
        let p = self;
        vec![
            ("src_embed", p.src_embed.as_slice_mut().expect("standard layout")),
            ("enc_fwd.wx", p.enc_fwd.wx.as_slice_mut().expect("standard layout")),
            ("enc_fwd.wh", p.enc_fwd.wh.as_slice_mut().expect("standard layout")),
            ("enc_fwd.b", p.enc_fwd.b.as_slice_mut().expect("standard layout")),
            ("enc_bwd.wx", p.enc_bwd.wx.as_slice_mut().expect("standard layout")),
            ("enc_bwd.wh", p.enc_bwd.wh.as_slice_mut().expect("standard layout")),
            ("enc_bwd.b", p.enc_bwd.b.as_slice_mut().expect("standard layout")),
            ("bridge_w", p.bridge_w.as_slice_mut().expect("standard layout")),
            ("bridge_b", p.bridge_b.as_slice_mut().expect("standard layout")),
            ("tgt_embed", p.tgt_embed.as_slice_mut().expect("standard layout")),
            ("dec.wx", p.dec.wx.as_slice_mut().expect("standard layout")),
            ("dec.wh", p.dec.wh.as_slice_mut().expect("standard layout")),
            ("dec.b", p.dec.b.as_slice_mut().expect("standard layout")),
            ("attn", p.attn.as_slice_mut().expect("standard layout")),
            ("out_w", p.out_w.as_slice_mut().expect("standard layout")),
            ("out_b", p.out_b.as_slice_mut().expect("standard layout")),
        ]
    }

    pub fn scale(&mut self, k: f64) {
        for (_, t) in self.tensors_mut() {
            t.iter_mut().for_each(|v| *v *= k);
        }
    }

    /// Euclidean norm over every tensor.
    pub fn norm(&self) -> f64 {
        self.tensors().iter().flat_map(|t| t.1.iter()).map(|x| x * x).sum::<f64>().sqrt()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }
}
