//! Greedy and beam-search decoding.

use gpsr_core::corpus::Vocabulary;
use gpsr_core::LfTokenSeq;

use crate::model::{DecoderState, Seq2SeqModel};

/// A decoded token sequence (without START/END).
#[derive(Debug, Clone, PartialEq)]
pub struct Hypothesis {
    pub tokens: LfTokenSeq,
    /// Sum of token log-probabilities, END included when finished.
    pub log_prob: f64,
    /// `log_prob` divided by the number of scored tokens.
    pub score: f64,
    pub finished: bool,
}

fn to_tokens(model: &Seq2SeqModel, ids: &[usize]) -> LfTokenSeq {
    LfTokenSeq(ids.iter().map(|&i| model.tgt_vocab.token(i).to_string()).collect())
}

fn argmax(p: &ndarray::Array1<f64>) -> usize {
    // first maximum wins
    let mut best = 0;
    for (i, &v) in p.iter().enumerate() {
        if v > p[best] {
            best = i;
        }
    }
    best
}

/// Argmax decoding until END or `max_len` tokens.
pub fn decode_greedy<S: AsRef<str>>(model: &Seq2SeqModel, command: &[S], max_len: usize) -> Hypothesis {
    let ids = model.encode_tokens(command);
    if ids.is_empty() {
        return Hypothesis {
            tokens: LfTokenSeq(vec![]),
            log_prob: f64::NEG_INFINITY,
            score: f64::NEG_INFINITY,
            finished: false,
        };
    }
    let enc = model.encode(&ids, None);
    let mut st = model.initial_state(&enc);
    let mut prev = Vocabulary::START;
    let mut out = Vec::new();
    let mut log_prob = 0.0;
    let mut finished = false;
    for _ in 0..max_len {
        let (next, probs) = model.step(&st, prev, &enc);
        let tok = argmax(&probs);
        log_prob += probs[tok].ln();
        st = next;
        if tok == Vocabulary::END {
            finished = true;
            break;
        }
        out.push(tok);
        prev = tok;
    }
    let scored = out.len() + usize::from(finished);
    Hypothesis {
        tokens: to_tokens(model, &out),
        log_prob,
        score: log_prob / scored.max(1) as f64,
        finished,
    }
}

struct Live {
    ids: Vec<usize>,
    log_prob: f64,
    state: DecoderState,
}

/// Beam search. Each step keeps the `width` best extensions by cumulative
/// log-probability; extensions ending in END are set aside as finished.
/// Search stops once `width` hypotheses have finished, nothing is live, or
/// `max_len` tokens were produced. Results are ranked by length-normalized
/// score, best first; if nothing finished, the live hypotheses are
/// returned instead.
pub fn decode_beam<S: AsRef<str>>(model: &Seq2SeqModel, command: &[S], width: usize, max_len: usize) -> Vec<Hypothesis> {
    let width = width.max(1);
    let ids = model.encode_tokens(command);
    if ids.is_empty() {
        return vec![decode_greedy(model, command, max_len)];
    }
    let enc = model.encode(&ids, None);
    let mut live = vec![Live {
        ids: vec![],
        log_prob: 0.0,
        state: model.initial_state(&enc),
    }];
    let mut finished: Vec<Hypothesis> = Vec::new();
    for _ in 0..max_len {
        // (log_prob, parent, token)
        let mut cands: Vec<(f64, usize, usize)> = Vec::new();
        let mut next_states = Vec::with_capacity(live.len());
        for (pi, h) in live.iter().enumerate() {
            let prev = h.ids.last().copied().unwrap_or(Vocabulary::START);
            let (st, probs) = model.step(&h.state, prev, &enc);
            let mut order: Vec<usize> = (0..probs.len()).collect();
            order.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]).then(a.cmp(&b)));
            for &tok in order.iter().take(width) {
                cands.push((h.log_prob + probs[tok].ln(), pi, tok));
            }
            next_states.push(st);
        }
        cands.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2)));
        cands.truncate(width);
        let mut next_live = Vec::new();
        for (lp, pi, tok) in cands {
            if tok == Vocabulary::END {
                let ids = &live[pi].ids;
                finished.push(Hypothesis {
                    tokens: to_tokens(model, ids),
                    log_prob: lp,
                    score: lp / (ids.len() + 1) as f64,
                    finished: true,
                });
            } else {
                let mut ids = live[pi].ids.clone();
                ids.push(tok);
                next_live.push(Live {
                    ids,
                    log_prob: lp,
                    state: next_states[pi].clone(),
                });
            }
        }
        live = next_live;
        if live.is_empty() || finished.len() >= width {
            break;
        }
    }
    let mut out = if finished.is_empty() {
        live.into_iter()
            .map(|h| Hypothesis {
                score: h.log_prob / h.ids.len().max(1) as f64,
                tokens: to_tokens(model, &h.ids),
                log_prob: h.log_prob,
                finished: false,
            })
            .collect()
    } else {
        finished
    };
    // stable: equal scores keep discovery order
    out.sort_by(|a, b| b.score.total_cmp(&a.score));
    out
}

/// Top beam hypothesis with the model's configured width and length.
pub fn predict<S: AsRef<str>>(model: &Seq2SeqModel, command: &[S]) -> LfTokenSeq {
    decode_beam(model, command, model.config.beam_width, model.config.max_decode_len)
        .into_iter()
        .next()
        .map(|h| h.tokens)
        .unwrap_or_else(|| LfTokenSeq(vec![]))
}
