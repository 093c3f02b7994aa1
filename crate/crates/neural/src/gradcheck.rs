//! Central finite-difference check of the analytic gradient.

use serde::{Deserialize, Serialize};

use crate::model::Seq2SeqModel;
use crate::NeuralError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorCheck {
    pub name: String,
    pub entries: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorCheck>,
}

impl GradCheckReport {
    pub fn max_rel_error(&self) -> f64 {
        self.tensors.iter().map(|t| t.max_rel_error).fold(0.0, f64::max)
    }
}

/// Relative error `|a - n| / max(|a| + |n|, floor)`. With eps = 1e-5 and a
/// summed loss in the tens, roundoff alone puts about 1e-9 of noise on each
/// numeric derivative, so entries much smaller than the floor would compare
/// noise with noise.
pub fn rel_error(analytic: f64, numeric: f64) -> f64 {
    const FLOOR: f64 = 1e-5;
    (analytic - numeric).abs() / (analytic.abs() + numeric.abs()).max(FLOOR)
}

/// Compares the gradient of the summed loss over `batch` (source ids,
/// target ids) with central differences for every entry of every trainable
/// tensor. Dropout is off. Fails with the first tensor above `tolerance`.
pub fn gradient_check(
    model: &Seq2SeqModel,
    batch: &[(Vec<usize>, Vec<usize>)],
    epsilon: f64,
    tolerance: f64,
) -> Result<GradCheckReport, NeuralError> {
    let mut grads = model.params.zeros_like();
    for (src, tgt) in batch {
        model.loss_and_grad(src, tgt, 1.0, None, &mut grads);
    }
    let loss = |m: &Seq2SeqModel| batch.iter().map(|(s, t)| m.loss(s, t)).sum::<f64>();

    let mut probe = model.clone();
    let names: Vec<&'static str> = model.params.tensors().iter().map(|(n, _)| *n).collect();
    let analytic: Vec<Vec<f64>> = grads.tensors().iter().map(|(_, t)| t.to_vec()).collect();
    let mut report = GradCheckReport { tensors: Vec::new() };
    for (k, name) in names.iter().enumerate() {
        let len = analytic[k].len();
        let mut worst = 0.0f64;
        for i in 0..len {
            let orig = probe.params.tensors()[k].1[i];
            probe.params.tensors_mut()[k].1[i] = orig + epsilon;
            let up = loss(&probe);
            probe.params.tensors_mut()[k].1[i] = orig - epsilon;
            let down = loss(&probe);
            probe.params.tensors_mut()[k].1[i] = orig;
            let numeric = (up - down) / (2.0 * epsilon);
            worst = worst.max(rel_error(analytic[k][i], numeric));
        }
        report.tensors.push(TensorCheck {
            name: name.to_string(),
            entries: len,
            max_rel_error: worst,
        });
        if worst > tolerance {
            return Err(NeuralError::GradientMismatch {
                parameter: name.to_string(),
                max_error: worst,
            });
        }
    }
    Ok(report)
}
