use serde::{Deserialize, Serialize};

use crate::NeuralError;

/// Architecture and training hyperparameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub tunable_embed_dim: usize,
    /// Width of the frozen channel; 0 when no vectors are loaded.
    pub frozen_embed_dim: usize,
    /// Per direction.
    pub encoder_hidden: usize,
    pub decoder_hidden: usize,
    pub encoder_dropout: f64,
    pub beam_width: usize,
    pub max_decode_len: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub adam_betas: (f64, f64),
    pub adam_eps: f64,
    /// Learning rate is multiplied by this after every epoch; 1 keeps it fixed.
    pub lr_decay: f64,
    /// Rescale the whole gradient when its norm exceeds this; 0 disables.
    pub max_grad_norm: f64,
    /// Half-width of the uniform initializer.
    pub init_scale: f64,
    /// Half-width for the two tunable embedding tables. Wider than
    /// `init_scale` so distinct words start out distinguishable.
    pub embed_init_scale: f64,
    /// Stop as soon as validation exact match reaches 100%. Patience would
    /// stop later with the same restored weights.
    pub stop_when_perfect: bool,
    pub seed: u64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            tunable_embed_dim: 100,
            frozen_embed_dim: 0,
            encoder_hidden: 256,
            decoder_hidden: 256,
            encoder_dropout: 0.1,
            beam_width: 5,
            max_decode_len: 80,
            max_epochs: 150,
            patience: 10,
            batch_size: 32,
            learning_rate: 1e-3,
            adam_betas: (0.9, 0.999),
            adam_eps: 1e-8,
            lr_decay: 1.0,
            max_grad_norm: 0.0,
            init_scale: 0.08,
            embed_init_scale: 0.08,
            stop_when_perfect: false,
            seed: 0,
        }
    }
}

impl ModelConfig {
    /// Small model for quick runs on a laptop CPU.
    pub fn desk() -> ModelConfig {
        ModelConfig {
            tunable_embed_dim: 32,
            encoder_hidden: 48,
            decoder_hidden: 64,
            batch_size: 8,
            learning_rate: 3e-3,
            embed_init_scale: 2.0,
            stop_when_perfect: true,
            ..ModelConfig::default()
        }
    }

    /// Desk sizes tuned for memorizing a few dozen pairs: smaller batches
    /// and no patience cut-off before the epoch budget runs out.
    pub fn overfit() -> ModelConfig {
        ModelConfig {
            batch_size: 4,
            patience: 150,
            ..ModelConfig::desk()
        }
    }

    pub fn embed_dim(&self) -> usize {
        self.frozen_embed_dim + self.tunable_embed_dim
    }

    pub fn validate(&self) -> Result<(), NeuralError> {
        let dims = [
            ("tunable_embed_dim", self.tunable_embed_dim),
            ("encoder_hidden", self.encoder_hidden),
            ("decoder_hidden", self.decoder_hidden),
            ("beam_width", self.beam_width),
            ("max_decode_len", self.max_decode_len),
            ("batch_size", self.batch_size),
        ];
        for (name, v) in dims {
            if v == 0 {
                return Err(NeuralError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if !(0.0..1.0).contains(&self.encoder_dropout) {
            return Err(NeuralError::InvalidConfig("encoder_dropout must be in [0, 1)".into()));
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return Err(NeuralError::InvalidConfig("lr_decay must be in (0, 1]".into()));
        }
        if self.max_grad_norm < 0.0 {
            return Err(NeuralError::InvalidConfig("max_grad_norm must be nonnegative".into()));
        }
        if self.learning_rate <= 0.0 || self.adam_eps <= 0.0 {
            return Err(NeuralError::InvalidConfig("learning rate and epsilon must be positive".into()));
        }
        Ok(())
    }
}
