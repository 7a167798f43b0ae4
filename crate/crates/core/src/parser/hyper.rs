use serde::{Deserialize, Serialize};

use super::ParserError;

/// Learning rate used when training from scratch.
pub const SCRATCH_LEARNING_RATE: f64 = 1e-3;
/// Learning rate used with an external embedding file.
pub const EXTERNAL_LEARNING_RATE: f64 = 5e-5;
/// Learning rates tried in order until a run converges.
pub const LEARNING_RATE_GRID: [f64; 4] = [5e-5, 1e-5, 5e-6, 1e-6];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyperparams {
    pub embedding_dim: usize,
    pub recurrent_hidden_dim: usize,
    pub recurrent_layers: usize,
    pub projection_dim_edge: usize,
    pub projection_dim_label: usize,
    pub dropout_rate: f64,
    pub learning_rate: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub edge_threshold: f64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            embedding_dim: 100,
            recurrent_hidden_dim: 200,
            recurrent_layers: 2,
            projection_dim_edge: 300,
            projection_dim_label: 150,
            dropout_rate: 0.33,
            learning_rate: SCRATCH_LEARNING_RATE,
            max_epochs: 100,
            patience: 10,
            batch_size: 32,
            seed: 1,
            edge_threshold: 0.5,
        }
    }
}

impl Hyperparams {
    /// Check the ranges of every field. A learning rate of exactly zero is
    /// accepted; such a run simply never moves.
    pub fn validate(&self) -> Result<(), ParserError> {
        let bad = |what: &str| Err(ParserError::InvalidHyperparams(what.to_string()));
        if self.embedding_dim == 0
            || self.recurrent_hidden_dim == 0
            || self.recurrent_layers == 0
            || self.projection_dim_edge == 0
            || self.projection_dim_label == 0
        {
            return bad("all dimensions must be at least 1");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be finite and non-negative");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.edge_threshold > 0.0 && self.edge_threshold < 1.0) {
            return bad("edge_threshold must lie in (0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        Ok(())
    }
}
