//! Small dense-network engine: batched forward passes, exact reverse-mode
//! gradients, Adam and a self-describing file format. Everything is f64.

mod adam;
pub mod io;
mod mlp;

pub use adam::{adam_step, AdamState};
pub use mlp::{Activation, ForwardCache, Gradients, LayerShape, Mlp};

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum NeuralError {
    #[error("bad network shape: {0}")]
    BadShape(String),
    #[error("input of length {got_len} does not hold {batch} rows of width {expected}")]
    DimMismatch { expected: usize, got_len: usize, batch: usize },
    #[error("forward cache does not belong to the current parameters")]
    StaleCache,
    #[error("corrupt network file: {0}")]
    CorruptFile(String),
    #[error("network file version {found} not supported (expected {supported})")]
    VersionMismatch { found: u64, supported: u32 },
    #[error("i/o error: {0}")]
    Io(String),
}

/// `target ← tau · source + (1 − tau) · target`, elementwise.
pub fn soft_update(target: &mut Mlp, source: &Mlp, tau: f64) {
    assert!(target.same_shape(source), "soft update between differently shaped networks");
    for (t, &s) in target.params_mut().iter_mut().zip(source.params()) {
        *t = tau * s + (1.0 - tau) * *t;
    }
}

/// Actor layout: 9 → 64 → 64 → 3 with a tanh output.
pub const ACTOR_ACTIVATIONS: [Activation; 3] = [Activation::Relu, Activation::Relu, Activation::Tanh];
/// Critic layout: 12 → 64 → 64 → 32 → 1 with a linear output.
pub const CRITIC_ACTIVATIONS: [Activation; 4] =
    [Activation::Relu, Activation::Relu, Activation::Relu, Activation::Identity];

pub fn actor_shape(state_dim: usize, action_dim: usize) -> Vec<usize> {
    vec![state_dim, 64, 64, action_dim]
}

pub fn critic_shape(state_dim: usize, action_dim: usize) -> Vec<usize> {
    vec![state_dim + action_dim, 64, 64, 32, 1]
}
