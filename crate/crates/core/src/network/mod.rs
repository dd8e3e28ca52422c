//! The representation learner: a single affine layer with leaky-ReLU,
//! an optional linear decoder, analytic gradients and the SGD loop.

mod model;
mod train;

pub use model::{
    init_model, Decoder, Gradients, Objective, RdpModel, Task, TrainConfig, DEFAULT_BATCH_SIZE, DEFAULT_LEAKY_SLOPE,
    DEFAULT_LEARNING_RATE,
};
pub use train::{batch_pairs, grad_batch, train, train_seeds, LossParts, LossTrace, Supervision};

#[cfg(test)]
mod tests;
