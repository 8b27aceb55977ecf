//! Minimal differentiable network engine: the layer kinds, loss, optimizer
//! and early-stopping training loop the catalogued architectures need.

mod adam;
mod layer;
mod loss;
mod network;
mod tensor;
mod train;

pub use adam::{adam_step, AdamState};
pub use layer::{CellActivation, LayerSpec, BN_EPSILON, BN_MOMENTUM};
pub use loss::{bce_grad, bce_loss, PROB_CLAMP};
pub use network::{Network, NetworkSpec, Tape};
pub use tensor::Tensor;
pub use train::{
    evaluate_loss, train, train_with_init, EarlyStopping, SampleSet, StopDecision, TrainConfig, TrainedNet,
};
pub(crate) use train::{read_f64s, read_header_line, write_f64s};
