//! Minimal convolutional networks: layers, reverse-mode gradients, Adam and
//! checksummed checkpoints.

mod adam;
mod checkpoint;
mod layer;
mod model;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint};
pub use layer::{Activation, LayerSpec};
pub use model::{Architecture, Gradients, Model, Tape};
pub use tensor::Tensor4;
