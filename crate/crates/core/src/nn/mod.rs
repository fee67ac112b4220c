//! Tensors, the patch network's layers with exact backward passes, SGD,
//! finite-difference gradient checks and model files.

pub mod activation;
pub mod batchnorm;
pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod network;
pub mod optim;
pub mod pool;
pub mod serialize;
pub mod tensor;

pub use batchnorm::{BatchNorm, Mode};
pub use network::{backward_batch, forward, forward_batch, ForwardTrace, Gradients, NetworkParams, EMBEDDING_DIM, PATCH_SIZE};
pub use optim::{OptimizerState, Sgd};
pub use serialize::{deserialize_params, serialize_params};
pub use tensor::{Real, Tensor};
