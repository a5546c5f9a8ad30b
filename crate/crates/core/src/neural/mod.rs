//! Minimal neural-network kernel shared by the skip-profile and audio
//! boundary predictors: dense and convolutional layers, max-pooling, a
//! sigmoid head with binary cross-entropy, SGD/Adam training, parameter
//! serialization, and finite-difference gradient checking. Float64
//! throughout so the gradient checks are dependable.

pub mod arch;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optim;
pub mod tensor;
pub mod train;

pub use arch::{infer_shapes, param_ranges, total_params, LayerSpec};
pub use gradcheck::{finite_difference_check, kink_margin, GradCheckReport};
pub use model::{ModelMeta, ModelParams};
pub use optim::OptimizerKind;
pub use tensor::Tensor;
pub use train::{train, train_layers, TrainConfig, TrainOutcome, TrainSet};
