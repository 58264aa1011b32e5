//! Multi-level morph detector.
//!
//! The backbone is a stack of `K` stride-2 convolution stages. After each
//! stage an alignment module (global average pooling plus a linear map)
//! projects features to a common width `d`. Stages `1..K-1` feed auxiliary
//! classifiers, the last stage feeds the baseline head, and a point-wise
//! fusion of all aligned features feeds a concatenated head. A bank of `K`
//! discriminators scores the aligned embeddings during training. Stripping
//! keeps only the backbone and the baseline head.

mod checkpoint;
mod disc;
pub mod layers;
mod model;

pub use checkpoint::{load_checkpoint, save_checkpoint, sidecar_path, Checkpoint, CheckpointMeta, FORMAT_VERSION};
pub use disc::{DiscCache, Discriminator, DiscriminatorBank, PROB_CLAMP};
pub use model::{
    baseline_param_count, Backbone, BackboneSpec, ForwardCache, GrlNet, InferenceModel,
    LevelOutputs, OutputGrads, NUM_CLASSES,
};
