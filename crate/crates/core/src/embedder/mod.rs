//! Patch embedding: an augmented convolutional autoencoder, plus a fixed
//! hand-built descriptor used as a training-free baseline.

pub mod augment;
pub mod descriptor;
mod invariance;
mod model;
pub mod net;
mod train;

use thiserror::Error;

pub use augment::{canonicalize, make_augmented_pair, AugmentationSpec, AugmentedPair};
pub use descriptor::descriptor_embed;
pub use invariance::{cyclic_translate, translate_invariance_fraction};
pub use model::{embed, embed_all, EmbedderKind, EmbedderModel, EmbeddingVector};
pub use net::Architecture;
pub use train::{train_autoencoder, train_on_patches, TrainConfig, TrainingLog, MIN_TRAINING_PATCHES};

#[derive(Debug, Error, PartialEq)]
pub enum EmbedderError {
    #[error("embedder has no trained weights")]
    UntrainedModel,
    #[error("{got} candidates are too few to train the autoencoder (need {need})")]
    TooFewCandidates { got: usize, need: usize },
    #[error("training diverged at epoch {epoch}, step {step}")]
    DivergedTraining { epoch: usize, step: usize },
    #[error("embedding of patch {0} is not finite")]
    NonFiniteEmbedding(usize),
    #[error("invalid embedder config: {0}")]
    InvalidConfig(String),
    #[error("malformed model file: {0}")]
    BadModelFile(String),
    #[error("model I/O failed: {0}")]
    Io(String),
}
