//! Fully-connected softplus networks: evaluation, input gradients, training,
//! weight files, and IDX/synthetic data ingestion.

mod dataset;
mod idx;
mod network;
mod train;
mod weights;

pub use dataset::{synthetic_blobs, Dataset, SyntheticSpec};
pub use idx::{load_idx, read_idx_images, read_idx_labels, write_idx_images, write_idx_labels};
pub use network::{softmax, softplus, Activation, DenseNetwork, Layer, QoiSpec, ScoreKind};
pub use train::{accuracy, train_sgd, TrainConfig, TrainOutcome};
pub use weights::{load_weights, read_weights, save_weights, write_weights, WEIGHTS_MAGIC};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetError {
    #[error("input dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("layer {layer} expects {expected} inputs but the previous layer produces {actual}")]
    LayerChain {
        layer: usize,
        expected: usize,
        actual: usize,
    },
    #[error("the final layer must use the identity activation")]
    FinalActivation,
    #[error("network has no layers")]
    NoLayers,
    #[error("non-finite value in {0}")]
    NonFinite(String),
    #[error("class index {class} out of range for {classes} classes")]
    InvalidClass { class: usize, classes: usize },
    #[error("invalid architecture: {0}")]
    InvalidArchitecture(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("training diverged at epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("bad magic: expected {expected}, found {found}")]
    BadMagic { expected: String, found: String },
    #[error("file truncated in {section}")]
    Truncated { section: String },
    #[error("inconsistent dimensions in {0}")]
    Inconsistent(String),
    #[error("unknown activation code {code} in layer {layer}")]
    UnknownActivation { layer: usize, code: u8 },
    #[error("image count {images} does not match label count {labels}")]
    CountMismatch { images: usize, labels: usize },
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
