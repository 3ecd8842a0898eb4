//! Convolutional device identifier with manual backpropagation, and a
//! nearest-centroid baseline.

pub mod arch;
pub mod centroid;
pub mod checkpoint;
pub mod model;
pub mod train;

pub use arch::{CnnConfig, CONV_BLOCKS, FC_LAYERS};
pub use centroid::{cosine, CentroidModel};
pub use checkpoint::{
    load_checkpoint, read_checkpoint, save_checkpoint, write_checkpoint, CHECKPOINT_MAGIC,
    CHECKPOINT_VERSION,
};
pub use model::{argmax, softmax, Cnn, ConvBlock, Dense, ForwardCache, Gradients, Mode};
pub use train::{predict_all, train, Adam, TrainConfig, TrainHistory};
