//! Projection-head training over frozen embeddings with rewrite augmentation.

mod checkpoint;
mod head;
mod loss;
mod optim;
mod sampler;
mod train;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_MAGIC};
pub use head::{HeadGrad, Projection, ProjectionHead};
pub use loss::{contrastive_loss, LossOutput};
pub use optim::{Optimizer, OptimizerKind};
pub use sampler::{sample_index, sample_positive, AugmentationPool};
pub use train::{train, write_log_csv, AlignedPair, EpochLog, TrainConfig, TrainOutcome};
