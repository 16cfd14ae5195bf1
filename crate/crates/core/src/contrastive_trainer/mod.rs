//! Symmetric contrastive training of the image and text heads.

mod gradcheck;
mod gradients;
mod loss;
mod train;

pub use gradcheck::{check_gradients, finite_difference_check, BlockCheck, FdOptions, GradCheckReport};
pub use gradients::{backward_gradients, batch_loss, Gradients, PairBatch};
pub use loss::{clip_contrastive_loss, contrastive_loss_and_grad, similarity_matrix};
pub use train::{plan_diversity, train, BatchingMode, EpochPlanner, EpochRecord, TrainConfig, TrainReport};
