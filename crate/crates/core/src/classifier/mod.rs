//! Linear softmax head trained incrementally with replayed rows.

mod linear;
mod optim;
mod train;

pub use linear::{
    evaluate, read_checkpoint, softmax, write_checkpoint, InputKind, LinearClassifier, LossGrad,
};
pub use optim::MomentumSgd;
pub use train::{train_task, InputCodec, TrainConfig};
