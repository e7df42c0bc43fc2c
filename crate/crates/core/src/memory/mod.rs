//! Per-class generative memory, the latent-replay baseline buffer, batch
//! composition and memory accounting.

mod accounting;
mod batch;
mod replay;
mod store;

pub use accounting::{
    format_megabits, memory_bits_gbm, memory_bits_lr, write_memory_report, MemoryMethod, MemoryRow,
};
pub use batch::compose_batch;
pub use replay::LatentReplayBuffer;
pub use store::{read_store, write_store, ClassEntry, ClassWeighting, GbmStore};

use crate::data::{BitMatrix, ClassId};
use crate::error::Result;
use crate::rng::SeededRng;

/// Anything that can produce labeled binary rows for past classes.
pub trait ReplaySource {
    /// Number of distinct classes the source can replay.
    fn n_classes(&self) -> usize;

    fn replay(&self, n: usize, rng: &mut SeededRng) -> Result<(BitMatrix, Vec<ClassId>)>;
}
