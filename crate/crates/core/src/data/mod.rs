//! Shared data containers and the embedding file format.

mod bits;
mod dataset;
pub mod io;
mod matrix;

pub(crate) use bits::column_counts;
pub use bits::{column_means, BitMatrix, OnesIter};
pub use dataset::{split_by_class, ClassId, Embeddings, LabeledEmbeddings};
pub use io::{load_embeddings, read_embeddings, save_embeddings, write_embeddings};
pub use matrix::RealMatrix;
