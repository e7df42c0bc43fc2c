use rand::seq::index;
use rand::Rng;

use super::ReplaySource;
use crate::data::{BitMatrix, ClassId};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Latent replay baseline: up to `e` real binary embeddings per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LatentReplayBuffer {
    e: usize,
    classes: Vec<(ClassId, BitMatrix)>,
}

impl LatentReplayBuffer {
    pub fn new(e: usize) -> Self {
        Self {
            e,
            classes: Vec::new(),
        }
    }

    pub fn exemplars_per_class(&self) -> usize {
        self.e
    }

    pub fn classes(&self) -> &[(ClassId, BitMatrix)] {
        &self.classes
    }

    pub fn len(&self) -> usize {
        self.classes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.classes.is_empty()
    }

    /// Bits held, one per stored binary feature.
    pub fn stored_bits(&self) -> u64 {
        self.classes
            .iter()
            .map(|(_, z)| (z.n_rows() * z.n_cols()) as u64)
            .sum()
    }

    /// Keeps `min(e, N)` rows of `z` chosen uniformly without replacement.
    pub fn lr_store(
        &mut self,
        class_id: ClassId,
        z: &BitMatrix,
        rng: &mut SeededRng,
    ) -> Result<()> {
        if self.classes.iter().any(|(c, _)| *c == class_id) {
            return Err(Error::DuplicateClass(class_id));
        }
        if let Some((_, first)) = self.classes.first() {
            if first.n_cols() != z.n_cols() {
                return Err(Error::shape(format!(
                    "class {class_id} has D={}, buffer holds D={}",
                    z.n_cols(),
                    first.n_cols()
                )));
            }
        }
        let kept = if z.n_rows() <= self.e {
            z.clone()
        } else {
            let mut rows = index::sample(rng, z.n_rows(), self.e).into_vec();
            rows.sort_unstable();
            z.select_rows(&rows)
        };
        self.classes.push((class_id, kept));
        Ok(())
    }

    /// Draws `n` rows: class uniformly, then a stored row with replacement.
    pub fn lr_replay(&self, n: usize, rng: &mut SeededRng) -> Result<(BitMatrix, Vec<ClassId>)> {
        let d = self.classes.first().map_or(0, |(_, z)| z.n_cols());
        let mut out = BitMatrix::zeros(0, d);
        if n == 0 {
            return Ok((out, Vec::new()));
        }
        let non_empty: Vec<&(ClassId, BitMatrix)> = self
            .classes
            .iter()
            .filter(|(_, z)| z.n_rows() > 0)
            .collect();
        if non_empty.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let mut labels = Vec::with_capacity(n);
        for _ in 0..n {
            let (c, z) = non_empty[rng.random_range(0..non_empty.len())];
            out.push_row_from(z, rng.random_range(0..z.n_rows()));
            labels.push(*c);
        }
        Ok((out, labels))
    }
}

impl ReplaySource for LatentReplayBuffer {
    fn n_classes(&self) -> usize {
        self.len()
    }

    fn replay(&self, n: usize, rng: &mut SeededRng) -> Result<(BitMatrix, Vec<ClassId>)> {
        self.lr_replay(n, rng)
    }
}
