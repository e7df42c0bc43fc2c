use rand::seq::SliceRandom;

use crate::data::ClassId;
use crate::error::{Error, Result};
use crate::rng::{streams, SeededRng};

/// Ordered, disjoint class splits; split 0 is the initial task.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CilScenario {
    class_splits: Vec<Vec<ClassId>>,
    seed: u64,
}

impl CilScenario {
    pub fn new(class_splits: Vec<Vec<ClassId>>, seed: u64) -> Result<Self> {
        if class_splits.is_empty() || class_splits.iter().any(Vec::is_empty) {
            return Err(Error::Config("every task needs at least one class".into()));
        }
        let mut all: Vec<ClassId> = class_splits.iter().flatten().copied().collect();
        all.sort_unstable();
        if let Some(w) = all.windows(2).find(|w| w[0] == w[1]) {
            return Err(Error::DuplicateClass(w[0]));
        }
        Ok(Self { class_splits, seed })
    }

    /// Number of incremental tasks after the initial one.
    pub fn t(&self) -> usize {
        self.class_splits.len() - 1
    }

    pub fn n_tasks(&self) -> usize {
        self.class_splits.len()
    }

    pub fn splits(&self) -> &[Vec<ClassId>] {
        &self.class_splits
    }

    pub fn split(&self, task: usize) -> &[ClassId] {
        &self.class_splits[task]
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// All classes introduced in tasks `0..=task`.
    pub fn seen(&self, task: usize) -> Vec<ClassId> {
        self.class_splits[..=task]
            .iter()
            .flatten()
            .copied()
            .collect()
    }

    /// Maps positional class indices through `ids` (e.g. the sorted class
    /// list of a dataset).
    pub fn relabel(&self, ids: &[ClassId]) -> Result<Self> {
        let splits = self
            .class_splits
            .iter()
            .map(|s| {
                s.iter()
                    .map(|&c| {
                        ids.get(c as usize).copied().ok_or_else(|| {
                            Error::Config(format!("scenario class index {c} out of range"))
                        })
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(splits, self.seed)
    }
}

/// Shuffles `0..n_classes` once with `seed`, puts the first `init_count`
/// classes in task 0 and splits the rest evenly over `t` tasks. With `t = 0`
/// all classes form the single task.
pub fn make_scenario(
    n_classes: usize,
    t: usize,
    init_count: usize,
    seed: u64,
) -> Result<CilScenario> {
    if n_classes == 0 {
        return Err(Error::Config("scenario needs at least one class".into()));
    }
    let mut order: Vec<ClassId> = (0..n_classes as ClassId).collect();
    order.shuffle(&mut SeededRng::substream(seed, streams::SCENARIO));
    if t == 0 {
        return CilScenario::new(vec![order], seed);
    }
    if init_count == 0 || init_count >= n_classes {
        return Err(Error::Config(format!(
            "initial task must hold between 1 and {} classes, got {init_count}",
            n_classes - 1
        )));
    }
    let rest = n_classes - init_count;
    if !rest.is_multiple_of(t) {
        return Err(Error::Config(format!(
            "{rest} remaining classes do not split evenly into {t} tasks"
        )));
    }
    let step = rest / t;
    let mut splits = vec![order[..init_count].to_vec()];
    splits.extend(order[init_count..].chunks(step).map(<[ClassId]>::to_vec));
    CilScenario::new(splits, seed)
}
