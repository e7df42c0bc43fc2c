use std::collections::BTreeMap;

use super::{BitMatrix, RealMatrix};
use crate::error::{Error, Result};

pub type ClassId = u32;

/// Embedding payload: binary latent codes or real-valued features.
#[derive(Debug, Clone, PartialEq)]
pub enum Embeddings {
    Binary(BitMatrix),
    Real(RealMatrix),
}

impl Embeddings {
    pub fn n_rows(&self) -> usize {
        match self {
            Embeddings::Binary(m) => m.n_rows(),
            Embeddings::Real(m) => m.n_rows(),
        }
    }

    pub fn n_cols(&self) -> usize {
        match self {
            Embeddings::Binary(m) => m.n_cols(),
            Embeddings::Real(m) => m.n_cols(),
        }
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        match self {
            Embeddings::Binary(m) => Embeddings::Binary(m.select_rows(rows)),
            Embeddings::Real(m) => Embeddings::Real(m.select_rows(rows)),
        }
    }

    pub fn as_binary(&self) -> Option<&BitMatrix> {
        match self {
            Embeddings::Binary(m) => Some(m),
            Embeddings::Real(_) => None,
        }
    }

    pub fn as_real(&self) -> Option<&RealMatrix> {
        match self {
            Embeddings::Real(m) => Some(m),
            Embeddings::Binary(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledEmbeddings {
    data: Embeddings,
    labels: Vec<ClassId>,
}

impl LabeledEmbeddings {
    pub fn new(data: Embeddings, labels: Vec<ClassId>) -> Result<Self> {
        if labels.len() != data.n_rows() {
            return Err(Error::shape(format!(
                "{} labels for {} rows",
                labels.len(),
                data.n_rows()
            )));
        }
        Ok(Self { data, labels })
    }

    pub fn binary(data: BitMatrix, labels: Vec<ClassId>) -> Result<Self> {
        Self::new(Embeddings::Binary(data), labels)
    }

    pub fn real(data: RealMatrix, labels: Vec<ClassId>) -> Result<Self> {
        Self::new(Embeddings::Real(data), labels)
    }

    pub fn data(&self) -> &Embeddings {
        &self.data
    }

    pub fn labels(&self) -> &[ClassId] {
        &self.labels
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.data.n_cols()
    }

    pub fn into_parts(self) -> (Embeddings, Vec<ClassId>) {
        (self.data, self.labels)
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            data: self.data.select_rows(rows),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
        }
    }

    /// Rows whose label is in `classes`, original order preserved.
    pub fn filter_classes(&self, classes: &[ClassId]) -> Self {
        let rows: Vec<usize> = self
            .labels
            .iter()
            .enumerate()
            .filter(|(_, l)| classes.contains(l))
            .map(|(i, _)| i)
            .collect();
        self.select_rows(&rows)
    }

    /// Sorted distinct class ids.
    pub fn classes(&self) -> Vec<ClassId> {
        let mut c = self.labels.clone();
        c.sort_unstable();
        c.dedup();
        c
    }

    pub fn row_indices_by_class(&self) -> BTreeMap<ClassId, Vec<usize>> {
        let mut map: BTreeMap<ClassId, Vec<usize>> = BTreeMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            map.entry(l).or_default().push(i);
        }
        map
    }
}

/// Partitions a binary dataset by label. Real-valued data is a shape error.
pub fn split_by_class(ds: &LabeledEmbeddings) -> Result<BTreeMap<ClassId, BitMatrix>> {
    let bits = ds
        .data()
        .as_binary()
        .ok_or_else(|| Error::shape("split_by_class needs binary embeddings"))?;
    Ok(ds
        .row_indices_by_class()
        .into_iter()
        .map(|(c, rows)| (c, bits.select_rows(&rows)))
        .collect())
}
