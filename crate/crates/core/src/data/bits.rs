//! Row-major bit-packed binary matrix.
//!
//! Each row occupies `words_per_row` 64-bit words, least-significant bit
//! first. Padding bits past `n_cols` are kept at zero so whole-word
//! operations (popcount, equality, serialization) never see garbage.

use crate::error::{Error, Result};

const WORD_BITS: usize = 64;

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct BitMatrix {
    n_rows: usize,
    n_cols: usize,
    words_per_row: usize,
    words: Vec<u64>,
}

impl BitMatrix {
    pub fn zeros(n_rows: usize, n_cols: usize) -> Self {
        let words_per_row = n_cols.div_ceil(WORD_BITS);
        Self {
            n_rows,
            n_cols,
            words_per_row,
            words: vec![0; n_rows * words_per_row],
        }
    }

    /// Packs 0/1 rows. Any non-zero entry is read as 1.
    pub fn pack_rows<R: AsRef<[u8]>>(rows: &[R]) -> Result<Self> {
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        let mut m = Self::zeros(rows.len(), n_cols);
        for (i, row) in rows.iter().enumerate() {
            let row = row.as_ref();
            if row.len() != n_cols {
                return Err(Error::shape(format!(
                    "ragged rows: row {i} has {} entries, expected {n_cols}",
                    row.len()
                )));
            }
            for (j, &v) in row.iter().enumerate() {
                if v != 0 {
                    m.set(i, j, true);
                }
            }
        }
        Ok(m)
    }

    pub fn from_bools(n_rows: usize, n_cols: usize, bits: &[bool]) -> Result<Self> {
        if bits.len() != n_rows * n_cols {
            return Err(Error::shape(format!(
                "{} bits for a {n_rows}x{n_cols} matrix",
                bits.len()
            )));
        }
        let mut m = Self::zeros(n_rows, n_cols);
        for (idx, &b) in bits.iter().enumerate() {
            if b {
                m.set(idx / n_cols, idx % n_cols, true);
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn words_per_row(&self) -> usize {
        self.words_per_row
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> bool {
        assert!(i < self.n_rows && j < self.n_cols, "bit index out of range");
        let w = self.words[i * self.words_per_row + j / WORD_BITS];
        (w >> (j % WORD_BITS)) & 1 == 1
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        assert!(i < self.n_rows && j < self.n_cols, "bit index out of range");
        let w = &mut self.words[i * self.words_per_row + j / WORD_BITS];
        let mask = 1u64 << (j % WORD_BITS);
        if value {
            *w |= mask;
        } else {
            *w &= !mask;
        }
    }

    #[inline]
    pub fn row_words(&self, i: usize) -> &[u64] {
        &self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    /// Mutable access to a row's words. Callers must keep padding bits zero.
    #[inline]
    pub(crate) fn row_words_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.words[i * self.words_per_row..(i + 1) * self.words_per_row]
    }

    pub fn row_bits(&self, i: usize) -> Vec<u8> {
        (0..self.n_cols).map(|j| self.get(i, j) as u8).collect()
    }

    /// Column indices of the set bits in row `i`, ascending.
    pub fn ones_in_row(&self, i: usize) -> OnesIter<'_> {
        OnesIter {
            words: self.row_words(i),
            word_idx: 0,
            current: self.row_words(i).first().copied().unwrap_or(0),
        }
    }

    pub fn count_ones_in_row(&self, i: usize) -> usize {
        self.row_words(i)
            .iter()
            .map(|w| w.count_ones() as usize)
            .sum()
    }

    pub fn hamming(&self, i: usize, other: &BitMatrix, k: usize) -> usize {
        assert_eq!(self.n_cols, other.n_cols);
        self.row_words(i)
            .iter()
            .zip(other.row_words(k))
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum()
    }

    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut out = Self::zeros(rows.len(), self.n_cols);
        for (dst, &src) in rows.iter().enumerate() {
            out.row_words_mut(dst).copy_from_slice(self.row_words(src));
        }
        out
    }

    pub fn push_row_from(&mut self, other: &BitMatrix, row: usize) {
        assert_eq!(self.n_cols, other.n_cols, "column count mismatch");
        self.words.extend_from_slice(other.row_words(row));
        self.n_rows += 1;
    }

    pub fn vstack(parts: &[&BitMatrix]) -> Result<Self> {
        let n_cols = parts.first().map_or(0, |p| p.n_cols);
        let mut out = Self::zeros(0, n_cols);
        for p in parts {
            if p.n_cols != n_cols {
                return Err(Error::shape(format!(
                    "cannot stack {} columns onto {n_cols}",
                    p.n_cols
                )));
            }
            out.words.extend_from_slice(&p.words);
            out.n_rows += p.n_rows;
        }
        Ok(out)
    }

    /// Row `i` as little-endian bytes, `ceil(n_cols / 8)` of them.
    pub fn row_bytes(&self, i: usize) -> Vec<u8> {
        let n_bytes = self.n_cols.div_ceil(8);
        self.row_words(i)
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(n_bytes)
            .collect()
    }

    /// Inverse of [`row_bytes`](Self::row_bytes). Rejects set padding bits.
    pub(crate) fn set_row_bytes(&mut self, i: usize, bytes: &[u8]) -> Result<()> {
        debug_assert_eq!(bytes.len(), self.n_cols.div_ceil(8));
        let n_cols = self.n_cols;
        let words = self.row_words_mut(i);
        for (w, chunk) in words.iter_mut().zip(bytes.chunks(8)) {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            *w = u64::from_le_bytes(buf);
        }
        if let Some(last) = words.last() {
            let used = n_cols % WORD_BITS;
            if used != 0 && last >> used != 0 {
                return Err(Error::shape(format!("row {i} has non-zero padding bits")));
            }
        }
        Ok(())
    }
}

pub struct OnesIter<'a> {
    words: &'a [u64],
    word_idx: usize,
    current: u64,
}

impl Iterator for OnesIter<'_> {
    type Item = usize;

    #[inline]
    fn next(&mut self) -> Option<usize> {
        loop {
            if self.current != 0 {
                let tz = self.current.trailing_zeros() as usize;
                self.current &= self.current - 1;
                return Some(self.word_idx * WORD_BITS + tz);
            }
            self.word_idx += 1;
            if self.word_idx >= self.words.len() {
                return None;
            }
            self.current = self.words[self.word_idx];
        }
    }
}

/// Per-column frequency of ones.
pub fn column_means(z: &BitMatrix) -> Result<Vec<f64>> {
    if z.n_rows() == 0 {
        return Err(Error::EmptyInput("column_means needs at least one row"));
    }
    let counts = column_counts(z);
    let n = z.n_rows() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / n).collect())
}

pub(crate) fn column_counts(z: &BitMatrix) -> Vec<u64> {
    let mut counts = vec![0u64; z.n_cols()];
    for i in 0..z.n_rows() {
        for j in z.ones_in_row(i) {
            counts[j] += 1;
        }
    }
    counts
}
