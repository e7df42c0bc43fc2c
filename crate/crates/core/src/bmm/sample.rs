use rand::Rng;

use super::BmmParams;
use crate::data::BitMatrix;
use crate::rng::SeededRng;

/// Draws `n` rows: a component from `pi`, then independent Bernoulli bits
/// from that component's prototype.
pub fn sample(params: &BmmParams, n: usize, rng: &mut SeededRng) -> BitMatrix {
    let mut out = BitMatrix::zeros(n, params.d());
    for i in 0..n {
        let k = draw_categorical(params.pi(), rng);
        sample_row_into(params.prototype(k), rng, &mut out, i);
    }
    out
}

/// Index drawn with probability proportional to `weights`.
pub(crate) fn draw_categorical(weights: &[f64], rng: &mut SeededRng) -> usize {
    let total: f64 = weights.iter().sum();
    let u = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (i, &w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    // rounding left u at or past the final boundary
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

pub(crate) fn sample_row_into(proto: &[f64], rng: &mut SeededRng, out: &mut BitMatrix, row: usize) {
    let words = out.row_words_mut(row);
    for (w, chunk) in words.iter_mut().zip(proto.chunks(64)) {
        let mut word = 0u64;
        for (b, &p) in chunk.iter().enumerate() {
            if rng.random::<f64>() < p {
                word |= 1 << b;
            }
        }
        *w = word;
    }
}
