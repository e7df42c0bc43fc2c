use super::BmmParams;
use crate::data::RealMatrix;
use crate::error::{Error, Result};

pub const MAX_Q: u8 = 32;

/// Prototypes stored as `q`-bit uniform levels; `pi` is kept in full precision.
#[derive(Debug, Clone, PartialEq)]
pub struct QuantizedBmm {
    k: usize,
    d: usize,
    q: u8,
    levels: Vec<u32>,
    pi: Vec<f64>,
}

impl QuantizedBmm {
    pub(crate) fn from_parts(
        k: usize,
        d: usize,
        q: u8,
        levels: Vec<u32>,
        pi: Vec<f64>,
    ) -> Result<Self> {
        check_q(q)?;
        if levels.len() != k * d || pi.len() != k {
            return Err(Error::shape(format!(
                "{} levels / {} weights for K={k}, D={d}",
                levels.len(),
                pi.len()
            )));
        }
        let max = max_level(q);
        if levels.iter().any(|&l| u64::from(l) > max) {
            return Err(Error::InvalidParameter(format!("level exceeds 2^{q} - 1")));
        }
        Ok(Self {
            k,
            d,
            q,
            levels,
            pi,
        })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    /// Prototype payload size in bits, `K * D * q`.
    pub fn payload_bits(&self) -> u64 {
        (self.k * self.d) as u64 * u64::from(self.q)
    }
}

fn check_q(q: u8) -> Result<()> {
    if !(1..=MAX_Q).contains(&q) {
        return Err(Error::InvalidParameter(format!(
            "prototype precision q={q} outside 1..={MAX_Q}"
        )));
    }
    Ok(())
}

#[inline]
fn max_level(q: u8) -> u64 {
    (1u64 << q) - 1
}

/// `level = round(mu * (2^q - 1))`.
pub fn quantize(params: &BmmParams, q: u8) -> Result<QuantizedBmm> {
    check_q(q)?;
    let scale = max_level(q) as f64;
    let levels = params
        .mu()
        .as_slice()
        .iter()
        .map(|&m| (m * scale).round() as u32)
        .collect();
    Ok(QuantizedBmm {
        k: params.k(),
        d: params.d(),
        q,
        levels,
        pi: params.pi().to_vec(),
    })
}

/// `mu = level / (2^q - 1)`, exactly on the grid; evaluation code applies
/// the probability floor when it takes logarithms.
pub fn dequantize(model: &QuantizedBmm) -> BmmParams {
    let scale = max_level(model.q) as f64;
    let mu = model.levels.iter().map(|&l| f64::from(l) / scale).collect();
    let mu = RealMatrix::from_vec(model.k, model.d, mu).expect("shape checked at construction");
    BmmParams::new_unchecked(mu, model.pi.clone())
}
