use std::io::Write;

use serde::Serialize;

use crate::error::Result;

/// Prototype memory `K * D * n_c * q` bits. Mixing weights and bookkeeping
/// are not counted.
pub fn memory_bits_gbm(k: u64, d: u64, n_c: u64, q: u64) -> u64 {
    k * d * n_c * q
}

/// Latent exemplar memory `E * D * n_c` bits (one bit per binary feature).
pub fn memory_bits_lr(e: u64, d: u64, n_c: u64) -> u64 {
    e * d * n_c
}

/// Megabits (10^6 bits) rounded half up to one decimal, e.g.
/// `9_408_000 -> "9.4"`, `16_056_320 -> "16.1"`.
pub fn format_megabits(bits: u64) -> String {
    let tenths = (bits + 50_000) / 100_000;
    format!("{}.{}", tenths / 10, tenths % 10)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MemoryMethod {
    Gbm,
    Lr,
}

/// One line of the memory report CSV.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemoryRow {
    pub method: MemoryMethod,
    #[serde(rename = "K_or_E")]
    pub k_or_e: u64,
    pub q: u64,
    #[serde(rename = "D")]
    pub d: u64,
    pub n_classes: u64,
    pub bits: u64,
    #[serde(rename = "Mb")]
    pub mb: String,
}

impl MemoryRow {
    pub fn gbm(k: u64, q: u64, d: u64, n_classes: u64) -> Self {
        let bits = memory_bits_gbm(k, d, n_classes, q);
        Self {
            method: MemoryMethod::Gbm,
            k_or_e: k,
            q,
            d,
            n_classes,
            bits,
            mb: format_megabits(bits),
        }
    }

    pub fn lr(e: u64, d: u64, n_classes: u64) -> Self {
        let bits = memory_bits_lr(e, d, n_classes);
        Self {
            method: MemoryMethod::Lr,
            k_or_e: e,
            q: 1,
            d,
            n_classes,
            bits,
            mb: format_megabits(bits),
        }
    }
}

pub fn write_memory_report<W: Write>(rows: &[MemoryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}
