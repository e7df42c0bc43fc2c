//! Model serialization.
//!
//! ```text
//! "GBMM" | u32 K | u32 D | u8 q | K x f64 pi | payload
//! ```
//! With `q = 0` the payload is `K * D` f64 prototype entries. Otherwise the
//! `K * D` levels are packed as a `q`-bit LSB-first bitstream, zero padded to
//! a byte boundary. Everything is little-endian.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{BmmParams, QuantizedBmm, MAX_Q};
use crate::data::io::{eof, read_magic, to_u32};
use crate::data::RealMatrix;
use crate::error::{Error, ParseError, Result};

pub const MODEL_MAGIC: [u8; 4] = *b"GBMM";

#[derive(Debug, Clone, PartialEq)]
pub enum StoredModel {
    Real(BmmParams),
    Quantized(QuantizedBmm),
}

pub fn write_params<W: Write>(params: &BmmParams, mut w: W) -> Result<()> {
    write_header(&mut w, params.k(), params.d(), 0, params.pi())?;
    for &m in params.mu().as_slice() {
        w.write_f64::<LittleEndian>(m)?;
    }
    Ok(())
}

pub fn write_quantized<W: Write>(model: &QuantizedBmm, mut w: W) -> Result<()> {
    write_header(&mut w, model.k(), model.d(), model.q(), model.pi())?;
    w.write_all(&pack_levels(model.levels(), model.q()))?;
    Ok(())
}

pub fn write_model<W: Write>(model: &StoredModel, w: W) -> Result<()> {
    match model {
        StoredModel::Real(p) => write_params(p, w),
        StoredModel::Quantized(q) => write_quantized(q, w),
    }
}

fn write_header<W: Write>(w: &mut W, k: usize, d: usize, q: u8, pi: &[f64]) -> Result<()> {
    w.write_all(&MODEL_MAGIC)?;
    w.write_u32::<LittleEndian>(to_u32(k, "K")?)?;
    w.write_u32::<LittleEndian>(to_u32(d, "D")?)?;
    w.write_u8(q)?;
    for &p in pi {
        w.write_f64::<LittleEndian>(p)?;
    }
    Ok(())
}

pub fn read_model<R: Read>(mut r: R) -> Result<StoredModel> {
    read_magic(&mut r, MODEL_MAGIC)?;
    let k = r.read_u32::<LittleEndian>().map_err(eof("K"))? as usize;
    let d = r.read_u32::<LittleEndian>().map_err(eof("D"))? as usize;
    let q = r.read_u8().map_err(eof("q"))?;
    if q > MAX_Q {
        return Err(ParseError::Header(format!("q={q} exceeds {MAX_Q}")).into());
    }
    if k == 0 {
        return Err(ParseError::Header("K=0".into()).into());
    }
    let mut pi = vec![0f64; k];
    r.read_f64_into::<LittleEndian>(&mut pi)
        .map_err(eof("pi"))?;
    if q == 0 {
        let mut mu = vec![0f64; k * d];
        r.read_f64_into::<LittleEndian>(&mut mu)
            .map_err(eof("prototypes"))?;
        let params = BmmParams::new(RealMatrix::from_vec(k, d, mu)?, pi)
            .map_err(|e| ParseError::Dimension(e.to_string()))?;
        Ok(StoredModel::Real(params))
    } else {
        let n_bytes = (k * d * q as usize).div_ceil(8);
        let mut buf = vec![0u8; n_bytes];
        r.read_exact(&mut buf).map_err(eof("levels"))?;
        let levels = unpack_levels(&buf, k * d, q);
        let model = QuantizedBmm::from_parts(k, d, q, levels, pi)
            .map_err(|e| Error::from(ParseError::Dimension(e.to_string())))?;
        Ok(StoredModel::Quantized(model))
    }
}

fn pack_levels(levels: &[u32], q: u8) -> Vec<u8> {
    let q = q as usize;
    let mut out = vec![0u8; (levels.len() * q).div_ceil(8)];
    let mut pos = 0usize;
    for &l in levels {
        for b in 0..q {
            if (l >> b) & 1 == 1 {
                out[pos / 8] |= 1 << (pos % 8);
            }
            pos += 1;
        }
    }
    out
}

fn unpack_levels(bytes: &[u8], count: usize, q: u8) -> Vec<u32> {
    let q = q as usize;
    let mut pos = 0usize;
    (0..count)
        .map(|_| {
            let mut l = 0u32;
            for b in 0..q {
                if (bytes[pos / 8] >> (pos % 8)) & 1 == 1 {
                    l |= 1 << b;
                }
                pos += 1;
            }
            l
        })
        .collect()
}
