//! Thermometer (unary) coding of features in `[0, 1]`.
//!
//! A feature quantized to level `v` out of `p` becomes `p` bits whose first
//! `v` are ones. Decoding averages each `p`-bit segment, which is defined for
//! any bit pattern, not just valid thermocodes.

use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::data::io::{eof, read_magic, to_u32};
use crate::data::{BitMatrix, RealMatrix};
use crate::error::{Error, ParseError, Result};

pub const CODEC_MAGIC: [u8; 4] = *b"GBMT";

const LOW_PERCENTILE: f64 = 0.01;
const HIGH_PERCENTILE: f64 = 0.99;

/// Per-feature clipping range mapped onto `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RangeCalibration {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl RangeCalibration {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::shape(format!(
                "{} lower vs {} upper bounds",
                lo.len(),
                hi.len()
            )));
        }
        if let Some(j) = lo
            .iter()
            .zip(&hi)
            .position(|(l, h)| !(l < h) || !l.is_finite() || !h.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "feature {j}: need finite lo < hi, got ({}, {})",
                lo[j], hi[j]
            )));
        }
        Ok(Self { lo, hi })
    }

    /// `[0, 1]` for every feature.
    pub fn unit(d: usize) -> Self {
        Self {
            lo: vec![0.0; d],
            hi: vec![1.0; d],
        }
    }

    pub fn d(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    /// `clip((x - lo) / (hi - lo), 0, 1)` for feature `j`.
    #[inline]
    pub fn normalize(&self, j: usize, x: f64) -> f64 {
        ((x - self.lo[j]) / (self.hi[j] - self.lo[j])).clamp(0.0, 1.0)
    }

    pub fn normalize_matrix(&self, x: &RealMatrix) -> Result<RealMatrix> {
        self.check_width(x.n_cols())?;
        let mut out = x.clone();
        for i in 0..out.n_rows() {
            for (j, v) in out.row_mut(i).iter_mut().enumerate() {
                *v = self.normalize(j, *v);
            }
        }
        Ok(out)
    }

    fn check_width(&self, d: usize) -> Result<()> {
        if d != self.d() {
            return Err(Error::shape(format!(
                "features have D={d}, calibration has D={}",
                self.d()
            )));
        }
        Ok(())
    }
}

/// 1st/99th nearest-rank percentiles per column; zero-spread columns at
/// value `v` get `(v, v + 1)`.
pub fn calibrate_range(features: &RealMatrix) -> Result<RangeCalibration> {
    if features.n_rows() == 0 {
        return Err(Error::EmptyInput("range calibration needs samples"));
    }
    let n = features.n_rows();
    let rank = |q: f64| ((q * n as f64).ceil() as usize).clamp(1, n) - 1;
    let (lo_idx, hi_idx) = (rank(LOW_PERCENTILE), rank(HIGH_PERCENTILE));
    let mut lo = Vec::with_capacity(features.n_cols());
    let mut hi = Vec::with_capacity(features.n_cols());
    for j in 0..features.n_cols() {
        let mut col = features.column(j);
        col.sort_by(f64::total_cmp);
        let (l, h) = (col[lo_idx], col[hi_idx]);
        if h > l {
            lo.push(l);
            hi.push(h);
        } else {
            lo.push(l);
            hi.push(l + 1.0);
        }
    }
    Ok(RangeCalibration { lo, hi })
}

/// Number of leading ones for a normalized value: the largest `v <= p` with
/// `v / p <= z`.
pub fn thermometer_level(z: f64, p: usize) -> usize {
    let z = z.clamp(0.0, 1.0);
    let pf = p as f64;
    let mut v = (z * pf).floor() as usize;
    // correct floor() against rounding in z * p so that level(v / p) == v
    if v < p && (v + 1) as f64 / pf <= z {
        v += 1;
    }
    if v > 0 && v as f64 / pf > z {
        v -= 1;
    }
    v.min(p)
}

pub fn therm_encode(x: &RealMatrix, cal: &RangeCalibration, p: usize) -> Result<BitMatrix> {
    if p == 0 {
        return Err(Error::InvalidParameter("thermometer needs p >= 1".into()));
    }
    cal.check_width(x.n_cols())?;
    let d = x.n_cols();
    let mut out = BitMatrix::zeros(x.n_rows(), p * d);
    for i in 0..x.n_rows() {
        for (j, &v) in x.row(i).iter().enumerate() {
            let level = thermometer_level(cal.normalize(j, v), p);
            for b in 0..level {
                out.set(i, p * j + b, true);
            }
        }
    }
    Ok(out)
}

pub fn therm_decode(bits: &BitMatrix, p: usize) -> Result<RealMatrix> {
    if p == 0 || !bits.n_cols().is_multiple_of(p) {
        return Err(Error::shape(format!(
            "width {} is not a multiple of p={p}",
            bits.n_cols()
        )));
    }
    let d = bits.n_cols() / p;
    let mut out = RealMatrix::zeros(bits.n_rows(), d);
    let pf = p as f64;
    for i in 0..bits.n_rows() {
        let row = out.row_mut(i);
        for j in bits.ones_in_row(i) {
            row[j / p] += 1.0;
        }
        row.iter_mut().for_each(|v| *v /= pf);
    }
    Ok(out)
}

/// Thermometer parameters: bits per feature plus the input calibration.
#[derive(Debug, Clone, PartialEq)]
pub struct ThermometerCodec {
    p: usize,
    calibration: RangeCalibration,
}

impl ThermometerCodec {
    pub fn new(p: usize, calibration: RangeCalibration) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidParameter("thermometer needs p >= 1".into()));
        }
        Ok(Self { p, calibration })
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn d(&self) -> usize {
        self.calibration.d()
    }

    /// Encoded width `p * d`.
    pub fn width(&self) -> usize {
        self.p * self.d()
    }

    pub fn calibration(&self) -> &RangeCalibration {
        &self.calibration
    }

    pub fn encode(&self, x: &RealMatrix) -> Result<BitMatrix> {
        therm_encode(x, &self.calibration, self.p)
    }

    pub fn decode(&self, bits: &BitMatrix) -> Result<RealMatrix> {
        if bits.n_cols() != self.width() {
            return Err(Error::shape(format!(
                "width {} does not match codec width {}",
                bits.n_cols(),
                self.width()
            )));
        }
        therm_decode(bits, self.p)
    }
}

/// Sidecar record: `"GBMT" | u32 p | u32 d | d x (f64 lo, f64 hi)`, little-endian.
pub fn write_codec<W: Write>(codec: &ThermometerCodec, mut w: W) -> Result<()> {
    w.write_all(&CODEC_MAGIC)?;
    w.write_u32::<LittleEndian>(to_u32(codec.p, "p")?)?;
    w.write_u32::<LittleEndian>(to_u32(codec.d(), "d")?)?;
    for (l, h) in codec.calibration.lo.iter().zip(&codec.calibration.hi) {
        w.write_f64::<LittleEndian>(*l)?;
        w.write_f64::<LittleEndian>(*h)?;
    }
    Ok(())
}

pub fn read_codec<R: Read>(mut r: R) -> Result<ThermometerCodec> {
    read_magic(&mut r, CODEC_MAGIC)?;
    let p = r.read_u32::<LittleEndian>().map_err(eof("p"))? as usize;
    let d = r.read_u32::<LittleEndian>().map_err(eof("d"))? as usize;
    let mut lo = Vec::with_capacity(d);
    let mut hi = Vec::with_capacity(d);
    for _ in 0..d {
        lo.push(r.read_f64::<LittleEndian>().map_err(eof("bounds"))?);
        hi.push(r.read_f64::<LittleEndian>().map_err(eof("bounds"))?);
    }
    let cal = RangeCalibration::new(lo, hi).map_err(|e| ParseError::Header(e.to_string()))?;
    ThermometerCodec::new(p, cal).map_err(|e| ParseError::Header(e.to_string()).into())
}
