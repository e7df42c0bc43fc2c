//! Embedding file format.
//!
//! ```text
//! "GBM1" | u8 kind (0 = bit-packed, 1 = real64) | u32 N | u32 D | N x u32 labels | payload
//! ```
//! Bit-packed rows are padded to a byte boundary, bits LSB-first within each
//! byte. All integers and reals are little-endian.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::{BitMatrix, Embeddings, LabeledEmbeddings, RealMatrix};
use crate::error::{Error, ParseError, Result};

pub const EMBEDDINGS_MAGIC: [u8; 4] = *b"GBM1";
const KIND_BITS: u8 = 0;
const KIND_REAL: u8 = 1;

pub fn write_embeddings<W: Write>(ds: &LabeledEmbeddings, mut w: W) -> Result<()> {
    w.write_all(&EMBEDDINGS_MAGIC)?;
    let kind = match ds.data() {
        Embeddings::Binary(_) => KIND_BITS,
        Embeddings::Real(_) => KIND_REAL,
    };
    w.write_u8(kind)?;
    w.write_u32::<LittleEndian>(to_u32(ds.len(), "N")?)?;
    w.write_u32::<LittleEndian>(to_u32(ds.dim(), "D")?)?;
    for &l in ds.labels() {
        w.write_u32::<LittleEndian>(l)?;
    }
    match ds.data() {
        Embeddings::Binary(m) => {
            for i in 0..m.n_rows() {
                w.write_all(&m.row_bytes(i))?;
            }
        }
        Embeddings::Real(m) => {
            for &v in m.as_slice() {
                w.write_f64::<LittleEndian>(v)?;
            }
        }
    }
    Ok(())
}

pub fn read_embeddings<R: Read>(mut r: R) -> Result<LabeledEmbeddings> {
    read_magic(&mut r, EMBEDDINGS_MAGIC)?;
    let kind = r.read_u8().map_err(eof("payload kind"))?;
    if kind != KIND_BITS && kind != KIND_REAL {
        return Err(ParseError::Header(format!("unknown payload kind {kind}")).into());
    }
    let n = r.read_u32::<LittleEndian>().map_err(eof("N"))? as usize;
    let d = r.read_u32::<LittleEndian>().map_err(eof("D"))? as usize;
    let mut labels = vec![0u32; n];
    r.read_u32_into::<LittleEndian>(&mut labels)
        .map_err(eof("labels"))?;
    let data = if kind == KIND_BITS {
        let row_len = d.div_ceil(8);
        let mut m = BitMatrix::zeros(n, d);
        let mut buf = vec![0u8; row_len];
        for i in 0..n {
            r.read_exact(&mut buf).map_err(eof("bit rows"))?;
            m.set_row_bytes(i, &buf).map_err(|e| {
                Error::from(ParseError::Dimension(format!(
                    "row {i} does not fit D={d}: {e}"
                )))
            })?;
        }
        Embeddings::Binary(m)
    } else {
        let mut values = vec![0f64; n * d];
        r.read_f64_into::<LittleEndian>(&mut values)
            .map_err(eof("real rows"))?;
        Embeddings::Real(RealMatrix::from_vec(n, d, values)?)
    };
    let mut probe = [0u8; 1];
    if r.read(&mut probe)? != 0 {
        return Err(ParseError::TrailingBytes.into());
    }
    LabeledEmbeddings::new(data, labels)
}

pub fn save_embeddings(ds: &LabeledEmbeddings, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    write_embeddings(ds, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_embeddings(path: impl AsRef<Path>) -> Result<LabeledEmbeddings> {
    read_embeddings(BufReader::new(File::open(path)?))
}

pub(crate) fn read_magic<R: Read>(r: &mut R, expected: [u8; 4]) -> Result<()> {
    let mut found = [0u8; 4];
    r.read_exact(&mut found).map_err(eof("magic"))?;
    if found != expected {
        return Err(ParseError::BadMagic { expected, found }.into());
    }
    Ok(())
}

pub(crate) fn eof(what: &'static str) -> impl Fn(std::io::Error) -> Error {
    move |e| {
        if e.kind() == std::io::ErrorKind::UnexpectedEof {
            ParseError::Truncated(what).into()
        } else {
            e.into()
        }
    }
}

pub(crate) fn to_u32(v: usize, what: &str) -> Result<u32> {
    u32::try_from(v).map_err(|_| Error::InvalidParameter(format!("{what}={v} exceeds u32")))
}
