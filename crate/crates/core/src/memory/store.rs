use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use super::ReplaySource;
use crate::bmm::format::{read_model, write_quantized, StoredModel};
use crate::bmm::sample::{draw_categorical, sample_row_into};
use crate::bmm::{dequantize, fit, quantize, BmmParams, EmConfig, FitReport, QuantizedBmm, MAX_Q};
use crate::data::io::{eof, read_magic, to_u32};
use crate::data::{BitMatrix, ClassId};
use crate::error::{Error, ParseError, Result};
use crate::rng::SeededRng;

pub const STORE_MAGIC: [u8; 4] = *b"GBMS";

/// How pseudo-exemplar classes are drawn across the store.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClassWeighting {
    /// Every stored class equally likely.
    #[default]
    Uniform,
    /// Proportional to the number of training samples the class was fit on.
    ByCount,
}

impl std::str::FromStr for ClassWeighting {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "uniform" => Ok(ClassWeighting::Uniform),
            "by_count" => Ok(ClassWeighting::ByCount),
            other => Err(Error::Config(format!("unknown class weighting {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassEntry {
    class_id: ClassId,
    model: QuantizedBmm,
    n_train: u32,
    // dequantized prototypes used for sampling
    decoded: BmmParams,
}

impl ClassEntry {
    fn new(class_id: ClassId, model: QuantizedBmm, n_train: u32) -> Self {
        let decoded = dequantize(&model);
        Self {
            class_id,
            model,
            n_train,
            decoded,
        }
    }

    pub fn class_id(&self) -> ClassId {
        self.class_id
    }

    pub fn model(&self) -> &QuantizedBmm {
        &self.model
    }

    pub fn n_train(&self) -> u32 {
        self.n_train
    }

    pub fn decoded(&self) -> &BmmParams {
        &self.decoded
    }

    pub fn write<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_u32::<LittleEndian>(self.class_id)?;
        w.write_u32::<LittleEndian>(self.n_train)?;
        write_quantized(&self.model, w)
    }
}

/// Append-only memory of quantized per-class mixtures.
#[derive(Debug, Clone, PartialEq)]
pub struct GbmStore {
    entries: Vec<ClassEntry>,
    d: usize,
    k: usize,
    q: u8,
    class_weighting: ClassWeighting,
}

impl GbmStore {
    pub fn new(d: usize, k: usize, q: u8, class_weighting: ClassWeighting) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidParameter("k must be >= 1".into()));
        }
        if !(1..=MAX_Q).contains(&q) {
            return Err(Error::InvalidParameter(format!(
                "prototype precision q={q} outside 1..={MAX_Q}"
            )));
        }
        Ok(Self {
            entries: Vec::new(),
            d,
            k,
            q,
            class_weighting,
        })
    }

    pub fn entries(&self) -> &[ClassEntry] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn q(&self) -> u8 {
        self.q
    }

    pub fn class_weighting(&self) -> ClassWeighting {
        self.class_weighting
    }

    pub fn class_ids(&self) -> Vec<ClassId> {
        self.entries.iter().map(|e| e.class_id).collect()
    }

    pub fn contains(&self, class_id: ClassId) -> bool {
        self.entries.iter().any(|e| e.class_id == class_id)
    }

    /// Prototype payload bits actually held, `sum K * D * q` over entries.
    pub fn payload_bits(&self) -> u64 {
        self.entries.iter().map(|e| e.model.payload_bits()).sum()
    }

    /// Fits a mixture on `z`, quantizes it and appends it for `class_id`.
    pub fn update(
        &mut self,
        class_id: ClassId,
        z: &BitMatrix,
        em_config: &EmConfig,
        rng: &mut SeededRng,
    ) -> Result<FitReport> {
        if self.contains(class_id) {
            return Err(Error::DuplicateClass(class_id));
        }
        if em_config.k != self.k {
            return Err(Error::InvalidParameter(format!(
                "EM config has k={} but the store holds k={}",
                em_config.k, self.k
            )));
        }
        if z.n_cols() != self.d {
            return Err(Error::shape(format!(
                "class {class_id} embeddings have D={}, store has D={}",
                z.n_cols(),
                self.d
            )));
        }
        let (params, report) = fit(z, em_config, rng)?;
        let model = quantize(&params, self.q)?;
        let n_train = to_u32(z.n_rows(), "n_train")?;
        self.entries.push(ClassEntry::new(class_id, model, n_train));
        Ok(report)
    }

    /// Generates `n` labeled pseudo-exemplars.
    pub fn generate(&self, n: usize, rng: &mut SeededRng) -> Result<(BitMatrix, Vec<ClassId>)> {
        let mut out = BitMatrix::zeros(n, self.d);
        if n == 0 {
            return Ok((out, Vec::new()));
        }
        if self.entries.is_empty() {
            return Err(Error::EmptyMemory);
        }
        let weights: Vec<f64> = match self.class_weighting {
            ClassWeighting::Uniform => vec![1.0; self.entries.len()],
            ClassWeighting::ByCount => self.entries.iter().map(|e| e.n_train as f64).collect(),
        };
        let mut labels = Vec::with_capacity(n);
        for i in 0..n {
            let entry = &self.entries[draw_categorical(&weights, rng)];
            let params = &entry.decoded;
            let k = draw_categorical(params.pi(), rng);
            sample_row_into(params.prototype(k), rng, &mut out, i);
            labels.push(entry.class_id);
        }
        Ok((out, labels))
    }
}

impl ReplaySource for GbmStore {
    fn n_classes(&self) -> usize {
        self.len()
    }

    fn replay(&self, n: usize, rng: &mut SeededRng) -> Result<(BitMatrix, Vec<ClassId>)> {
        self.generate(n, rng)
    }
}

/// `"GBMS" | u32 D | u32 K | u8 q | u8 weighting | u32 count | entries`, each
/// entry `u32 class_id | u32 n_train | GBMM record`.
pub fn write_store<W: Write>(store: &GbmStore, mut w: W) -> Result<()> {
    w.write_all(&STORE_MAGIC)?;
    w.write_u32::<LittleEndian>(to_u32(store.d, "D")?)?;
    w.write_u32::<LittleEndian>(to_u32(store.k, "K")?)?;
    w.write_u8(store.q)?;
    w.write_u8(match store.class_weighting {
        ClassWeighting::Uniform => 0,
        ClassWeighting::ByCount => 1,
    })?;
    w.write_u32::<LittleEndian>(to_u32(store.entries.len(), "entry count")?)?;
    for e in &store.entries {
        e.write(&mut w)?;
    }
    Ok(())
}

pub fn read_store<R: Read>(mut r: R) -> Result<GbmStore> {
    read_magic(&mut r, STORE_MAGIC)?;
    let d = r.read_u32::<LittleEndian>().map_err(eof("D"))? as usize;
    let k = r.read_u32::<LittleEndian>().map_err(eof("K"))? as usize;
    let q = r.read_u8().map_err(eof("q"))?;
    let class_weighting = match r.read_u8().map_err(eof("weighting"))? {
        0 => ClassWeighting::Uniform,
        1 => ClassWeighting::ByCount,
        other => return Err(ParseError::Header(format!("unknown weighting {other}")).into()),
    };
    let count = r.read_u32::<LittleEndian>().map_err(eof("entry count"))?;
    let mut store =
        GbmStore::new(d, k, q, class_weighting).map_err(|e| ParseError::Header(e.to_string()))?;
    for _ in 0..count {
        let class_id = r.read_u32::<LittleEndian>().map_err(eof("class id"))?;
        let n_train = r.read_u32::<LittleEndian>().map_err(eof("n_train"))?;
        let model = match read_model(&mut r)? {
            StoredModel::Quantized(m) => m,
            StoredModel::Real(_) => {
                return Err(ParseError::Header("store entries must be quantized".into()).into())
            }
        };
        if model.d() != d || model.k() != k || model.q() != q {
            return Err(ParseError::Dimension(format!(
                "entry for class {class_id} is K={}, D={}, q={}",
                model.k(),
                model.d(),
                model.q()
            ))
            .into());
        }
        if store.contains(class_id) {
            return Err(ParseError::Header(format!("duplicate class {class_id}")).into());
        }
        store
            .entries
            .push(ClassEntry::new(class_id, model, n_train));
    }
    Ok(store)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmm::EPS_P;
    use crate::data::column_means;
    use rand::Rng;

    fn class_data(seed: u64, n: usize, d: usize, p: f64) -> BitMatrix {
        let mut rng = SeededRng::new(seed);
        let bits: Vec<bool> = (0..n * d).map(|_| rng.random::<f64>() < p).collect();
        BitMatrix::from_bools(n, d, &bits).unwrap()
    }

    fn entry_bytes(e: &ClassEntry) -> Vec<u8> {
        let mut buf = Vec::new();
        e.write(&mut buf).unwrap();
        buf
    }

    #[test]
    fn append_only_updates() {
        let mut rng = SeededRng::new(1);
        let cfg = EmConfig::with_k(2);
        let mut store = GbmStore::new(16, 2, 8, ClassWeighting::Uniform).unwrap();
        store
            .update(0, &class_data(1, 50, 16, 0.2), &cfg, &mut rng)
            .unwrap();
        assert_eq!(store.len(), 1);
        assert_eq!(store.entries()[0].model().k(), 2);
        let before = entry_bytes(&store.entries()[0]);
        store
            .update(1, &class_data(2, 50, 16, 0.7), &cfg, &mut rng)
            .unwrap();
        assert_eq!(store.class_ids(), vec![0, 1]);
        assert_eq!(entry_bytes(&store.entries()[0]), before);
    }

    #[test]
    fn update_errors() {
        let mut rng = SeededRng::new(1);
        let cfg = EmConfig::with_k(2);
        let mut store = GbmStore::new(8, 2, 8, ClassWeighting::Uniform).unwrap();
        store
            .update(3, &class_data(1, 20, 8, 0.5), &cfg, &mut rng)
            .unwrap();
        assert!(matches!(
            store.update(3, &class_data(2, 20, 8, 0.5), &cfg, &mut rng),
            Err(Error::DuplicateClass(3))
        ));
        assert!(matches!(
            store.update(4, &class_data(2, 1, 8, 0.5), &cfg, &mut rng),
            Err(Error::DegenerateInput { .. })
        ));
        assert!(store
            .update(5, &class_data(2, 20, 9, 0.5), &cfg, &mut rng)
            .is_err());
    }

    #[test]
    fn identical_rows_within_bounds() {
        let row = [1u8, 1, 0, 1, 0, 0, 0, 1, 1, 0];
        let z = BitMatrix::pack_rows(&vec![row; 25]).unwrap();
        for q in [2u8, 4, 8, 32] {
            let mut store = GbmStore::new(10, 2, q, ClassWeighting::Uniform).unwrap();
            store
                .update(0, &z, &EmConfig::with_k(2), &mut SeededRng::new(q as u64))
                .unwrap();
            let bound = EPS_P + 1.0 / (2.0 * ((1u64 << q) - 1) as f64);
            let params = store.entries()[0].decoded();
            for c in 0..2 {
                for (m, &b) in params.prototype(c).iter().zip(&row) {
                    assert!((m - b as f64).abs() <= bound);
                }
            }
        }
    }

    fn two_class_store(weighting: ClassWeighting, counts: (usize, usize)) -> GbmStore {
        let mut rng = SeededRng::new(3);
        let cfg = EmConfig::with_k(1);
        let mut store = GbmStore::new(8, 1, 8, weighting).unwrap();
        store
            .update(10, &class_data(4, counts.0, 8, 0.2), &cfg, &mut rng)
            .unwrap();
        store
            .update(20, &class_data(5, counts.1, 8, 0.8), &cfg, &mut rng)
            .unwrap();
        store
    }

    #[test]
    fn generate_single_class() {
        let mut store = GbmStore::new(8, 1, 8, ClassWeighting::Uniform).unwrap();
        store
            .update(
                7,
                &class_data(1, 30, 8, 0.5),
                &EmConfig::with_k(1),
                &mut SeededRng::new(0),
            )
            .unwrap();
        let (z, labels) = store.generate(100, &mut SeededRng::new(1)).unwrap();
        assert_eq!(z.n_rows(), 100);
        assert!(labels.iter().all(|&l| l == 7));
    }

    #[test]
    fn generate_uniform_counts() {
        // 3 sigma for Binomial(10000, 0.5) is 150.
        let store = two_class_store(ClassWeighting::Uniform, (100, 300));
        let (_, labels) = store.generate(10_000, &mut SeededRng::new(9)).unwrap();
        let first = labels.iter().filter(|&&l| l == 10).count() as i64;
        assert!((first - 5000).abs() <= 150, "{first}");
    }

    #[test]
    fn generate_by_count() {
        // 3 sigma for Binomial(10000, 0.25) is 130.
        let store = two_class_store(ClassWeighting::ByCount, (100, 300));
        let (_, labels) = store.generate(10_000, &mut SeededRng::new(9)).unwrap();
        let first = labels.iter().filter(|&&l| l == 10).count() as i64;
        assert!((first - 2500).abs() <= 130, "{first}");
    }

    #[test]
    fn generate_empty() {
        let store = GbmStore::new(8, 1, 8, ClassWeighting::Uniform).unwrap();
        assert!(matches!(
            store.generate(1, &mut SeededRng::new(0)),
            Err(Error::EmptyMemory)
        ));
        assert_eq!(
            store
                .generate(0, &mut SeededRng::new(0))
                .unwrap()
                .0
                .n_rows(),
            0
        );
    }

    #[test]
    fn generated_frequencies_match_prototype() {
        let mut store = GbmStore::new(40, 1, 8, ClassWeighting::Uniform).unwrap();
        store
            .update(
                0,
                &class_data(6, 200, 40, 0.35),
                &EmConfig::with_k(1),
                &mut SeededRng::new(0),
            )
            .unwrap();
        let n = 10_000;
        let (z, _) = store.generate(n, &mut SeededRng::new(2)).unwrap();
        let tol = 4.0 * (0.25 / n as f64).sqrt();
        let mu = store.entries()[0].decoded().prototype(0).to_vec();
        for (m, e) in column_means(&z).unwrap().iter().zip(&mu) {
            assert!((m - e).abs() <= tol);
        }
    }

    #[test]
    fn balanced_weightings_agree() {
        // chi-square on the 2x2 table of (weighting, class) counts; the 1%
        // critical value for one degree of freedom is 6.635.
        let a = two_class_store(ClassWeighting::Uniform, (200, 200));
        let b = two_class_store(ClassWeighting::ByCount, (200, 200));
        let n = 10_000;
        let count = |s: &GbmStore, seed| {
            let (_, l) = s.generate(n, &mut SeededRng::new(seed)).unwrap();
            l.iter().filter(|&&c| c == 10).count() as f64
        };
        let (x, y) = (count(&a, 31), count(&b, 32));
        let table = [[x, n as f64 - x], [y, n as f64 - y]];
        let col = [x + y, 2.0 * n as f64 - x - y];
        let mut chi2 = 0.0;
        for row in table {
            for (c, obs) in row.iter().enumerate() {
                let expected = n as f64 * col[c] / (2.0 * n as f64);
                chi2 += (obs - expected).powi(2) / expected;
            }
        }
        assert!(chi2 < 6.635, "chi2 = {chi2}");
    }

    #[test]
    fn store_roundtrip() {
        let store = two_class_store(ClassWeighting::ByCount, (40, 60));
        let mut buf = Vec::new();
        write_store(&store, &mut buf).unwrap();
        assert_eq!(read_store(&buf[..]).unwrap(), store);
    }
}
