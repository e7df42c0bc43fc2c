use std::io::{Read, Write};

use byteorder::{LittleEndian, ReadBytesExt, WriteBytesExt};

use crate::data::io::{eof, to_u32};
use crate::data::{ClassId, Embeddings, LabeledEmbeddings, RealMatrix};
use crate::error::{Error, ParseError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputKind {
    /// 0/1 embeddings, fed to the affine map as -1/+1.
    Binary,
    Real,
}

/// `logits = W x + b`, one row of `W` per class, rows sorted by class id.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearClassifier {
    class_ids: Vec<ClassId>,
    w: RealMatrix,
    b: Vec<f64>,
    input_kind: InputKind,
}

/// Mean cross-entropy over a batch and its gradients.
#[derive(Debug, Clone)]
pub struct LossGrad {
    pub loss: f64,
    pub grad_w: RealMatrix,
    pub grad_b: Vec<f64>,
    /// Gradient with respect to the (mapped) input rows, when requested.
    pub grad_input: Option<RealMatrix>,
}

impl LinearClassifier {
    pub fn new(d: usize, input_kind: InputKind) -> Self {
        Self {
            class_ids: Vec::new(),
            w: RealMatrix::zeros(0, d),
            b: Vec::new(),
            input_kind,
        }
    }

    pub fn from_parts(
        class_ids: Vec<ClassId>,
        w: RealMatrix,
        b: Vec<f64>,
        input_kind: InputKind,
    ) -> Result<Self> {
        if w.n_rows() != class_ids.len() || b.len() != class_ids.len() {
            return Err(Error::shape(format!(
                "{} classes, {} weight rows, {} biases",
                class_ids.len(),
                w.n_rows(),
                b.len()
            )));
        }
        if class_ids.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::InvalidParameter(
                "class ids must be strictly increasing".into(),
            ));
        }
        if b.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidParameter("non-finite bias".into()));
        }
        Ok(Self {
            class_ids,
            w,
            b,
            input_kind,
        })
    }

    pub fn class_ids(&self) -> &[ClassId] {
        &self.class_ids
    }

    pub fn n_classes(&self) -> usize {
        self.class_ids.len()
    }

    pub fn input_dim(&self) -> usize {
        self.w.n_cols()
    }

    pub fn input_kind(&self) -> InputKind {
        self.input_kind
    }

    pub fn weights(&self) -> &RealMatrix {
        &self.w
    }

    pub fn bias(&self) -> &[f64] {
        &self.b
    }

    pub(crate) fn params_mut(&mut self) -> (&mut RealMatrix, &mut Vec<f64>) {
        (&mut self.w, &mut self.b)
    }

    pub fn class_index(&self, id: ClassId) -> Option<usize> {
        self.class_ids.binary_search(&id).ok()
    }

    pub(crate) fn targets(&self, labels: &[ClassId]) -> Result<Vec<usize>> {
        labels
            .iter()
            .map(|&l| self.class_index(l).ok_or(Error::UnknownClass(l)))
            .collect()
    }

    /// Adds zero-initialized outputs for `new_ids`, keeping rows sorted by
    /// class id. Existing rows are untouched.
    pub fn extend_outputs(&self, new_ids: &[ClassId]) -> Result<Self> {
        let mut ids = self.class_ids.clone();
        for (n, &id) in new_ids.iter().enumerate() {
            if ids.contains(&id) || new_ids[..n].contains(&id) {
                return Err(Error::DuplicateClass(id));
            }
        }
        ids.extend_from_slice(new_ids);
        ids.sort_unstable();
        let d = self.input_dim();
        let mut w = RealMatrix::zeros(0, d);
        let mut b = Vec::with_capacity(ids.len());
        let zeros = vec![0.0; d];
        for &id in &ids {
            match self.class_index(id) {
                Some(r) => {
                    w.push_row(self.w.row(r));
                    b.push(self.b[r]);
                }
                None => {
                    w.push_row(&zeros);
                    b.push(0.0);
                }
            }
        }
        Ok(Self {
            class_ids: ids,
            w,
            b,
            input_kind: self.input_kind,
        })
    }

    /// Dense input rows: binary embeddings become -1/+1, real ones pass through.
    pub fn prepare_input(&self, x: &Embeddings) -> Result<RealMatrix> {
        if x.n_cols() != self.input_dim() {
            return Err(Error::shape(format!(
                "input width {} does not match classifier width {}",
                x.n_cols(),
                self.input_dim()
            )));
        }
        match (x, self.input_kind) {
            (Embeddings::Binary(bits), InputKind::Binary) => {
                let mut out = RealMatrix::from_vec(
                    bits.n_rows(),
                    bits.n_cols(),
                    vec![-1.0; bits.n_rows() * bits.n_cols()],
                )?;
                for i in 0..bits.n_rows() {
                    let row = out.row_mut(i);
                    for j in bits.ones_in_row(i) {
                        row[j] = 1.0;
                    }
                }
                Ok(out)
            }
            (Embeddings::Real(m), InputKind::Real) => Ok(m.clone()),
            (_, kind) => Err(Error::shape(format!("classifier expects {kind:?} input"))),
        }
    }

    /// Logits for already-prepared dense rows.
    pub fn logits_dense(&self, x: &RealMatrix) -> RealMatrix {
        let c = self.n_classes();
        let mut out = RealMatrix::zeros(x.n_rows(), c);
        for i in 0..x.n_rows() {
            let xi = x.row(i);
            for (k, o) in out.row_mut(i).iter_mut().enumerate() {
                *o = dot(self.w.row(k), xi) + self.b[k];
            }
        }
        out
    }

    pub fn logits(&self, x: &Embeddings) -> Result<RealMatrix> {
        Ok(self.logits_dense(&self.prepare_input(x)?))
    }

    /// Arg-max class per row; ties go to the smallest class id.
    pub fn predict(&self, x: &Embeddings) -> Result<Vec<ClassId>> {
        if self.n_classes() == 0 {
            return Err(Error::EmptyInput("classifier has no outputs"));
        }
        let logits = self.logits(x)?;
        Ok((0..logits.n_rows())
            .map(|i| self.class_ids[argmax(logits.row(i))])
            .collect())
    }

    /// Mean cross-entropy of prepared rows `x` against row indices `targets`.
    pub fn loss_grad(&self, x: &RealMatrix, targets: &[usize], want_input: bool) -> LossGrad {
        let (n, c, d) = (x.n_rows(), self.n_classes(), self.input_dim());
        let logits = self.logits_dense(x);
        let mut grad_w = RealMatrix::zeros(c, d);
        let mut grad_b = vec![0.0; c];
        let mut grad_input = want_input.then(|| RealMatrix::zeros(n, d));
        let mut loss = 0.0;
        let inv_n = 1.0 / n.max(1) as f64;
        for (i, &t) in targets.iter().enumerate().take(n) {
            let row = logits.row(i);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let lse = max + row.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
            loss += lse - row[t];
            let xi = x.row(i);
            for k in 0..c {
                let mut delta = (row[k] - lse).exp();
                if k == t {
                    delta -= 1.0;
                }
                let delta = delta * inv_n;
                grad_b[k] += delta;
                for (g, &xv) in grad_w.row_mut(k).iter_mut().zip(xi) {
                    *g += delta * xv;
                }
                if let Some(gi) = grad_input.as_mut() {
                    for (g, &wv) in gi.row_mut(i).iter_mut().zip(self.w.row(k)) {
                        *g += delta * wv;
                    }
                }
            }
        }
        LossGrad {
            loss: loss * inv_n,
            grad_w,
            grad_b,
            grad_input,
        }
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Numerically stable softmax (max-subtracted).
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|l| (l - max).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

/// Fraction of rows whose predicted class equals the label.
pub fn evaluate(clf: &LinearClassifier, data: &LabeledEmbeddings) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::EmptyInput("cannot evaluate on an empty set"));
    }
    let pred = clf.predict(data.data())?;
    let hits = pred
        .iter()
        .zip(data.labels())
        .filter(|(p, l)| p == l)
        .count();
    Ok(hits as f64 / data.len() as f64)
}

/// `u32 n_classes | u32 d | u8 kind (0 binary, 1 real) | W (f64) | b (f64) | n_classes x u32 ids`.
pub fn write_checkpoint<W: Write>(clf: &LinearClassifier, mut w: W) -> Result<()> {
    w.write_u32::<LittleEndian>(to_u32(clf.n_classes(), "n_classes")?)?;
    w.write_u32::<LittleEndian>(to_u32(clf.input_dim(), "d")?)?;
    w.write_u8(match clf.input_kind {
        InputKind::Binary => 0,
        InputKind::Real => 1,
    })?;
    for &v in clf.w.as_slice() {
        w.write_f64::<LittleEndian>(v)?;
    }
    for &v in &clf.b {
        w.write_f64::<LittleEndian>(v)?;
    }
    for &id in &clf.class_ids {
        w.write_u32::<LittleEndian>(id)?;
    }
    Ok(())
}

pub fn read_checkpoint<R: Read>(mut r: R) -> Result<LinearClassifier> {
    let c = r.read_u32::<LittleEndian>().map_err(eof("n_classes"))? as usize;
    let d = r.read_u32::<LittleEndian>().map_err(eof("d"))? as usize;
    let kind = match r.read_u8().map_err(eof("input kind"))? {
        0 => InputKind::Binary,
        1 => InputKind::Real,
        other => return Err(ParseError::Header(format!("unknown input kind {other}")).into()),
    };
    let mut w = vec![0f64; c * d];
    r.read_f64_into::<LittleEndian>(&mut w)
        .map_err(eof("weights"))?;
    let mut b = vec![0f64; c];
    r.read_f64_into::<LittleEndian>(&mut b)
        .map_err(eof("biases"))?;
    let mut ids = vec![0u32; c];
    r.read_u32_into::<LittleEndian>(&mut ids)
        .map_err(eof("class ids"))?;
    LinearClassifier::from_parts(ids, RealMatrix::from_vec(c, d, w)?, b, kind)
        .map_err(|e| ParseError::Header(e.to_string()).into())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::BitMatrix;
    use crate::rng::SeededRng;
    use rand::Rng;

    fn random_clf(seed: u64, ids: Vec<ClassId>, d: usize, kind: InputKind) -> LinearClassifier {
        let mut rng = SeededRng::new(seed);
        let c = ids.len();
        let w: Vec<f64> = (0..c * d).map(|_| rng.random::<f64>() - 0.5).collect();
        let b: Vec<f64> = (0..c).map(|_| rng.random::<f64>() - 0.5).collect();
        LinearClassifier::from_parts(ids, RealMatrix::from_vec(c, d, w).unwrap(), b, kind).unwrap()
    }

    #[test]
    fn zero_classifier_uniform() {
        let clf = LinearClassifier::new(3, InputKind::Real)
            .extend_outputs(&[0, 1, 2])
            .unwrap();
        let x = Embeddings::Real(RealMatrix::from_rows(&[[0.3, -1.0, 2.0]]).unwrap());
        let l = clf.logits(&x).unwrap();
        assert_eq!(l.row(0), &[0.0; 3]);
        assert_eq!(softmax(l.row(0)), vec![1.0 / 3.0; 3]);
    }

    #[test]
    fn binary_maps_to_signs() {
        let w = RealMatrix::from_rows(&[[1.0, 1.0, 1.0, 1.0], [1.0, -1.0, 1.0, -1.0]]).unwrap();
        let clf =
            LinearClassifier::from_parts(vec![0, 1], w, vec![0.5, 0.0], InputKind::Binary).unwrap();
        let x = Embeddings::Binary(BitMatrix::pack_rows(&[[1u8, 0, 1, 0], [0, 0, 0, 0]]).unwrap());
        let l = clf.logits(&x).unwrap();
        // row 1 of W matches the +/-1 pattern exactly: logit = d'
        assert_eq!(l.get(0, 1), 4.0);
        // all zeros -> all -1: logits = -W 1 + b
        assert_eq!(l.row(1), &[-4.0 + 0.5, 0.0]);
    }

    #[test]
    fn input_checks() {
        let clf = LinearClassifier::new(3, InputKind::Binary)
            .extend_outputs(&[0])
            .unwrap();
        let wrong_width = Embeddings::Binary(BitMatrix::zeros(1, 4));
        assert!(matches!(clf.logits(&wrong_width), Err(Error::Shape(_))));
        let wrong_kind = Embeddings::Real(RealMatrix::zeros(1, 3));
        assert!(matches!(clf.logits(&wrong_kind), Err(Error::Shape(_))));
    }

    #[test]
    fn extend_preserves_old_logits() {
        let clf = random_clf(1, vec![2, 5], 6, InputKind::Real);
        let mut rng = SeededRng::new(2);
        let xs: Vec<f64> = (0..30).map(|_| rng.random::<f64>() * 4.0 - 2.0).collect();
        let x = Embeddings::Real(RealMatrix::from_vec(5, 6, xs).unwrap());
        let before = clf.logits(&x).unwrap();
        let ext = clf.extend_outputs(&[9, 0]).unwrap();
        assert_eq!(ext.class_ids(), &[0, 2, 5, 9]);
        let after = ext.logits(&x).unwrap();
        for i in 0..5 {
            assert_eq!(after.get(i, 1).to_bits(), before.get(i, 0).to_bits());
            assert_eq!(after.get(i, 2).to_bits(), before.get(i, 1).to_bits());
            assert_eq!(after.get(i, 0), 0.0);
            assert_eq!(after.get(i, 3), 0.0);
        }
        assert_eq!(clf.extend_outputs(&[]).unwrap(), clf);
        assert!(matches!(
            clf.extend_outputs(&[5]),
            Err(Error::DuplicateClass(5))
        ));
        assert!(matches!(
            clf.extend_outputs(&[7, 7]),
            Err(Error::DuplicateClass(7))
        ));
    }

    #[test]
    fn evaluate_examples() {
        let w = RealMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap();
        let clf =
            LinearClassifier::from_parts(vec![0, 1], w, vec![0.0, 0.0], InputKind::Real).unwrap();
        let protos = LabeledEmbeddings::real(
            RealMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(),
            vec![0, 1],
        )
        .unwrap();
        assert_eq!(evaluate(&clf, &protos).unwrap(), 1.0);
        let swapped = LabeledEmbeddings::real(
            RealMatrix::from_rows(&[[1.0, 0.0], [0.0, 1.0]]).unwrap(),
            vec![1, 0],
        )
        .unwrap();
        assert_eq!(evaluate(&clf, &swapped).unwrap(), 0.0);

        let zero = LinearClassifier::new(2, InputKind::Real)
            .extend_outputs(&[0, 1, 2, 3])
            .unwrap();
        let balanced =
            LabeledEmbeddings::real(RealMatrix::zeros(8, 2), vec![0, 1, 2, 3, 0, 1, 2, 3]).unwrap();
        assert_eq!(evaluate(&zero, &balanced).unwrap(), 0.25);

        let empty = LabeledEmbeddings::real(RealMatrix::zeros(0, 2), vec![]).unwrap();
        assert!(matches!(evaluate(&zero, &empty), Err(Error::EmptyInput(_))));
    }

    #[test]
    fn softmax_properties() {
        let mut rng = SeededRng::new(3);
        for _ in 0..100 {
            let l: Vec<f64> = (0..7).map(|_| rng.random::<f64>() * 40.0 - 20.0).collect();
            let p = softmax(&l);
            assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
            let shifted: Vec<f64> = l.iter().map(|v| v + 123.4).collect();
            for (a, b) in p.iter().zip(softmax(&shifted)) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn checkpoint_roundtrip() {
        let clf = random_clf(4, vec![1, 3, 8], 5, InputKind::Binary);
        let mut buf = Vec::new();
        write_checkpoint(&clf, &mut buf).unwrap();
        assert_eq!(buf.len(), 4 + 4 + 1 + 15 * 8 + 3 * 8 + 3 * 4);
        assert_eq!(read_checkpoint(&buf[..]).unwrap(), clf);
    }

    /// Central-difference oracle for the mean cross-entropy.
    fn numeric_loss(clf: &LinearClassifier, x: &RealMatrix, t: &[usize]) -> f64 {
        let logits = clf.logits_dense(x);
        let mut total = 0.0;
        for i in 0..x.n_rows() {
            let p = softmax(logits.row(i));
            total -= p[t[i]].ln();
        }
        total / x.n_rows() as f64
    }

    fn rel_err(a: f64, b: f64) -> f64 {
        (a - b).abs() / a.abs().max(b.abs()).max(1e-8)
    }

    #[test]
    fn gradients_match_finite_differences() {
        let h = 1e-5;
        for seed in 0..5 {
            let clf = random_clf(seed, vec![0, 1, 2], 16, InputKind::Real);
            let mut rng = SeededRng::new(seed + 100);
            let xs: Vec<f64> = (0..8 * 16)
                .map(|_| rng.random::<f64>() * 2.0 - 1.0)
                .collect();
            let x = RealMatrix::from_vec(8, 16, xs).unwrap();
            let t: Vec<usize> = (0..8).map(|_| rng.random_range(0..3)).collect();
            let g = clf.loss_grad(&x, &t, true);
            assert!((g.loss - numeric_loss(&clf, &x, &t)).abs() < 1e-12);
            for k in 0..3 {
                for j in 0..16 {
                    let mut plus = clf.clone();
                    let v = plus.w.get(k, j);
                    plus.w.set(k, j, v + h);
                    let mut minus = clf.clone();
                    minus.w.set(k, j, v - h);
                    let fd =
                        (numeric_loss(&plus, &x, &t) - numeric_loss(&minus, &x, &t)) / (2.0 * h);
                    assert!(rel_err(g.grad_w.get(k, j), fd) < 1e-5, "w[{k}][{j}]");
                }
                let mut plus = clf.clone();
                plus.b[k] += h;
                let mut minus = clf.clone();
                minus.b[k] -= h;
                let fd = (numeric_loss(&plus, &x, &t) - numeric_loss(&minus, &x, &t)) / (2.0 * h);
                assert!(rel_err(g.grad_b[k], fd) < 1e-5, "b[{k}]");
            }
            let gi = g.grad_input.unwrap();
            for i in 0..8 {
                for j in 0..16 {
                    let mut xp = x.clone();
                    xp.set(i, j, x.get(i, j) + h);
                    let mut xm = x.clone();
                    xm.set(i, j, x.get(i, j) - h);
                    let fd =
                        (numeric_loss(&clf, &xp, &t) - numeric_loss(&clf, &xm, &t)) / (2.0 * h);
                    assert!(rel_err(gi.get(i, j), fd) < 1e-5, "x[{i}][{j}]");
                }
            }
        }
    }
}
