use rand::seq::SliceRandom;

use super::linear::{InputKind, LinearClassifier};
use super::optim::MomentumSgd;
use crate::binarize::therm_decode;
use crate::data::{BitMatrix, Embeddings, LabeledEmbeddings, RealMatrix};
use crate::error::{Error, Result};
use crate::memory::{compose_batch, ReplaySource};
use crate::rng::SeededRng;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Multiplicative learning-rate decay applied every `lr_decay_period` epochs.
    pub lr_decay: f64,
    pub lr_decay_period: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.05,
            momentum: 0.9,
            epochs: 60,
            batch_size: 128,
            lr_decay: 0.1,
            lr_decay_period: 50,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidParameter(m.to_string()));
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be positive");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must be in [0, 1)");
        }
        if self.batch_size < 2 {
            return bad("batch_size must be at least 2");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must be in (0, 1]");
        }
        if self.lr_decay_period == 0 {
            return bad("lr_decay_period must be at least 1");
        }
        Ok(())
    }

    /// Step size used during `epoch` (0-based).
    pub fn learning_rate_at(&self, epoch: usize) -> f64 {
        let drops = (epoch / self.lr_decay_period) as i32;
        self.learning_rate * self.lr_decay.powi(drops)
    }
}

/// How stored binary rows become classifier inputs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InputCodec {
    /// Rows go to the classifier as they are.
    Identity,
    /// Binary rows are thermometer codes with `p` bits per feature and are
    /// averaged back to one value per feature.
    Thermometer { p: usize },
}

impl InputCodec {
    pub fn classifier_kind(&self) -> InputKind {
        match self {
            InputCodec::Identity => InputKind::Binary,
            InputCodec::Thermometer { .. } => InputKind::Real,
        }
    }

    pub fn dense(&self, clf: &LinearClassifier, x: &Embeddings) -> Result<RealMatrix> {
        match (self, x) {
            (InputCodec::Thermometer { p }, Embeddings::Binary(bits)) => therm_decode(bits, *p),
            _ => clf.prepare_input(x),
        }
    }

    fn dense_bits(&self, clf: &LinearClassifier, bits: BitMatrix) -> Result<RealMatrix> {
        self.dense(clf, &Embeddings::Binary(bits))
    }
}

fn append_rows(dst: &mut RealMatrix, src: &RealMatrix) {
    for i in 0..src.n_rows() {
        dst.push_row(src.row(i));
    }
}

/// Trains `clf` on `new_data` mixed with rows replayed from `replay`.
///
/// Each step takes a shuffled slice of new rows and as many replayed rows as
/// `compose_batch` assigns to the old classes; the last, shorter step of an
/// epoch scales its replay share down proportionally. Returns the trained
/// copy and the mean training loss of each epoch.
pub fn train_task(
    clf: &LinearClassifier,
    new_data: &LabeledEmbeddings,
    replay: Option<&dyn ReplaySource>,
    codec: InputCodec,
    cfg: &TrainConfig,
    rng: &mut SeededRng,
) -> Result<(LinearClassifier, Vec<f64>)> {
    cfg.validate()?;
    if new_data.is_empty() {
        return Err(Error::EmptyInput("no training rows for task"));
    }
    let mut clf = clf.clone();
    let x_new = codec.dense(&clf, new_data.data())?;
    let t_new = clf.targets(new_data.labels())?;

    let n_new_classes = new_data.classes().len();
    let n_old_classes = replay.map_or(0, |r| r.n_classes());
    let (rows_new, rows_old) = compose_batch(cfg.batch_size, n_new_classes, n_old_classes);

    let mut opt_w = MomentumSgd::new(clf.weights().as_slice().len(), cfg.momentum);
    let mut opt_b = MomentumSgd::new(clf.n_classes(), cfg.momentum);
    let mut order: Vec<usize> = (0..new_data.len()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for epoch in 0..cfg.epochs {
        let lr = cfg.learning_rate_at(epoch);
        order.shuffle(rng);
        let mut loss_sum = 0.0;
        let mut rows_seen = 0usize;
        for chunk in order.chunks(rows_new) {
            let mut x = x_new.select_rows(chunk);
            let mut t: Vec<usize> = chunk.iter().map(|&i| t_new[i]).collect();
            let n_old = (chunk.len() * rows_old + rows_new / 2) / rows_new;
            if let (Some(source), true) = (replay, n_old > 0) {
                let (bits, labels) = source.replay(n_old, rng)?;
                append_rows(&mut x, &codec.dense_bits(&clf, bits)?);
                t.extend(clf.targets(&labels)?);
            }
            let g = clf.loss_grad(&x, &t, false);
            if !g.loss.is_finite() {
                return Err(Error::Divergence { epoch });
            }
            loss_sum += g.loss * t.len() as f64;
            rows_seen += t.len();
            let (w, b) = clf.params_mut();
            opt_w.step(w.as_mut_slice(), g.grad_w.as_slice(), lr);
            opt_b.step(b, &g.grad_b, lr);
        }
        let mean = loss_sum / rows_seen as f64;
        if !mean.is_finite() || clf.weights().as_slice().iter().any(|v| !v.is_finite()) {
            return Err(Error::Divergence { epoch });
        }
        trace.push(mean);
    }
    Ok((clf, trace))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bmm::{sample, BmmParams};
    use crate::classifier::evaluate;
    use crate::data::ClassId;
    use std::cell::RefCell;

    /// Replays constant rows and records every request size.
    struct Recorder {
        classes: Vec<ClassId>,
        d: usize,
        requests: RefCell<Vec<usize>>,
    }

    impl ReplaySource for Recorder {
        fn n_classes(&self) -> usize {
            self.classes.len()
        }

        fn replay(&self, n: usize, _rng: &mut SeededRng) -> Result<(BitMatrix, Vec<ClassId>)> {
            self.requests.borrow_mut().push(n);
            let labels = (0..n)
                .map(|i| self.classes[i % self.classes.len()])
                .collect();
            Ok((BitMatrix::zeros(n, self.d), labels))
        }
    }

    fn planted(classes: &[ClassId], n_per: usize, d: usize, seed: u64) -> LabeledEmbeddings {
        let mut rng = SeededRng::new(seed);
        let mut parts = Vec::new();
        let mut labels = Vec::new();
        for &c in classes {
            let mu: Vec<f64> = (0..d)
                .map(|j| {
                    if (j + c as usize).is_multiple_of(classes.len().max(2)) {
                        0.9
                    } else {
                        0.1
                    }
                })
                .collect();
            let params = BmmParams::from_rows(&[mu], vec![1.0]).unwrap();
            parts.push(sample(&params, n_per, &mut rng));
            labels.extend(std::iter::repeat_n(c, n_per));
        }
        let refs: Vec<&BitMatrix> = parts.iter().collect();
        LabeledEmbeddings::binary(BitMatrix::vstack(&refs).unwrap(), labels).unwrap()
    }

    fn small_cfg(epochs: usize, batch_size: usize) -> TrainConfig {
        TrainConfig {
            epochs,
            batch_size,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn schedule() {
        let cfg = TrainConfig::default();
        assert_eq!(cfg.learning_rate_at(0), 0.05);
        assert_eq!(cfg.learning_rate_at(49), 0.05);
        assert!((cfg.learning_rate_at(50) - 0.005).abs() < 1e-15);
        assert!(TrainConfig {
            batch_size: 1,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            momentum: 1.0,
            ..cfg.clone()
        }
        .validate()
        .is_err());
        assert!(TrainConfig {
            learning_rate: 0.0,
            ..cfg
        }
        .validate()
        .is_err());
    }

    #[test]
    fn without_replay_batches_are_all_new() {
        let data = planted(&[0, 1], 64, 16, 1);
        let clf = LinearClassifier::new(16, InputKind::Binary)
            .extend_outputs(&[0, 1])
            .unwrap();
        let empty = Recorder {
            classes: vec![],
            d: 16,
            requests: RefCell::new(vec![]),
        };
        let mut rng = SeededRng::new(2);
        train_task(
            &clf,
            &data,
            Some(&empty),
            InputCodec::Identity,
            &small_cfg(2, 32),
            &mut rng,
        )
        .unwrap();
        assert!(empty.requests.borrow().is_empty());
    }

    #[test]
    fn balanced_old_and_new_halves() {
        let data = planted(&[2, 3], 64, 16, 3);
        let clf = LinearClassifier::new(16, InputKind::Binary)
            .extend_outputs(&[0, 1, 2, 3])
            .unwrap();
        let rec = Recorder {
            classes: vec![0, 1],
            d: 16,
            requests: RefCell::new(vec![]),
        };
        let mut rng = SeededRng::new(4);
        train_task(
            &clf,
            &data,
            Some(&rec),
            InputCodec::Identity,
            &small_cfg(3, 64),
            &mut rng,
        )
        .unwrap();
        let req = rec.requests.borrow();
        // 128 new rows at 32 per step, 3 epochs
        assert_eq!(req.len(), 12);
        assert!(req.iter().all(|&n| n == 32));
    }

    #[test]
    fn trailing_step_scales_replay() {
        let data = planted(&[2, 3], 20, 8, 5);
        let clf = LinearClassifier::new(8, InputKind::Binary)
            .extend_outputs(&[0, 1, 2, 3])
            .unwrap();
        let rec = Recorder {
            classes: vec![0, 1],
            d: 8,
            requests: RefCell::new(vec![]),
        };
        let mut rng = SeededRng::new(6);
        train_task(
            &clf,
            &data,
            Some(&rec),
            InputCodec::Identity,
            &small_cfg(1, 64),
            &mut rng,
        )
        .unwrap();
        assert_eq!(*rec.requests.borrow(), vec![32, 8]);
    }

    #[test]
    fn loss_decreases_on_separable_data() {
        let data = planted(&[0, 1, 2], 100, 32, 7);
        let clf = LinearClassifier::new(32, InputKind::Binary)
            .extend_outputs(&[0, 1, 2])
            .unwrap();
        let mut rng = SeededRng::new(8);
        let (trained, trace) = train_task(
            &clf,
            &data,
            None,
            InputCodec::Identity,
            &small_cfg(10, 32),
            &mut rng,
        )
        .unwrap();
        assert_eq!(trace.len(), 10);
        assert!(trace[9] < trace[0]);
        assert!(evaluate(&trained, &data).unwrap() > 0.95);
    }

    #[test]
    fn deterministic() {
        let data = planted(&[0, 1], 50, 16, 9);
        let clf = LinearClassifier::new(16, InputKind::Binary)
            .extend_outputs(&[0, 1])
            .unwrap();
        let run = || {
            let mut rng = SeededRng::new(10);
            train_task(
                &clf,
                &data,
                None,
                InputCodec::Identity,
                &small_cfg(4, 16),
                &mut rng,
            )
            .unwrap()
        };
        let (a, ta) = run();
        let (b, tb) = run();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
    }

    #[test]
    fn thermometer_codec_decodes() {
        let bits = BitMatrix::pack_rows(&[[1u8, 1, 0, 0, 1, 1, 1, 1]]).unwrap();
        let data = LabeledEmbeddings::binary(bits, vec![0]).unwrap();
        let clf = LinearClassifier::new(2, InputKind::Real)
            .extend_outputs(&[0])
            .unwrap();
        let codec = InputCodec::Thermometer { p: 4 };
        assert_eq!(codec.classifier_kind(), InputKind::Real);
        let x = codec.dense(&clf, data.data()).unwrap();
        assert_eq!(x.row(0), &[0.5, 1.0]);
    }

    #[test]
    fn errors() {
        let data = planted(&[0, 1], 10, 8, 11);
        let clf = LinearClassifier::new(8, InputKind::Binary)
            .extend_outputs(&[0])
            .unwrap();
        let mut rng = SeededRng::new(12);
        let r = train_task(
            &clf,
            &data,
            None,
            InputCodec::Identity,
            &small_cfg(1, 8),
            &mut rng,
        );
        assert!(matches!(r, Err(Error::UnknownClass(1))));

        // identical inputs with opposite labels keep the gradient alive
        let conflicting =
            LabeledEmbeddings::binary(BitMatrix::zeros(8, 8), vec![0, 1, 0, 1, 0, 1, 0, 1])
                .unwrap();
        let clf = clf.extend_outputs(&[1]).unwrap();
        let huge = TrainConfig {
            learning_rate: 1e307,
            ..small_cfg(50, 4)
        };
        let r = train_task(
            &clf,
            &conflicting,
            None,
            InputCodec::Identity,
            &huge,
            &mut rng,
        );
        assert!(matches!(r, Err(Error::Divergence { .. })), "{r:?}");
    }
}
