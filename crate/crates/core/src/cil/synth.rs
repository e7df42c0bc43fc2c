use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{BitMatrix, ClassId, LabeledEmbeddings, RealMatrix};
use crate::error::{Error, Result};
use crate::rng::SeededRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    /// Bernoulli rows.
    Binary,
    /// Gaussian rows centred on the mode's probability vector.
    Real,
}

/// Planted class-conditional Bernoulli mixtures.
///
/// Prototypes are built hierarchically: a shared template marks `alt_fraction`
/// of the positions, each class redraws every position with probability
/// `class_divergence`, and each mode of a class redraws its class pattern with
/// probability `mode_divergence`. Marked positions get `alt_prob`, the others
/// `base_prob`.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub modes_per_class: usize,
    pub d: usize,
    pub n_per_class: usize,
    pub base_prob: f64,
    pub alt_prob: f64,
    pub flip_noise: f64,
    pub alt_fraction: f64,
    pub class_divergence: f64,
    pub mode_divergence: f64,
    pub kind: SynthKind,
    /// Standard deviation of the Gaussian noise for real-valued rows.
    pub real_noise: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_classes: 20,
            modes_per_class: 2,
            d: 256,
            n_per_class: 500,
            base_prob: 0.1,
            alt_prob: 0.9,
            flip_noise: 0.3,
            alt_fraction: 0.5,
            class_divergence: 0.3,
            mode_divergence: 0.5,
            kind: SynthKind::Binary,
            real_noise: 0.25,
            seed: 0,
        }
    }
}

/// Fraction of each class's rows that go to the training split.
pub const TRAIN_FRACTION: (usize, usize) = (4, 5);

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("synthetic data: {m}")));
        if self.n_classes == 0 || self.modes_per_class == 0 || self.d == 0 {
            return bad("n_classes, modes_per_class and d must be positive".into());
        }
        if self.n_per_class * TRAIN_FRACTION.0 / TRAIN_FRACTION.1 == 0
            || self.n_per_class * TRAIN_FRACTION.0 / TRAIN_FRACTION.1 == self.n_per_class
        {
            return bad(format!(
                "n_per_class={} leaves an empty split",
                self.n_per_class
            ));
        }
        for (name, p) in [("base_prob", self.base_prob), ("alt_prob", self.alt_prob)] {
            if !(p > 0.0 && p < 1.0) {
                return bad(format!("{name}={p} is not in (0, 1)"));
            }
        }
        if !(0.0..0.5).contains(&self.flip_noise) {
            return bad(format!("flip_noise={} is not in [0, 0.5)", self.flip_noise));
        }
        for (name, p) in [
            ("alt_fraction", self.alt_fraction),
            ("class_divergence", self.class_divergence),
            ("mode_divergence", self.mode_divergence),
        ] {
            if !(0.0..=1.0).contains(&p) {
                return bad(format!("{name}={p} is not in [0, 1]"));
            }
        }
        if !(self.real_noise >= 0.0 && self.real_noise.is_finite()) {
            return bad("real_noise must be finite and non-negative".into());
        }
        Ok(())
    }

    /// `n_train` rows per class.
    pub fn n_train_per_class(&self) -> usize {
        self.n_per_class * TRAIN_FRACTION.0 / TRAIN_FRACTION.1
    }
}

/// Prototype probability vectors, indexed `[class][mode]`.
pub fn synth_prototypes(spec: &SynthSpec, rng: &mut SeededRng) -> Result<Vec<Vec<Vec<f64>>>> {
    spec.validate()?;
    let template: Vec<bool> = (0..spec.d)
        .map(|_| rng.random_bool(spec.alt_fraction))
        .collect();
    let redraw = |pattern: &[bool], p: f64, rng: &mut SeededRng| -> Vec<bool> {
        pattern
            .iter()
            .map(|&bit| {
                if rng.random_bool(p) {
                    rng.random_bool(spec.alt_fraction)
                } else {
                    bit
                }
            })
            .collect()
    };
    let to_probs = |pattern: Vec<bool>| -> Vec<f64> {
        pattern
            .into_iter()
            .map(|alt| if alt { spec.alt_prob } else { spec.base_prob })
            .collect()
    };
    Ok((0..spec.n_classes)
        .map(|_| {
            let class = redraw(&template, spec.class_divergence, rng);
            (0..spec.modes_per_class)
                .map(|_| to_probs(redraw(&class, spec.mode_divergence, rng)))
                .collect()
        })
        .collect())
}

/// Draws `n_per_class` rows per class, modes chosen uniformly, then splits
/// each class 80/20 into train and test. Classes are labelled `0..n_classes`.
pub fn synth_dataset(
    spec: &SynthSpec,
    rng: &mut SeededRng,
) -> Result<(LabeledEmbeddings, LabeledEmbeddings)> {
    let protos = synth_prototypes(spec, rng)?;
    let n_train = spec.n_train_per_class();
    let n_test = spec.n_per_class - n_train;
    let d = spec.d;
    let mut train_labels = Vec::with_capacity(n_train * spec.n_classes);
    let mut test_labels = Vec::with_capacity(n_test * spec.n_classes);
    for c in 0..spec.n_classes as ClassId {
        train_labels.extend(std::iter::repeat_n(c, n_train));
        test_labels.extend(std::iter::repeat_n(c, n_test));
    }

    match spec.kind {
        SynthKind::Binary => {
            let mut train = BitMatrix::zeros(train_labels.len(), d);
            let mut test = BitMatrix::zeros(test_labels.len(), d);
            for (c, modes) in protos.iter().enumerate() {
                for r in 0..spec.n_per_class {
                    let mu = &modes[rng.random_range(0..modes.len())];
                    let (dst, row) = if r < n_train {
                        (&mut train, c * n_train + r)
                    } else {
                        (&mut test, c * n_test + r - n_train)
                    };
                    for (j, &p) in mu.iter().enumerate() {
                        let bit = rng.random_bool(p) ^ rng.random_bool(spec.flip_noise);
                        if bit {
                            dst.set(row, j, true);
                        }
                    }
                }
            }
            Ok((
                LabeledEmbeddings::binary(train, train_labels)?,
                LabeledEmbeddings::binary(test, test_labels)?,
            ))
        }
        SynthKind::Real => {
            let mut train = RealMatrix::zeros(train_labels.len(), d);
            let mut test = RealMatrix::zeros(test_labels.len(), d);
            // flip noise pulls each probability towards one half
            let shrink = 1.0 - 2.0 * spec.flip_noise;
            for (c, modes) in protos.iter().enumerate() {
                for r in 0..spec.n_per_class {
                    let mu = &modes[rng.random_range(0..modes.len())];
                    let row = if r < n_train {
                        train.row_mut(c * n_train + r)
                    } else {
                        test.row_mut(c * n_test + r - n_train)
                    };
                    for (x, &p) in row.iter_mut().zip(mu) {
                        let z: f64 = rng.sample(StandardNormal);
                        *x = p * shrink + spec.flip_noise + spec.real_noise * z;
                    }
                }
            }
            Ok((
                LabeledEmbeddings::real(train, train_labels)?,
                LabeledEmbeddings::real(test, test_labels)?,
            ))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::column_means;

    fn small() -> SynthSpec {
        SynthSpec {
            n_classes: 3,
            modes_per_class: 2,
            d: 64,
            n_per_class: 50,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn counts_and_labels() {
        let (train, test) = synth_dataset(&small(), &mut SeededRng::new(0)).unwrap();
        assert_eq!(train.len(), 120);
        assert_eq!(test.len(), 30);
        for (c, rows) in train.row_indices_by_class() {
            assert!(c < 3);
            assert_eq!(rows.len(), 40);
        }
        assert_eq!(test.classes(), vec![0, 1, 2]);
    }

    #[test]
    fn deterministic_limit_reproduces_threshold_patterns() {
        let spec = SynthSpec {
            base_prob: 1e-12,
            alt_prob: 1.0 - 1e-12,
            flip_noise: 0.0,
            modes_per_class: 1,
            ..small()
        };
        let protos = synth_prototypes(&spec, &mut SeededRng::new(5)).unwrap();
        let (train, _) = synth_dataset(&spec, &mut SeededRng::new(5)).unwrap();
        let bits = train.data().as_binary().unwrap();
        for i in 0..train.len() {
            let c = train.labels()[i] as usize;
            let expect: Vec<u8> = protos[c][0].iter().map(|&p| u8::from(p > 0.5)).collect();
            assert_eq!(bits.row_bits(i), expect);
        }
    }

    #[test]
    fn flip_noise_shrinks_marginals() {
        let spec = SynthSpec {
            n_classes: 1,
            modes_per_class: 1,
            n_per_class: 5000,
            d: 32,
            flip_noise: 0.2,
            ..SynthSpec::default()
        };
        let protos = synth_prototypes(&spec, &mut SeededRng::new(9)).unwrap();
        let (train, _) = synth_dataset(&spec, &mut SeededRng::new(9)).unwrap();
        let means = column_means(train.data().as_binary().unwrap()).unwrap();
        for (m, p) in means.iter().zip(&protos[0][0]) {
            let expect = p * 0.6 + 0.2;
            assert!((m - expect).abs() < 0.03, "{m} vs {expect}");
        }
    }

    #[test]
    fn real_rows_centre_on_prototypes() {
        let spec = SynthSpec {
            kind: SynthKind::Real,
            n_classes: 1,
            modes_per_class: 1,
            n_per_class: 2000,
            d: 16,
            flip_noise: 0.0,
            ..SynthSpec::default()
        };
        let protos = synth_prototypes(&spec, &mut SeededRng::new(3)).unwrap();
        let (train, _) = synth_dataset(&spec, &mut SeededRng::new(3)).unwrap();
        let x = train.data().as_real().unwrap();
        for (j, &p) in protos[0][0].iter().enumerate() {
            let mean = x.column(j).iter().sum::<f64>() / x.n_rows() as f64;
            assert!((mean - p).abs() < 0.03);
        }
    }

    #[test]
    fn validation() {
        assert!(SynthSpec {
            flip_noise: 0.5,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            base_prob: 0.0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            n_per_class: 1,
            ..small()
        }
        .validate()
        .is_err());
        assert!(SynthSpec {
            modes_per_class: 0,
            ..small()
        }
        .validate()
        .is_err());
        assert!(small().validate().is_ok());
    }
}
