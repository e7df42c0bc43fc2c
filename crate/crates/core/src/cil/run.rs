use super::config::{Binarizer, Method, RunConfig};
use super::metrics::{average_incremental_accuracy, GroupAccuracy, MetricsReport};
use super::scenario::{make_scenario, CilScenario};
use super::synth::synth_dataset;
use crate::binarize::{
    calibrate_range, heaviside_forward, therm_decode, train_heaviside, HeavisideProjection,
    ThermometerCodec,
};
use crate::classifier::{evaluate, train_task, InputCodec, LinearClassifier};
use crate::data::{load_embeddings, split_by_class, BitMatrix, ClassId, LabeledEmbeddings};
use crate::error::{Error, Result};
use crate::memory::{memory_bits_gbm, memory_bits_lr, GbmStore, LatentReplayBuffer, ReplaySource};
use crate::rng::{streams, SeededRng};

/// Train and test embeddings for one run.
#[derive(Debug, Clone)]
pub struct RunData {
    pub train: LabeledEmbeddings,
    pub test: LabeledEmbeddings,
}

impl RunData {
    /// Loads the configured files or generates the synthetic dataset.
    pub fn from_config(config: &RunConfig) -> Result<Self> {
        let (train, test) = match (&config.train_path, &config.test_path) {
            (Some(tr), Some(te)) => (load_embeddings(tr)?, load_embeddings(te)?),
            _ => {
                let spec = config.synth_spec();
                synth_dataset(&spec, &mut SeededRng::substream(spec.seed, streams::SYNTH))?
            }
        };
        if train.dim() != test.dim() {
            return Err(Error::shape(format!(
                "train has width {}, test has width {}",
                train.dim(),
                test.dim()
            )));
        }
        Ok(Self { train, test })
    }
}

pub fn run(config: &RunConfig) -> Result<MetricsReport> {
    config.validate()?;
    run_on(config, &RunData::from_config(config)?)
}

/// Builds the scenario over the sorted class ids of `train`.
pub fn scenario_for(config: &RunConfig, train: &LabeledEmbeddings) -> Result<CilScenario> {
    let ids = train.classes();
    make_scenario(ids.len(), config.tasks, config.init_classes, config.seed)?.relabel(&ids)
}

struct Binarized {
    train: LabeledEmbeddings,
    /// What the head sees: decoded levels for thermometer codes, bits otherwise.
    test: LabeledEmbeddings,
    codec: InputCodec,
    clf_width: usize,
}

fn binarize(config: &RunConfig, data: &RunData, initial: &[ClassId]) -> Result<Binarized> {
    let real = |ds: &LabeledEmbeddings| {
        ds.data().as_real().cloned().ok_or_else(|| {
            Error::Config(format!(
                "binarizer {:?} needs real-valued embeddings",
                config.binarizer
            ))
        })
    };
    let relabel = |bits: BitMatrix, ds: &LabeledEmbeddings| {
        LabeledEmbeddings::binary(bits, ds.labels().to_vec())
    };
    match config.binarizer {
        Binarizer::None => {
            if data.train.data().as_binary().is_none() || data.test.data().as_binary().is_none() {
                return Err(Error::Config(
                    "real-valued embeddings need a binarizer (thermometer or heaviside)".into(),
                ));
            }
            Ok(Binarized {
                train: data.train.clone(),
                test: data.test.clone(),
                codec: InputCodec::Identity,
                clf_width: data.train.dim(),
            })
        }
        Binarizer::Thermometer => {
            let (x_train, x_test) = (real(&data.train)?, real(&data.test)?);
            let d0 = data.train.filter_classes(initial);
            let codec = ThermometerCodec::new(config.therm_p, calibrate_range(&real(&d0)?)?)?;
            Ok(Binarized {
                train: relabel(codec.encode(&x_train)?, &data.train)?,
                test: LabeledEmbeddings::real(
                    therm_decode(&codec.encode(&x_test)?, config.therm_p)?,
                    data.test.labels().to_vec(),
                )?,
                codec: InputCodec::Thermometer { p: config.therm_p },
                clf_width: codec.d(),
            })
        }
        Binarizer::Heaviside => {
            let (x_train, x_test) = (real(&data.train)?, real(&data.test)?);
            let d0 = data.train.filter_classes(initial);
            let mut rng = SeededRng::substream(config.seed, streams::BINARIZER);
            let proj =
                HeavisideProjection::random(x_train.n_cols(), config.heaviside_factor, &mut rng)?;
            let mut sorted = initial.to_vec();
            sorted.sort_unstable();
            let head = LinearClassifier::new(proj.width(), crate::classifier::InputKind::Binary)
                .extend_outputs(&sorted)?;
            let fit = train_heaviside(
                &real(&d0)?,
                d0.labels(),
                &proj,
                &head,
                &config.binarizer_train_config(),
                &mut rng,
            )?;
            let proj = fit.projection;
            Ok(Binarized {
                train: relabel(heaviside_forward(&x_train, &proj)?, &data.train)?,
                test: relabel(heaviside_forward(&x_test, &proj)?, &data.test)?,
                codec: InputCodec::Identity,
                clf_width: proj.width(),
            })
        }
    }
}

enum Memory {
    Gbm(GbmStore),
    Lr(LatentReplayBuffer),
    None,
}

impl Memory {
    fn source(&self) -> Option<&dyn ReplaySource> {
        match self {
            Memory::Gbm(s) if !s.is_empty() => Some(s),
            Memory::Lr(b) if !b.is_empty() => Some(b),
            _ => None,
        }
    }
}

/// Runs the full class-incremental protocol on already loaded data.
pub fn run_on(config: &RunConfig, data: &RunData) -> Result<MetricsReport> {
    config.validate()?;
    let scenario = scenario_for(config, &data.train)?;
    for c in data.test.classes() {
        if !data.train.classes().contains(&c) {
            return Err(Error::UnknownClass(c));
        }
    }
    let bin = binarize(config, data, scenario.split(0)).map_err(|e| e.at_task(0))?;
    let by_class = split_by_class(&bin.train)?;
    let test_splits: Vec<LabeledEmbeddings> = scenario
        .splits()
        .iter()
        .map(|s| bin.test.filter_classes(s))
        .collect();
    let d_mem = bin.train.dim();

    let mut memory = match config.method {
        Method::Gbm => Memory::Gbm(GbmStore::new(
            d_mem,
            config.gbm_k,
            config.gbm_q,
            config.class_weighting,
        )?),
        Method::Lr => Memory::Lr(LatentReplayBuffer::new(config.lr_exemplars)),
        Method::Finetune | Method::Joint => Memory::None,
    };
    let train_cfg = config.train_config();
    let em_cfg = config.em_config();
    let mut train_rng = SeededRng::substream(config.seed, streams::TRAIN);
    let mut mem_rng = SeededRng::substream(config.seed, streams::MEMORY);
    let mut clf = LinearClassifier::new(bin.clf_width, bin.codec.classifier_kind());

    let mut acc_matrix = Vec::with_capacity(scenario.n_tasks());
    let mut group_curves = Vec::with_capacity(scenario.n_tasks());
    for t in 0..scenario.n_tasks() {
        let mut task = || -> Result<(Vec<f64>, GroupAccuracy)> {
            let new_classes = scenario.split(t);
            clf = match config.method {
                // offline reference: a fresh head on everything seen so far
                Method::Joint => LinearClassifier::new(bin.clf_width, bin.codec.classifier_kind())
                    .extend_outputs(&sorted(scenario.seen(t)))?,
                _ => clf.extend_outputs(new_classes)?,
            };
            let train_set = match config.method {
                Method::Joint => bin.train.filter_classes(&scenario.seen(t)),
                _ => bin.train.filter_classes(new_classes),
            };
            let (trained, _) = train_task(
                &clf,
                &train_set,
                memory.source(),
                bin.codec,
                &train_cfg,
                &mut train_rng,
            )?;
            clf = trained;
            for &c in new_classes {
                let z = &by_class[&c];
                match &mut memory {
                    Memory::Gbm(store) => {
                        store.update(c, z, &em_cfg, &mut mem_rng)?;
                    }
                    Memory::Lr(buffer) => buffer.lr_store(c, z, &mut mem_rng)?,
                    Memory::None => {}
                }
            }
            evaluate_task(&clf, &scenario, &test_splits, t, &bin.test)
        };
        let (row, groups) = task().map_err(|e| e.at_task(t))?;
        acc_matrix.push(row);
        group_curves.push(groups);
    }

    let all: Vec<f64> = group_curves.iter().map(|g| g.all).collect();
    let n_c = scenario.seen(scenario.t()).len() as u64;
    let memory_bits = match config.method {
        Method::Gbm => memory_bits_gbm(
            config.gbm_k as u64,
            d_mem as u64,
            n_c,
            u64::from(config.gbm_q),
        ),
        Method::Lr => memory_bits_lr(config.lr_exemplars as u64, d_mem as u64, n_c),
        Method::Finetune | Method::Joint => 0,
    };
    Ok(MetricsReport {
        avg_incremental_accuracy: average_incremental_accuracy(&all)?,
        final_accuracy: *all.last().expect("at least one task"),
        acc_matrix,
        group_curves,
        memory_bits,
    })
}

fn sorted(mut ids: Vec<ClassId>) -> Vec<ClassId> {
    ids.sort_unstable();
    ids
}

fn evaluate_task(
    clf: &LinearClassifier,
    scenario: &CilScenario,
    test_splits: &[LabeledEmbeddings],
    t: usize,
    test: &LabeledEmbeddings,
) -> Result<(Vec<f64>, GroupAccuracy)> {
    let row = test_splits[..=t]
        .iter()
        .map(|s| evaluate(clf, s))
        .collect::<Result<Vec<_>>>()?;
    let subset = |classes: Vec<ClassId>| evaluate(clf, &test.filter_classes(&classes));
    let past = if t >= 2 {
        Some(subset(
            scenario.splits()[1..t].iter().flatten().copied().collect(),
        )?)
    } else {
        None
    };
    Ok((
        row.clone(),
        GroupAccuracy {
            new: row[t],
            past,
            initial: row[0],
            all: subset(scenario.seen(t))?,
        },
    ))
}
