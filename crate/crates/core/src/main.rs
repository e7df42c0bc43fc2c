use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use gbm::binarize::{calibrate_range, read_codec, write_codec, ThermometerCodec};
use gbm::bmm::format::{read_model, write_model, StoredModel};
use gbm::bmm::{dequantize, fit, quantize, sample, EmConfig, InitMode};
use gbm::cil::{
    run_on, summary, sweep_memory, write_metrics_csv, write_sweep_csv, RunConfig, RunData,
    SweepAxis,
};
use gbm::data::{load_embeddings, save_embeddings, LabeledEmbeddings};
use gbm::memory::{write_memory_report, MemoryRow};
use gbm::rng::{streams, SeededRng};
use gbm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "gbm",
    version,
    about = "Generative binary memory for class-incremental learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Flat TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Writes the configured synthetic train/test embeddings.
    Synth {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
    },
    /// Fits a Bernoulli mixture to binary embeddings.
    FitBmm {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        k: usize,
        /// Quantize prototypes to this many bits.
        #[arg(long)]
        q: Option<u8>,
        /// Only use rows of this class.
        #[arg(long)]
        class: Option<u32>,
        #[arg(long, default_value = "centroid")]
        init: InitMode,
        #[arg(long)]
        fixed_pi: bool,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Draws binary rows from a stored mixture.
    Sample {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        out: PathBuf,
        /// Label written for every sampled row.
        #[arg(long, default_value_t = 0)]
        label: u32,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Thermometer-encodes real embeddings, calibrating on the input unless
    /// a codec is given.
    Encode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 8)]
        p: usize,
        /// Existing codec to reuse.
        #[arg(long)]
        codec: Option<PathBuf>,
        /// Where to write the calibrated codec.
        #[arg(long)]
        codec_out: Option<PathBuf>,
    },
    /// Averages thermometer segments back to one value per feature.
    Decode {
        #[arg(long)]
        input: PathBuf,
        #[arg(long)]
        codec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs one class-incremental experiment.
    RunCil {
        #[command(flatten)]
        common: Common,
        /// Metrics CSV (task_index, split, accuracy).
        #[arg(long)]
        out: PathBuf,
    },
    /// Sweeps one memory knob and reports accuracy against memory.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// lr_E, gbm_q or gbm_K.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long)]
        values: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Memory cost table for GBM and latent replay.
    MemoryReport {
        #[arg(long, default_value_t = 12544)]
        d: u64,
        #[arg(long, default_value_t = 10)]
        n_classes: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [1u64, 4, 8])]
        k: Vec<u64>,
        #[arg(long, default_value_t = 32)]
        q: u64,
        #[arg(long, value_delimiter = ',', default_values_t = [75u64, 100, 150])]
        e: Vec<u64>,
        /// CSV destination; standard output when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn execute(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            common,
            train_out,
            test_out,
        } => {
            let cfg = common.load()?;
            let data = RunData::from_config(&RunConfig {
                train_path: None,
                test_path: None,
                ..cfg
            })?;
            save_embeddings(&data.train, &train_out)?;
            save_embeddings(&data.test, &test_out)?;
            println!(
                "wrote {} train and {} test rows, {} classes, width {}",
                data.train.len(),
                data.test.len(),
                data.train.classes().len(),
                data.train.dim()
            );
        }
        Command::FitBmm {
            input,
            out,
            k,
            q,
            class,
            init,
            fixed_pi,
            seed,
        } => {
            let mut ds = load_embeddings(&input)?;
            if let Some(c) = class {
                ds = ds.filter_classes(&[c]);
            }
            let z = ds
                .data()
                .as_binary()
                .ok_or_else(|| Error::Config("fit-bmm needs binary embeddings".into()))?;
            let cfg = EmConfig {
                k,
                init_mode: init,
                pi_trainable: !fixed_pi,
                ..EmConfig::default()
            };
            let (params, report) = fit(z, &cfg, &mut SeededRng::substream(seed, streams::MEMORY))?;
            let model = match q {
                Some(q) => StoredModel::Quantized(quantize(&params, q)?),
                None => StoredModel::Real(params),
            };
            write_model(&model, create(&out)?)?;
            println!(
                "fit K={k} on {} rows of width {}: {} iterations, converged={}, log-likelihood {:.4}",
                z.n_rows(),
                z.n_cols(),
                report.iterations,
                report.converged,
                report.ll_trace.last().copied().unwrap_or(f64::NAN)
            );
        }
        Command::Sample {
            model,
            n,
            out,
            label,
            seed,
        } => {
            let params = match read_model(BufReader::new(File::open(&model)?))? {
                StoredModel::Real(p) => p,
                StoredModel::Quantized(m) => dequantize(&m),
            };
            let bits = sample(&params, n, &mut SeededRng::substream(seed, streams::MEMORY));
            save_embeddings(&LabeledEmbeddings::binary(bits, vec![label; n])?, &out)?;
            println!("sampled {n} rows of width {}", params.d());
        }
        Command::Encode {
            input,
            out,
            p,
            codec,
            codec_out,
        } => {
            let ds = load_embeddings(&input)?;
            let x = ds
                .data()
                .as_real()
                .ok_or_else(|| Error::Config("encode needs real-valued embeddings".into()))?;
            let codec = match codec {
                Some(path) => read_codec(BufReader::new(File::open(path)?))?,
                None => ThermometerCodec::new(p, calibrate_range(x)?)?,
            };
            let bits = codec.encode(x)?;
            save_embeddings(
                &LabeledEmbeddings::binary(bits, ds.labels().to_vec())?,
                &out,
            )?;
            if let Some(path) = codec_out {
                write_codec(&codec, create(&path)?)?;
            }
            println!(
                "encoded {} rows: {} -> {} bits",
                ds.len(),
                codec.d(),
                codec.width()
            );
        }
        Command::Decode { input, codec, out } => {
            let ds = load_embeddings(&input)?;
            let codec = read_codec(BufReader::new(File::open(codec)?))?;
            let bits = ds
                .data()
                .as_binary()
                .ok_or_else(|| Error::Config("decode needs binary embeddings".into()))?;
            let x = codec.decode(bits)?;
            save_embeddings(&LabeledEmbeddings::real(x, ds.labels().to_vec())?, &out)?;
            println!("decoded {} rows to width {}", ds.len(), codec.d());
        }
        Command::RunCil { common, out } => {
            let cfg = common.load()?;
            let data = RunData::from_config(&cfg)?;
            let report = run_on(&cfg, &data)?;
            let mut w = create(&out)?;
            write_metrics_csv(&report, &mut w)?;
            w.flush()?;
            print!("method: {}\n{}", cfg.method.name(), summary(&report));
        }
        Command::Sweep {
            common,
            axis,
            values,
            out,
        } => {
            let cfg = common.load()?;
            let axis = SweepAxis::parse(&axis, &values)?;
            let data = RunData::from_config(&cfg)?;
            let rows = sweep_memory(&cfg, &data, &axis)?;
            let mut w = create(&out)?;
            write_sweep_csv(&rows, &mut w)?;
            w.flush()?;
            for r in &rows {
                println!(
                    "{} {:>6} {:>12} bits  avg acc {:.4}",
                    r.method, r.axis_value, r.memory_bits, r.avg_acc
                );
            }
        }
        Command::MemoryReport {
            d,
            n_classes,
            k,
            q,
            e,
            out,
        } => {
            let mut rows: Vec<MemoryRow> = k
                .iter()
                .map(|&k| MemoryRow::gbm(k, q, d, n_classes))
                .collect();
            rows.extend(e.iter().map(|&e| MemoryRow::lr(e, d, n_classes)));
            match out {
                Some(path) => {
                    let mut w = create(&path)?;
                    write_memory_report(&rows, &mut w)?;
                    w.flush()?;
                    for r in &rows {
                        println!(
                            "{:?} {:>4}: {} bits = {} Mb",
                            r.method, r.k_or_e, r.bits, r.mb
                        );
                    }
                }
                None => write_memory_report(&rows, std::io::stdout().lock())?,
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse().command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.category().exit_code() as u8)
        }
    }
}
