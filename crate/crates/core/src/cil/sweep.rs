use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use super::config::{Method, RunConfig};
use super::run::{run_on, RunData};
use crate::error::{Error, Result};

/// One memory knob varied while everything else stays fixed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum SweepAxis {
    /// Latent replay with `E` exemplars per class.
    LrE(Vec<usize>),
    /// GBM prototype precision.
    GbmQ(Vec<u8>),
    /// GBM components per class.
    GbmK(Vec<usize>),
}

impl SweepAxis {
    /// Parses `lr_E`, `gbm_q` or `gbm_K` with comma-separated values.
    pub fn parse(name: &str, values: &str) -> Result<Self> {
        fn list<T: std::str::FromStr>(values: &str) -> Result<Vec<T>> {
            values
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::Config(format!("bad sweep value {v:?}")))
                })
                .collect()
        }
        let axis = match name {
            "lr_E" | "lr_e" => SweepAxis::LrE(list(values)?),
            "gbm_q" => SweepAxis::GbmQ(list(values)?),
            "gbm_K" | "gbm_k" => SweepAxis::GbmK(list(values)?),
            other => return Err(Error::Config(format!("unknown sweep axis {other:?}"))),
        };
        if axis.configs(&RunConfig::default()).is_empty() {
            return Err(Error::Config("sweep needs at least one value".into()));
        }
        Ok(axis)
    }

    fn configs(&self, base: &RunConfig) -> Vec<(u64, RunConfig)> {
        match self {
            SweepAxis::LrE(es) => es
                .iter()
                .map(|&e| {
                    let cfg = RunConfig {
                        method: Method::Lr,
                        lr_exemplars: e,
                        ..base.clone()
                    };
                    (e as u64, cfg)
                })
                .collect(),
            SweepAxis::GbmQ(qs) => qs
                .iter()
                .map(|&q| {
                    let cfg = RunConfig {
                        method: Method::Gbm,
                        gbm_q: q,
                        ..base.clone()
                    };
                    (u64::from(q), cfg)
                })
                .collect(),
            SweepAxis::GbmK(ks) => ks
                .iter()
                .map(|&k| {
                    let cfg = RunConfig {
                        method: Method::Gbm,
                        gbm_k: k,
                        ..base.clone()
                    };
                    (k as u64, cfg)
                })
                .collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepRow {
    pub method: &'static str,
    pub axis_value: u64,
    pub memory_bits: u64,
    pub avg_acc: f64,
}

/// One run per axis value on the same data and seeds. Runs execute in
/// parallel; rows come back sorted by memory, then axis value.
pub fn sweep_memory(base: &RunConfig, data: &RunData, axis: &SweepAxis) -> Result<Vec<SweepRow>> {
    let mut rows = axis
        .configs(base)
        .into_par_iter()
        .map(|(value, cfg)| {
            let report = run_on(&cfg, data)?;
            Ok(SweepRow {
                method: cfg.method.name(),
                axis_value: value,
                memory_bits: report.memory_bits,
                avg_acc: report.avg_incremental_accuracy,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    rows.sort_by_key(|r| (r.memory_bits, r.axis_value));
    Ok(rows)
}

pub fn write_sweep_csv<W: Write>(rows: &[SweepRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["method", "axis_value", "memory_bits", "avg_acc"])?;
    for r in rows {
        out.write_record([
            r.method.to_string(),
            r.axis_value.to_string(),
            r.memory_bits.to_string(),
            format!("{:.6}", r.avg_acc),
        ])?;
    }
    out.flush()?;
    Ok(())
}
