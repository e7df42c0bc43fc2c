use std::io::Write;

use crate::error::{Error, Result};

/// Accuracy on the class groups of one task's evaluation.
#[derive(Debug, Clone, PartialEq)]
pub struct GroupAccuracy {
    /// Classes introduced by the task itself.
    pub new: f64,
    /// Classes of earlier incremental tasks (neither initial nor new).
    pub past: Option<f64>,
    pub initial: f64,
    pub all: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsReport {
    /// Row `t` holds the accuracy on each task `0..=t` test set after task `t`.
    pub acc_matrix: Vec<Vec<f64>>,
    pub group_curves: Vec<GroupAccuracy>,
    pub avg_incremental_accuracy: f64,
    pub final_accuracy: f64,
    pub memory_bits: u64,
}

impl MetricsReport {
    pub fn all_seen(&self) -> Vec<f64> {
        self.group_curves.iter().map(|g| g.all).collect()
    }
}

pub fn average_incremental_accuracy(all_seen: &[f64]) -> Result<f64> {
    if all_seen.is_empty() {
        return Err(Error::EmptyInput("no task accuracies to average"));
    }
    Ok(all_seen.iter().sum::<f64>() / all_seen.len() as f64)
}

/// CSV with columns `task_index, split, accuracy`. Splits are `task_<s>` for
/// the accuracy matrix entries, then `new`, `past`, `initial` and `all`.
pub fn write_metrics_csv<W: Write>(report: &MetricsReport, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    out.write_record(["task_index", "split", "accuracy"])?;
    for (t, (row, groups)) in report
        .acc_matrix
        .iter()
        .zip(&report.group_curves)
        .enumerate()
    {
        let t = t.to_string();
        for (s, acc) in row.iter().enumerate() {
            out.write_record([t.as_str(), &format!("task_{s}"), &fmt_acc(*acc)])?;
        }
        let mut named = vec![("new", groups.new)];
        if let Some(p) = groups.past {
            named.push(("past", p));
        }
        named.extend([("initial", groups.initial), ("all", groups.all)]);
        for (name, acc) in named {
            out.write_record([t.as_str(), name, &fmt_acc(acc)])?;
        }
    }
    out.flush()?;
    Ok(())
}

fn fmt_acc(v: f64) -> String {
    format!("{v:.6}")
}

/// Short human-readable summary.
pub fn summary(report: &MetricsReport) -> String {
    let curve: Vec<String> = report
        .all_seen()
        .iter()
        .map(|a| format!("{a:.3}"))
        .collect();
    format!(
        "tasks: {}\nall-seen accuracy per task: {}\naverage incremental accuracy: {:.4}\nfinal accuracy: {:.4}\nmemory: {} bits ({} Mb)\n",
        report.acc_matrix.len(),
        curve.join(" "),
        report.avg_incremental_accuracy,
        report.final_accuracy,
        report.memory_bits,
        crate::memory::format_megabits(report.memory_bits)
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn average_examples() {
        assert!((average_incremental_accuracy(&[0.8, 0.7, 0.6]).unwrap() - 0.7).abs() < 1e-12);
        assert_eq!(average_incremental_accuracy(&[0.42]).unwrap(), 0.42);
        assert_eq!(average_incremental_accuracy(&[0.3; 5]).unwrap(), 0.3);
        assert!(matches!(
            average_incremental_accuracy(&[]),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn csv_layout() {
        let report = MetricsReport {
            acc_matrix: vec![vec![0.9], vec![0.5, 0.75]],
            group_curves: vec![
                GroupAccuracy {
                    new: 0.9,
                    past: None,
                    initial: 0.9,
                    all: 0.9,
                },
                GroupAccuracy {
                    new: 0.75,
                    past: None,
                    initial: 0.5,
                    all: 0.6,
                },
            ],
            avg_incremental_accuracy: 0.75,
            final_accuracy: 0.6,
            memory_bits: 0,
        };
        let mut buf = Vec::new();
        write_metrics_csv(&report, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "task_index,split,accuracy\n\
             0,task_0,0.900000\n0,new,0.900000\n0,initial,0.900000\n0,all,0.900000\n\
             1,task_0,0.500000\n1,task_1,0.750000\n1,new,0.750000\n1,initial,0.500000\n1,all,0.600000\n"
        );
    }
}
