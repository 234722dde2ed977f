//! CSV outputs: per-run metrics, the mean ± std summary and sweep tables.

use std::path::Path;

use serde::{Deserialize, Serialize};
use spikegrid::data::write_atomic;
use spikegrid::train::EpochRecord;

use crate::run::RunResult;
use crate::CliError;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub run: usize,
    pub seed: u64,
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub best_epoch: usize,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

impl RunRow {
    pub fn new(run: usize, r: &RunResult) -> Self {
        Self {
            run,
            seed: r.seed,
            oa: r.metrics.oa,
            aa: r.metrics.aa,
            kappa: r.metrics.kappa,
            best_epoch: r.best_epoch,
            train_seconds: r.train_seconds,
            test_seconds: r.test_seconds,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryRow {
    pub metric: String,
    pub mean: f64,
    pub std: f64,
    /// Percentages in the `mean±std` style, e.g. `99.51±0.23`.
    pub formatted: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub value: String,
    pub oa_mean: f64,
    pub oa_std: f64,
    pub aa_mean: f64,
    pub aa_std: f64,
    pub kappa_mean: f64,
    pub kappa_std: f64,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

/// Mean and sample standard deviation (zero for a single value).
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

pub fn summary(rows: &[RunRow]) -> Vec<SummaryRow> {
    let pick: [(&str, fn(&RunRow) -> f64); 3] =
        [("oa", |r| r.oa), ("aa", |r| r.aa), ("kappa", |r| r.kappa)];
    pick.iter()
        .map(|(name, f)| {
            let (mean, std) = mean_std(&rows.iter().map(f).collect::<Vec<_>>());
            SummaryRow {
                metric: name.to_string(),
                mean,
                std,
                formatted: format!("{:.2}±{:.2}", 100.0 * mean, 100.0 * std),
            }
        })
        .collect()
}

pub fn sweep_row(value: &str, rows: &[RunRow]) -> SweepRow {
    let col = |f: fn(&RunRow) -> f64| mean_std(&rows.iter().map(f).collect::<Vec<_>>());
    let (oa_mean, oa_std) = col(|r| r.oa);
    let (aa_mean, aa_std) = col(|r| r.aa);
    let (kappa_mean, kappa_std) = col(|r| r.kappa);
    SweepRow {
        value: value.to_string(),
        oa_mean,
        oa_std,
        aa_mean,
        aa_std,
        kappa_mean,
        kappa_std,
        train_seconds: col(|r| r.train_seconds).0,
        test_seconds: col(|r| r.test_seconds).0,
    }
}

pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)
            .map_err(|e| CliError::runtime(e.to_string()))?;
    }
    w.into_inner().map_err(|e| CliError::runtime(e.to_string()))
}

pub fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<(), CliError> {
    Ok(write_atomic(path, &to_csv(rows)?)?)
}

pub fn write_epoch_log(path: &Path, log: &[EpochRecord]) -> Result<(), CliError> {
    let mut s = String::from(EpochRecord::CSV_HEADER);
    s.push('\n');
    for r in log {
        s.push_str(&r.csv_row());
        s.push('\n');
    }
    Ok(write_atomic(path, s.as_bytes())?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sample_std() {
        let (m, s) = mean_std(&[1.0, 2.0, 3.0]);
        assert_eq!(m, 2.0);
        assert_eq!(s, 1.0);
        assert_eq!(mean_std(&[0.5]), (0.5, 0.0));
    }

    #[test]
    fn summary_formatting() {
        let row = |oa| RunRow {
            run: 0,
            seed: 0,
            oa,
            aa: 1.0,
            kappa: 1.0,
            best_epoch: 0,
            train_seconds: 0.0,
            test_seconds: 0.0,
        };
        let s = summary(&[row(0.99), row(0.98)]);
        assert_eq!(s[0].formatted, "98.50±0.71");
        assert_eq!(s[1].formatted, "100.00±0.00");
    }

    #[test]
    fn csv_round_trip() {
        let rows = vec![SweepRow {
            value: "1x3".into(),
            oa_mean: 0.1 + 0.2,
            oa_std: 1e-17,
            aa_mean: 2.0 / 3.0,
            aa_std: 0.0,
            kappa_mean: -0.125,
            kappa_std: 0.3,
            train_seconds: 12.5,
            test_seconds: 0.25,
        }];
        let bytes = to_csv(&rows).unwrap();
        let back: Vec<SweepRow> = csv::Reader::from_reader(bytes.as_slice())
            .deserialize()
            .collect::<Result<_, _>>()
            .unwrap();
        assert_eq!(back, rows);
    }
}
