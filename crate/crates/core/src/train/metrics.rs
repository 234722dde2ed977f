use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns predictions, both zero-based.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub k: usize,
    pub counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            counts: vec![0; k * k],
        }
    }

    pub fn from_counts(k: usize, counts: Vec<u64>) -> Result<Self> {
        if counts.len() != k * k {
            return Err(Error::shape(format!(
                "{} counts for {k} classes",
                counts.len()
            )));
        }
        Ok(Self { k, counts })
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth * self.k + pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn is_diagonal(&self) -> bool {
        (0..self.k).all(|i| (0..self.k).all(|j| i == j || self.get(i, j) == 0))
    }

    /// Overall accuracy, mean per-class recall, and Cohen's kappa.
    ///
    /// Classes with no true samples are left out of the average recall.
    pub fn metrics(&self) -> Metrics {
        let n = self.total() as f64;
        if n == 0.0 {
            return Metrics {
                oa: 0.0,
                aa: 0.0,
                kappa: 0.0,
                per_class_accuracy: vec![0.0; self.k],
            };
        }
        let k = self.k;
        let row = |i: usize| (0..k).map(|j| self.get(i, j)).sum::<u64>() as f64;
        let col = |j: usize| (0..k).map(|i| self.get(i, j)).sum::<u64>() as f64;
        let trace: f64 = (0..k).map(|i| self.get(i, i) as f64).sum();
        let per_class_accuracy: Vec<f64> = (0..k)
            .map(|i| {
                let r = row(i);
                if r > 0.0 {
                    self.get(i, i) as f64 / r
                } else {
                    0.0
                }
            })
            .collect();
        let present: Vec<usize> = (0..k).filter(|&i| row(i) > 0.0).collect();
        let aa = present.iter().map(|&i| per_class_accuracy[i]).sum::<f64>() / present.len() as f64;
        let po = trace / n;
        let pe: f64 = (0..k).map(|i| row(i) * col(i)).sum::<f64>() / (n * n);
        let kappa = if (1.0 - pe).abs() < 1e-15 {
            if self.is_diagonal() {
                1.0
            } else {
                0.0
            }
        } else {
            (po - pe) / (1.0 - pe)
        };
        Metrics {
            oa: po,
            aa,
            kappa,
            per_class_accuracy,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
    pub per_class_accuracy: Vec<f64>,
}

/// Scores predictions against truths; both use labels `1..=k`.
pub fn evaluate(
    predictions: &[usize],
    truths: &[usize],
    k: usize,
) -> Result<(ConfusionMatrix, Metrics)> {
    if predictions.len() != truths.len() {
        return Err(Error::shape(format!(
            "{} predictions for {} truths",
            predictions.len(),
            truths.len()
        )));
    }
    let mut cm = ConfusionMatrix::new(k);
    for (&p, &t) in predictions.iter().zip(truths) {
        for l in [p, t] {
            if l == 0 || l > k {
                return Err(Error::data(format!("label {l} outside 1..={k}")));
            }
        }
        cm.counts[(t - 1) * k + (p - 1)] += 1;
    }
    let m = cm.metrics();
    Ok((cm, m))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_binary() {
        let m = ConfusionMatrix::from_counts(2, vec![40, 10, 20, 30])
            .unwrap()
            .metrics();
        assert!((m.oa - 0.7).abs() < 1e-12);
        assert!((m.aa - 0.7).abs() < 1e-12);
        assert!((m.kappa - 0.4).abs() < 1e-12);
    }

    #[test]
    fn perfect() {
        let (cm, m) = evaluate(&[1, 2, 3, 3], &[1, 2, 3, 3], 3).unwrap();
        assert_eq!(cm.total(), 4);
        assert_eq!((m.oa, m.aa, m.kappa), (1.0, 1.0, 1.0));
    }

    #[test]
    fn out_of_range() {
        assert!(matches!(evaluate(&[0], &[1], 2), Err(Error::Data(_))));
        assert!(matches!(evaluate(&[1], &[3], 2), Err(Error::Data(_))));
        assert!(evaluate(&[1, 1], &[1], 2).is_err());
    }
}
