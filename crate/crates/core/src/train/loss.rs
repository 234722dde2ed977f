use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossKind {
    #[default]
    CrossEntropy,
    /// Squared error against a one-hot target, averaged over classes.
    Mse,
}

/// Softmax cross-entropy on rate outputs. `true_class` is zero-based.
pub fn cross_entropy_loss(logits: &Tensor, true_class: usize) -> Result<(f64, Tensor)> {
    let (loss, grad) = loss_f64(LossKind::CrossEntropy, &logits.to_f64(), true_class)?;
    Ok((
        loss,
        Tensor::from_f64(logits.shape(), &grad, "cross entropy")?,
    ))
}

/// Loss value and `∂loss/∂logits`.
pub fn loss_f64(kind: LossKind, logits: &[f64], true_class: usize) -> Result<(f64, Vec<f64>)> {
    let k = logits.len();
    if k < 2 {
        return Err(Error::shape(format!("need at least 2 classes, got {k}")));
    }
    if true_class >= k {
        return Err(Error::data(format!(
            "class index {true_class} out of range for {k} classes"
        )));
    }
    match kind {
        LossKind::CrossEntropy => {
            let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = logits.iter().map(|&z| (z - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            let loss = sum.ln() + max - logits[true_class];
            let mut grad: Vec<f64> = exps.iter().map(|e| e / sum).collect();
            grad[true_class] -= 1.0;
            Ok((loss, grad))
        }
        LossKind::Mse => {
            let n = k as f64;
            let mut loss = 0.0;
            let grad = logits
                .iter()
                .enumerate()
                .map(|(i, &z)| {
                    let d = z - if i == true_class { 1.0 } else { 0.0 };
                    loss += d * d / n;
                    2.0 * d / n
                })
                .collect();
            Ok((loss, grad))
        }
    }
}
