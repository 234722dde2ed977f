use serde::{Deserialize, Serialize};

use super::LossKind;
use crate::bptt::GradientSet;
use crate::error::{Error, Result};
use crate::network::Params;
use crate::neuron::SurrogateSpec;

/// Optimiser, schedule and sampling settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    /// Epochs between learning-rate drops.
    pub lr_decay_every: usize,
    pub lr_decay_factor: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub seed: u64,
    pub surrogate: SurrogateSpec,
    pub time_steps: usize,
    pub patch_size: usize,
    /// Scale on the fan-in uniform initialisation bound `sqrt(3 / fan_in)`.
    pub init_gain: f64,
    pub loss: LossKind,
    /// Share of each class's training pixels held out for model selection.
    pub validation_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.085,
            lr_decay_every: 25,
            lr_decay_factor: 0.1,
            epochs: 30,
            batch_size: 8,
            momentum: 0.9,
            seed: 0,
            surrogate: SurrogateSpec::default(),
            time_steps: 10,
            patch_size: 9,
            init_gain: 1.25,
            loss: LossKind::CrossEntropy,
            validation_fraction: 0.1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad(format!(
                "learning rate {} must be non-negative",
                self.learning_rate
            ));
        }
        if !(self.lr_decay_factor > 0.0 && self.lr_decay_factor <= 1.0) {
            return bad(format!(
                "lr decay factor {} outside (0, 1]",
                self.lr_decay_factor
            ));
        }
        if self.lr_decay_every == 0 {
            return bad("lr_decay_every must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} outside [0, 1)", self.momentum));
        }
        if self.batch_size == 0 || self.epochs == 0 || self.time_steps == 0 {
            return bad("epochs, batch_size and time_steps must be positive".into());
        }
        if self.patch_size.is_multiple_of(2) {
            return bad(format!("patch size must be odd, got {}", self.patch_size));
        }
        if !(self.init_gain > 0.0 && self.init_gain.is_finite()) {
            return bad(format!("init gain {} must be positive", self.init_gain));
        }
        if !(0.0..1.0).contains(&self.validation_fraction) {
            return bad(format!(
                "validation fraction {} outside [0, 1)",
                self.validation_fraction
            ));
        }
        self.surrogate.validate()
    }

    /// Piecewise-constant step decay.
    pub fn lr_at(&self, epoch: usize) -> f64 {
        self.learning_rate
            * self
                .lr_decay_factor
                .powi((epoch / self.lr_decay_every) as i32)
    }
}

/// Momentum buffers, one per parameter tensor.
#[derive(Clone, Debug, PartialEq)]
pub struct Velocity(pub Vec<Vec<f64>>);

impl Velocity {
    pub fn zeros(params: &Params) -> Self {
        Self(
            params
                .tensors()
                .iter()
                .map(|t| vec![0.0; t.len()])
                .collect(),
        )
    }
}

/// Classical momentum: `v ← μ·v + g`, `p ← p − lr·v`.
pub fn sgd_step(
    params: &mut Params,
    grads: &GradientSet,
    velocity: &mut Velocity,
    cfg: &TrainConfig,
    epoch: usize,
) -> Result<()> {
    if grads.len() != params.len() || velocity.0.len() != params.len() {
        return Err(Error::shape(
            "gradient, velocity and parameter counts differ",
        ));
    }
    for (i, g) in grads.grads.iter().enumerate() {
        if g.len() != params.tensors()[i].len() {
            return Err(Error::shape(format!(
                "gradient for {} has the wrong size",
                grads.names[i]
            )));
        }
    }
    if let Some(name) = grads.first_non_finite() {
        return Err(Error::Training {
            param: name.to_string(),
            reason: "non-finite gradient".into(),
        });
    }
    let lr = cfg.lr_at(epoch);
    let mu = cfg.momentum;
    let names = params.names().to_vec();
    for (((p, g), v), name) in params
        .tensors_mut()
        .iter_mut()
        .zip(&grads.grads)
        .zip(&mut velocity.0)
        .zip(&names)
    {
        for ((w, &gi), vi) in p.data_mut().iter_mut().zip(g).zip(v.iter_mut()) {
            *vi = mu * *vi + gi;
            let next = f64::from(*w) - lr * *vi;
            if !next.is_finite() {
                return Err(Error::Training {
                    param: name.clone(),
                    reason: "update diverged".into(),
                });
            }
            *w = next as f32;
        }
    }
    Ok(())
}
