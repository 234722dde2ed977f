//! Loss, optimiser, metrics, the epoch loop and model checkpoints.

mod checkpoint;
mod loss;
mod metrics;
mod optim;

pub use checkpoint::Checkpoint;
pub use loss::{cross_entropy_loss, loss_f64, LossKind};
pub use metrics::{evaluate, ConfusionMatrix, Metrics};
pub use optim::{sgd_step, TrainConfig, Velocity};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bptt::{GradientSet, Tape};
use crate::data::{Coord, LabelMap, Scene};
use crate::error::{Error, Result};
use crate::network::{NetworkSpec, Params};
use crate::neuron::SpikeFunction;

/// A labeled pixel; `class` is zero-based.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Sample {
    pub coord: Coord,
    pub class: usize,
}

/// Attaches ground truth to coordinates; unlabeled pixels are an error.
pub fn labeled_samples(coords: &[Coord], labels: &LabelMap) -> Result<Vec<Sample>> {
    coords
        .iter()
        .map(|&(r, c)| match labels.get(r, c) {
            0 => Err(Error::data(format!("pixel ({r}, {c}) is unlabeled"))),
            l => Ok(Sample {
                coord: (r, c),
                class: l as usize - 1,
            }),
        })
        .collect()
}

/// Moves the last `round(fraction · n)` samples of each class to a
/// validation set, always leaving at least one training sample per class.
pub fn holdout_validation(train: &[Sample], fraction: f64) -> (Vec<Sample>, Vec<Sample>) {
    let k = train.iter().map(|s| s.class + 1).max().unwrap_or(0);
    let mut by_class = vec![Vec::new(); k];
    for s in train {
        by_class[s.class].push(*s);
    }
    let mut fit = Vec::new();
    let mut val = Vec::new();
    for group in by_class {
        let n = group.len();
        let v = ((fraction * n as f64).round() as usize).min(n.saturating_sub(1));
        fit.extend_from_slice(&group[..n - v]);
        val.extend_from_slice(&group[n - v..]);
    }
    (fit, val)
}

/// Everything the epoch loop reads.
pub struct TrainData<'a> {
    pub scene: &'a Scene,
    pub train: Vec<Sample>,
    /// Used for best-epoch selection; when empty, running training accuracy is used.
    pub validation: Vec<Sample>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lr: f64,
    /// Mean training loss over the epoch.
    pub loss: f64,
    /// Selection-set scores (validation, or running training accuracy).
    pub oa: f64,
    pub aa: f64,
    pub kappa: f64,
}

impl EpochRecord {
    pub const CSV_HEADER: &'static str = "epoch,lr,loss,oa,aa,kappa";

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{},{}",
            self.epoch, self.lr, self.loss, self.oa, self.aa, self.kappa
        )
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters from the selected epoch.
    pub params: Params,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
}

/// Forward, loss and backward for one sample.
fn sample_gradient(
    net: &NetworkSpec,
    params: &Params,
    scene: &Scene,
    s: &Sample,
    cfg: &TrainConfig,
) -> Result<(f64, usize, GradientSet)> {
    let input = scene.encode(s.coord, net.patch_size, net.time_steps)?;
    let tape = net.build_tape(params, &input, SpikeFunction::Heaviside)?;
    let (loss, d) = loss_f64(cfg.loss, tape.logits(), s.class)?;
    let pred = argmax(tape.logits());
    Ok((loss, pred, tape.backward_f64(&d, &cfg.surrogate)?))
}

fn argmax(v: &[f64]) -> usize {
    // first maximum wins, so ties resolve to the lowest class
    v.iter()
        .enumerate()
        .fold((0, f64::NEG_INFINITY), |(bi, bv), (i, &x)| {
            if x > bv {
                (i, x)
            } else {
                (bi, bv)
            }
        })
        .0
}

#[cfg(feature = "parallel")]
fn map_ordered<T: Sync, R: Send>(items: &[T], f: impl Fn(&T) -> R + Sync + Send) -> Vec<R> {
    use rayon::prelude::*;
    items.par_iter().map(f).collect()
}

#[cfg(not(feature = "parallel"))]
fn map_ordered<T, R>(items: &[T], f: impl Fn(&T) -> R) -> Vec<R> {
    items.iter().map(f).collect()
}

/// Class scores for each coordinate (zero-based predicted class, loss-free).
pub fn predict(
    net: &NetworkSpec,
    params: &Params,
    scene: &Scene,
    coords: &[Coord],
) -> Result<Vec<usize>> {
    map_ordered(coords, |&c| -> Result<usize> {
        let input = scene.encode(c, net.patch_size, net.time_steps)?;
        let tape: Tape = net.build_tape(params, &input, SpikeFunction::Heaviside)?;
        Ok(argmax(tape.logits()))
    })
    .into_iter()
    .collect()
}

/// Metrics and mean loss over labeled samples.
pub fn score(
    net: &NetworkSpec,
    params: &Params,
    scene: &Scene,
    samples: &[Sample],
    loss: LossKind,
) -> Result<(ConfusionMatrix, Metrics, f64)> {
    let out = map_ordered(samples, |s| -> Result<(usize, f64)> {
        let input = scene.encode(s.coord, net.patch_size, net.time_steps)?;
        let tape = net.build_tape(params, &input, SpikeFunction::Heaviside)?;
        Ok((
            argmax(tape.logits()),
            loss_f64(loss, tape.logits(), s.class)?.0,
        ))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;
    let preds: Vec<usize> = out.iter().map(|o| o.0 + 1).collect();
    let truths: Vec<usize> = samples.iter().map(|s| s.class + 1).collect();
    let (cm, m) = evaluate(&preds, &truths, net.num_classes)?;
    let mean_loss = out.iter().map(|o| o.1).sum::<f64>() / out.len().max(1) as f64;
    Ok((cm, m, mean_loss))
}

/// Seeded minibatch SGD with best-epoch selection.
///
/// The seed drives initialisation and then every epoch's shuffle, so two
/// calls with equal inputs give identical logs and parameters. Per-sample
/// gradients may be computed in parallel but are summed in batch order.
pub fn train(net: &NetworkSpec, data: &TrainData<'_>, cfg: &TrainConfig) -> Result<TrainOutcome> {
    train_with_progress(net, data, cfg, |_, _| {})
}

pub fn train_with_progress(
    net: &NetworkSpec,
    data: &TrainData<'_>,
    cfg: &TrainConfig,
    mut on_epoch: impl FnMut(&EpochRecord, &Params),
) -> Result<TrainOutcome> {
    cfg.validate()?;
    net.validate()?;
    if data.train.is_empty() {
        return Err(Error::data("no training samples"));
    }
    if let Some(s) = data
        .train
        .iter()
        .chain(&data.validation)
        .find(|s| s.class >= net.num_classes)
    {
        return Err(Error::data(format!(
            "sample class {} exceeds network outputs",
            s.class + 1
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut params = Params::init(net, cfg.init_gain, &mut rng)?;
    let mut velocity = Velocity::zeros(&params);
    let mut order: Vec<Sample> = data.train.clone();
    let mut log = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(f64, f64, usize, Params)> = None;

    for epoch in 0..cfg.epochs {
        order.shuffle(&mut rng);
        let mut total_loss = 0.0;
        let mut preds = Vec::with_capacity(order.len());
        for batch in order.chunks(cfg.batch_size) {
            let results = map_ordered(batch, |s| sample_gradient(net, &params, data.scene, s, cfg));
            let mut acc = GradientSet::zeros_like(&params);
            for r in results {
                let (loss, pred, g) = r?;
                total_loss += loss;
                preds.push(pred + 1);
                acc.add_scaled(&g, 1.0);
            }
            acc.scale(1.0 / batch.len() as f64);
            sgd_step(&mut params, &acc, &mut velocity, cfg, epoch)?;
        }
        let mean_loss = total_loss / order.len() as f64;
        let (metrics, sel_loss) = if data.validation.is_empty() {
            let truths: Vec<usize> = order.iter().map(|s| s.class + 1).collect();
            (evaluate(&preds, &truths, net.num_classes)?.1, mean_loss)
        } else {
            let (_, m, l) = score(net, &params, data.scene, &data.validation, cfg.loss)?;
            (m, l)
        };
        let rec = EpochRecord {
            epoch,
            lr: cfg.lr_at(epoch),
            loss: mean_loss,
            oa: metrics.oa,
            aa: metrics.aa,
            kappa: metrics.kappa,
        };
        on_epoch(&rec, &params);
        log.push(rec);
        let better = match &best {
            None => true,
            Some((oa, l, _, _)) => metrics.oa > *oa || (metrics.oa == *oa && sel_loss < *l),
        };
        if better {
            best = Some((metrics.oa, sel_loss, epoch, params.clone()));
        }
    }
    let (_, _, best_epoch, params) = best.expect("at least one epoch");
    Ok(TrainOutcome {
        params,
        log,
        best_epoch,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn holdout_per_class_tail() {
        let train: Vec<Sample> = (0..20)
            .map(|i| Sample {
                coord: (0, i),
                class: i / 10,
            })
            .collect();
        let (fit, val) = holdout_validation(&train, 0.1);
        assert_eq!(fit.len(), 18);
        assert_eq!(
            val.iter().map(|s| s.coord.1).collect::<Vec<_>>(),
            vec![9, 19]
        );
        let single = [Sample {
            coord: (0, 0),
            class: 0,
        }];
        assert_eq!(holdout_validation(&single, 0.5).0.len(), 1);
    }

    #[test]
    fn argmax_ties_take_lowest() {
        assert_eq!(argmax(&[0.0, 1.0, 1.0]), 1);
        assert_eq!(argmax(&[0.0, 0.0]), 0);
    }
}
