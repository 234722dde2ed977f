//! Data loading and single training runs shared by the subcommands.

use std::path::Path;
use std::time::Instant;

use spikegrid::data::{stratified_split, Coord, HsiCube, LabelMap, Scene};
use spikegrid::network::{NetworkSpec, Params};
use spikegrid::train::{
    holdout_validation, labeled_samples, score, train_with_progress, Checkpoint, ConfusionMatrix,
    EpochRecord, Metrics, TrainData,
};

use crate::config::RunConfig;
use crate::CliError;

pub struct Dataset {
    pub cube: HsiCube,
    pub labels: LabelMap,
}

impl Dataset {
    pub fn load(cfg: &RunConfig) -> Result<Self, CliError> {
        let read = |p: &Path| {
            if p.is_file() {
                Ok(())
            } else {
                Err(CliError::usage(format!("no such file: {}", p.display())))
            }
        };
        read(&cfg.cube)?;
        read(&cfg.labels)?;
        let cube = HsiCube::load(&cfg.cube)?;
        let labels = LabelMap::load(&cfg.labels)?;
        if (cube.height(), cube.width()) != (labels.height(), labels.width()) {
            return Err(CliError::usage(format!(
                "cube is {}x{} but labels are {}x{}",
                cube.height(),
                cube.width(),
                labels.height(),
                labels.width()
            )));
        }
        if cfg.pca_components > cube.bands() {
            return Err(CliError::usage(format!(
                "pca_components {} exceeds the cube's {} bands",
                cfg.pca_components,
                cube.bands()
            )));
        }
        Ok(Self { cube, labels })
    }
}

/// Outcome of one seeded run, evaluated on its test split.
pub struct RunResult {
    pub seed: u64,
    pub checkpoint: Checkpoint,
    pub log: Vec<EpochRecord>,
    pub best_epoch: usize,
    pub confusion: ConfusionMatrix,
    pub metrics: Metrics,
    pub train_seconds: f64,
    pub test_seconds: f64,
}

/// Splits, fits the input transform, trains, and scores the test pixels.
pub fn run_once(cfg: &RunConfig, data: &Dataset, verbose: bool) -> Result<RunResult, CliError> {
    let net = cfg.network_spec(data.labels.num_classes())?;
    let (train_px, test_px) = stratified_split(&data.labels, &cfg.split)?;
    let scene = Scene::prepare(&data.cube, cfg.pca_components, &train_px)?;
    let (fit, validation) = holdout_validation(
        &labeled_samples(&train_px, &data.labels)?,
        cfg.train.validation_fraction,
    );
    let td = TrainData {
        scene: &scene,
        train: fit,
        validation,
    };
    let seed = cfg.train.seed;
    let t0 = Instant::now();
    let out = train_with_progress(&net, &td, &cfg.train, |r, _| {
        if verbose {
            eprintln!(
                "seed {seed} epoch {:>3} lr {:.5} loss {:.4} val oa {:.4}",
                r.epoch, r.lr, r.loss, r.oa
            );
        }
    })?;
    let train_seconds = t0.elapsed().as_secs_f64();
    let t1 = Instant::now();
    let (confusion, metrics) = evaluate_split(&net, &out.params, &scene, &test_px, &data.labels)?;
    let test_seconds = t1.elapsed().as_secs_f64();
    Ok(RunResult {
        seed,
        checkpoint: Checkpoint {
            spec: net,
            params: out.params,
            pca: scene.pca,
            standardizer: scene.standardizer,
        },
        log: out.log,
        best_epoch: out.best_epoch,
        confusion,
        metrics,
        train_seconds,
        test_seconds,
    })
}

pub fn evaluate_split(
    net: &NetworkSpec,
    params: &Params,
    scene: &Scene,
    coords: &[Coord],
    labels: &LabelMap,
) -> Result<(ConfusionMatrix, Metrics), CliError> {
    let samples = labeled_samples(coords, labels)?;
    let (cm, m, _) = score(net, params, scene, &samples, Default::default())?;
    Ok((cm, m))
}

/// Loads a checkpoint and checks it against the config and dataset.
pub fn load_checkpoint(
    path: &Path,
    cfg: &RunConfig,
    data: &Dataset,
) -> Result<(Checkpoint, Scene), CliError> {
    if !path.is_file() {
        return Err(CliError::usage(format!(
            "no such checkpoint: {}",
            path.display()
        )));
    }
    let ck = Checkpoint::load(path)?;
    let expect = cfg.network_spec(data.labels.num_classes())?;
    if ck.spec.schema_hash() != expect.schema_hash() {
        return Err(CliError::usage(
            "checkpoint network does not match the config (patch size, time steps, architecture, classes or components differ)",
        ));
    }
    if ck.pca.bands != data.cube.bands() {
        return Err(CliError::usage(format!(
            "checkpoint expects {} bands, cube has {}",
            ck.pca.bands,
            data.cube.bands()
        )));
    }
    let scene = Scene::from_parts(&data.cube, ck.pca.clone(), ck.standardizer.clone())?;
    Ok((ck, scene))
}
