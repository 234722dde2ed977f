use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use spikegrid::data::{
    generate_synthetic, stratified_split, Coord, HsiCube, LabelMap, Scene, SplitMode, SplitSpec,
    SyntheticSpec,
};
use spikegrid::network::{ArchPlan, NetworkSpec, Params};
use spikegrid::neuron::LifConfig;
use spikegrid::train::{
    holdout_validation, labeled_samples, predict, score, train, Checkpoint, Sample, TrainConfig,
    TrainData,
};

fn scene_and_split() -> (HsiCube, LabelMap, Vec<Coord>, Vec<Coord>) {
    let spec = SyntheticSpec {
        height: 16,
        width: 16,
        bands: 8,
        ..Default::default()
    };
    let (cube, labels) = generate_synthetic(&spec).unwrap();
    let split = SplitSpec {
        mode: SplitMode::PerClassCount(10),
        seed: 3,
    };
    let (train, test) = stratified_split(&labels, &split).unwrap();
    (cube, labels, train, test)
}

fn tiny_net(in_channels: usize) -> NetworkSpec {
    let plan = ArchPlan {
        channels: [6, 8, 8],
        width_factor: 1,
        deep_blocks: 1,
        ..Default::default()
    };
    NetworkSpec::from_plan(&plan, in_channels, 5, 4, 4, LifConfig::default()).unwrap()
}

fn tiny_cfg(epochs: usize) -> TrainConfig {
    TrainConfig {
        epochs,
        batch_size: 4,
        patch_size: 5,
        time_steps: 4,
        seed: 11,
        ..Default::default()
    }
}

#[test]
fn synthetic_scene_is_separable_by_nearest_centroid() {
    let (cube, labels) = generate_synthetic(&SyntheticSpec::default()).unwrap();
    let split = SplitSpec {
        mode: SplitMode::PerClassCount(50),
        seed: 0,
    };
    let (train, test) = stratified_split(&labels, &split).unwrap();
    let b = cube.bands();
    let mut centroids = vec![vec![0.0f64; b]; 4];
    let mut counts = [0usize; 4];
    for &(r, c) in &train {
        let k = labels.get(r, c) as usize - 1;
        counts[k] += 1;
        for (m, &v) in centroids[k].iter_mut().zip(cube.spectrum(r, c)) {
            *m += f64::from(v);
        }
    }
    for (m, n) in centroids.iter_mut().zip(counts) {
        m.iter_mut().for_each(|v| *v /= n as f64);
    }
    let hits = test
        .iter()
        .filter(|&&(r, c)| {
            let px = cube.spectrum(r, c);
            let dist = |m: &Vec<f64>| {
                m.iter()
                    .zip(px)
                    .map(|(a, &x)| (a - f64::from(x)).powi(2))
                    .sum::<f64>()
            };
            let best = (0..4)
                .min_by(|&i, &j| dist(&centroids[i]).total_cmp(&dist(&centroids[j])))
                .unwrap();
            best + 1 == labels.get(r, c) as usize
        })
        .count();
    assert!(
        hits as f64 / test.len() as f64 >= 0.99,
        "{hits}/{}",
        test.len()
    );
}

#[test]
fn training_is_deterministic() {
    let (cube, labels, train_px, _) = scene_and_split();
    let scene = Scene::prepare(&cube, 6, &train_px).unwrap();
    let (fit, val) = holdout_validation(&labeled_samples(&train_px, &labels).unwrap(), 0.1);
    let data = TrainData {
        scene: &scene,
        train: fit,
        validation: val,
    };
    let net = tiny_net(6);
    let a = train(&net, &data, &tiny_cfg(2)).unwrap();
    let b = train(&net, &data, &tiny_cfg(2)).unwrap();
    assert_eq!(a.log, b.log);
    assert_eq!(a.params, b.params);
    assert_eq!(a.log.len(), 2);
}

#[test]
fn zero_learning_rate_keeps_initial_weights() {
    let (cube, labels, train_px, _) = scene_and_split();
    let scene = Scene::prepare(&cube, 6, &train_px).unwrap();
    let data = TrainData {
        scene: &scene,
        train: labeled_samples(&train_px, &labels).unwrap(),
        validation: vec![],
    };
    let net = tiny_net(6);
    let cfg = TrainConfig {
        learning_rate: 0.0,
        ..tiny_cfg(1)
    };
    let out = train(&net, &data, &cfg).unwrap();
    let init = Params::init(
        &net,
        cfg.init_gain,
        &mut ChaCha8Rng::seed_from_u64(cfg.seed),
    )
    .unwrap();
    assert_eq!(out.params, init);
}

#[test]
fn loss_falls_on_an_easy_problem() {
    let (cube, labels, train_px, _) = scene_and_split();
    let scene = Scene::prepare(&cube, 6, &train_px).unwrap();
    let data = TrainData {
        scene: &scene,
        train: labeled_samples(&train_px, &labels).unwrap(),
        validation: vec![],
    };
    let out = train(&tiny_net(6), &data, &tiny_cfg(8)).unwrap();
    let first = out.log[0].loss;
    let last = out.log[6..].iter().map(|r| r.loss).sum::<f64>() / 2.0;
    assert!(last < first, "loss {first} -> {last}");
}

#[test]
fn restored_checkpoint_predicts_identically() {
    let (cube, labels, train_px, test_px) = scene_and_split();
    let scene = Scene::prepare(&cube, 6, &train_px).unwrap();
    let data = TrainData {
        scene: &scene,
        train: labeled_samples(&train_px, &labels).unwrap(),
        validation: vec![],
    };
    let net = tiny_net(6);
    let out = train(&net, &data, &tiny_cfg(1)).unwrap();
    let ck = Checkpoint {
        spec: net.clone(),
        params: out.params.clone(),
        pca: scene.pca.clone(),
        standardizer: scene.standardizer.clone(),
    };
    let back = Checkpoint::from_bytes(&ck.to_bytes().unwrap()).unwrap();
    let restored = Scene::from_parts(&cube, back.pca, back.standardizer).unwrap();
    assert_eq!(restored.features, scene.features);
    assert_eq!(
        predict(&back.spec, &back.params, &restored, &test_px).unwrap(),
        predict(&net, &out.params, &scene, &test_px).unwrap()
    );
    let test: Vec<Sample> = labeled_samples(&test_px, &labels).unwrap();
    let (cm, ..) = score(&net, &out.params, &scene, &test, Default::default()).unwrap();
    assert_eq!(cm.total() as usize, test.len());
}
