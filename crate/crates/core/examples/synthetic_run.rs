//! Trains the full network on the 4-class synthetic scene and prints the
//! per-epoch log and final test scores.
//!
//! `cargo run --release -p spikegrid --example synthetic_run -- [epochs] [gain] [batch] [arcsin|rect] [lr] [seed]`
//!
//! `RATES=1` prints per-population firing rates at initialisation;
//! `EVAL_EACH=1` scores the test split after every epoch.

use std::time::Instant;

use spikegrid::data::{
    generate_synthetic, stratified_split, Scene, SplitMode, SplitSpec, SyntheticSpec,
};
use spikegrid::network::{ArchPlan, NetworkSpec};
use spikegrid::neuron::{LifConfig, SurrogateKind, SurrogateSpec};
use spikegrid::train::{
    holdout_validation, labeled_samples, score, train_with_progress, EpochRecord, TrainConfig,
    TrainData,
};

fn main() -> spikegrid::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, d: &str| args.get(i).cloned().unwrap_or_else(|| d.to_string());
    let kind = match arg(3, "arcsin").as_str() {
        "rect" => SurrogateKind::Rectangular,
        _ => SurrogateKind::AadArcsin,
    };
    let d = TrainConfig::default();
    let num = |i: usize, dflt: String| arg(i, &dflt).parse::<f64>().expect("numeric argument");
    let cfg = TrainConfig {
        epochs: num(0, d.epochs.to_string()) as usize,
        init_gain: num(1, d.init_gain.to_string()),
        batch_size: num(2, d.batch_size.to_string()) as usize,
        learning_rate: num(4, d.learning_rate.to_string()),
        seed: num(5, "0".into()) as u64,
        surrogate: SurrogateSpec::new(kind, 1.0)?,
        ..Default::default()
    };
    let (cube, labels) = generate_synthetic(&SyntheticSpec::default())?;
    let split = SplitSpec {
        mode: SplitMode::PerClassCount(50),
        seed: cfg.seed,
    };
    let (train_px, test_px) = stratified_split(&labels, &split)?;
    let scene = Scene::prepare(&cube, 20, &train_px)?;
    let net = NetworkSpec::from_plan(
        &ArchPlan::default(),
        20,
        cfg.patch_size,
        4,
        cfg.time_steps,
        LifConfig::default(),
    )?;
    let (fit, val) = holdout_validation(
        &labeled_samples(&train_px, &labels)?,
        cfg.validation_fraction,
    );
    let data = TrainData {
        scene: &scene,
        train: fit,
        validation: val,
    };
    if std::env::var_os("RATES").is_some() {
        use rand::SeedableRng;
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let p = spikegrid::network::Params::init(&net, cfg.init_gain, &mut rng)?;
        for s in data.train.iter().take(3) {
            let x = scene.encode(s.coord, 9, 10)?;
            let (l, tape) = spikegrid::bptt::forward_record(&net, &p, &x)?;
            let r: Vec<String> = tape
                .firing_rates()
                .iter()
                .map(|v| format!("{v:.3}"))
                .collect();
            println!("rates {} logits {:?}", r.join(" "), l.data());
        }
    }
    let t0 = Instant::now();
    println!("{}", EpochRecord::CSV_HEADER);
    let test = labeled_samples(&test_px, &labels)?;
    let each = std::env::var_os("EVAL_EACH").is_some();
    let out = train_with_progress(&net, &data, &cfg, |r, p| {
        let t = if each {
            score(&net, p, &scene, &test, cfg.loss).unwrap().1.oa
        } else {
            f64::NAN
        };
        println!(
            "{} test {t:.4} ({:.0}s)",
            r.csv_row(),
            t0.elapsed().as_secs_f64()
        )
    })?;
    let (_, m, l) = score(&net, &out.params, &scene, &test, cfg.loss)?;
    println!(
        "best epoch {} test oa {:.4} aa {:.4} kappa {:.4} loss {:.4} total {:.0}s",
        out.best_epoch,
        m.oa,
        m.aa,
        m.kappa,
        l,
        t0.elapsed().as_secs_f64()
    );
    Ok(())
}
