//! `spikegrid`: train, evaluate, map and sweep spiking HSI classifiers.

mod config;
mod ppm;
mod report;
mod run;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use spikegrid::data::{
    generate_synthetic, stratified_split, write_atomic, SplitMode, SplitSpec, SyntheticSpec,
};
use spikegrid::train::predict;

use config::RunConfig;
use report::{RunRow, SweepRow};
use run::{Dataset, RunResult};

/// Error carrying the process exit code: 2 for usage, configuration and
/// data problems, 3 for failures during training or evaluation.
#[derive(Debug)]
pub struct CliError {
    code: u8,
    msg: String,
}

impl CliError {
    pub fn usage(msg: impl Into<String>) -> Self {
        Self {
            code: 2,
            msg: msg.into(),
        }
    }

    pub fn runtime(msg: impl Into<String>) -> Self {
        Self {
            code: 3,
            msg: msg.into(),
        }
    }
}

impl From<spikegrid::Error> for CliError {
    fn from(e: spikegrid::Error) -> Self {
        use spikegrid::Error as E;
        match e {
            E::Training { .. } | E::NonFinite(_) | E::Convergence { .. } => {
                Self::runtime(e.to_string())
            }
            _ => Self::usage(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::usage(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "spikegrid",
    version,
    about = "Spiking width-mixed residual networks for hyperspectral images"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Run configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Overrides the split and training seed from the config
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct Repeat {
    /// Independent runs with seeds seed, seed+1, ...
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repeats: u32,
    /// Runs executed concurrently
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    jobs: u32,
}

#[derive(Subcommand)]
enum Command {
    /// Train, write a checkpoint, the epoch log and test metrics
    Train {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        repeat: Repeat,
    },
    /// Score a checkpoint on the config's test split
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
    },
    /// Classify pixels and write a colored PPM map plus metrics
    PredictMap {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Classify every pixel, including unlabeled ones
        #[arg(long)]
        full: bool,
    },
    /// One training run (or `--repeats`) per value of an ablation axis
    Sweep {
        #[command(flatten)]
        common: Common,
        #[command(flatten)]
        repeat: Repeat,
        #[arg(long, value_enum)]
        axis: Axis,
        /// Comma-separated values; kernel pairs are written `1x3`, or `mixed`
        /// for the reference per-block mix
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Write a synthetic cube, its labels and a starter config
    GenSynthetic {
        #[arg(long)]
        out_dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        classes: usize,
        #[arg(long, default_value_t = 32)]
        height: usize,
        #[arg(long, default_value_t = 32)]
        width: usize,
        #[arg(long, default_value_t = 20)]
        bands: usize,
        #[arg(long, default_value_t = 1.0)]
        separation: f64,
        #[arg(long, default_value_t = 0.1)]
        noise: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Axis {
    SpatialSize,
    TimeSteps,
    Kernels,
    Width,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = configure_threads() {
        eprintln!("error: {}", e.msg);
        return ExitCode::from(e.code);
    }
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.msg);
            ExitCode::from(e.code)
        }
    }
}

/// Honors `SPIKEGRID_THREADS` as a cap on worker threads.
fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("SPIKEGRID_THREADS") else {
        return Ok(());
    };
    let n: usize = v.parse().ok().filter(|&n| n > 0).ok_or_else(|| {
        CliError::usage(format!(
            "SPIKEGRID_THREADS must be a positive integer, got {v:?}"
        ))
    })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::runtime(e.to_string()))
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Train { common, repeat } => cmd_train(&common, &repeat),
        Command::Eval { common, checkpoint } => cmd_eval(&common, &checkpoint),
        Command::PredictMap {
            common,
            checkpoint,
            full,
        } => cmd_predict_map(&common, &checkpoint, full),
        Command::Sweep {
            common,
            repeat,
            axis,
            values,
        } => cmd_sweep(&common, &repeat, axis, &values),
        Command::GenSynthetic {
            out_dir,
            classes,
            height,
            width,
            bands,
            separation,
            noise,
            seed,
        } => cmd_gen_synthetic(
            &out_dir,
            SyntheticSpec {
                num_classes: classes,
                height,
                width,
                bands,
                class_separation: separation,
                noise_sigma: noise,
                seed,
            },
        ),
    }
}

fn load_config(common: &Common) -> Result<RunConfig, CliError> {
    let cfg = RunConfig::load(&common.config)?;
    Ok(match common.seed {
        Some(s) => cfg.with_seed(s),
        None => cfg,
    })
}

/// Runs `cfg` under `repeats` consecutive seeds, `jobs` at a time.
fn run_repeats(
    cfg: &RunConfig,
    data: &Dataset,
    repeat: &Repeat,
) -> Result<Vec<RunResult>, CliError> {
    let seeds: Vec<u64> = (0..repeat.repeats as u64)
        .map(|i| cfg.train.seed + i)
        .collect();
    let go = |&s: &u64| run::run_once(&cfg.with_seed(s), data, repeat.jobs == 1);
    if repeat.jobs == 1 {
        return seeds.iter().map(go).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(repeat.jobs as usize)
        .build()
        .map_err(|e| CliError::runtime(e.to_string()))?;
    pool.install(|| seeds.par_iter().map(go).collect())
}

fn cmd_train(common: &Common, repeat: &Repeat) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let data = Dataset::load(&cfg)?;
    let results = run_repeats(&cfg, &data, repeat)?;
    let out = &cfg.output_dir;
    fs::create_dir_all(out)?;
    for (i, r) in results.iter().enumerate() {
        let dir = out.join(format!("run-{i}"));
        fs::create_dir_all(&dir)?;
        r.checkpoint.save(&dir.join("checkpoint.sgck"))?;
        report::write_epoch_log(&dir.join("epochs.csv"), &r.log)?;
    }
    // the first run uses the configured seed; its artifacts are the headline ones
    results[0].checkpoint.save(&out.join("checkpoint.sgck"))?;
    report::write_epoch_log(&out.join("epochs.csv"), &results[0].log)?;
    write_confusion(&out.join("confusion.csv"), &results[0].confusion)?;
    let rows: Vec<RunRow> = results
        .iter()
        .enumerate()
        .map(|(i, r)| RunRow::new(i, r))
        .collect();
    report::write_csv(&out.join("metrics.csv"), &rows)?;
    let summary = report::summary(&rows);
    report::write_csv(&out.join("summary.csv"), &summary)?;
    for s in &summary {
        println!("{:<6} {}", s.metric, s.formatted);
    }
    Ok(())
}

fn cmd_eval(common: &Common, checkpoint: &Path) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let data = Dataset::load(&cfg)?;
    let (ck, scene) = run::load_checkpoint(checkpoint, &cfg, &data)?;
    let (_, test_px) = stratified_split(&data.labels, &cfg.split)?;
    let t0 = std::time::Instant::now();
    let (cm, m) = run::evaluate_split(&ck.spec, &ck.params, &scene, &test_px, &data.labels)?;
    let secs = t0.elapsed().as_secs_f64();
    fs::create_dir_all(&cfg.output_dir)?;
    let row = eval_row(cfg.split.seed, &m, secs);
    report::write_csv(&cfg.output_dir.join("eval.csv"), &[row])?;
    write_confusion(&cfg.output_dir.join("confusion.csv"), &cm)?;
    println!("oa {:.4} aa {:.4} kappa {:.4}", m.oa, m.aa, m.kappa);
    Ok(())
}

#[derive(serde::Serialize)]
struct EvalRow {
    seed: u64,
    oa: f64,
    aa: f64,
    kappa: f64,
    test_seconds: f64,
}

fn eval_row(seed: u64, m: &spikegrid::train::Metrics, secs: f64) -> EvalRow {
    EvalRow {
        seed,
        oa: m.oa,
        aa: m.aa,
        kappa: m.kappa,
        test_seconds: secs,
    }
}

fn write_confusion(path: &Path, cm: &spikegrid::train::ConfusionMatrix) -> Result<(), CliError> {
    let mut s = String::from("true\\pred");
    for j in 1..=cm.k {
        s.push_str(&format!(",{j}"));
    }
    s.push('\n');
    for i in 0..cm.k {
        s.push_str(&(i + 1).to_string());
        for j in 0..cm.k {
            s.push_str(&format!(",{}", cm.get(i, j)));
        }
        s.push('\n');
    }
    Ok(write_atomic(path, s.as_bytes())?)
}

fn cmd_predict_map(common: &Common, checkpoint: &Path, full: bool) -> Result<(), CliError> {
    let cfg = load_config(common)?;
    let data = Dataset::load(&cfg)?;
    let (ck, scene) = run::load_checkpoint(checkpoint, &cfg, &data)?;
    let (h, w) = (data.labels.height(), data.labels.width());
    let coords: Vec<(usize, usize)> = (0..h)
        .flat_map(|r| (0..w).map(move |c| (r, c)))
        .filter(|&(r, c)| full || data.labels.get(r, c) != 0)
        .collect();
    let preds = predict(&ck.spec, &ck.params, &scene, &coords)?;
    let mut classes = vec![0usize; h * w];
    for (&(r, c), &p) in coords.iter().zip(&preds) {
        classes[r * w + c] = p + 1;
    }
    fs::create_dir_all(&cfg.output_dir)?;
    let colors = ppm::palette(data.labels.num_classes());
    write_atomic(
        &cfg.output_dir.join("map.ppm"),
        &ppm::encode(w, h, &classes, &colors),
    )?;

    // metrics on the same held-out pixels `train` reports
    let (_, test_px) = stratified_split(&data.labels, &cfg.split)?;
    let t0 = std::time::Instant::now();
    let (_, m) = run::evaluate_split(&ck.spec, &ck.params, &scene, &test_px, &data.labels)?;
    let row = eval_row(cfg.split.seed, &m, t0.elapsed().as_secs_f64());
    report::write_csv(&cfg.output_dir.join("map_metrics.csv"), &[row])?;
    println!("oa {:.4} aa {:.4} kappa {:.4}", m.oa, m.aa, m.kappa);
    Ok(())
}

/// Applies one sweep value to a config, rejecting values the axis cannot take.
fn apply_axis(base: &RunConfig, axis: Axis, value: &str) -> Result<RunConfig, CliError> {
    let bad = || CliError::usage(format!("invalid value {value:?} for axis {axis:?}"));
    let num = || value.trim().parse::<usize>().map_err(|_| bad());
    let mut cfg = base.clone();
    match axis {
        Axis::SpatialSize => cfg.train.patch_size = num()?,
        Axis::TimeSteps => cfg.train.time_steps = num()?,
        Axis::Width => cfg.network.arch.width_factor = num()?,
        Axis::Kernels => {
            let reference = spikegrid::network::ArchPlan::default();
            let arch = &mut cfg.network.arch;
            if value.trim() == "mixed" {
                arch.shallow_kernels = reference.shallow_kernels;
                arch.deep_kernels = reference.deep_kernels;
            } else {
                let ks = value
                    .trim()
                    .split('x')
                    .map(|k| k.parse::<usize>().map_err(|_| bad()))
                    .collect::<Result<Vec<_>, _>>()?;
                *arch = arch.clone().uniform_kernels(&ks);
            }
        }
    }
    cfg.validate()
        .map_err(|e| CliError::usage(format!("value {value:?}: {}", e.msg)))?;
    Ok(cfg)
}

fn cmd_sweep(
    common: &Common,
    repeat: &Repeat,
    axis: Axis,
    values: &[String],
) -> Result<(), CliError> {
    let base = load_config(common)?;
    let configs = values
        .iter()
        .map(|v| apply_axis(&base, axis, v))
        .collect::<Result<Vec<_>, _>>()?;
    let data = Dataset::load(&base)?;
    for cfg in &configs {
        // kernel and width plans must also fit the channel counts
        cfg.network_spec(data.labels.num_classes())?;
    }
    let mut table: Vec<SweepRow> = Vec::new();
    for (v, cfg) in values.iter().zip(&configs) {
        eprintln!("sweep {axis:?} = {v}");
        let results = run_repeats(cfg, &data, repeat)?;
        let rows: Vec<RunRow> = results
            .iter()
            .enumerate()
            .map(|(i, r)| RunRow::new(i, r))
            .collect();
        table.push(report::sweep_row(v.trim(), &rows));
    }
    fs::create_dir_all(&base.output_dir)?;
    let name = format!("sweep-{}.csv", axis_name(axis));
    report::write_csv(&base.output_dir.join(&name), &table)?;
    for r in &table {
        println!(
            "{:<8} OA {:.2}±{:.2}  AA {:.2}±{:.2}  Kappa {:.2}±{:.2}",
            r.value,
            100.0 * r.oa_mean,
            100.0 * r.oa_std,
            100.0 * r.aa_mean,
            100.0 * r.aa_std,
            100.0 * r.kappa_mean,
            100.0 * r.kappa_std
        );
    }
    Ok(())
}

fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::SpatialSize => "spatial-size",
        Axis::TimeSteps => "time-steps",
        Axis::Kernels => "kernels",
        Axis::Width => "width",
    }
}

fn cmd_gen_synthetic(out_dir: &Path, spec: SyntheticSpec) -> Result<(), CliError> {
    let (cube, labels) = generate_synthetic(&spec)?;
    fs::create_dir_all(out_dir)?;
    cube.save(&out_dir.join("synthetic.hsic"))?;
    labels.save(&out_dir.join("synthetic.hsil"))?;
    let mut cfg = RunConfig {
        cube: "synthetic.hsic".into(),
        labels: "synthetic.hsil".into(),
        output_dir: "run".into(),
        pca_components: spec.bands.min(30),
        network: Default::default(),
        train: Default::default(),
        split: SplitSpec {
            mode: SplitMode::PerClassCount(50),
            seed: spec.seed,
        },
    };
    cfg.train.seed = spec.seed;
    let json = serde_json::to_string_pretty(&cfg).map_err(|e| CliError::runtime(e.to_string()))?;
    write_atomic(&out_dir.join("config.json"), json.as_bytes())?;
    println!(
        "wrote {}x{}x{} cube with {} classes to {}",
        spec.height,
        spec.width,
        spec.bands,
        spec.num_classes,
        out_dir.display()
    );
    Ok(())
}
