//! Experiment orchestration.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use crtx_core::cortex::{self, CortexModel, Evaluation, LabeledDataset, LearnEvent, SenseKey};
use crtx_core::data::{gen_function_dataset, mix, FunctionSpec};
use crtx_core::rng::{sub_seed, sub_seed_indexed};
use crtx_core::theory::{bound_report, matched_k, BoundParams, BoundReport};
use crtx_core::{Shape, Tensor};
use log::{debug, info, warn};

use crate::config::{ExperimentConfig, ExperimentId};
use crate::loaders;
use crate::report;
use crate::CliError;

/// Command-line overrides.
#[derive(Debug, Clone, Default)]
pub struct RunOptions {
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
    pub take: Option<usize>,
}

impl RunOptions {
    /// Config with overrides applied.
    pub fn apply(&self, cfg: &ExperimentConfig) -> ExperimentConfig {
        let mut cfg = cfg.clone();
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(out) = &self.out {
            cfg.out = Some(out.clone());
        }
        if let (Some(take), Some(img)) = (self.take, cfg.images.as_mut()) {
            img.train_take = Some(take);
            img.test_take = Some(img.test_take.map_or(take, |t| t.min(take)));
        }
        if let (Some(take), Some(f)) = (self.take, cfg.fnapprox.as_mut()) {
            f.samples = take;
        }
        cfg
    }
}

pub fn out_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.out.clone().unwrap_or_else(|| PathBuf::from("out").join(cfg.experiment.name()))
}

/// Training data and, where the experiment has one, a test split.
pub struct Datasets {
    pub train: BTreeMap<SenseKey, LabeledDataset>,
    pub test: Option<BTreeMap<SenseKey, LabeledDataset>>,
}

fn by_key(sets: Vec<LabeledDataset>) -> BTreeMap<SenseKey, LabeledDataset> {
    sets.into_iter().filter_map(|d| Some((d.key()?, d))).collect()
}

pub fn function_spec(cfg: &ExperimentConfig) -> Result<FunctionSpec, CliError> {
    let f = cfg.fnapprox.as_ref().ok_or_else(|| CliError::Config(vec!["missing [fnapprox] section".into()]))?;
    Ok(FunctionSpec { id: f.function, domain: f.domain })
}

pub fn load_data(cfg: &ExperimentConfig) -> Result<Datasets, CliError> {
    let seed = cfg.seed;
    match cfg.experiment {
        ExperimentId::Fnapprox => {
            let f = cfg.fnapprox.as_ref().expect("validated");
            let ds = gen_function_dataset(&function_spec(cfg)?, f.samples, sub_seed(seed, "data"))?;
            Ok(Datasets { train: by_key(vec![ds]), test: None })
        }
        ExperimentId::MixedImages => {
            let img = cfg.images.as_ref().expect("validated");
            let (ti, tl) = loaders::MNIST_TRAIN;
            let (vi, vl) = loaders::MNIST_TEST;
            let m = |a: &str| img.mnist_dir.join(a);
            let mnist_train = loaders::load_mnist(&m(ti), &m(tl), img.train_take, sub_seed(seed, "mnist-train"))?;
            let mnist_test = loaders::load_mnist(&m(vi), &m(vl), img.test_take, sub_seed(seed, "mnist-test"))?;
            let cifar_train = loaders::load_cifar10(
                &loaders::cifar_train_files(&img.cifar_dir),
                img.train_take,
                sub_seed(seed, "cifar-train"),
            )?;
            let cifar_test = loaders::load_cifar10(
                &loaders::cifar_test_files(&img.cifar_dir),
                img.test_take,
                sub_seed(seed, "cifar-test"),
            )?;
            info!(
                "loaded mnist {}/{} and cifar {}/{} train/test samples",
                mnist_train.len(),
                mnist_test.len(),
                cifar_train.len(),
                cifar_test.len()
            );
            Ok(Datasets {
                train: by_key(vec![mnist_train, cifar_train]),
                test: Some(by_key(vec![mnist_test, cifar_test])),
            })
        }
        ExperimentId::VerifyBound => Err(CliError::Unsupported("verify-bound has no datasets".into())),
    }
}

fn log_event(e: &LearnEvent<'_>) {
    match e {
        LearnEvent::AreaStarted { key, samples } => info!("area {key}: {samples} samples"),
        LearnEvent::GeneralTrained { key, report } => {
            info!("area {key}: general network loss {:.6e}", report.final_loss)
        }
        LearnEvent::EventsCounted { key, epsilon, correct, wrong, err_max } => {
            info!("area {key}: epsilon {epsilon:.4e}, {correct} correct, {wrong} wrong, err_max {err_max:.4e}")
        }
        LearnEvent::SpecialistTrained { key, id, samples, report, accepted } => info!(
            "area {key}: specialist {id} on {samples} samples, loss {:.6e}, {}",
            report.final_loss,
            if *accepted { "accepted" } else { "kept general network" }
        ),
        LearnEvent::SpecialistRejected { key, id } => {
            info!("area {key}: specialist {id} dropped after routing")
        }
        LearnEvent::ClassifierFitted { key, nodes, depth } => {
            info!("area {key}: tree with {nodes} nodes, depth {depth}")
        }
        LearnEvent::Warning { key, message } => warn!("area {key}: {message}"),
    }
}

/// Model, train/test metrics and phase timings of one run.
pub struct TrainOutput {
    pub model: CortexModel,
    pub train: Evaluation,
    pub test: Option<Evaluation>,
    pub timings: Vec<(String, f64)>,
}

/// Flattens the per-key training sets back into one shuffled mixture.
pub fn mixture(data: &Datasets, seed: u64) -> Result<Vec<(Tensor, Tensor)>, CliError> {
    Ok(mix(data.train.values().cloned().collect(), sub_seed(seed, "mix"))?)
}

pub fn learn_model(cfg: &ExperimentConfig, data: &Datasets) -> Result<CortexModel, CliError> {
    let mixed = mixture(data, cfg.seed)?;
    Ok(cortex::learn(mixed, &cfg.keyed_areas(), sub_seed(cfg.seed, "learn"), &mut log_event)?)
}

pub fn evaluate_all(model: &CortexModel, data: &Datasets) -> Result<(Evaluation, Option<Evaluation>), CliError> {
    let train = cortex::evaluate(model, &data.train)?;
    let test = data.test.as_ref().map(|t| cortex::evaluate(model, t)).transpose()?;
    Ok((train, test))
}

/// Trains, evaluates and writes `model.crtx`, `metrics.csv`,
/// `timing.csv` and, for function approximation, `plotdata.csv`.
pub fn train(cfg: &ExperimentConfig) -> Result<TrainOutput, CliError> {
    cfg.validate()?;
    if cfg.experiment == ExperimentId::VerifyBound {
        return Err(CliError::Unsupported("use the verify-bound command for this config".into()));
    }
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let mut timings = Vec::new();

    let t0 = Instant::now();
    let data = load_data(cfg)?;
    timings.push(("load".to_string(), t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let model = learn_model(cfg, &data)?;
    timings.push(("learn".to_string(), t0.elapsed().as_secs_f64()));

    let t0 = Instant::now();
    let (train, test) = evaluate_all(&model, &data)?;
    timings.push(("evaluate".to_string(), t0.elapsed().as_secs_f64()));

    crate::save_model(&model, &cfg.to_toml(), &dir.join("model.crtx"))?;
    report::write_metrics(&dir.join("metrics.csv"), cfg, &train, test.as_ref())?;
    if cfg.experiment == ExperimentId::Fnapprox {
        write_plotdata(cfg, &model, &dir.join("plotdata.csv"))?;
    }
    report::write_timings(&dir.join("timing.csv"), &timings)?;
    Ok(TrainOutput { model, train, test, timings })
}

/// Recomputes metrics for a saved model against the config's data.
pub fn evaluate(cfg: &ExperimentConfig, model: &CortexModel) -> Result<(Evaluation, Option<Evaluation>), CliError> {
    cfg.validate()?;
    let data = load_data(cfg)?;
    evaluate_all(model, &data)
}

/// Dense grid of `x`, `f(x)`, the general network's prediction, the
/// routed prediction and the answering network id.
pub fn plot_rows(cfg: &ExperimentConfig, model: &CortexModel) -> Result<Vec<[f64; 5]>, CliError> {
    let spec = function_spec(cfg)?;
    let grid = cfg.fnapprox.as_ref().expect("fnapprox").grid;
    let key = SenseKey::new(Shape::vector(1), Shape::vector(1));
    let area = model.area(&key).ok_or_else(|| CliError::Unsupported("model has no [1]->[1] area".into()))?;
    let (lo, hi) = spec.domain;
    (0..grid)
        .map(|i| {
            let x = lo + (hi - lo) * i as f64 / (grid - 1) as f64;
            let t = Tensor::scalar(x).map_err(|e| CliError::Input(e.to_string()))?;
            let base = area.networks[0].forward(&t).map_err(cortex::CortexError::from)?;
            let p = cortex::predict(model, &t, &key.output)?;
            Ok([x, spec.eval(x), base.values()[0], p.output.values()[0], p.network as f64])
        })
        .collect()
}

fn write_plotdata(cfg: &ExperimentConfig, model: &CortexModel, path: &Path) -> Result<(), CliError> {
    report::write_plot(path, &plot_rows(cfg, model)?)
}

/// Writes the generated data: `data.csv` for function approximation,
/// `subsets.csv` (source, split, label per drawn sample) for images.
pub fn gen_data(cfg: &ExperimentConfig) -> Result<PathBuf, CliError> {
    cfg.validate()?;
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let data = load_data(cfg)?;
    match cfg.experiment {
        ExperimentId::Fnapprox => {
            let path = dir.join("data.csv");
            let ds = data.train.values().next().expect("one area");
            let rows: Vec<(f64, f64)> =
                ds.inputs().iter().zip(ds.targets()).map(|(x, y)| (x.values()[0], y.values()[0])).collect();
            report::write_xy(&path, &rows)?;
            Ok(path)
        }
        _ => {
            let path = dir.join("subsets.csv");
            report::write_subsets(&path, &data)?;
            Ok(path)
        }
    }
}

/// One row per `(t, N)` with `k = max(1, round(t - 1))`.
pub fn verify_bound(cfg: &ExperimentConfig) -> Result<Vec<BoundReport>, CliError> {
    cfg.validate()?;
    let b = cfg.bound.as_ref().expect("validated");
    let mut rows = Vec::new();
    for (ti, t) in b.t_values().into_iter().enumerate() {
        for n in b.n_min..=b.n_max {
            let p = BoundParams::new(t, matched_k(t), n, 1.0)?;
            let seed = sub_seed_indexed(sub_seed(cfg.seed, "bound-grid"), "cell", (ti * 1_000_000 + n) as u64);
            rows.push(bound_report(&p, b.samples, b.sampling, seed)?);
        }
        debug!("t = {t}: done");
    }
    Ok(rows)
}

pub fn run_verify_bound(cfg: &ExperimentConfig) -> Result<(PathBuf, Vec<BoundReport>), CliError> {
    let rows = verify_bound(cfg)?;
    let dir = out_dir(cfg);
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;
    let path = dir.join("bound.csv");
    report::write_bound(&path, &rows, cfg.bound.as_ref().expect("validated").sigmas)?;
    Ok((path, rows))
}
