//! CSV writers and the console summary.

use std::path::Path;

use crtx_core::cortex::{AreaMetrics, Evaluation, TaskKind};
use crtx_core::theory::BoundReport;

use crate::config::ExperimentConfig;
use crate::experiment::Datasets;
use crate::CliError;

pub const METRICS_HEADER: [&str; 20] = [
    "experiment",
    "seed",
    "split",
    "area",
    "kind",
    "samples",
    "networks",
    "accuracy",
    "baseline_accuracy",
    "loss",
    "baseline_loss",
    "loss_reduction_pct",
    "mean_loss",
    "baseline_mean_loss",
    "mean_loss_reduction_pct",
    "epsilon",
    "delta",
    "err_max",
    "t",
    "routed",
];

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

fn writer(path: &Path) -> Result<csv::Writer<std::fs::File>, CliError> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => CliError::io(path, io),
        other => CliError::Input(format!("{other:?}")),
    })
}

fn kind_name(k: TaskKind) -> &'static str {
    match k {
        TaskKind::Regression => "regression",
        TaskKind::Classification => "classification",
    }
}

fn area_row(cfg: &ExperimentConfig, split: &str, a: &AreaMetrics) -> Vec<String> {
    vec![
        cfg.experiment.name().into(),
        cfg.seed.to_string(),
        split.into(),
        a.key.to_string(),
        kind_name(a.kind).into(),
        a.samples.to_string(),
        a.networks.to_string(),
        opt(a.accuracy),
        opt(a.baseline_accuracy),
        num(a.loss),
        num(a.baseline_loss),
        num(a.loss_reduction_pct),
        num(a.mean_loss),
        num(a.baseline_mean_loss),
        num(a.mean_loss_reduction_pct),
        opt(a.epsilon),
        opt(a.delta),
        opt(a.err_max),
        opt(a.t),
        a.routed.iter().map(ToString::to_string).collect::<Vec<_>>().join(";"),
    ]
}

fn total_row(cfg: &ExperimentConfig, split: &str, e: &Evaluation) -> Vec<String> {
    let samples: usize = e.areas.iter().map(|a| a.samples).sum();
    let mut row = vec![
        cfg.experiment.name().into(),
        cfg.seed.to_string(),
        split.into(),
        "cortex".into(),
        String::new(),
        samples.to_string(),
        e.networks.to_string(),
        String::new(),
        String::new(),
        num(e.cortex_loss),
        num(e.baseline_cortex_loss),
        num(e.loss_reduction_pct),
    ];
    row.resize(METRICS_HEADER.len(), String::new());
    row
}

/// Per-area rows plus one `cortex` row per split. Holds no timings, so two
/// runs with the same config are byte-identical.
pub fn write_metrics(
    path: &Path,
    cfg: &ExperimentConfig,
    train: &Evaluation,
    test: Option<&Evaluation>,
) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(METRICS_HEADER)?;
    for (split, e) in std::iter::once(("train", train)).chain(test.map(|t| ("test", t))) {
        for a in &e.areas {
            w.write_record(area_row(cfg, split, a))?;
        }
        w.write_record(total_row(cfg, split, e))?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_timings(path: &Path, timings: &[(String, f64)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["phase", "seconds"])?;
    for (phase, s) in timings {
        w.write_record([phase.clone(), format!("{s:.3}")])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_plot(path: &Path, rows: &[[f64; 5]]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["x", "target", "baseline", "cortex", "network"])?;
    for r in rows {
        w.write_record([num(r[0]), num(r[1]), num(r[2]), num(r[3]), (r[4] as usize).to_string()])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_xy(path: &Path, rows: &[(f64, f64)]) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["x", "y"])?;
    for (x, y) in rows {
        w.write_record([num(*x), num(*y)])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_subsets(path: &Path, data: &Datasets) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["split", "area", "sample", "label"])?;
    let splits = std::iter::once(("train", &data.train)).chain(data.test.iter().map(|t| ("test", t)));
    for (split, sets) in splits {
        for (key, ds) in sets {
            for (i, y) in ds.targets().iter().enumerate() {
                w.write_record([split.to_string(), key.to_string(), i.to_string(), y.argmax().to_string()])?;
            }
        }
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

pub fn write_bound(path: &Path, rows: &[BoundReport], sigmas: f64) -> Result<(), CliError> {
    let mut w = writer(path)?;
    w.write_record(["t", "k", "n", "r_analytic", "r_mc", "se", "k_is_t_minus_one", "asymptotic", "agrees"])?;
    for r in rows {
        w.write_record([
            num(r.params.t),
            r.params.k.to_string(),
            r.params.n.to_string(),
            num(r.analytic),
            num(r.monte_carlo.estimate),
            num(r.monte_carlo.standard_error),
            r.conditions.k_is_t_minus_one.to_string(),
            r.conditions.asymptotic.to_string(),
            r.agrees(sigmas).to_string(),
        ])?;
    }
    w.flush().map_err(|e| CliError::io(path, e))?;
    Ok(())
}

fn pct(v: Option<f64>) -> String {
    v.map(|a| format!("{:.2}%", 100.0 * a)).unwrap_or_else(|| "-".into())
}

/// Plain-text table of one evaluation.
pub fn summary(split: &str, e: &Evaluation) -> String {
    let mut s = format!(
        "{split}: cortex loss {:.6e}, general-network loss {:.6e}, reduction {:.2}%, {} networks\n",
        e.cortex_loss, e.baseline_cortex_loss, e.loss_reduction_pct, e.networks
    );
    s.push_str(&format!(
        "  {:<22} {:>6} {:>4} {:>9} {:>9} {:>12} {:>12} {:>8} {:>12} {:>12} {:>8}\n",
        "area", "n", "nets", "acc", "base acc", "loss", "base loss", "red %", "mean", "base mean", "red %"
    ));
    for a in &e.areas {
        s.push_str(&format!(
            "  {:<22} {:>6} {:>4} {:>9} {:>9} {:>12.4e} {:>12.4e} {:>8.2} {:>12.4e} {:>12.4e} {:>8.2}\n",
            a.key.to_string(),
            a.samples,
            a.networks,
            pct(a.accuracy),
            pct(a.baseline_accuracy),
            a.loss,
            a.baseline_loss,
            a.loss_reduction_pct,
            a.mean_loss,
            a.baseline_mean_loss,
            a.mean_loss_reduction_pct
        ));
    }
    s
}
