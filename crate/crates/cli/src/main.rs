use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use crtx::experiment::{self, RunOptions};
use crtx::{report, ExperimentConfig};
use crtx_core::cortex::{predict, TaskKind};
use crtx_core::{Shape, Tensor};

#[derive(Parser)]
#[command(name = "crtx", version, about = "Train and evaluate shape-routed cortex networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Experiment config (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Samples per dataset (desk-scale subsetting).
    #[arg(long)]
    take: Option<usize>,
}

impl Common {
    fn load(&self) -> Result<ExperimentConfig> {
        let cfg = ExperimentConfig::load(&self.config)?;
        let opts = RunOptions { seed: self.seed, out: self.out.clone(), take: self.take };
        Ok(opts.apply(&cfg))
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the experiment's generated or sampled data.
    GenData(Common),
    /// Train a model; writes model.crtx, metrics.csv and plot data.
    Train(Common),
    /// Recompute metrics.csv for a saved model.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Defaults to <out>/model.crtx.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Predict one input with a saved model.
    Predict {
        #[arg(long)]
        model: PathBuf,
        /// Text file of numbers separated by whitespace or commas.
        #[arg(long)]
        input: PathBuf,
        /// Input shape such as 28x28x1; defaults to a vector.
        #[arg(long)]
        shape: Option<String>,
        /// Output shape; needed only when several areas share the input shape.
        #[arg(long)]
        output_shape: Option<String>,
    },
    /// Check the reflection bound over a grid; writes bound.csv.
    VerifyBound(Common),
    /// Print a metrics table recomputed from a saved model.
    Report {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn parse_shape(s: &str) -> Result<Shape> {
    let dims = s
        .split(['x', ','])
        .map(|d| d.trim().parse::<usize>().with_context(|| format!("bad dimension {d:?} in shape {s:?}")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Shape::new(dims)?)
}

fn read_input(path: &Path, shape: Option<&str>) -> Result<Tensor> {
    let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let values = text
        .split(|c: char| c.is_whitespace() || c == ',')
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().with_context(|| format!("{}: {t:?} is not a number", path.display())))
        .collect::<Result<Vec<_>>>()?;
    if values.is_empty() {
        bail!("{}: no values", path.display());
    }
    let shape = match shape {
        Some(s) => parse_shape(s)?,
        None => Shape::vector(values.len()),
    };
    Tensor::new(shape, values).with_context(|| format!("{}", path.display()))
}

fn model_path(cfg: &ExperimentConfig, model: &Option<PathBuf>) -> PathBuf {
    model.clone().unwrap_or_else(|| experiment::out_dir(cfg).join("model.crtx"))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::GenData(c) => {
            let cfg = c.load()?;
            let path = experiment::gen_data(&cfg)?;
            println!("wrote {}", path.display());
        }
        Command::Train(c) => {
            let cfg = c.load()?;
            let out = experiment::train(&cfg).context("training failed")?;
            print!("{}", report::summary("train", &out.train));
            if let Some(t) = &out.test {
                print!("{}", report::summary("test", t));
            }
            println!("wrote {}", experiment::out_dir(&cfg).display());
        }
        Command::Evaluate { common, model } => {
            let cfg = common.load()?;
            let path = model_path(&cfg, &model);
            let (_, m) = crtx::load_model(&path).with_context(|| format!("loading {}", path.display()))?;
            let (train, test) = experiment::evaluate(&cfg, &m)?;
            let dir = experiment::out_dir(&cfg);
            std::fs::create_dir_all(&dir)?;
            report::write_metrics(&dir.join("metrics.csv"), &cfg, &train, test.as_ref())?;
            println!("wrote {}", dir.join("metrics.csv").display());
        }
        Command::Predict { model, input, shape, output_shape } => {
            let (_, m) = crtx::load_model(&model).with_context(|| format!("loading {}", model.display()))?;
            let x = read_input(&input, shape.as_deref())?;
            let out = match output_shape {
                Some(s) => parse_shape(&s)?,
                None => {
                    let matches: Vec<_> = m.keys().into_iter().filter(|k| &k.input == x.shape()).collect();
                    match matches.as_slice() {
                        [k] => k.output.clone(),
                        [] => bail!(
                            "no area takes input {}; known areas: {}",
                            x.shape(),
                            m.keys().iter().map(ToString::to_string).collect::<Vec<_>>().join(", ")
                        ),
                        _ => bail!("several areas take input {}; pass --output-shape", x.shape()),
                    }
                }
            };
            let p = predict(&m, &x, &out)?;
            println!("area: {}", p.key);
            println!("network id: {}", p.network);
            let vals: Vec<String> = p.output.values().iter().map(|v| v.to_string()).collect();
            println!("prediction: {}", vals.join(" "));
            if m.area(&p.key).is_some_and(|a| a.kind == TaskKind::Classification) {
                println!("class: {}", p.output.argmax());
            }
        }
        Command::VerifyBound(c) => {
            let cfg = c.load()?;
            let (path, rows) = experiment::run_verify_bound(&cfg)?;
            let sigmas = cfg.bound.as_ref().map_or(3.0, |b| b.sigmas);
            let positive = rows.iter().filter(|r| r.analytic > 0.0).count();
            let agree = rows.iter().filter(|r| r.agrees(sigmas)).count();
            println!("{} cells: R > 0 in {positive}, Monte Carlo within {sigmas} s.e. in {agree}", rows.len());
            println!("wrote {}", path.display());
        }
        Command::Report { common, model } => {
            let cfg = common.load()?;
            let path = model_path(&cfg, &model);
            let (_, m) = crtx::load_model(&path).with_context(|| format!("loading {}", path.display()))?;
            let (train, test) = experiment::evaluate(&cfg, &m)?;
            print!("{}", report::summary("train", &train));
            if let Some(t) = &test {
                print!("{}", report::summary("test", t));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
