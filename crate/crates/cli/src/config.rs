//! Experiment configuration files (TOML).

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crtx_core::cortex::{AreaConfig, SenseKey};
use crtx_core::data::FunctionId;
use crtx_core::theory::ErrorSampling;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentId {
    Fnapprox,
    MixedImages,
    VerifyBound,
}

impl ExperimentId {
    pub fn name(self) -> &'static str {
        match self {
            Self::Fnapprox => "fnapprox",
            Self::MixedImages => "mixed-images",
            Self::VerifyBound => "verify-bound",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentId,
    pub seed: u64,
    /// Output directory; `--out` wins.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fnapprox: Option<FnApproxConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub images: Option<ImagesConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bound: Option<BoundConfig>,
    /// Per-area network, training and reflection settings, by name. The
    /// network's input and output shapes select the area.
    #[serde(default)]
    pub areas: BTreeMap<String, AreaConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FnApproxConfig {
    pub function: FunctionId,
    pub samples: usize,
    #[serde(default = "default_domain")]
    pub domain: (f64, f64),
    /// Evenly spaced points written to `plotdata.csv`.
    #[serde(default = "default_grid")]
    pub grid: usize,
}

fn default_domain() -> (f64, f64) {
    (-1.0, 1.0)
}

fn default_grid() -> usize {
    401
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ImagesConfig {
    /// Directory holding the four MNIST IDX files.
    pub mnist_dir: PathBuf,
    /// Directory holding `data_batch_{1..5}.bin` and `test_batch.bin`.
    pub cifar_dir: PathBuf,
    /// Samples drawn from each training set; `--take` wins.
    #[serde(default)]
    pub train_take: Option<usize>,
    #[serde(default)]
    pub test_take: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub t_step: f64,
    pub n_min: usize,
    pub n_max: usize,
    pub samples: usize,
    #[serde(default)]
    pub sampling: ErrorSampling,
    /// Agreement tolerance in Monte Carlo standard errors.
    pub sigmas: f64,
}

impl BoundConfig {
    pub fn t_values(&self) -> Vec<f64> {
        let steps = ((self.t_max - self.t_min) / self.t_step + 1e-9).floor() as usize;
        (0..=steps).map(|i| self.t_min + self.t_step * i as f64).collect()
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| CliError::Config(vec![format!("{}: {e}", path.display())]))?;
        if let Some(img) = cfg.images.as_mut() {
            let base = path.parent().unwrap_or(Path::new("."));
            img.mnist_dir = resolve(base, &img.mnist_dir);
            img.cifar_dir = resolve(base, &img.cifar_dir);
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Area configs keyed by the shapes their networks declare.
    pub fn keyed_areas(&self) -> BTreeMap<SenseKey, AreaConfig> {
        self.areas.values().map(|a| (SenseKey::new(a.net.input.clone(), a.net.output.clone()), a.clone())).collect()
    }

    /// Every problem found, not just the first.
    pub fn validate(&self) -> Result<(), CliError> {
        let mut errs = Vec::new();
        let need = |errs: &mut Vec<String>, present: bool, section: &str| {
            if !present {
                errs.push(format!("experiment {} needs a [{section}] section", self.experiment.name()));
            }
        };
        match self.experiment {
            ExperimentId::Fnapprox => {
                need(&mut errs, self.fnapprox.is_some(), "fnapprox");
                if let Some(f) = &self.fnapprox {
                    if f.samples == 0 {
                        errs.push("fnapprox.samples must be positive".into());
                    }
                    #[allow(clippy::neg_cmp_op_on_partial_ord)] // also rejects NaN
                    if !(f.domain.0 < f.domain.1) {
                        errs.push(format!("fnapprox.domain {:?} is empty", f.domain));
                    }
                    if f.grid < 2 {
                        errs.push("fnapprox.grid must be at least 2".into());
                    }
                }
                if self.areas.len() != 1 {
                    errs.push(format!("fnapprox needs exactly one area, found {}", self.areas.len()));
                }
            }
            ExperimentId::MixedImages => {
                need(&mut errs, self.images.is_some(), "images");
                if let Some(img) = &self.images {
                    for dir in [&img.mnist_dir, &img.cifar_dir] {
                        if !dir.is_dir() {
                            errs.push(format!("data directory {} does not exist", dir.display()));
                        }
                    }
                }
                if self.areas.is_empty() {
                    errs.push("mixed-images needs area configs".into());
                }
            }
            ExperimentId::VerifyBound => {
                need(&mut errs, self.bound.is_some(), "bound");
                if let Some(b) = &self.bound {
                    if !(b.t_min > 1.0 && b.t_max >= b.t_min && b.t_step > 0.0) {
                        errs.push("bound needs 1 < t_min <= t_max and t_step > 0".into());
                    }
                    if b.n_min == 0 || b.n_max < b.n_min {
                        errs.push("bound needs 1 <= n_min <= n_max".into());
                    }
                    if b.samples < 100 {
                        errs.push("bound.samples must be at least 100".into());
                    }
                }
            }
        }
        let mut seen = BTreeMap::new();
        for (name, a) in &self.areas {
            if let Err(e) = a.net.layers() {
                errs.push(format!("area {name}: {e}"));
            }
            if let Err(e) = a.reflection.validate() {
                errs.push(format!("area {name}: {e}"));
            }
            let key = SenseKey::new(a.net.input.clone(), a.net.output.clone());
            if let Some(other) = seen.insert(key.clone(), name) {
                errs.push(format!("areas {other} and {name} share the shape key {key}"));
            }
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(CliError::Config(errs))
        }
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}
