//! Sense keys, association areas and the cortex model.

mod eval;
mod features;
mod learn;

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

use crate::clustering::{ClusterError, KMeansParams};
use crate::nets::{BaseNetwork, LossKind, NetError, NetworkConfig, TrainParams};
use crate::tensor::{Shape, Tensor};
use crate::tree::{TaskClassifier, TreeError, TreeParams};

pub use eval::{
    area_loss, baseline_loss, cortex_loss, evaluate, predict, reduction_pct, AreaMetrics, Evaluation, Prediction,
    Routing,
};
pub use features::FeatureMap;
pub use learn::{
    choose_epsilon, error_events, error_scalar, fit_task_classifier, learn, learn_partitioned, reflect, ErrorEvents,
    LearnEvent, Reflection,
};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CortexError {
    #[error("empty dataset")]
    EmptyDataset,
    #[error("inconsistent dataset: {0}")]
    InconsistentDataset(String),
    #[error("no network config for area {0}")]
    MissingConfig(SenseKey),
    #[error("config for area {key} declares {found}")]
    ConfigShape { key: SenseKey, found: SenseKey },
    #[error("area {key} holds {kind:?} data but its network uses {loss:?}")]
    KindMismatch { key: SenseKey, kind: TaskKind, loss: LossKind },
    #[error("no association area for {input} -> {output} (known: {})", list(.known))]
    UnknownKey { input: Shape, output: Shape, known: Vec<SenseKey> },
    #[error("area keys differ: model only {}, data only {}", list(.model_only), list(.data_only))]
    KeyMismatch { model_only: Vec<SenseKey>, data_only: Vec<SenseKey> },
    #[error("invalid reflection params: {0}")]
    BadParams(String),
    #[error("epsilon must be finite and positive, got {0}")]
    BadEpsilon(f64),
    #[error("routed to network {id} but the area has {count}")]
    BadRoute { id: usize, count: usize },
    #[error("feature map: {0}")]
    Features(String),
    #[error(transparent)]
    Net(#[from] NetError),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error(transparent)]
    Cluster(#[from] ClusterError),
}

fn list(keys: &[SenseKey]) -> String {
    let parts: Vec<String> = keys.iter().map(|k| alloc::format!("{k}")).collect();
    if parts.is_empty() {
        "none".into()
    } else {
        parts.join(", ")
    }
}

/// Input and output shape of a sample; the routing key of an area.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SenseKey {
    pub input: Shape,
    pub output: Shape,
}

impl SenseKey {
    pub fn new(input: Shape, output: Shape) -> Self {
        Self { input, output }
    }

    pub fn of(x: &Tensor, y: &Tensor) -> Self {
        Self::new(x.shape().clone(), y.shape().clone())
    }
}

impl fmt::Display for SenseKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}->{}", self.input, self.output)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum TaskKind {
    Regression,
    Classification,
}

impl TaskKind {
    pub fn loss_kind(self) -> LossKind {
        match self {
            TaskKind::Regression => LossKind::Mse,
            TaskKind::Classification => LossKind::CrossEntropy,
        }
    }
}

fn is_one_hot(y: &Tensor) -> bool {
    y.len() >= 2
        && y.values().iter().filter(|&&v| v == 1.0).count() == 1
        && y.values().iter().all(|&v| v == 0.0 || v == 1.0)
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LabeledDataset {
    inputs: Vec<Tensor>,
    targets: Vec<Tensor>,
    kind: TaskKind,
}

impl LabeledDataset {
    /// Checks equal lengths and shape homogeneity.
    pub fn new(inputs: Vec<Tensor>, targets: Vec<Tensor>, kind: TaskKind) -> Result<Self, CortexError> {
        if inputs.len() != targets.len() {
            return Err(CortexError::InconsistentDataset(alloc::format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        if let (Some(x0), Some(y0)) = (inputs.first(), targets.first()) {
            let key = SenseKey::of(x0, y0);
            for (i, (x, y)) in inputs.iter().zip(&targets).enumerate() {
                if SenseKey::of(x, y) != key {
                    return Err(CortexError::InconsistentDataset(alloc::format!(
                        "sample {i} has shape {} but sample 0 has {key}",
                        SenseKey::of(x, y)
                    )));
                }
                if kind == TaskKind::Classification && !is_one_hot(y) {
                    return Err(CortexError::InconsistentDataset(alloc::format!("target {i} is not one-hot")));
                }
            }
        }
        Ok(Self { inputs, targets, kind })
    }

    pub(crate) fn from_parts(inputs: Vec<Tensor>, targets: Vec<Tensor>, kind: TaskKind) -> Self {
        debug_assert_eq!(inputs.len(), targets.len());
        Self { inputs, targets, kind }
    }

    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    pub fn targets(&self) -> &[Tensor] {
        &self.targets
    }

    pub fn kind(&self) -> TaskKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    /// Shape key of the first sample.
    pub fn key(&self) -> Option<SenseKey> {
        Some(SenseKey::of(self.inputs.first()?, self.targets.first()?))
    }

    pub fn subset(&self, indices: &[usize]) -> Self {
        Self {
            inputs: indices.iter().map(|&i| self.inputs[i].clone()).collect(),
            targets: indices.iter().map(|&i| self.targets[i].clone()).collect(),
            kind: self.kind,
        }
    }

    pub fn into_parts(self) -> (Vec<Tensor>, Vec<Tensor>, TaskKind) {
        (self.inputs, self.targets, self.kind)
    }
}

/// Groups samples by `(input shape, output shape)`.
///
/// Order within a group follows the input order. A group is tagged as
/// classification when every target is one-hot with at least two classes.
pub fn sense_partition(mixed: Vec<(Tensor, Tensor)>) -> Result<BTreeMap<SenseKey, LabeledDataset>, CortexError> {
    if mixed.is_empty() {
        return Err(CortexError::EmptyDataset);
    }
    let mut groups: BTreeMap<SenseKey, (Vec<Tensor>, Vec<Tensor>)> = BTreeMap::new();
    for (x, y) in mixed {
        let g = groups.entry(SenseKey::of(&x, &y)).or_default();
        g.0.push(x);
        g.1.push(y);
    }
    Ok(groups
        .into_iter()
        .map(|(key, (xs, ys))| {
            let kind = if ys.iter().all(is_one_hot) { TaskKind::Classification } else { TaskKind::Regression };
            (key, LabeledDataset::from_parts(xs, ys, kind))
        })
        .collect())
}

/// How `ε` is chosen from the general network's training errors.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum EpsilonMode {
    Absolute(f64),
    /// Target fraction of correct events on the training set.
    Quantile(f64),
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReflectionParams {
    pub epsilon: EpsilonMode,
    /// Cluster count; 0 disables reflection.
    pub k: usize,
    pub rounds: usize,
    pub specialist: TrainParams,
    #[cfg_attr(feature = "serde", serde(default))]
    pub kmeans: KMeansParams,
    #[cfg_attr(feature = "serde", serde(default))]
    pub tree: TreeParams,
    #[cfg_attr(feature = "serde", serde(default))]
    pub features: FeatureMap,
}

impl ReflectionParams {
    pub fn new(k: usize, specialist: TrainParams) -> Self {
        Self {
            epsilon: EpsilonMode::Quantile(0.8),
            k,
            rounds: 1,
            specialist,
            kmeans: KMeansParams::default(),
            tree: TreeParams::default(),
            features: FeatureMap::Raw,
        }
    }

    pub fn disabled() -> Self {
        Self::new(0, TrainParams { epochs: 0, batch_size: None, learning_rate: 0.0 })
    }

    pub fn validate(&self) -> Result<(), CortexError> {
        match self.epsilon {
            EpsilonMode::Absolute(e) if !(e.is_finite() && e > 0.0) => {
                return Err(CortexError::BadParams(alloc::format!("absolute epsilon {e} must be positive")));
            }
            EpsilonMode::Quantile(d) if !(d > 0.0 && d < 1.0) => {
                return Err(CortexError::BadParams(alloc::format!("quantile {d} must lie in (0, 1)")));
            }
            _ => {}
        }
        if self.k > 0 && self.rounds == 0 {
            return Err(CortexError::BadParams("rounds must be at least 1".into()));
        }
        Ok(())
    }
}

/// Everything needed to build one association area.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AreaConfig {
    pub net: NetworkConfig,
    pub train: TrainParams,
    pub reflection: ReflectionParams,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ReflectionStats {
    pub epsilon: f64,
    /// Observed fraction of correct events on the training set.
    pub delta: f64,
    pub err_max: f64,
    /// `err_max / epsilon`.
    pub t: f64,
    pub k: usize,
    pub correct: usize,
    pub wrong: usize,
    pub cluster_sizes: Vec<usize>,
    /// Per specialist, in id order: whether it answers any region.
    pub accepted: Vec<bool>,
    pub rounds: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AssociationArea {
    pub key: SenseKey,
    pub kind: TaskKind,
    /// `networks[i].id == i`; id 0 is the general network.
    pub networks: Vec<BaseNetwork>,
    pub classifier: Option<TaskClassifier>,
    pub features: FeatureMap,
    /// Present once reflection has trained specialists.
    pub stats: Option<ReflectionStats>,
    pub warnings: Vec<String>,
}

impl AssociationArea {
    /// Id of the network that answers `x`.
    pub fn route(&self, x: &Tensor) -> Result<usize, CortexError> {
        let id = match &self.classifier {
            Some(tc) => tc.classify(&self.features.apply(x)?)?,
            None => 0,
        };
        if id >= self.networks.len() {
            return Err(CortexError::BadRoute { id, count: self.networks.len() });
        }
        Ok(id)
    }

    /// Checks id contiguity, the classifier rule and network shapes.
    pub fn validate(&self) -> Result<(), CortexError> {
        let bad = |m: String| Err(CortexError::InconsistentDataset(m));
        if self.networks.is_empty() {
            return bad(alloc::format!("area {} has no networks", self.key));
        }
        for (i, n) in self.networks.iter().enumerate() {
            if n.id != i {
                return bad(alloc::format!("area {}: network {i} carries id {}", self.key, n.id));
            }
            let c = n.config();
            if c.input != self.key.input || c.output != self.key.output {
                return bad(alloc::format!("area {}: network {i} has shape {}->{}", self.key, c.input, c.output));
            }
        }
        if self.classifier.is_some() != (self.networks.len() > 1) {
            return bad(alloc::format!("area {}: classifier presence disagrees with network count", self.key));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CortexModel {
    pub areas: BTreeMap<SenseKey, AssociationArea>,
    pub configs: BTreeMap<SenseKey, AreaConfig>,
    pub seed: u64,
}

impl CortexModel {
    pub fn network_count(&self) -> usize {
        self.areas.values().map(|a| a.networks.len()).sum()
    }

    pub fn keys(&self) -> Vec<SenseKey> {
        self.areas.keys().cloned().collect()
    }

    pub fn area(&self, key: &SenseKey) -> Option<&AssociationArea> {
        self.areas.get(key)
    }

    /// Rebuilds network layer plans after deserialization, then validates.
    pub fn restore(mut self) -> Result<Self, CortexError> {
        for area in self.areas.values_mut() {
            let nets = core::mem::take(&mut area.networks);
            area.networks = nets.into_iter().map(BaseNetwork::validate).collect::<Result<_, _>>()?;
        }
        self.validate()?;
        Ok(self)
    }

    /// Area validation plus the map-key rule.
    pub fn validate(&self) -> Result<(), CortexError> {
        for (key, area) in &self.areas {
            if &area.key != key {
                return Err(CortexError::InconsistentDataset(alloc::format!(
                    "area stored under {key} carries key {}",
                    area.key
                )));
            }
            area.validate()?;
        }
        Ok(())
    }
}
