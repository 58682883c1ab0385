use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use super::learn::{error_scalar, sample_loss, two_term};
use super::{AssociationArea, CortexError, CortexModel, LabeledDataset, SenseKey, TaskKind};
use crate::tensor::{Shape, Tensor};

/// Which network answers each sample.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Routing {
    /// Whatever the task classifier picks.
    Cortex,
    /// Always the general network.
    Base,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub output: Tensor,
    pub key: SenseKey,
    pub network: usize,
}

/// Routes `x` to its area by shape, then to a network by the area's
/// classifier.
pub fn predict(model: &CortexModel, x: &Tensor, output: &Shape) -> Result<Prediction, CortexError> {
    let key = SenseKey::new(x.shape().clone(), output.clone());
    let area = model.areas.get(&key).ok_or_else(|| CortexError::UnknownKey {
        input: key.input.clone(),
        output: key.output.clone(),
        known: model.keys(),
    })?;
    let network = area.route(x)?;
    let output = area.networks[network].forward(x)?;
    Ok(Prediction { output, key, network })
}

/// Per-sample scores of one area on one dataset.
struct Scores {
    route: Vec<usize>,
    loss: Vec<f64>,
    err: Vec<f64>,
    base_loss: Vec<f64>,
    base_err: Vec<f64>,
}

fn check_area(area: &AssociationArea, ds: &LabeledDataset) -> Result<(), CortexError> {
    if ds.is_empty() {
        return Err(CortexError::EmptyDataset);
    }
    let key = ds.key().expect("non-empty");
    if key != area.key {
        return Err(CortexError::KeyMismatch {
            model_only: alloc::vec![area.key.clone()],
            data_only: alloc::vec![key],
        });
    }
    Ok(())
}

fn scores(area: &AssociationArea, ds: &LabeledDataset) -> Result<Scores, CortexError> {
    check_area(area, ds)?;
    let kind = area.kind;
    let n = ds.len();
    let route: Vec<usize> = ds.inputs().iter().map(|x| area.route(x)).collect::<Result<_, _>>()?;
    let (base_loss, base_err) = super::learn::score(&area.networks[0], kind, ds.inputs(), ds.targets())?;
    let (mut loss, mut err) = (base_loss.clone(), base_err.clone());
    for id in 1..area.networks.len() {
        let idx: Vec<usize> = (0..n).filter(|&i| route[i] == id).collect();
        if idx.is_empty() {
            continue;
        }
        let xs: Vec<&Tensor> = idx.iter().map(|&i| &ds.inputs()[i]).collect();
        let preds = area.networks[id].forward_many(&xs)?;
        for (&i, p) in idx.iter().zip(&preds) {
            loss[i] = sample_loss(kind, p, &ds.targets()[i]);
            err[i] = error_scalar(kind, p, &ds.targets()[i]);
        }
    }
    Ok(Scores { route, loss, err, base_loss, base_err })
}

impl Scores {
    fn area_loss(&self, area: &AssociationArea, routing: Routing) -> f64 {
        let loss = match routing {
            Routing::Cortex => &self.loss,
            Routing::Base => &self.base_loss,
        };
        match &area.stats {
            None => mean(loss),
            Some(s) => {
                let (mut c, mut nc, mut w, mut nw) = (0.0, 0, 0.0, 0);
                for (l, &e) in loss.iter().zip(&self.base_err) {
                    if e < s.epsilon {
                        c += l;
                        nc += 1;
                    } else {
                        w += l;
                        nw += 1;
                    }
                }
                two_term(c, nc, w, nw)
            }
        }
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Reflected loss of an area: mean loss over the samples the general
/// network gets right plus mean loss over those it gets wrong (split by the
/// stored `ε`, an empty side counting 0). Without reflection this is the
/// plain mean loss.
pub fn area_loss(area: &AssociationArea, dataset: &LabeledDataset) -> Result<f64, CortexError> {
    Ok(scores(area, dataset)?.area_loss(area, Routing::Cortex))
}

/// [`area_loss`] with every sample answered by the general network.
pub fn baseline_loss(area: &AssociationArea, dataset: &LabeledDataset) -> Result<f64, CortexError> {
    Ok(scores(area, dataset)?.area_loss(area, Routing::Base))
}

fn check_keys(model: &CortexModel, data: &BTreeMap<SenseKey, LabeledDataset>) -> Result<(), CortexError> {
    let model_only: Vec<SenseKey> = model.areas.keys().filter(|k| !data.contains_key(*k)).cloned().collect();
    let data_only: Vec<SenseKey> = data.keys().filter(|k| !model.areas.contains_key(*k)).cloned().collect();
    if model_only.is_empty() && data_only.is_empty() {
        Ok(())
    } else {
        Err(CortexError::KeyMismatch { model_only, data_only })
    }
}

/// Unweighted mean of the area losses.
pub fn cortex_loss(model: &CortexModel, data: &BTreeMap<SenseKey, LabeledDataset>) -> Result<f64, CortexError> {
    check_keys(model, data)?;
    let losses: Vec<f64> = model.areas.iter().map(|(k, a)| area_loss(a, &data[k])).collect::<Result<_, _>>()?;
    Ok(mean(&losses))
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AreaMetrics {
    pub key: SenseKey,
    pub kind: TaskKind,
    pub samples: usize,
    pub networks: usize,
    /// Argmax agreement for classification, `error < ε` rate for
    /// regression (absent without an `ε`).
    pub accuracy: Option<f64>,
    pub baseline_accuracy: Option<f64>,
    /// [`area_loss`] and its general-network counterpart.
    pub loss: f64,
    pub baseline_loss: f64,
    pub loss_reduction_pct: f64,
    /// Plain mean per-sample loss (MSE or cross-entropy).
    pub mean_loss: f64,
    pub baseline_mean_loss: f64,
    pub mean_loss_reduction_pct: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub err_max: Option<f64>,
    pub t: Option<f64>,
    /// Samples answered by each network id.
    pub routed: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Evaluation {
    pub areas: Vec<AreaMetrics>,
    pub cortex_loss: f64,
    pub baseline_cortex_loss: f64,
    pub loss_reduction_pct: f64,
    pub networks: usize,
}

/// `100·(baseline − value)/baseline`, 0 when the baseline is 0.
pub fn reduction_pct(baseline: f64, value: f64) -> f64 {
    if baseline == 0.0 {
        0.0
    } else {
        100.0 * (baseline - value) / baseline
    }
}

fn accuracy(area: &AssociationArea, ds: &LabeledDataset, loss_err: &[f64], preds: &[Tensor]) -> Option<f64> {
    let n = ds.len() as f64;
    match area.kind {
        TaskKind::Classification => {
            let hits = preds.iter().zip(ds.targets()).filter(|(p, y)| p.argmax() == y.argmax()).count();
            Some(hits as f64 / n)
        }
        TaskKind::Regression => {
            let eps = area.stats.as_ref()?.epsilon;
            Some(loss_err.iter().filter(|&&e| e < eps).count() as f64 / n)
        }
    }
}

fn evaluate_area(area: &AssociationArea, ds: &LabeledDataset) -> Result<AreaMetrics, CortexError> {
    let s = scores(area, ds)?;
    let (acc, base_acc) = match area.kind {
        TaskKind::Classification => {
            let routed: Vec<Tensor> = ds
                .inputs()
                .iter()
                .zip(&s.route)
                .map(|(x, &id)| area.networks[id].forward(x))
                .collect::<Result<_, _>>()?;
            let base = area.networks[0].forward_many(ds.inputs())?;
            (accuracy(area, ds, &s.err, &routed), accuracy(area, ds, &s.base_err, &base))
        }
        TaskKind::Regression => (accuracy(area, ds, &s.err, &[]), accuracy(area, ds, &s.base_err, &[])),
    };
    let loss = s.area_loss(area, Routing::Cortex);
    let baseline = s.area_loss(area, Routing::Base);
    let (ml, bml) = (mean(&s.loss), mean(&s.base_loss));
    let mut routed = alloc::vec![0; area.networks.len()];
    for &id in &s.route {
        routed[id] += 1;
    }
    let st = area.stats.as_ref();
    Ok(AreaMetrics {
        key: area.key.clone(),
        kind: area.kind,
        samples: ds.len(),
        networks: area.networks.len(),
        accuracy: acc,
        baseline_accuracy: base_acc,
        loss,
        baseline_loss: baseline,
        loss_reduction_pct: reduction_pct(baseline, loss),
        mean_loss: ml,
        baseline_mean_loss: bml,
        mean_loss_reduction_pct: reduction_pct(bml, ml),
        epsilon: st.map(|s| s.epsilon),
        delta: st.map(|s| s.delta),
        err_max: st.map(|s| s.err_max),
        t: st.map(|s| s.t),
        routed,
    })
}

/// Recomputes every metric from the model and the data.
pub fn evaluate(model: &CortexModel, data: &BTreeMap<SenseKey, LabeledDataset>) -> Result<Evaluation, CortexError> {
    check_keys(model, data)?;
    let areas: Vec<AreaMetrics> =
        model.areas.iter().map(|(k, a)| evaluate_area(a, &data[k])).collect::<Result<_, _>>()?;
    let cl = mean(&areas.iter().map(|a| a.loss).collect::<Vec<_>>());
    let bl = mean(&areas.iter().map(|a| a.baseline_loss).collect::<Vec<_>>());
    Ok(Evaluation {
        cortex_loss: cl,
        baseline_cortex_loss: bl,
        loss_reduction_pct: reduction_pct(bl, cl),
        networks: model.network_count(),
        areas,
    })
}
