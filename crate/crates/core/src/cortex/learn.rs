use alloc::borrow::Cow;
use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use super::{
    AreaConfig, AssociationArea, CortexError, CortexModel, EpsilonMode, FeatureMap, LabeledDataset, ReflectionParams,
    ReflectionStats, SenseKey, TaskKind,
};
use crate::clustering::kmeans;
use crate::nets::{init_network, BaseNetwork, TrainReport, PROB_FLOOR};
use crate::rng::{sub_seed, sub_seed_indexed};
use crate::tensor::Tensor;
use crate::tree::{self, TaskClassifier, TreeParams};

/// Progress notifications from [`learn`].
#[derive(Debug)]
pub enum LearnEvent<'a> {
    AreaStarted { key: &'a SenseKey, samples: usize },
    GeneralTrained { key: &'a SenseKey, report: &'a TrainReport },
    EventsCounted { key: &'a SenseKey, epsilon: f64, correct: usize, wrong: usize, err_max: f64 },
    SpecialistTrained { key: &'a SenseKey, id: usize, samples: usize, report: &'a TrainReport, accepted: bool },
    SpecialistRejected { key: &'a SenseKey, id: usize },
    ClassifierFitted { key: &'a SenseKey, nodes: usize, depth: usize },
    Warning { key: &'a SenseKey, message: &'a str },
}

/// Per-sample error: `|h - y|` (Euclidean norm for vectors) for
/// regression, cross-entropy for classification.
pub fn error_scalar(kind: TaskKind, pred: &Tensor, target: &Tensor) -> f64 {
    match kind {
        TaskKind::Regression => {
            let s: f64 = pred.values().iter().zip(target.values()).map(|(h, y)| (h - y) * (h - y)).sum();
            libm::sqrt(s)
        }
        TaskKind::Classification => cross_entropy(pred, target),
    }
}

fn cross_entropy(pred: &Tensor, target: &Tensor) -> f64 {
    let class = target.argmax();
    -libm::log(pred.values()[class].max(PROB_FLOOR))
}

/// Per-sample training loss: mean squared error or cross-entropy.
pub(crate) fn sample_loss(kind: TaskKind, pred: &Tensor, target: &Tensor) -> f64 {
    match kind {
        TaskKind::Regression => {
            let s: f64 = pred.values().iter().zip(target.values()).map(|(h, y)| (h - y) * (h - y)).sum();
            s / pred.len() as f64
        }
        TaskKind::Classification => cross_entropy(pred, target),
    }
}

/// Losses and error scalars of one network on a set of samples.
pub(crate) fn score<T: core::borrow::Borrow<Tensor>>(
    net: &BaseNetwork,
    kind: TaskKind,
    xs: &[T],
    ys: &[T],
) -> Result<(Vec<f64>, Vec<f64>), CortexError> {
    let preds = net.forward_many(xs)?;
    Ok(preds.iter().zip(ys).map(|(p, y)| (sample_loss(kind, p, y.borrow()), error_scalar(kind, p, y.borrow()))).unzip())
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorEvents {
    pub correct: Vec<usize>,
    pub wrong: Vec<usize>,
    /// Largest error in the wrong set, 0 when it is empty.
    pub err_max: f64,
    pub errors: Vec<f64>,
}

impl ErrorEvents {
    pub fn from_errors(errors: Vec<f64>, epsilon: f64) -> Self {
        let (mut correct, mut wrong) = (Vec::new(), Vec::new());
        let mut err_max = 0.0_f64;
        for (i, &e) in errors.iter().enumerate() {
            if e < epsilon {
                correct.push(i);
            } else {
                wrong.push(i);
                err_max = err_max.max(e);
            }
        }
        Self { correct, wrong, err_max, errors }
    }

    /// Fraction of correct events.
    pub fn delta(&self) -> f64 {
        self.correct.len() as f64 / self.errors.len() as f64
    }
}

/// Splits the dataset into correct (`error < ε`) and wrong events.
pub fn error_events(net: &BaseNetwork, dataset: &LabeledDataset, epsilon: f64) -> Result<ErrorEvents, CortexError> {
    if !(epsilon.is_finite() && epsilon > 0.0) {
        return Err(CortexError::BadEpsilon(epsilon));
    }
    if dataset.is_empty() {
        return Err(CortexError::EmptyDataset);
    }
    let (_, errors) = score(net, dataset.kind(), dataset.inputs(), dataset.targets())?;
    Ok(ErrorEvents::from_errors(errors, epsilon))
}

/// `ε` for the given errors. In quantile mode `ε` is the order statistic at
/// `⌊δn⌋`, so about a fraction `δ` of errors fall strictly below it; a zero
/// pick is raised to the smallest positive error.
pub fn choose_epsilon(errors: &[f64], mode: EpsilonMode) -> Result<f64, CortexError> {
    match mode {
        EpsilonMode::Absolute(e) if e.is_finite() && e > 0.0 => Ok(e),
        EpsilonMode::Absolute(e) => Err(CortexError::BadEpsilon(e)),
        EpsilonMode::Quantile(d) => {
            if errors.is_empty() {
                return Err(CortexError::EmptyDataset);
            }
            let mut sorted = errors.to_vec();
            sorted.sort_by(f64::total_cmp);
            let idx = (libm::floor(d * sorted.len() as f64) as usize).min(sorted.len() - 1);
            let eps = sorted[idx];
            if eps > 0.0 {
                return Ok(eps);
            }
            Ok(sorted.iter().copied().find(|&e| e > 0.0).unwrap_or(f64::MIN_POSITIVE))
        }
    }
}

/// Outcome of one reflection pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Reflection {
    /// Cluster of each wrong index, aligned with the `wrong` argument.
    pub assignments: Vec<usize>,
    /// Id of the specialist for cluster 0.
    pub first_id: usize,
    pub accepted: Vec<bool>,
    pub cluster_sizes: Vec<usize>,
    pub warning: Option<String>,
}

impl Reflection {
    fn skipped(first_id: usize, warning: String) -> Self {
        Self {
            assignments: Vec::new(),
            first_id,
            accepted: Vec::new(),
            cluster_sizes: Vec::new(),
            warning: Some(warning),
        }
    }

    /// Routing label for the `j`-th wrong index, `fallback` when its
    /// specialist was not accepted.
    pub fn label(&self, j: usize, fallback: usize) -> usize {
        let c = self.assignments[j];
        if self.accepted[c] {
            self.first_id + c
        } else {
            fallback
        }
    }
}

/// Clusters the wrong inputs with k-means and trains one fresh specialist
/// per cluster on that cluster alone.
///
/// A specialist is accepted only when its mean loss on its own cluster is
/// strictly below `reference` (the current per-sample losses, indexed like
/// the dataset). Specialists are appended to the area either way, so ids
/// stay contiguous. With fewer than `k` wrong samples the area is left
/// unchanged and a warning is recorded.
pub fn reflect(
    area: &mut AssociationArea,
    dataset: &LabeledDataset,
    wrong: &[usize],
    reference: &[f64],
    params: &ReflectionParams,
    seed: u64,
) -> Result<(Reflection, Vec<TrainReport>), CortexError> {
    let k = params.k;
    let first_id = area.networks.len();
    if k == 0 || wrong.len() < k {
        let msg = alloc::format!("reflection skipped: {} wrong samples for k = {k}", wrong.len());
        area.warnings.push(msg.clone());
        return Ok((Reflection::skipped(first_id, msg), Vec::new()));
    }
    let points: Vec<&[f64]> = wrong.iter().map(|&i| dataset.inputs()[i].values()).collect();
    let clusters = kmeans(&points, k, &params.kmeans, sub_seed(seed, "kmeans"))?;

    let config = area.networks[0].config().clone();
    let mut accepted = Vec::with_capacity(k);
    let mut sizes = Vec::with_capacity(k);
    let mut reports = Vec::with_capacity(k);
    for j in 0..k {
        let members: Vec<usize> =
            wrong.iter().zip(&clusters.assignments).filter(|(_, &a)| a == j).map(|(&i, _)| i).collect();
        let xs: Vec<&Tensor> = members.iter().map(|&i| &dataset.inputs()[i]).collect();
        let ys: Vec<&Tensor> = members.iter().map(|&i| &dataset.targets()[i]).collect();
        let mut net = init_network(&config, sub_seed_indexed(seed, "specialist", j as u64))?.with_id(first_id + j);
        let report = net.train(&xs, &ys, &params.specialist, sub_seed_indexed(seed, "specialist-train", j as u64))?;
        let (losses, _) = score(&net, dataset.kind(), &xs, &ys)?;
        let own: f64 = losses.iter().sum::<f64>() / members.len() as f64;
        let base: f64 = members.iter().map(|&i| reference[i]).sum::<f64>() / members.len() as f64;
        accepted.push(own < base);
        sizes.push(members.len());
        reports.push(report);
        area.networks.push(net);
    }
    let refl =
        Reflection { assignments: clusters.assignments, first_id, accepted, cluster_sizes: sizes, warning: None };
    Ok((refl, reports))
}

fn features<'a>(map: &FeatureMap, dataset: &'a LabeledDataset) -> Result<Vec<Cow<'a, [f64]>>, CortexError> {
    dataset.inputs().iter().map(|x| map.apply(x)).collect()
}

/// Fits the routing tree: label 0 for correct samples, the specialist id
/// for wrong samples whose specialist was accepted, 0 otherwise.
pub fn fit_task_classifier(
    area: &AssociationArea,
    dataset: &LabeledDataset,
    correct: &[usize],
    wrong: &[usize],
    reflection: &Reflection,
    params: &TreeParams,
) -> Result<TaskClassifier, CortexError> {
    let mut labels = alloc::vec![0; dataset.len()];
    for &i in correct {
        labels[i] = 0;
    }
    for (j, &i) in wrong.iter().enumerate() {
        labels[i] = reflection.label(j, 0);
    }
    let feats = features(&area.features, dataset)?;
    Ok(tree::fit(&feats, &labels, params)?)
}

/// Partitions the mixed samples by shape and learns every area.
pub fn learn(
    mixed: Vec<(Tensor, Tensor)>,
    configs: &BTreeMap<SenseKey, AreaConfig>,
    seed: u64,
    observer: &mut dyn FnMut(&LearnEvent<'_>),
) -> Result<CortexModel, CortexError> {
    learn_partitioned(super::sense_partition(mixed)?, configs, seed, observer)
}

/// Learns one area per key: general network, error events, reflection and
/// routing tree.
pub fn learn_partitioned(
    parts: BTreeMap<SenseKey, LabeledDataset>,
    configs: &BTreeMap<SenseKey, AreaConfig>,
    seed: u64,
    observer: &mut dyn FnMut(&LearnEvent<'_>),
) -> Result<CortexModel, CortexError> {
    if parts.is_empty() {
        return Err(CortexError::EmptyDataset);
    }
    for (key, ds) in &parts {
        let cfg = configs.get(key).ok_or_else(|| CortexError::MissingConfig(key.clone()))?;
        let declared = SenseKey::new(cfg.net.input.clone(), cfg.net.output.clone());
        if &declared != key {
            return Err(CortexError::ConfigShape { key: key.clone(), found: declared });
        }
        if ds.kind().loss_kind() != cfg.net.loss_kind() {
            return Err(CortexError::KindMismatch { key: key.clone(), kind: ds.kind(), loss: cfg.net.loss_kind() });
        }
        if ds.is_empty() {
            return Err(CortexError::EmptyDataset);
        }
        cfg.reflection.validate()?;
    }
    let mut areas = BTreeMap::new();
    let mut used = BTreeMap::new();
    for (key, ds) in &parts {
        let cfg = &configs[key];
        let area_seed = sub_seed(seed, &alloc::format!("area {key}"));
        areas.insert(key.clone(), learn_area(key, ds, cfg, area_seed, observer)?);
        used.insert(key.clone(), cfg.clone());
    }
    Ok(CortexModel { areas, configs: used, seed })
}

fn learn_area(
    key: &SenseKey,
    ds: &LabeledDataset,
    cfg: &AreaConfig,
    seed: u64,
    observer: &mut dyn FnMut(&LearnEvent<'_>),
) -> Result<AssociationArea, CortexError> {
    observer(&LearnEvent::AreaStarted { key, samples: ds.len() });
    let mut net0 = init_network(&cfg.net, sub_seed(seed, "init"))?;
    let report = net0.train(ds.inputs(), ds.targets(), &cfg.train, sub_seed(seed, "train"))?;
    observer(&LearnEvent::GeneralTrained { key, report: &report });

    let params = &cfg.reflection;
    let mut area = AssociationArea {
        key: key.clone(),
        kind: ds.kind(),
        networks: alloc::vec![net0],
        classifier: None,
        features: params.features,
        stats: None,
        warnings: Vec::new(),
    };
    if params.k == 0 {
        return Ok(area);
    }

    let kind = ds.kind();
    let (loss0, err0) = score(&area.networks[0], kind, ds.inputs(), ds.targets())?;
    let epsilon = choose_epsilon(&err0, params.epsilon)?;
    let events = ErrorEvents::from_errors(err0.clone(), epsilon);
    observer(&LearnEvent::EventsCounted {
        key,
        epsilon,
        correct: events.correct.len(),
        wrong: events.wrong.len(),
        err_max: events.err_max,
    });

    let n = ds.len();
    let feats = features(&area.features, ds)?;
    let in_c: Vec<bool> = err0.iter().map(|&e| e < epsilon).collect();
    let (n_c, n_w) = (events.correct.len(), events.wrong.len());

    // current routing state
    let mut labels = alloc::vec![0usize; n];
    let mut cur_loss = loss0.clone();
    let mut cur_err = err0;
    let mut losses: Vec<Vec<f64>> = alloc::vec![loss0];
    let mut errs: Vec<Vec<f64>> = alloc::vec![cur_err.clone()];
    let mut accepted_all: Vec<bool> = Vec::new();
    let mut cluster_sizes = Vec::new();
    let mut rounds_run = 0;

    for round in 0..params.rounds {
        let wrong: Vec<usize> =
            if round == 0 { events.wrong.clone() } else { (0..n).filter(|&i| cur_err[i] >= epsilon).collect() };
        let round_seed = sub_seed_indexed(seed, "round", round as u64);
        let (mut refl, reports) = reflect(&mut area, ds, &wrong, &cur_loss, params, round_seed)?;
        if let Some(msg) = &refl.warning {
            observer(&LearnEvent::Warning { key, message: msg });
            break;
        }
        rounds_run += 1;
        for (j, r) in reports.iter().enumerate() {
            let id = refl.first_id + j;
            observer(&LearnEvent::SpecialistTrained {
                key,
                id,
                samples: refl.cluster_sizes[j],
                report: r,
                accepted: refl.accepted[j],
            });
            let (l, e) = score(&area.networks[id], kind, ds.inputs(), ds.targets())?;
            losses.push(l);
            errs.push(e);
        }
        if round == 0 {
            cluster_sizes = refl.cluster_sizes.clone();
        }

        // Fit, then drop any specialist that raises the loss over the
        // samples the tree actually sends it; refit until stable.
        let (tc, new_route, new_labels) = loop {
            let mut new_labels = labels.clone();
            for (j, &i) in wrong.iter().enumerate() {
                new_labels[i] = refl.label(j, labels[i]);
            }
            let tc = tree::fit(&feats, &new_labels, &params.tree)?;
            let new_route: Vec<usize> = feats.iter().map(|f| tc.classify(f)).collect::<Result<_, _>>()?;
            let mut rejected = false;
            for j in 0..refl.accepted.len() {
                if !refl.accepted[j] {
                    continue;
                }
                let id = refl.first_id + j;
                let (mut dc, mut dw) = (0.0, 0.0);
                for i in (0..n).filter(|&i| new_route[i] == id) {
                    let d = losses[id][i] - cur_loss[i];
                    if in_c[i] {
                        dc += d;
                    } else {
                        dw += d;
                    }
                }
                if two_term(dc, n_c, dw, n_w) > 0.0 || dc + dw > 0.0 {
                    refl.accepted[j] = false;
                    rejected = true;
                    observer(&LearnEvent::SpecialistRejected { key, id });
                }
            }
            if !rejected {
                break (tc, new_route, new_labels);
            }
        };

        // Later rounds also move samples between older routes; keep the
        // round only if the whole routing change does not hurt.
        let (mut dc, mut dw) = (0.0, 0.0);
        for i in 0..n {
            let d = losses[new_route[i]][i] - cur_loss[i];
            if in_c[i] {
                dc += d;
            } else {
                dw += d;
            }
        }
        if round > 0 && (two_term(dc, n_c, dw, n_w) > 0.0 || dc + dw > 0.0) {
            accepted_all.extend(core::iter::repeat_n(false, refl.accepted.len()));
            let msg = alloc::format!("round {} reverted: routing change increased the loss", round + 1);
            observer(&LearnEvent::Warning { key, message: &msg });
            area.warnings.push(msg);
            break;
        }
        observer(&LearnEvent::ClassifierFitted { key, nodes: tc.root.node_count(), depth: tc.root.depth() });
        area.classifier = Some(tc);
        accepted_all.extend(refl.accepted.iter().copied());
        labels = new_labels;
        for i in 0..n {
            cur_loss[i] = losses[new_route[i]][i];
            cur_err[i] = errs[new_route[i]][i];
        }
    }

    if area.networks.len() > 1 {
        if area.classifier.is_none() {
            area.classifier = Some(TaskClassifier::constant(0, feats[0].len()));
        }
        area.stats = Some(ReflectionStats {
            epsilon,
            delta: events.delta(),
            err_max: events.err_max,
            t: events.err_max / epsilon,
            k: params.k,
            correct: n_c,
            wrong: n_w,
            cluster_sizes,
            accepted: accepted_all,
            rounds: rounds_run,
        });
    }
    Ok(area)
}

/// `a/na + b/nb`, with an empty side contributing 0.
pub(crate) fn two_term(a: f64, na: usize, b: f64, nb: usize) -> f64 {
    let t = |s: f64, n: usize| if n == 0 { 0.0 } else { s / n as f64 };
    t(a, na) + t(b, nb)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nets::{NetworkConfig, TrainParams};
    use crate::tensor::Shape;
    use alloc::vec;

    fn reg(xs: &[f64], f: impl Fn(f64) -> f64) -> LabeledDataset {
        LabeledDataset::new(
            xs.iter().map(|&x| Tensor::scalar(x).unwrap()).collect(),
            xs.iter().map(|&x| Tensor::scalar(f(x)).unwrap()).collect(),
            TaskKind::Regression,
        )
        .unwrap()
    }

    fn identity_net() -> BaseNetwork {
        // relu(x) - relu(-x) = x through a 2-unit hidden layer
        let cfg = NetworkConfig::mlp(1, 2, 1);
        BaseNetwork::from_parameters(0, cfg, vec![1.0, -1.0, 0.0, 0.0, 1.0, -1.0, 0.0]).unwrap()
    }

    #[test]
    fn error_scalar_rules() {
        let a = Tensor::vector(vec![0.0, 3.0]).unwrap();
        let b = Tensor::vector(vec![4.0, 0.0]).unwrap();
        assert_eq!(error_scalar(TaskKind::Regression, &a, &b), 5.0);
        assert_eq!(sample_loss(TaskKind::Regression, &a, &b), 12.5);
        let p = Tensor::vector(vec![0.5, 0.5]).unwrap();
        let y = Tensor::one_hot(1, 2);
        assert!((error_scalar(TaskKind::Classification, &p, &y) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn events_by_threshold() {
        let ev = ErrorEvents::from_errors(vec![0.1, 0.5, 2.0], 0.4);
        assert_eq!((ev.correct, ev.wrong, ev.err_max), (vec![0], vec![1, 2], 2.0));
        let ev = ErrorEvents::from_errors(vec![0.1, 0.5], 3.0);
        assert!(ev.wrong.is_empty());
        assert_eq!(ev.err_max, 0.0);
    }

    #[test]
    fn perfect_predictor_has_no_wrong_events() {
        let ds = reg(&[-0.5, 0.0, 0.25, 0.9], |x| x);
        let ev = error_events(&identity_net(), &ds, 1e-9).unwrap();
        assert!(ev.wrong.is_empty());
        assert_eq!(ev.delta(), 1.0);
        assert_eq!(ev.err_max, 0.0);
        assert!(matches!(error_events(&identity_net(), &ds, 0.0), Err(CortexError::BadEpsilon(_))));
    }

    #[test]
    fn quantile_epsilon() {
        let errs: Vec<f64> = (1..=10).map(f64::from).collect();
        let eps = choose_epsilon(&errs, EpsilonMode::Quantile(0.8)).unwrap();
        assert_eq!(eps, 9.0);
        let ev = ErrorEvents::from_errors(errs, eps);
        assert_eq!(ev.delta(), 0.8);
        assert_eq!(choose_epsilon(&[0.0, 0.0, 0.3], EpsilonMode::Quantile(0.5)).unwrap(), 0.3);
        assert!(choose_epsilon(&[1.0], EpsilonMode::Absolute(-1.0)).is_err());
    }

    fn step_config(k: usize) -> AreaConfig {
        AreaConfig {
            net: NetworkConfig::mlp(1, 8, 1),
            train: TrainParams { epochs: 300, batch_size: None, learning_rate: 1e-2 },
            reflection: ReflectionParams::new(k, TrainParams { epochs: 300, batch_size: None, learning_rate: 1e-2 }),
        }
    }

    fn step_data() -> Vec<(Tensor, Tensor)> {
        (0..80)
            .map(|i| {
                let x = -1.0 + 2.0 * i as f64 / 79.0;
                let y = if x < 0.0 { libm::sin(6.0 * x) } else { x * x - 0.5 };
                (Tensor::scalar(x).unwrap(), Tensor::scalar(y).unwrap())
            })
            .collect()
    }

    fn configs(k: usize) -> BTreeMap<SenseKey, AreaConfig> {
        let key = SenseKey::new(Shape::vector(1), Shape::vector(1));
        BTreeMap::from([(key, step_config(k))])
    }

    #[test]
    fn disabled_reflection_keeps_one_network() {
        let m = learn(step_data(), &configs(0), 1, &mut |_| {}).unwrap();
        let area = m.areas.values().next().unwrap();
        assert_eq!(area.networks.len(), 1);
        assert!(area.classifier.is_none() && area.stats.is_none());
        m.validate().unwrap();
    }

    #[test]
    fn reflection_adds_k_specialists() {
        let mut events = 0;
        let m = learn(step_data(), &configs(2), 1, &mut |_| events += 1).unwrap();
        let area = m.areas.values().next().unwrap();
        assert_eq!(area.networks.len(), 3);
        assert!(area.classifier.is_some());
        let s = area.stats.as_ref().unwrap();
        assert_eq!(s.cluster_sizes.iter().sum::<usize>(), s.wrong);
        assert!((s.t - s.err_max / s.epsilon).abs() < 1e-12);
        assert!(events >= 5);
        m.validate().unwrap();
    }

    #[test]
    fn single_wrong_sample_skips() {
        let ds = reg(&[0.0, 0.5, 1.0], |x| x);
        let mut area = AssociationArea {
            key: ds.key().unwrap(),
            kind: TaskKind::Regression,
            networks: vec![identity_net()],
            classifier: None,
            features: FeatureMap::Raw,
            stats: None,
            warnings: vec![],
        };
        let p = step_config(2).reflection;
        let (r, _) = reflect(&mut area, &ds, &[1], &[0.0; 3], &p, 0).unwrap();
        assert!(r.warning.is_some());
        assert_eq!(area.networks.len(), 1);
        assert_eq!(area.warnings.len(), 1);
    }

    #[test]
    fn missing_config_is_an_error() {
        let data = vec![(Tensor::vector(vec![1.0, 2.0]).unwrap(), Tensor::scalar(0.0).unwrap())];
        assert!(matches!(learn(data, &configs(2), 0, &mut |_| {}), Err(CortexError::MissingConfig(_))));
    }

    #[test]
    fn learning_is_deterministic() {
        let a = learn(step_data(), &configs(2), 7, &mut |_| {}).unwrap();
        let b = learn(step_data(), &configs(2), 7, &mut |_| {}).unwrap();
        assert_eq!(a, b);
    }
}
