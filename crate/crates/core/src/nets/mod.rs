//! Base networks: a ReLU MLP regressor and a small CNN classifier, with
//! hand-derived backpropagation and Adam.
//!
//! Parameters live in one flat `Vec<f64>`; the layer plan derived from a
//! [`NetworkConfig`] says where each layer's weights and biases sit.

mod adam;
mod layers;
mod loss;
mod train;

use alloc::string::String;
use alloc::vec::Vec;

use rand::distr::{Distribution, Uniform};
use thiserror::Error;

pub use adam::{adam_step, AdamState};
pub use layers::Layer;
pub use loss::{loss_cross_entropy, loss_mse, softmax, LossKind, PROB_FLOOR};
pub use train::{TrainParams, TrainReport};

use crate::rng;
use crate::tensor::{Shape, Tensor};
use layers::Scratch;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum NetError {
    #[error("invalid network config: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
    #[error("length mismatch: expected {expected}, got {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("target is not one-hot")]
    NotOneHot,
    #[error("loss {loss:?} does not match the network's {head:?} output head")]
    LossMismatch { loss: LossKind, head: OutputHead },
    #[error("empty dataset")]
    EmptyDataset,
    #[error("training diverged: non-finite loss at epoch {epoch}")]
    Diverged { epoch: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum NetworkKind {
    MlpRegressor,
    CnnClassifier,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Activation {
    Relu,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum OutputHead {
    Linear,
    Softmax,
}

impl OutputHead {
    pub fn loss_kind(self) -> LossKind {
        match self {
            OutputHead::Linear => LossKind::Mse,
            OutputHead::Softmax => LossKind::CrossEntropy,
        }
    }
}

/// One convolution stage: `kernel`x`kernel` valid convolution to `channels`
/// feature maps, ReLU, then non-overlapping `pool`x`pool` max pooling.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConvSpec {
    pub channels: usize,
    pub kernel: usize,
    pub pool: usize,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct NetworkConfig {
    pub kind: NetworkKind,
    pub input: Shape,
    pub output: Shape,
    /// Convolution stages, applied to `[height, width, channels]` input.
    /// Always empty for the MLP.
    #[cfg_attr(feature = "serde", serde(default))]
    pub conv: Vec<ConvSpec>,
    /// Widths of the hidden dense layers.
    pub hidden: Vec<usize>,
    pub activation: Activation,
    pub head: OutputHead,
}

impl NetworkConfig {
    /// Single-hidden-layer ReLU regressor with a linear head.
    pub fn mlp(input: usize, hidden: usize, output: usize) -> Self {
        Self {
            kind: NetworkKind::MlpRegressor,
            input: Shape::vector(input),
            output: Shape::vector(output),
            conv: Vec::new(),
            hidden: alloc::vec![hidden],
            activation: Activation::Relu,
            head: OutputHead::Linear,
        }
    }

    /// Default classifier geometry: conv 5x5x8, pool 2, conv 5x5x16, pool 2,
    /// dense 64, dense to `classes`, softmax.
    pub fn cnn(input: Shape, classes: usize) -> Self {
        Self {
            kind: NetworkKind::CnnClassifier,
            input,
            output: Shape::vector(classes),
            conv: alloc::vec![
                ConvSpec { channels: 8, kernel: 5, pool: 2 },
                ConvSpec { channels: 16, kernel: 5, pool: 2 },
            ],
            hidden: alloc::vec![64],
            activation: Activation::Relu,
            head: OutputHead::Softmax,
        }
    }

    pub fn loss_kind(&self) -> LossKind {
        self.head.loss_kind()
    }

    /// Compiles the config into its layer plan, validating every dimension.
    pub fn layers(&self) -> Result<Vec<Layer>, NetError> {
        let bad = |msg: String| Err(NetError::InvalidConfig(msg));
        let mut plan = Vec::new();
        let mut offset = 0usize;
        let mut width;

        match self.kind {
            NetworkKind::MlpRegressor => {
                if !self.conv.is_empty() {
                    return bad("mlp-regressor takes no conv stages".into());
                }
                width = self.input.len();
            }
            NetworkKind::CnnClassifier => {
                if self.conv.is_empty() {
                    return bad("cnn-classifier needs at least one conv stage".into());
                }
                let &[mut h, mut w, mut c] = self.input.dims() else {
                    return bad(alloc::format!("cnn input must be [height, width, channels], got {}", self.input));
                };
                for (i, spec) in self.conv.iter().enumerate() {
                    if spec.channels == 0 || spec.kernel == 0 || spec.pool == 0 {
                        return bad(alloc::format!("conv stage {i} has a zero size"));
                    }
                    if spec.kernel > h || spec.kernel > w {
                        return bad(alloc::format!("conv stage {i}: kernel {} exceeds {h}x{w} input", spec.kernel));
                    }
                    let (oh, ow) = (h - spec.kernel + 1, w - spec.kernel + 1);
                    if oh / spec.pool == 0 || ow / spec.pool == 0 {
                        return bad(alloc::format!("conv stage {i}: pool {} exceeds {oh}x{ow} feature map", spec.pool));
                    }
                    let weights = spec.kernel * spec.kernel * c * spec.channels;
                    plan.push(Layer::Conv {
                        height: h,
                        width: w,
                        c_in: c,
                        c_out: spec.channels,
                        kernel: spec.kernel,
                        offset,
                    });
                    offset += weights + spec.channels;
                    plan.push(Layer::Relu { len: oh * ow * spec.channels });
                    if spec.pool > 1 {
                        plan.push(Layer::MaxPool { height: oh, width: ow, channels: spec.channels, pool: spec.pool });
                    }
                    h = oh / spec.pool;
                    w = ow / spec.pool;
                    c = spec.channels;
                }
                width = h * w * c;
            }
        }

        for (i, &hidden) in self.hidden.iter().enumerate() {
            if hidden == 0 {
                return bad(alloc::format!("hidden layer {i} has zero width"));
            }
            plan.push(Layer::Dense { input: width, output: hidden, offset });
            offset += width * hidden + hidden;
            plan.push(Layer::Relu { len: hidden });
            width = hidden;
        }
        if self.output.rank() != 1 {
            return bad(alloc::format!("output must be a vector, got {}", self.output));
        }
        let out = self.output.len();
        if self.head == OutputHead::Softmax && out < 2 {
            return bad("softmax head needs at least two classes".into());
        }
        plan.push(Layer::Dense { input: width, output: out, offset });
        Ok(plan)
    }

    pub fn parameter_count(&self) -> Result<usize, NetError> {
        Ok(self.layers()?.iter().map(Layer::parameter_count).sum())
    }
}

/// A trainable network with its id inside an association area.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BaseNetwork {
    pub id: usize,
    config: NetworkConfig,
    params: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(skip))]
    plan: Vec<Layer>,
}

/// Glorot-uniform initialization of weights and biases, per layer.
pub fn init_network(config: &NetworkConfig, seed: u64) -> Result<BaseNetwork, NetError> {
    let plan = config.layers()?;
    let mut rng = rng::rng_from(seed, "init");
    let mut params = Vec::with_capacity(plan.iter().map(Layer::parameter_count).sum());
    for layer in &plan {
        let Some((fan_in, fan_out)) = layer.fans() else {
            continue;
        };
        let limit = libm::sqrt(6.0 / (fan_in + fan_out) as f64);
        let dist = Uniform::new_inclusive(-limit, limit).expect("finite positive limit");
        for _ in 0..layer.parameter_count() {
            params.push(dist.sample(&mut rng));
        }
    }
    Ok(BaseNetwork { id: 0, config: config.clone(), params, plan })
}

impl BaseNetwork {
    /// Builds a network from explicit parameters.
    pub fn from_parameters(id: usize, config: NetworkConfig, params: Vec<f64>) -> Result<Self, NetError> {
        let plan = config.layers()?;
        let expected: usize = plan.iter().map(Layer::parameter_count).sum();
        if params.len() != expected {
            return Err(NetError::LengthMismatch { expected, found: params.len() });
        }
        Ok(Self { id, config, params, plan })
    }

    /// Rebuilds the layer plan after deserialization.
    pub fn validate(mut self) -> Result<Self, NetError> {
        self.plan = self.config.layers()?;
        let expected: usize = self.plan.iter().map(Layer::parameter_count).sum();
        if self.params.len() != expected {
            return Err(NetError::LengthMismatch { expected, found: self.params.len() });
        }
        Ok(self)
    }

    pub fn with_id(mut self, id: usize) -> Self {
        self.id = id;
        self
    }

    pub fn config(&self) -> &NetworkConfig {
        &self.config
    }

    pub fn parameters(&self) -> &[f64] {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn loss_kind(&self) -> LossKind {
        self.config.loss_kind()
    }

    fn check_input(&self, x: &Tensor) -> Result<(), NetError> {
        if x.shape() != &self.config.input {
            return Err(NetError::ShapeMismatch { expected: self.config.input.clone(), found: x.shape().clone() });
        }
        Ok(())
    }

    fn check_target(&self, y: &Tensor) -> Result<(), NetError> {
        if y.shape() != &self.config.output {
            return Err(NetError::ShapeMismatch { expected: self.config.output.clone(), found: y.shape().clone() });
        }
        Ok(())
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor, NetError> {
        self.check_input(x)?;
        let mut scratch = Scratch::new(&self.plan);
        let out = self.forward_into(x.values(), &mut scratch).to_vec();
        Tensor::new(self.config.output.clone(), out).map_err(|_| NetError::Diverged { epoch: 0 })
    }

    /// Runs the layers and applies the head; returns the final activations.
    fn forward_into<'s>(&self, x: &[f64], scratch: &'s mut Scratch) -> &'s [f64] {
        scratch.forward(&self.plan, &self.params, x);
        let out = scratch.output_mut();
        if self.config.head == OutputHead::Softmax {
            softmax(out);
        }
        out
    }

    /// Loss of one sample and its gradient, accumulated into `grad`.
    fn accumulate(&self, x: &[f64], y: &[f64], scratch: &mut Scratch, grad: &mut [f64], scale: f64) -> f64 {
        let kind = self.loss_kind();
        self.forward_into(x, scratch);
        let (out, delta) = scratch.output_and_delta();
        let loss = loss::loss_values(kind, out, y);
        loss::output_delta(kind, out, y, delta, scale);
        scratch.backward(&self.plan, &self.params, grad);
        loss
    }

    /// d(loss)/d(parameter) for one sample.
    pub fn gradients(&self, x: &Tensor, y: &Tensor, loss: LossKind) -> Result<Vec<f64>, NetError> {
        self.check_input(x)?;
        self.check_target(y)?;
        if loss != self.loss_kind() {
            return Err(NetError::LossMismatch { loss, head: self.config.head });
        }
        if loss == LossKind::CrossEntropy {
            loss::check_one_hot(y.values())?;
        }
        let mut scratch = Scratch::new(&self.plan);
        let mut grad = alloc::vec![0.0; self.params.len()];
        self.accumulate(x.values(), y.values(), &mut scratch, &mut grad, 1.0);
        Ok(grad)
    }

    /// Per-sample training loss (MSE or cross-entropy, by head).
    pub fn sample_loss(&self, x: &Tensor, y: &Tensor) -> Result<f64, NetError> {
        let pred = self.forward(x)?;
        match self.loss_kind() {
            LossKind::Mse => loss_mse(&pred, y),
            LossKind::CrossEntropy => loss_cross_entropy(&pred, y),
        }
    }
}

/// Free-function form of [`BaseNetwork::forward`].
pub fn forward(net: &BaseNetwork, x: &Tensor) -> Result<Tensor, NetError> {
    net.forward(x)
}

/// Free-function form of [`BaseNetwork::gradients`].
pub fn gradients(net: &BaseNetwork, x: &Tensor, y: &Tensor, loss: LossKind) -> Result<Vec<f64>, NetError> {
    net.gradients(x, y, loss)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn mlp_parameter_count() {
        assert_eq!(NetworkConfig::mlp(1, 8, 1).parameter_count().unwrap(), 25);
    }

    #[test]
    fn cnn_default_geometry() {
        let cfg = NetworkConfig::cnn(Shape::new(vec![28, 28, 1]).unwrap(), 10);
        let plan = cfg.layers().unwrap();
        let convs = plan.iter().filter(|l| matches!(l, Layer::Conv { .. })).count();
        let pools = plan.iter().filter(|l| matches!(l, Layer::MaxPool { .. })).count();
        let dense = plan.iter().filter(|l| matches!(l, Layer::Dense { .. })).count();
        assert_eq!((convs, pools, dense), (2, 2, 2));
        // 28 -> 24 -> 12 -> 8 -> 4; 4*4*16 = 256 features into the first dense layer.
        assert!(plan.contains(&Layer::Dense { input: 256, output: 64, offset: 208 + 3216 }));
        let expected = (25 * 8 + 8) + (25 * 8 * 16 + 16) + (256 * 64 + 64) + (64 * 10 + 10);
        assert_eq!(cfg.parameter_count().unwrap(), expected);
    }

    #[test]
    fn invalid_configs() {
        let mut cfg = NetworkConfig::cnn(Shape::new(vec![28, 28]).unwrap(), 10);
        assert!(matches!(cfg.layers(), Err(NetError::InvalidConfig(_))));
        cfg.input = Shape::new(vec![4, 4, 1]).unwrap();
        assert!(matches!(cfg.layers(), Err(NetError::InvalidConfig(_))));
        let mut m = NetworkConfig::mlp(1, 0, 1);
        assert!(m.layers().is_err());
        m.hidden = vec![3];
        m.head = OutputHead::Softmax;
        assert!(m.layers().is_err());
    }

    #[test]
    fn init_is_deterministic() {
        let cfg = NetworkConfig::mlp(2, 6, 1);
        let a = init_network(&cfg, 11).unwrap();
        let b = init_network(&cfg, 11).unwrap();
        let c = init_network(&cfg, 12).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        assert_ne!(a.parameters(), c.parameters());
        let (first, second) = a.parameters().split_at(2 * 6 + 6);
        assert!(first.iter().all(|p| p.abs() <= libm::sqrt(6.0 / 8.0)));
        assert!(second.iter().all(|p| p.abs() <= libm::sqrt(6.0 / 7.0)));
    }

    #[test]
    fn zero_parameters_give_zero_output() {
        let cfg = NetworkConfig::mlp(3, 5, 2);
        let n = cfg.parameter_count().unwrap();
        let net = BaseNetwork::from_parameters(0, cfg, vec![0.0; n]).unwrap();
        let out = net.forward(&Tensor::vector(vec![0.3, -2.0, 9.0]).unwrap()).unwrap();
        assert_eq!(out.values(), &[0.0, 0.0]);
    }

    #[test]
    fn hand_evaluated_identity_mlp() {
        // hidden weight 1, hidden bias 0, output weight 1, output bias 0
        let net = BaseNetwork::from_parameters(0, NetworkConfig::mlp(1, 1, 1), vec![1.0, 0.0, 1.0, 0.0]).unwrap();
        let out = net.forward(&Tensor::scalar(0.5).unwrap()).unwrap();
        assert_eq!(out.values(), &[0.5]);
        let out = net.forward(&Tensor::scalar(-0.5).unwrap()).unwrap();
        assert_eq!(out.values(), &[0.0]);
    }

    #[test]
    fn softmax_head_is_a_distribution() {
        let cfg = NetworkConfig::cnn(Shape::new(vec![8, 8, 2]).unwrap(), 4);
        let cfg = NetworkConfig { conv: vec![ConvSpec { channels: 3, kernel: 3, pool: 2 }], hidden: vec![5], ..cfg };
        let net = init_network(&cfg, 3).unwrap();
        let x = Tensor::new(cfg.input.clone(), (0..128).map(|i| (i as f64 * 0.37).sin()).collect()).unwrap();
        let p = net.forward(&x).unwrap();
        assert!(p.values().iter().all(|&v| v >= 0.0));
        assert!((p.values().iter().sum::<f64>() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn shape_errors() {
        let net = init_network(&NetworkConfig::mlp(2, 3, 1), 0).unwrap();
        assert!(matches!(net.forward(&Tensor::scalar(1.0).unwrap()), Err(NetError::ShapeMismatch { .. })));
        let x = Tensor::vector(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            net.gradients(&x, &Tensor::vector(vec![1.0, 2.0]).unwrap(), LossKind::Mse),
            Err(NetError::ShapeMismatch { .. })
        ));
        assert!(matches!(
            net.gradients(&x, &Tensor::scalar(1.0).unwrap(), LossKind::CrossEntropy),
            Err(NetError::LossMismatch { .. })
        ));
    }

    #[test]
    fn zero_gradient_at_exact_fit() {
        let net = init_network(&NetworkConfig::mlp(2, 4, 1), 5).unwrap();
        let x = Tensor::vector(vec![0.1, -0.4]).unwrap();
        let y = net.forward(&x).unwrap();
        let g = net.gradients(&x, &y, LossKind::Mse).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn mse_gradient_scales_with_residual() {
        let net = init_network(&NetworkConfig::mlp(1, 4, 1), 9).unwrap();
        let x = Tensor::scalar(0.3).unwrap();
        let p = net.forward(&x).unwrap().values()[0];
        let g1 = net.gradients(&x, &Tensor::scalar(p - 0.25).unwrap(), LossKind::Mse).unwrap();
        let g2 = net.gradients(&x, &Tensor::scalar(p - 0.5).unwrap(), LossKind::Mse).unwrap();
        for (a, b) in g1.iter().zip(&g2) {
            assert!((2.0 * a - b).abs() <= 1e-12 * b.abs().max(1.0));
        }
    }
}
