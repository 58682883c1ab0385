use crate::tensor::Tensor;

use super::NetError;

/// Probabilities are clamped to this floor before taking the log.
pub const PROB_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum LossKind {
    Mse,
    CrossEntropy,
}

/// Mean of squared componentwise differences.
pub fn loss_mse(pred: &Tensor, target: &Tensor) -> Result<f64, NetError> {
    same_shape(pred, target)?;
    Ok(mse(pred.values(), target.values()))
}

/// `-ln p[true class]`, with `p` clamped below by [`PROB_FLOOR`].
pub fn loss_cross_entropy(pred: &Tensor, target: &Tensor) -> Result<f64, NetError> {
    same_shape(pred, target)?;
    let class = check_one_hot(target.values())?;
    Ok(-libm::log(pred.values()[class].max(PROB_FLOOR)))
}

fn same_shape(pred: &Tensor, target: &Tensor) -> Result<(), NetError> {
    if pred.shape() != target.shape() {
        return Err(NetError::ShapeMismatch { expected: pred.shape().clone(), found: target.shape().clone() });
    }
    Ok(())
}

/// Returns the hot index.
pub(crate) fn check_one_hot(y: &[f64]) -> Result<usize, NetError> {
    let mut hot = None;
    for (i, &v) in y.iter().enumerate() {
        if v == 1.0 && hot.is_none() {
            hot = Some(i);
        } else if v != 0.0 {
            return Err(NetError::NotOneHot);
        }
    }
    hot.ok_or(NetError::NotOneHot)
}

pub(crate) fn mse(pred: &[f64], target: &[f64]) -> f64 {
    let sum: f64 = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum();
    sum / pred.len() as f64
}

pub(crate) fn loss_values(kind: LossKind, out: &[f64], y: &[f64]) -> f64 {
    match kind {
        LossKind::Mse => mse(out, y),
        LossKind::CrossEntropy => {
            let class = y.iter().position(|&v| v == 1.0).unwrap_or(0);
            -libm::log(out[class].max(PROB_FLOOR))
        }
    }
}

/// Gradient of the loss with respect to the last layer's pre-head output,
/// times `scale`. For softmax + cross-entropy this is `p - y`.
pub(crate) fn output_delta(kind: LossKind, out: &[f64], y: &[f64], delta: &mut [f64], scale: f64) {
    match kind {
        LossKind::Mse => {
            let k = 2.0 * scale / out.len() as f64;
            for ((d, o), t) in delta.iter_mut().zip(out).zip(y) {
                *d = k * (o - t);
            }
        }
        LossKind::CrossEntropy => {
            for ((d, o), t) in delta.iter_mut().zip(out).zip(y) {
                *d = scale * (o - t);
            }
        }
    }
}

/// In-place numerically stable softmax.
pub fn softmax(v: &mut [f64]) {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for x in v.iter_mut() {
        *x = libm::exp(*x - max);
        sum += *x;
    }
    for x in v.iter_mut() {
        *x /= sum;
    }
}
