use alloc::vec::Vec;
use core::borrow::Borrow;

use rand::seq::SliceRandom;

use super::layers::Scratch;
use super::loss::{check_one_hot, loss_values};
use super::{AdamState, BaseNetwork, LossKind, NetError};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainParams {
    pub epochs: usize,
    /// Samples per Adam step; `None` trains full-batch.
    #[cfg_attr(feature = "serde", serde(default))]
    pub batch_size: Option<usize>,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrainReport {
    /// Mean per-sample loss seen during each epoch.
    pub epoch_losses: Vec<f64>,
    /// Mean loss over the whole dataset with the final parameters.
    pub final_loss: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl BaseNetwork {
    fn check_dataset<T: Borrow<Tensor>>(&self, xs: &[T], ys: &[T]) -> Result<(), NetError> {
        if xs.is_empty() {
            return Err(NetError::EmptyDataset);
        }
        if xs.len() != ys.len() {
            return Err(NetError::LengthMismatch { expected: xs.len(), found: ys.len() });
        }
        for (x, y) in xs.iter().zip(ys) {
            self.check_input(x.borrow())?;
            self.check_target(y.borrow())?;
            if self.loss_kind() == LossKind::CrossEntropy {
                check_one_hot(y.borrow().values())?;
            }
        }
        Ok(())
    }

    /// Mean per-sample loss over a dataset.
    pub fn mean_loss<T: Borrow<Tensor>>(&self, xs: &[T], ys: &[T]) -> Result<f64, NetError> {
        self.check_dataset(xs, ys)?;
        let mut scratch = Scratch::new(&self.plan);
        let kind = self.loss_kind();
        let total: f64 = xs
            .iter()
            .zip(ys)
            .map(|(x, y)| {
                let out = self.forward_into(x.borrow().values(), &mut scratch);
                loss_values(kind, out, y.borrow().values())
            })
            .sum();
        Ok(total / xs.len() as f64)
    }

    /// Forward pass over many inputs, reusing one scratch buffer.
    pub fn forward_many<T: Borrow<Tensor>>(&self, xs: &[T]) -> Result<Vec<Tensor>, NetError> {
        let mut scratch = Scratch::new(&self.plan);
        xs.iter()
            .map(|x| {
                let x = x.borrow();
                self.check_input(x)?;
                let out = self.forward_into(x.values(), &mut scratch).to_vec();
                Tensor::new(self.config.output.clone(), out).map_err(|_| NetError::Diverged { epoch: 0 })
            })
            .collect()
    }

    /// Trains in place with Adam. Deterministic for a given `seed`.
    pub fn train<T: Borrow<Tensor>>(
        &mut self,
        xs: &[T],
        ys: &[T],
        params: &TrainParams,
        seed: u64,
    ) -> Result<TrainReport, NetError> {
        self.check_dataset(xs, ys)?;
        let n = xs.len();
        let batch = params.batch_size.unwrap_or(n).clamp(1, n);
        let mut rng = rng::rng_from(seed, "shuffle");
        let mut adam = AdamState::new(self.params.len(), params.learning_rate);
        let mut scratch = Scratch::new(&self.plan);
        let mut grad = alloc::vec![0.0; self.params.len()];
        let mut order: Vec<usize> = (0..n).collect();
        let mut epoch_losses = Vec::with_capacity(params.epochs);

        for epoch in 0..params.epochs {
            if batch < n {
                order.shuffle(&mut rng);
            }
            let mut total = 0.0;
            for chunk in order.chunks(batch) {
                grad.iter_mut().for_each(|g| *g = 0.0);
                let scale = 1.0 / chunk.len() as f64;
                for &i in chunk {
                    total += self.accumulate(
                        xs[i].borrow().values(),
                        ys[i].borrow().values(),
                        &mut scratch,
                        &mut grad,
                        scale,
                    );
                }
                adam.step(&mut self.params, &grad)?;
            }
            let loss = total / n as f64;
            if !loss.is_finite() {
                return Err(NetError::Diverged { epoch });
            }
            epoch_losses.push(loss);
        }

        let final_loss = self.mean_loss(xs, ys)?;
        if !final_loss.is_finite() {
            return Err(NetError::Diverged { epoch: params.epochs });
        }
        Ok(TrainReport { epoch_losses, final_loss, epochs: params.epochs, seed })
    }
}
