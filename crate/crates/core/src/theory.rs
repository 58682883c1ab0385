//! Arithmetic of the reflection bound.
//!
//! The wrong set is modelled as `N` errors spread uniformly over the
//! reflection interval `[ε, t·ε]`. Splitting that interval into `k` clusters
//! leaves each specialist a residual of at most `(t-1)ε/k`, so the loss
//! reduction, in units of `ε²`, is
//!
//! ```text
//! R = Σ_{i=1..N} (1 + (t-1)·i/N)² - N·((t-1)/k)²
//! ```
//!
//! [`monte_carlo_reduction`] estimates the same quantity by sampling error
//! sets, which checks the closed form independently.

use rand::{Rng as _, SeedableRng};
use thiserror::Error;

use crate::rng;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BoundError {
    #[error("t must be finite and greater than 1, got {0}")]
    BadT(f64),
    #[error("k must be at least 1")]
    BadK,
    #[error("N must be at least 1")]
    BadN,
    #[error("epsilon must be finite and positive, got {0}")]
    BadEpsilon(f64),
    #[error("at least 100 Monte Carlo samples are required, got {0}")]
    TooFewSamples(usize),
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundParams {
    /// `Err_max = t·ε`.
    pub t: f64,
    pub k: usize,
    /// Size of the wrong set.
    pub n: usize,
    pub epsilon: f64,
}

impl BoundParams {
    pub fn new(t: f64, k: usize, n: usize, epsilon: f64) -> Result<Self, BoundError> {
        if !(t.is_finite() && t > 1.0) {
            return Err(BoundError::BadT(t));
        }
        if k == 0 {
            return Err(BoundError::BadK);
        }
        if n == 0 {
            return Err(BoundError::BadN);
        }
        if !(epsilon.is_finite() && epsilon > 0.0) {
            return Err(BoundError::BadEpsilon(epsilon));
        }
        Ok(Self { t, k, n, epsilon })
    }
}

/// Closed-form reduction `R`, in units of `ε²`.
pub fn expected_reduction(p: &BoundParams) -> f64 {
    let n = p.n as f64;
    let step = (p.t - 1.0) / n;
    let spread: f64 = (1..=p.n)
        .map(|i| {
            let e = 1.0 + step * i as f64;
            e * e
        })
        .sum();
    let residual = (p.t - 1.0) / p.k as f64;
    spread - n * residual * residual
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Conditions {
    /// `k = t - 1` and `N > 2`.
    pub k_is_t_minus_one: bool,
    /// `k > 1` and `4/(3k²) < ((86 - t)t - 73) / (36(t - 1)²)`.
    pub asymptotic: bool,
    pub asymptotic_lhs: f64,
    pub asymptotic_rhs: f64,
}

impl Conditions {
    pub fn any(&self) -> bool {
        self.k_is_t_minus_one || self.asymptotic
    }
}

/// Evaluates both sufficient conditions for `R > 0` exactly as stated.
pub fn conditions_hold(p: &BoundParams) -> Conditions {
    let k = p.k as f64;
    let k_is_t_minus_one = (k - (p.t - 1.0)).abs() <= 1e-12 * p.t && p.n > 2;
    let lhs = 4.0 / (3.0 * k * k);
    let rhs = ((86.0 - p.t) * p.t - 73.0) / (36.0 * (p.t - 1.0) * (p.t - 1.0));
    Conditions { k_is_t_minus_one, asymptotic: p.k > 1 && lhs < rhs, asymptotic_lhs: lhs, asymptotic_rhs: rhs }
}

/// How each simulated error is drawn from `[ε, t·ε]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum ErrorSampling {
    /// Uniform over the `N` evenly spaced levels `ε(1 + (t-1)i/N)`,
    /// `i = 1..N`, the discretisation the closed form sums over.
    #[default]
    Lattice,
    /// Continuous uniform on `[ε, t·ε]`. Its mean differs from the closed
    /// form by roughly `(t-1) + (t-1)²/2` (the right-endpoint sum bias).
    Continuous,
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MonteCarlo {
    /// Mean reduction across trials, in units of `ε²`.
    pub estimate: f64,
    pub standard_error: f64,
    pub samples: usize,
}

/// Averages `Σ e_i² - N((t-1)ε/k)²` over `samples` independent draws of `N`
/// errors, reported in units of `ε²`.
pub fn monte_carlo_reduction(
    p: &BoundParams,
    samples: usize,
    sampling: ErrorSampling,
    seed: u64,
) -> Result<MonteCarlo, BoundError> {
    if samples < 100 {
        return Err(BoundError::TooFewSamples(samples));
    }
    let mut rng = rng::Rng::seed_from_u64(rng::sub_seed(seed, "bound"));
    let eps = p.epsilon;
    let width = (p.t - 1.0) * eps;
    let residual = width / p.k as f64;
    let residual_total = p.n as f64 * residual * residual;
    let step = width / p.n as f64;

    // Welford accumulation of per-trial reductions.
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for trial in 0..samples {
        let mut spread = 0.0;
        for _ in 0..p.n {
            let e = match sampling {
                ErrorSampling::Lattice => eps + step * rng.random_range(1..=p.n) as f64,
                ErrorSampling::Continuous => eps + width * rng.random::<f64>(),
            };
            spread += e * e;
        }
        let r = (spread - residual_total) / (eps * eps);
        let delta = r - mean;
        mean += delta / (trial + 1) as f64;
        m2 += delta * (r - mean);
    }
    let var = m2 / (samples - 1) as f64;
    Ok(MonteCarlo { estimate: mean, standard_error: libm::sqrt(var / samples as f64), samples })
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct BoundReport {
    pub params: BoundParams,
    pub analytic: f64,
    pub conditions: Conditions,
    pub monte_carlo: MonteCarlo,
}

impl BoundReport {
    pub fn agrees(&self, sigmas: f64) -> bool {
        (self.monte_carlo.estimate - self.analytic).abs() <= sigmas * self.monte_carlo.standard_error
    }
}

pub fn bound_report(
    p: &BoundParams,
    samples: usize,
    sampling: ErrorSampling,
    seed: u64,
) -> Result<BoundReport, BoundError> {
    Ok(BoundReport {
        params: *p,
        analytic: expected_reduction(p),
        conditions: conditions_hold(p),
        monte_carlo: monte_carlo_reduction(p, samples, sampling, seed)?,
    })
}

/// `k = max(1, round(t - 1))`, the cluster count that meets the first
/// condition when `t` is an integer.
pub fn matched_k(t: f64) -> usize {
    let k = libm::round(t - 1.0);
    if k < 1.0 {
        1
    } else {
        k as usize
    }
}
