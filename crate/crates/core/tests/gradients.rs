//! Analytic gradients against central finite differences.

use crtx_core::nets::{init_network, Activation, ConvSpec, NetworkConfig, NetworkKind, OutputHead};
use crtx_core::{BaseNetwork, Shape, Tensor};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const H: f64 = 1e-5;
const REL_TOL: f64 = 1e-4;
const TINY: f64 = 1e-8;
const NETS_PER_KIND: u64 = 60;

fn random_mlp(rng: &mut ChaCha8Rng) -> NetworkConfig {
    let input = rng.random_range(1..=4);
    let output = rng.random_range(1..=3);
    let hidden = (0..rng.random_range(1..=2)).map(|_| rng.random_range(1..=8)).collect();
    NetworkConfig {
        kind: NetworkKind::MlpRegressor,
        input: Shape::vector(input),
        output: Shape::vector(output),
        conv: Vec::new(),
        hidden,
        activation: Activation::Relu,
        head: OutputHead::Linear,
    }
}

fn random_cnn(rng: &mut ChaCha8Rng) -> NetworkConfig {
    loop {
        let side = rng.random_range(6..=9);
        let c = rng.random_range(1..=2);
        let conv = vec![
            ConvSpec {
                channels: rng.random_range(1..=3),
                kernel: rng.random_range(2..=3),
                pool: rng.random_range(1..=2),
            },
            ConvSpec { channels: rng.random_range(1..=3), kernel: 2, pool: rng.random_range(1..=2) },
        ];
        let cfg = NetworkConfig {
            kind: NetworkKind::CnnClassifier,
            input: Shape::new(vec![side, side, c]).unwrap(),
            output: Shape::vector(rng.random_range(2..=4)),
            conv,
            hidden: vec![rng.random_range(2..=5)],
            activation: Activation::Relu,
            head: OutputHead::Softmax,
        };
        if cfg.parameter_count().is_ok_and(|n| n <= 200) {
            return cfg;
        }
    }
}

fn target(cfg: &NetworkConfig, rng: &mut ChaCha8Rng) -> Tensor {
    let n = cfg.output.len();
    match cfg.head {
        OutputHead::Softmax => Tensor::one_hot(rng.random_range(0..n), n),
        OutputHead::Linear => Tensor::vector((0..n).map(|_| rng.random_range(-2.0..2.0)).collect()).unwrap(),
    }
}

/// Returns (components checked, worst relative error).
fn check(net: &mut BaseNetwork, x: &Tensor, y: &Tensor) -> (usize, f64) {
    let analytic = net.gradients(x, y, net.loss_kind()).unwrap();
    assert_eq!(analytic.len(), net.parameters().len());
    let mut checked = 0;
    let mut worst: f64 = 0.0;
    for (i, &a) in analytic.iter().enumerate() {
        let orig = net.parameters()[i];
        net.parameters_mut()[i] = orig + H;
        let up = net.sample_loss(x, y).unwrap();
        net.parameters_mut()[i] = orig - H;
        let down = net.sample_loss(x, y).unwrap();
        net.parameters_mut()[i] = orig;
        let numeric = (up - down) / (2.0 * H);
        if a.abs() < TINY && numeric.abs() < TINY {
            continue;
        }
        checked += 1;
        let rel = (a - numeric).abs() / a.abs().max(numeric.abs());
        worst = worst.max(rel);
    }
    (checked, worst)
}

fn run(kind: &str, make: fn(&mut ChaCha8Rng) -> NetworkConfig) {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6772_6164);
    let mut total = 0;
    for case in 0..NETS_PER_KIND {
        let cfg = make(&mut rng);
        let mut net = init_network(&cfg, case).unwrap();
        let x = Tensor::new(cfg.input.clone(), (0..cfg.input.len()).map(|_| rng.random_range(-1.0..1.0)).collect())
            .unwrap();
        let y = target(&cfg, &mut rng);
        let (checked, worst) = check(&mut net, &x, &y);
        assert!(worst < REL_TOL, "{kind} net {case} ({cfg:?}): relative error {worst:e}");
        total += checked;
    }
    assert!(total > 0);
}

#[test]
fn mlp_gradients_match_finite_differences() {
    run("mlp", random_mlp);
}

#[test]
fn cnn_gradients_match_finite_differences() {
    run("cnn", random_cnn);
}

#[test]
fn zero_residual_gives_zero_gradient() {
    let cfg = NetworkConfig::mlp(2, 5, 1);
    let net = init_network(&cfg, 9).unwrap();
    let x = Tensor::vector(vec![0.3, -0.7]).unwrap();
    let y = net.forward(&x).unwrap();
    let g = net.gradients(&x, &y, net.loss_kind()).unwrap();
    assert!(g.iter().all(|&v| v == 0.0));
}
