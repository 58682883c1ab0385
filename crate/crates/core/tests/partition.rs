use std::collections::BTreeMap;

use crtx_core::cortex::{sense_partition, SenseKey, TaskKind};
use crtx_core::data::mix;
use crtx_core::{LabeledDataset, Shape, Tensor};
use proptest::prelude::*;

/// Samples tagged with their position: input[0] holds the index.
fn samples(shapes: &[(Vec<usize>, Vec<usize>)], picks: &[usize]) -> Vec<(Tensor, Tensor)> {
    picks
        .iter()
        .enumerate()
        .map(|(i, &s)| {
            let (xs, ys) = &shapes[s % shapes.len()];
            let x_shape = Shape::new(xs.clone()).unwrap();
            let y_shape = Shape::new(ys.clone()).unwrap();
            let mut xv = vec![0.0; x_shape.len()];
            xv[0] = i as f64;
            let yv = (0..y_shape.len()).map(|j| (i + j) as f64 * 0.5).collect();
            (Tensor::new(x_shape, xv).unwrap(), Tensor::new(y_shape, yv).unwrap())
        })
        .collect()
}

fn shape() -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(1usize..4, 1..4)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn partition_is_a_disjoint_homogeneous_cover(
        shapes in prop::collection::vec((shape(), shape()), 1..5),
        picks in prop::collection::vec(0usize..5, 1..80),
    ) {
        let mixed = samples(&shapes, &picks);
        let n = mixed.len();
        let expected_keys: std::collections::BTreeSet<SenseKey> =
            mixed.iter().map(|(x, y)| SenseKey::of(x, y)).collect();
        let parts = sense_partition(mixed).unwrap();

        prop_assert_eq!(parts.keys().cloned().collect::<std::collections::BTreeSet<_>>(), expected_keys);
        let mut seen = vec![false; n];
        for (key, ds) in &parts {
            prop_assert!(!ds.is_empty());
            for (x, y) in ds.inputs().iter().zip(ds.targets()) {
                prop_assert_eq!(x.shape(), &key.input);
                prop_assert_eq!(y.shape(), &key.output);
                let i = x.values()[0] as usize;
                prop_assert!(!seen[i], "sample {} appears twice", i);
                seen[i] = true;
            }
        }
        prop_assert!(seen.iter().all(|&s| s));
        prop_assert_eq!(parts.values().map(LabeledDataset::len).sum::<usize>(), n);
    }
}

#[test]
fn homogeneous_data_gives_one_key() {
    let mixed = samples(&[(vec![2], vec![1])], &[0; 25]);
    let parts = sense_partition(mixed).unwrap();
    assert_eq!(parts.len(), 1);
    assert_eq!(parts.values().next().unwrap().len(), 25);
}

#[test]
fn image_shapes_give_two_classification_areas() {
    let mnist: Vec<(Tensor, Tensor)> =
        (0..30).map(|i| (Tensor::zeros(Shape::new(vec![28, 28, 1]).unwrap()), Tensor::one_hot(i % 10, 10))).collect();
    let cifar: Vec<(Tensor, Tensor)> =
        (0..20).map(|i| (Tensor::zeros(Shape::new(vec![32, 32, 3]).unwrap()), Tensor::one_hot(i % 10, 10))).collect();
    let a = LabeledDataset::new(
        mnist.iter().map(|p| p.0.clone()).collect(),
        mnist.iter().map(|p| p.1.clone()).collect(),
        TaskKind::Classification,
    )
    .unwrap();
    let b = LabeledDataset::new(
        cifar.iter().map(|p| p.0.clone()).collect(),
        cifar.iter().map(|p| p.1.clone()).collect(),
        TaskKind::Classification,
    )
    .unwrap();
    let parts = sense_partition(mix(vec![a.clone(), b.clone()], 5).unwrap()).unwrap();
    let sizes: BTreeMap<String, usize> = parts.iter().map(|(k, d)| (k.to_string(), d.len())).collect();
    assert_eq!(sizes.len(), 2);
    assert_eq!(sizes["[28x28x1]->[10]"], 30);
    assert_eq!(sizes["[32x32x3]->[10]"], 20);
    assert!(parts.values().all(|d| d.kind() == TaskKind::Classification));
}
