//! MNIST and CIFAR-10 files on disk.

use std::path::{Path, PathBuf};

use crtx_core::cortex::LabeledDataset;
use crtx_core::data::{parse_cifar10, parse_mnist, subset_indices};

use crate::CliError;

pub const MNIST_TRAIN: (&str, &str) = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
pub const MNIST_TEST: (&str, &str) = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");

pub fn cifar_train_files(dir: &Path) -> Vec<PathBuf> {
    (1..=5).map(|i| dir.join(format!("data_batch_{i}.bin"))).collect()
}

pub fn cifar_test_files(dir: &Path) -> Vec<PathBuf> {
    vec![dir.join("test_batch.bin")]
}

fn read(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path).map_err(|e| CliError::io(path, e))
}

/// Images as `[28, 28, 1]` in `[0, 1]`, labels one-hot; `take` samples
/// after a seeded shuffle.
pub fn load_mnist(images: &Path, labels: &Path, take: Option<usize>, seed: u64) -> Result<LabeledDataset, CliError> {
    let ib = read(images)?;
    let lb = read(labels)?;
    let m = parse_mnist(&ib, &lb)
        .map_err(|source| CliError::Format { path: format!("{} + {}", images.display(), labels.display()), source })?;
    Ok(m.dataset(&subset_indices(m.len(), take, seed)))
}

/// Concatenated batches as `[32, 32, 3]` HWC images.
pub fn load_cifar10(files: &[PathBuf], take: Option<usize>, seed: u64) -> Result<LabeledDataset, CliError> {
    let mut bytes = Vec::new();
    for f in files {
        let b = read(f)?;
        // validate each file on its own so errors name the right one
        parse_cifar10(&b).map_err(|source| CliError::Format { path: f.display().to_string(), source })?;
        bytes.extend_from_slice(&b);
    }
    let c = parse_cifar10(&bytes).map_err(|source| CliError::Format { path: "cifar batches".into(), source })?;
    Ok(c.dataset(&subset_indices(c.len(), take, seed)))
}
