//! Dataset generation and parsing.
//!
//! Parsers work on byte slices so they stay IO-free; the companion crate
//! reads the files.
//!
//! * MNIST IDX: big-endian magic (`0x00000803` images, `0x00000801` labels),
//!   big-endian dimension words, then raw bytes.
//! * CIFAR-10 binary: 3073-byte records, one label byte then the R, G and B
//!   planes of a 32x32 image.

use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::Rng as _;
use thiserror::Error;

use crate::cortex::{LabeledDataset, TaskKind};
use crate::rng;
use crate::tensor::{Shape, Tensor};

pub const IDX_IMAGES_MAGIC: u32 = 0x0000_0803;
pub const IDX_LABELS_MAGIC: u32 = 0x0000_0801;
pub const CIFAR_RECORD: usize = 1 + 3 * 1024;
pub const CLASSES: usize = 10;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum FormatError {
    #[error("bad magic at byte {offset}: expected {expected:#010x}, found {found:#010x}")]
    BadMagic { offset: usize, expected: u32, found: u32 },
    #[error("truncated at byte {offset}: need {needed} bytes, file has {available}")]
    Truncated { offset: usize, needed: usize, available: usize },
    #[error("trailing data at byte {offset}")]
    TrailingBytes { offset: usize },
    #[error("count mismatch at byte {offset}: {images} images but {labels} labels")]
    CountMismatch { offset: usize, images: usize, labels: usize },
    #[error("zero image dimension at byte {offset}")]
    ZeroDimension { offset: usize },
    #[error("file length {len} is not a multiple of the {record}-byte record size")]
    RecordLength { len: usize, record: usize },
    #[error("label {label} at byte {offset} is out of range")]
    BadLabel { offset: usize, label: u8 },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DataError {
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error("train fraction {0} is outside (0, 1)")]
    BadFraction(f64),
    #[error("split of {n} samples at fraction {fraction} leaves an empty side")]
    EmptySplit { n: usize, fraction: f64 },
    #[error("sample count must be positive")]
    ZeroSamples,
    #[error("no datasets to mix")]
    NothingToMix,
}

/// The four target functions of the approximation experiment.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FunctionId {
    /// `x`
    Linear,
    /// `x³ - 0.2x - 0.35`
    Cubic,
    /// `x⁴ + 0.2x³ - 0.67x²`
    Quartic,
    /// `x⁴ + x³ - 0.6x²` on `[-1, 0)`, `x⁵ + x⁴ - 0.5x³` on `[0, 1)`
    Piecewise,
}

impl FunctionId {
    pub const ALL: [FunctionId; 4] = [Self::Linear, Self::Cubic, Self::Quartic, Self::Piecewise];

    pub fn name(self) -> &'static str {
        match self {
            Self::Linear => "linear",
            Self::Cubic => "cubic",
            Self::Quartic => "quartic",
            Self::Piecewise => "piecewise",
        }
    }

    pub fn eval(self, x: f64) -> f64 {
        let x2 = x * x;
        let x3 = x2 * x;
        let x4 = x2 * x2;
        match self {
            Self::Linear => x,
            Self::Cubic => x3 - 0.2 * x - 0.35,
            Self::Quartic => x4 + 0.2 * x3 - 0.67 * x2,
            Self::Piecewise if x < 0.0 => x4 + x3 - 0.6 * x2,
            Self::Piecewise => x4 * x + x4 - 0.5 * x3,
        }
    }
}

impl core::str::FromStr for FunctionId {
    type Err = alloc::string::String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|f| f.name() == s).ok_or_else(|| alloc::format!("unknown function {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FunctionSpec {
    pub id: FunctionId,
    /// Half-open sampling interval `[lo, hi)`.
    pub domain: (f64, f64),
}

impl FunctionSpec {
    pub fn new(id: FunctionId) -> Self {
        Self { id, domain: (-1.0, 1.0) }
    }

    pub fn eval(&self, x: f64) -> f64 {
        self.id.eval(x)
    }
}

/// `n` noiseless pairs `(x, f(x))` with `x` uniform on the domain.
pub fn gen_function_dataset(spec: &FunctionSpec, n: usize, seed: u64) -> Result<LabeledDataset, DataError> {
    if n == 0 {
        return Err(DataError::ZeroSamples);
    }
    let mut rng = rng::rng_from(seed, "function-data");
    let (lo, hi) = spec.domain;
    let (inputs, targets) = (0..n)
        .map(|_| {
            let x = lo + (hi - lo) * rng.random::<f64>();
            (
                Tensor::from_raw(Shape::vector(1), alloc::vec![x]),
                Tensor::from_raw(Shape::vector(1), alloc::vec![spec.eval(x)]),
            )
        })
        .unzip();
    Ok(LabeledDataset::from_parts(inputs, targets, TaskKind::Regression))
}

fn read_u32(bytes: &[u8], offset: usize) -> Result<u32, FormatError> {
    bytes.get(offset..offset + 4).map(|b| u32::from_be_bytes([b[0], b[1], b[2], b[3]])).ok_or(FormatError::Truncated {
        offset,
        needed: offset + 4,
        available: bytes.len(),
    })
}

fn expect_magic(bytes: &[u8], expected: u32) -> Result<(), FormatError> {
    let found = read_u32(bytes, 0)?;
    if found != expected {
        return Err(FormatError::BadMagic { offset: 0, expected, found });
    }
    Ok(())
}

fn check_body(bytes: &[u8], offset: usize, len: usize) -> Result<(), FormatError> {
    let needed = offset + len;
    if bytes.len() < needed {
        return Err(FormatError::Truncated { offset: bytes.len(), needed, available: bytes.len() });
    }
    if bytes.len() > needed {
        return Err(FormatError::TrailingBytes { offset: needed });
    }
    Ok(())
}

/// Borrowed view of an IDX image file.
#[derive(Debug, Clone, Copy)]
pub struct IdxImages<'a> {
    pub count: usize,
    pub rows: usize,
    pub cols: usize,
    pixels: &'a [u8],
}

pub fn parse_idx_images(bytes: &[u8]) -> Result<IdxImages<'_>, FormatError> {
    expect_magic(bytes, IDX_IMAGES_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    let rows = read_u32(bytes, 8)? as usize;
    let cols = read_u32(bytes, 12)? as usize;
    if rows == 0 {
        return Err(FormatError::ZeroDimension { offset: 8 });
    }
    if cols == 0 {
        return Err(FormatError::ZeroDimension { offset: 12 });
    }
    check_body(bytes, 16, count * rows * cols)?;
    Ok(IdxImages { count, rows, cols, pixels: &bytes[16..] })
}

impl IdxImages<'_> {
    /// Image `i` as a `[rows, cols, 1]` tensor scaled to `[0, 1]`.
    pub fn image(&self, i: usize) -> Tensor {
        let len = self.rows * self.cols;
        let px = &self.pixels[i * len..(i + 1) * len];
        let shape = Shape::new(alloc::vec![self.rows, self.cols, 1]).expect("nonzero dims");
        Tensor::from_raw(shape, px.iter().map(|&b| f64::from(b) / 255.0).collect())
    }
}

/// Labels of an IDX label file; every label must be below 10.
pub fn parse_idx_labels(bytes: &[u8]) -> Result<&[u8], FormatError> {
    expect_magic(bytes, IDX_LABELS_MAGIC)?;
    let count = read_u32(bytes, 4)? as usize;
    check_body(bytes, 8, count)?;
    let labels = &bytes[8..];
    if let Some(i) = labels.iter().position(|&l| usize::from(l) >= CLASSES) {
        return Err(FormatError::BadLabel { offset: 8 + i, label: labels[i] });
    }
    Ok(labels)
}

/// Paired MNIST images and labels.
#[derive(Debug, Clone, Copy)]
pub struct Mnist<'a> {
    pub images: IdxImages<'a>,
    pub labels: &'a [u8],
}

pub fn parse_mnist<'a>(images: &'a [u8], labels: &'a [u8]) -> Result<Mnist<'a>, FormatError> {
    let images = parse_idx_images(images)?;
    let labels = parse_idx_labels(labels)?;
    if images.count != labels.len() {
        // the count word sits at byte 4 of both files
        return Err(FormatError::CountMismatch { offset: 4, images: images.count, labels: labels.len() });
    }
    Ok(Mnist { images, labels })
}

impl Mnist<'_> {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn sample(&self, i: usize) -> (Tensor, Tensor) {
        (self.images.image(i), Tensor::one_hot(usize::from(self.labels[i]), CLASSES))
    }

    pub fn dataset(&self, indices: &[usize]) -> LabeledDataset {
        let (x, y) = indices.iter().map(|&i| self.sample(i)).unzip();
        LabeledDataset::from_parts(x, y, TaskKind::Classification)
    }
}

/// Borrowed view of one or more concatenated CIFAR-10 batch files.
#[derive(Debug, Clone, Copy)]
pub struct Cifar10<'a> {
    bytes: &'a [u8],
}

pub fn parse_cifar10(bytes: &[u8]) -> Result<Cifar10<'_>, FormatError> {
    if !bytes.len().is_multiple_of(CIFAR_RECORD) || bytes.is_empty() {
        return Err(FormatError::RecordLength { len: bytes.len(), record: CIFAR_RECORD });
    }
    for offset in (0..bytes.len()).step_by(CIFAR_RECORD) {
        if usize::from(bytes[offset]) >= CLASSES {
            return Err(FormatError::BadLabel { offset, label: bytes[offset] });
        }
    }
    Ok(Cifar10 { bytes })
}

impl Cifar10<'_> {
    pub fn len(&self) -> usize {
        self.bytes.len() / CIFAR_RECORD
    }

    pub fn is_empty(&self) -> bool {
        self.bytes.is_empty()
    }

    pub fn label(&self, i: usize) -> usize {
        usize::from(self.bytes[i * CIFAR_RECORD])
    }

    /// Record `i` as a `[32, 32, 3]` HWC tensor in `[0, 1]` and its one-hot label.
    pub fn sample(&self, i: usize) -> (Tensor, Tensor) {
        let rec = &self.bytes[i * CIFAR_RECORD..(i + 1) * CIFAR_RECORD];
        let planes = &rec[1..];
        let mut values = alloc::vec![0.0; 3 * 1024];
        for (p, v) in values.iter_mut().enumerate() {
            let (pixel, c) = (p / 3, p % 3);
            *v = f64::from(planes[c * 1024 + pixel]) / 255.0;
        }
        let shape = Shape::new(alloc::vec![32, 32, 3]).expect("nonzero dims");
        (Tensor::from_raw(shape, values), Tensor::one_hot(usize::from(rec[0]), CLASSES))
    }

    pub fn dataset(&self, indices: &[usize]) -> LabeledDataset {
        let (x, y) = indices.iter().map(|&i| self.sample(i)).unzip();
        LabeledDataset::from_parts(x, y, TaskKind::Classification)
    }
}

/// First `take` indices of a seeded permutation of `0..len` (all of them
/// when `take` is `None` or exceeds `len`).
pub fn subset_indices(len: usize, take: Option<usize>, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..len).collect();
    idx.shuffle(&mut rng::rng_from(seed, "take"));
    idx.truncate(take.unwrap_or(len).min(len));
    idx
}

/// Concatenates the datasets and shuffles the pairs.
pub fn mix(datasets: Vec<LabeledDataset>, seed: u64) -> Result<Vec<(Tensor, Tensor)>, DataError> {
    if datasets.is_empty() {
        return Err(DataError::NothingToMix);
    }
    let mut all: Vec<(Tensor, Tensor)> = datasets
        .into_iter()
        .flat_map(|d| {
            let (x, y, _) = d.into_parts();
            x.into_iter().zip(y)
        })
        .collect();
    all.shuffle(&mut rng::rng_from(seed, "mix"));
    Ok(all)
}

/// Seeded disjoint split into `⌊fn⌋` training and `n - ⌊fn⌋` test samples.
pub fn split(
    dataset: &LabeledDataset,
    fraction: f64,
    seed: u64,
) -> Result<(LabeledDataset, LabeledDataset), DataError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(DataError::BadFraction(fraction));
    }
    let n = dataset.len();
    let cut = libm::floor(fraction * n as f64) as usize;
    if cut == 0 || cut == n {
        return Err(DataError::EmptySplit { n, fraction });
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut rng::rng_from(seed, "split"));
    let (a, b) = idx.split_at(cut);
    Ok((dataset.subset(a), dataset.subset(b)))
}
