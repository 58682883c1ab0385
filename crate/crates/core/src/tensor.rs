//! Dense row-major tensors of `f64`.
//!
//! Shapes do double duty: besides describing layout, a pair of shapes
//! (input, output) is the key that routes a sample to its association area.

use alloc::vec::Vec;
use core::fmt;

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TensorError {
    #[error("shape must have at least one dimension")]
    EmptyShape,
    #[error("shape dimension {index} is zero")]
    ZeroDim { index: usize },
    #[error("length mismatch: shape {shape} holds {expected} values, got {found}")]
    LengthMismatch { shape: Shape, expected: usize, found: usize },
    #[error("non-finite value {value} at index {index}")]
    NonFinite { index: usize, value: f64 },
    #[error("shape mismatch: expected {expected}, got {found}")]
    ShapeMismatch { expected: Shape, found: Shape },
}

/// Ordered list of positive dimensions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "Vec<usize>", into = "Vec<usize>"))]
pub struct Shape(Vec<usize>);

impl Shape {
    pub fn new(dims: impl Into<Vec<usize>>) -> Result<Self, TensorError> {
        let dims = dims.into();
        if dims.is_empty() {
            return Err(TensorError::EmptyShape);
        }
        if let Some(index) = dims.iter().position(|&d| d == 0) {
            return Err(TensorError::ZeroDim { index });
        }
        Ok(Self(dims))
    }

    /// Rank-1 shape of length `n`. Panics if `n == 0`.
    pub fn vector(n: usize) -> Self {
        Self::new([n]).expect("vector length must be positive")
    }

    pub fn dims(&self) -> &[usize] {
        &self.0
    }

    pub fn rank(&self) -> usize {
        self.0.len()
    }

    pub fn len(&self) -> usize {
        self.0.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

impl TryFrom<Vec<usize>> for Shape {
    type Error = TensorError;

    fn try_from(dims: Vec<usize>) -> Result<Self, Self::Error> {
        Self::new(dims)
    }
}

impl From<Shape> for Vec<usize> {
    fn from(s: Shape) -> Self {
        s.0
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("[")?;
        for (i, d) in self.0.iter().enumerate() {
            if i > 0 {
                f.write_str("x")?;
            }
            write!(f, "{d}")?;
        }
        f.write_str("]")
    }
}

/// True iff the dimension lists are element-wise equal.
pub fn shapes_equal(a: &Shape, b: &Shape) -> bool {
    a.dims() == b.dims()
}

/// Immutable dense tensor. Values are finite and stored row-major.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Tensor {
    shape: Shape,
    values: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Shape, values: Vec<f64>) -> Result<Self, TensorError> {
        if values.len() != shape.len() {
            return Err(TensorError::LengthMismatch { expected: shape.len(), found: values.len(), shape });
        }
        if let Some((index, &value)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(TensorError::NonFinite { index, value });
        }
        Ok(Self { shape, values })
    }

    /// Copies `values` into a new tensor.
    pub fn from_slice(shape: Shape, values: &[f64]) -> Result<Self, TensorError> {
        Self::new(shape, values.to_vec())
    }

    pub fn vector(values: Vec<f64>) -> Result<Self, TensorError> {
        if values.is_empty() {
            return Err(TensorError::EmptyShape);
        }
        Self::new(Shape::vector(values.len()), values)
    }

    pub fn scalar(value: f64) -> Result<Self, TensorError> {
        Self::vector(alloc::vec![value])
    }

    pub fn zeros(shape: Shape) -> Self {
        let n = shape.len();
        Self { shape, values: alloc::vec![0.0; n] }
    }

    /// One-hot vector of length `classes` with a 1 at `index`.
    pub fn one_hot(index: usize, classes: usize) -> Self {
        assert!(index < classes, "one-hot index {index} out of {classes}");
        let mut values = alloc::vec![0.0; classes];
        values[index] = 1.0;
        Self { shape: Shape::vector(classes), values }
    }

    pub fn shape(&self) -> &Shape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// Same values, rank-1 shape.
    pub fn flatten(&self) -> Tensor {
        Tensor { shape: Shape::vector(self.values.len()), values: self.values.clone() }
    }

    pub fn reshape(&self, shape: Shape) -> Result<Tensor, TensorError> {
        Tensor::new(shape, self.values.clone())
    }

    /// Index of the largest component; ties resolve to the lowest index.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v > self.values[best] {
                best = i;
            }
        }
        best
    }

    pub(crate) fn from_raw(shape: Shape, values: Vec<f64>) -> Self {
        debug_assert_eq!(shape.len(), values.len());
        debug_assert!(values.iter().all(|v| v.is_finite()));
        Self { shape, values }
    }
}
