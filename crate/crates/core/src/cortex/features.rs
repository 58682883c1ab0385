use alloc::borrow::Cow;
use alloc::vec::Vec;

use super::CortexError;
use crate::tensor::Tensor;

/// Input features seen by the task classifier.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum FeatureMap {
    /// Flattened input values.
    #[default]
    Raw,
    /// Mean over non-overlapping `factor`x`factor` windows of a
    /// `[height, width, channels]` input; trailing rows and columns that do
    /// not fill a window are dropped.
    AvgPool { factor: usize },
}

impl FeatureMap {
    pub fn apply<'a>(&self, x: &'a Tensor) -> Result<Cow<'a, [f64]>, CortexError> {
        match *self {
            FeatureMap::Raw => Ok(Cow::Borrowed(x.values())),
            FeatureMap::AvgPool { factor } => avg_pool(x, factor).map(Cow::Owned),
        }
    }
}

fn avg_pool(x: &Tensor, f: usize) -> Result<Vec<f64>, CortexError> {
    let d = x.shape().dims();
    if d.len() != 3 {
        return Err(CortexError::Features(alloc::format!("avg-pool needs a rank-3 input, got {}", x.shape())));
    }
    let (h, w, c) = (d[0], d[1], d[2]);
    if f == 0 || f > h || f > w {
        return Err(CortexError::Features(alloc::format!("pool factor {f} does not fit {}", x.shape())));
    }
    let (oh, ow) = (h / f, w / f);
    let v = x.values();
    let scale = 1.0 / (f * f) as f64;
    let mut out = alloc::vec![0.0; oh * ow * c];
    for oy in 0..oh {
        for ox in 0..ow {
            for dy in 0..f {
                for dx in 0..f {
                    let src = ((oy * f + dy) * w + ox * f + dx) * c;
                    let dst = (oy * ow + ox) * c;
                    for ch in 0..c {
                        out[dst + ch] += v[src + ch] * scale;
                    }
                }
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::Shape;
    use alloc::vec;

    #[test]
    fn raw_borrows() {
        let x = Tensor::vector(vec![1.0, 2.0]).unwrap();
        assert!(matches!(FeatureMap::Raw.apply(&x).unwrap(), Cow::Borrowed(&[1.0, 2.0])));
    }

    #[test]
    fn pooling() {
        // 2x3x2 input, channel 0 = 0..6, channel 1 = 10 everywhere
        let vals: Vec<f64> = (0..6).flat_map(|i| [i as f64, 10.0]).collect();
        let x = Tensor::new(Shape::new(vec![2, 3, 2]).unwrap(), vals).unwrap();
        let y = FeatureMap::AvgPool { factor: 2 }.apply(&x).unwrap();
        assert_eq!(&*y, &[(0.0 + 1.0 + 3.0 + 4.0) / 4.0, 10.0]);
        assert!(FeatureMap::AvgPool { factor: 3 }.apply(&x).is_err());
        assert!(FeatureMap::AvgPool { factor: 2 }.apply(&Tensor::scalar(1.0).unwrap()).is_err());
    }
}
