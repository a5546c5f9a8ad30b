//! Minimal row-major tensor used by the network kernel.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Tensor> {
        let expect: usize = shape.iter().product();
        if expect != data.len() {
            return Err(Error::DimensionMismatch {
                expected: expect,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig {
                reason: "tensor contains non-finite values".into(),
            });
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor {
            shape,
            data: vec![0.0; n],
        }
    }

    /// Leading dimension, by convention the batch size.
    pub fn batch_size(&self) -> usize {
        self.shape.first().copied().unwrap_or(0)
    }

    /// Shape of one sample (all dimensions after the batch).
    pub fn sample_shape(&self) -> &[usize] {
        &self.shape[1..]
    }

    pub fn sample_len(&self) -> usize {
        self.sample_shape().iter().product()
    }

    pub fn sample(&self, i: usize) -> &[f64] {
        let len = self.sample_len();
        &self.data[i * len..(i + 1) * len]
    }

    /// New tensor holding the given batch rows, in order.
    pub fn gather_rows(&self, rows: &[usize]) -> Tensor {
        let len = self.sample_len();
        let mut data = Vec::with_capacity(rows.len() * len);
        for &r in rows {
            data.extend_from_slice(self.sample(r));
        }
        let mut shape = self.shape.clone();
        shape[0] = rows.len();
        Tensor { shape, data }
    }

    /// Concatenate along the batch dimension. All inputs must share the
    /// sample shape.
    pub fn concat_rows(parts: &[Tensor]) -> Tensor {
        let sample_shape = parts[0].sample_shape().to_vec();
        let total: usize = parts.iter().map(|p| p.batch_size()).sum();
        let mut shape = vec![total];
        shape.extend_from_slice(&sample_shape);
        let mut data = Vec::with_capacity(total * parts[0].sample_len());
        for p in parts {
            debug_assert_eq!(p.sample_shape(), &sample_shape[..]);
            data.extend_from_slice(&p.data);
        }
        Tensor { shape, data }
    }
}
