//! Time-indexed boundary-likelihood curves emitted by the predictors.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LikelihoodCurve {
    pub track_id: String,
    /// Identifier of the model that produced the curve.
    pub source: String,
    pub times_s: Vec<f64>,
    pub values: Vec<f64>,
}

impl LikelihoodCurve {
    pub fn new(
        track_id: &str,
        source: &str,
        times_s: Vec<f64>,
        values: Vec<f64>,
    ) -> Result<LikelihoodCurve> {
        if times_s.len() != values.len() {
            return Err(Error::DimensionMismatch {
                expected: times_s.len(),
                got: values.len(),
            });
        }
        if times_s.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidConfig {
                reason: "curve times must be strictly increasing".into(),
            });
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0 || *v > 1.0) {
            return Err(Error::InvalidConfig {
                reason: "curve values must be finite and in [0, 1]".into(),
            });
        }
        Ok(LikelihoodCurve {
            track_id: track_id.to_string(),
            source: source.to_string(),
            times_s,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
