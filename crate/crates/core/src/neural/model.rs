//! Model parameters, batched forward evaluation, and the fused
//! sigmoid + binary-cross-entropy backward pass.

use base64::Engine;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::arch::{infer_shapes, param_ranges, total_params, LayerSpec};
use super::layers;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::exec::{self, ExecMode};

/// Samples per work unit when evaluating batches. Fixed so results do not
/// depend on thread count.
pub(crate) const FORWARD_CHUNK: usize = 64;
pub(crate) const GRAD_CHUNK: usize = 8;

const BCE_CLAMP: f64 = 1e-15;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ModelMeta {
    pub model_id: String,
    pub seed: u64,
    pub epochs_trained: usize,
    #[serde(default)]
    pub train_loss: Vec<f64>,
    #[serde(default)]
    pub val_loss: Vec<f64>,
}

/// Architecture descriptor plus a flat weight vector.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub arch: Vec<LayerSpec>,
    /// Sample shape (no batch dimension).
    pub input_shape: Vec<usize>,
    pub weights: Vec<f64>,
    pub meta: ModelMeta,
}

impl ModelParams {
    /// Seeded uniform init scaled by fan-in; biases start at zero.
    pub fn init(
        arch: Vec<LayerSpec>,
        input_shape: Vec<usize>,
        seed: u64,
        model_id: &str,
    ) -> Result<ModelParams> {
        infer_shapes(&arch, &input_shape)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut weights = vec![0.0; total_params(&arch)];
        for (spec, range) in arch.iter().zip(param_ranges(&arch)) {
            let fan_in = spec.fan_in();
            if fan_in == 0 {
                continue;
            }
            let limit = (6.0 / fan_in as f64).sqrt();
            let n_w = spec.param_count() - bias_count(spec);
            for w in &mut weights[range.start..range.start + n_w] {
                *w = rng.random_range(-limit..limit);
            }
        }
        Ok(ModelParams {
            arch,
            input_shape,
            weights,
            meta: ModelMeta {
                model_id: model_id.to_string(),
                seed,
                ..ModelMeta::default()
            },
        })
    }

    pub fn param_count(&self) -> usize {
        total_params(&self.arch)
    }

    /// Sample shape of the model output.
    pub fn output_shape(&self) -> Result<Vec<usize>> {
        Ok(infer_shapes(&self.arch, &self.input_shape)?
            .last()
            .unwrap()
            .clone())
    }

    fn check_input(&self, batch: &Tensor) -> Result<()> {
        if batch.sample_shape() != self.input_shape.as_slice() {
            return Err(Error::ShapeMismatch {
                layer: 0,
                kind: "input".into(),
                reason: format!(
                    "batch sample shape {:?} does not match model input {:?}",
                    batch.sample_shape(),
                    self.input_shape
                ),
            });
        }
        Ok(())
    }

    /// Run the whole batch through the stack, chunked over samples.
    pub fn forward(&self, batch: &Tensor) -> Result<Tensor> {
        self.forward_mode(batch, ExecMode::default())
    }

    pub fn forward_mode(&self, batch: &Tensor, mode: ExecMode) -> Result<Tensor> {
        self.check_input(batch)?;
        let shapes = infer_shapes(&self.arch, &self.input_shape)?;
        let n = batch.batch_size();
        if n == 0 {
            let mut shape = vec![0];
            shape.extend_from_slice(shapes.last().unwrap());
            return Ok(Tensor::zeros(shape));
        }
        let starts: Vec<usize> = (0..n).step_by(FORWARD_CHUNK).collect();
        let parts = exec::map_slice(mode, &starts, |&start| {
            let rows: Vec<usize> = (start..(start + FORWARD_CHUNK).min(n)).collect();
            self.run_stack(&batch.gather_rows(&rows), &shapes)
        });
        Ok(Tensor::concat_rows(&parts))
    }

    fn run_stack(&self, chunk: &Tensor, shapes: &[Vec<usize>]) -> Tensor {
        let ranges = param_ranges(&self.arch);
        let mut current = chunk.clone();
        for (i, spec) in self.arch.iter().enumerate() {
            let w = &self.weights[ranges[i].clone()];
            current = layers::forward(spec, w, &current, &shapes[i + 1]);
        }
        current
    }

    /// Forward pass keeping every intermediate activation.
    fn run_stack_cached(&self, chunk: &Tensor, shapes: &[Vec<usize>]) -> Vec<Tensor> {
        let ranges = param_ranges(&self.arch);
        let mut acts = Vec::with_capacity(self.arch.len() + 1);
        acts.push(chunk.clone());
        for (i, spec) in self.arch.iter().enumerate() {
            let w = &self.weights[ranges[i].clone()];
            let next = layers::forward(spec, w, acts.last().unwrap(), &shapes[i + 1]);
            acts.push(next);
        }
        acts
    }

    fn check_loss_setup(&self, batch: &Tensor, targets: &[f64]) -> Result<()> {
        self.check_input(batch)?;
        if batch.batch_size() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: batch.batch_size(),
                got: targets.len(),
            });
        }
        if targets.iter().any(|t| !(0.0..=1.0).contains(t)) {
            return Err(Error::InvalidConfig {
                reason: "targets must lie in [0, 1]".into(),
            });
        }
        if self.arch.last() != Some(&LayerSpec::Sigmoid) || self.output_shape()? != vec![1] {
            return Err(Error::InvalidArchitecture {
                reason: "loss requires a scalar sigmoid output".into(),
            });
        }
        Ok(())
    }

    /// Mean binary cross-entropy of the batch.
    pub fn loss(&self, batch: &Tensor, targets: &[f64], mode: ExecMode) -> Result<f64> {
        self.check_loss_setup(batch, targets)?;
        let out = self.forward_mode(batch, mode)?;
        let n = targets.len() as f64;
        let sum: f64 = out
            .data
            .iter()
            .zip(targets)
            .map(|(&p, &y)| bce(p, y))
            .sum();
        let loss = sum / n;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: 0 });
        }
        Ok(loss)
    }

    /// Mean BCE loss and its gradient w.r.t. every weight.
    ///
    /// Samples are processed in fixed-size chunks and the per-chunk gradient
    /// sums are combined in chunk order, so the result is bit-identical in
    /// sequential and parallel mode and independent of thread count.
    pub fn loss_and_grad(
        &self,
        batch: &Tensor,
        targets: &[f64],
        mode: ExecMode,
    ) -> Result<(f64, Vec<f64>)> {
        self.check_loss_setup(batch, targets)?;
        let shapes = infer_shapes(&self.arch, &self.input_shape)?;
        let n = batch.batch_size();
        if n == 0 {
            return Err(Error::InvalidConfig {
                reason: "empty batch".into(),
            });
        }
        let starts: Vec<usize> = (0..n).step_by(GRAD_CHUNK).collect();
        let parts = exec::map_slice(mode, &starts, |&start| {
            let rows: Vec<usize> = (start..(start + GRAD_CHUNK).min(n)).collect();
            let chunk = batch.gather_rows(&rows);
            let tgt = &targets[start..start + rows.len()];
            self.chunk_loss_grad(&chunk, tgt, &shapes)
        });
        let mut loss_sum = 0.0;
        let mut grad = vec![0.0; self.weights.len()];
        for (l, g) in parts {
            loss_sum += l;
            for (dst, src) in grad.iter_mut().zip(&g) {
                *dst += src;
            }
        }
        let scale = 1.0 / n as f64;
        let loss = loss_sum * scale;
        if !loss.is_finite() {
            return Err(Error::NonFiniteLoss { epoch: 0 });
        }
        for g in &mut grad {
            *g *= scale;
        }
        Ok((loss, grad))
    }

    /// Loss and gradient sums (not yet divided by the batch size) for one
    /// chunk. The final sigmoid and the cross-entropy are fused: the
    /// gradient at the pre-sigmoid activation is `p - y`.
    fn chunk_loss_grad(
        &self,
        chunk: &Tensor,
        targets: &[f64],
        shapes: &[Vec<usize>],
    ) -> (f64, Vec<f64>) {
        let ranges = param_ranges(&self.arch);
        let acts = self.run_stack_cached(chunk, shapes);
        let out = acts.last().unwrap();
        let loss: f64 = out
            .data
            .iter()
            .zip(targets)
            .map(|(&p, &y)| bce(p, y))
            .sum();
        let delta = Tensor {
            shape: out.shape.clone(),
            data: out
                .data
                .iter()
                .zip(targets)
                .map(|(&p, &y)| p - y)
                .collect(),
        };
        let mut grad = vec![0.0; self.weights.len()];
        // The last layer is the fused sigmoid: start below it.
        let mut d = delta;
        for i in (0..self.arch.len() - 1).rev() {
            let w = &self.weights[ranges[i].clone()];
            let g = &mut grad[ranges[i].clone()];
            d = layers::backward(&self.arch[i], w, &acts[i], &acts[i + 1], &d, g);
        }
        (loss, grad)
    }

    pub fn to_json(&self) -> String {
        let bytes: Vec<u8> = self
            .weights
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .collect();
        let ser = SerializedModel {
            format_version: 1,
            architecture: self.arch.clone(),
            input_shape: self.input_shape.clone(),
            meta: self.meta.clone(),
            weights_b64: base64::engine::general_purpose::STANDARD.encode(bytes),
        };
        serde_json::to_string_pretty(&ser).expect("model serialization cannot fail")
    }

    pub fn from_json(text: &str) -> Result<ModelParams> {
        let ser: SerializedModel = serde_json::from_str(text)?;
        if ser.format_version != 1 {
            return Err(Error::BadFormat {
                reason: format!("unsupported model format version {}", ser.format_version),
            });
        }
        let bytes = base64::engine::general_purpose::STANDARD
            .decode(ser.weights_b64.as_bytes())
            .map_err(|e| Error::BadFormat {
                reason: format!("weight blob: {e}"),
            })?;
        if bytes.len() % 8 != 0 {
            return Err(Error::BadFormat {
                reason: "weight blob length is not a multiple of 8".into(),
            });
        }
        let weights: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let expect = total_params(&ser.architecture);
        if weights.len() != expect {
            return Err(Error::BadFormat {
                reason: format!("expected {expect} weights, got {}", weights.len()),
            });
        }
        infer_shapes(&ser.architecture, &ser.input_shape)?;
        Ok(ModelParams {
            arch: ser.architecture,
            input_shape: ser.input_shape,
            weights,
            meta: ser.meta,
        })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    pub fn load(path: &std::path::Path) -> Result<ModelParams> {
        let text = std::fs::read_to_string(path)?;
        ModelParams::from_json(&text)
    }
}

fn bias_count(spec: &LayerSpec) -> usize {
    match *spec {
        LayerSpec::Dense { outputs, .. } => outputs,
        LayerSpec::Conv1d { out_channels, .. } | LayerSpec::Conv2d { out_channels, .. } => {
            out_channels
        }
        _ => 0,
    }
}

fn bce(p: f64, y: f64) -> f64 {
    let p = p.clamp(BCE_CLAMP, 1.0 - BCE_CLAMP);
    -(y * p.ln() + (1.0 - y) * (1.0 - p).ln())
}

#[derive(Serialize, Deserialize)]
struct SerializedModel {
    format_version: u32,
    architecture: Vec<LayerSpec>,
    input_shape: Vec<usize>,
    meta: ModelMeta,
    weights_b64: String,
}
