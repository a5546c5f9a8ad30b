//! Central finite-difference validation of the analytic gradient.

use super::model::ModelParams;
use super::tensor::Tensor;
use crate::error::Result;
use crate::exec::ExecMode;
use crate::neural::arch::{infer_shapes, LayerSpec};

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    pub max_rel_err: f64,
    pub max_abs_err: f64,
    pub worst_index: usize,
    pub n_params: usize,
}

/// Compare the analytic gradient against central finite differences of the
/// loss, coordinate by coordinate. The relative error uses
/// `|g_a - g_fd| / max(|g_a|, |g_fd|, 1e-4)` so coordinates with a tiny true
/// gradient are held to a strict absolute standard instead of an unstable
/// ratio.
pub fn finite_difference_check(
    model: &ModelParams,
    batch: &Tensor,
    targets: &[f64],
    step: f64,
) -> Result<GradCheckReport> {
    let mode = ExecMode::Sequential;
    let (_, analytic) = model.loss_and_grad(batch, targets, mode)?;
    let mut probe = model.clone();
    let mut max_rel: f64 = 0.0;
    let mut max_abs: f64 = 0.0;
    let mut worst = 0usize;
    for i in 0..probe.weights.len() {
        let orig = probe.weights[i];
        probe.weights[i] = orig + step;
        let up = probe.loss(batch, targets, mode)?;
        probe.weights[i] = orig - step;
        let down = probe.loss(batch, targets, mode)?;
        probe.weights[i] = orig;
        let fd = (up - down) / (2.0 * step);
        let abs = (analytic[i] - fd).abs();
        let rel = abs / analytic[i].abs().max(fd.abs()).max(1e-4);
        if rel > max_rel {
            max_rel = rel;
            worst = i;
        }
        max_abs = max_abs.max(abs);
    }
    Ok(GradCheckReport {
        max_rel_err: max_rel,
        max_abs_err: max_abs,
        worst_index: worst,
        n_params: probe.weights.len(),
    })
}

/// Smallest distance of any activation to a subgradient kink: ReLU inputs to
/// zero, and max-pool windows to a tie between their two largest entries.
/// Finite differencing is only meaningful when this margin comfortably
/// exceeds the probe step, so callers should redraw degenerate cases.
pub fn kink_margin(model: &ModelParams, batch: &Tensor) -> Result<f64> {
    let shapes = infer_shapes(&model.arch, &model.input_shape)?;
    let mut margin = f64::INFINITY;
    // Walk the stack layer by layer, watching inputs of kinked layers.
    let mut current = batch.clone();
    let ranges = crate::neural::arch::param_ranges(&model.arch);
    for (i, spec) in model.arch.iter().enumerate() {
        match spec {
            LayerSpec::Relu => {
                for &v in &current.data {
                    margin = margin.min(v.abs());
                }
            }
            LayerSpec::MaxPool1d { .. } | LayerSpec::MaxPool2d { .. } => {
                margin = margin.min(pool_tie_margin(spec, &current));
            }
            _ => {}
        }
        let w = &model.weights[ranges[i].clone()];
        current = super::layers::forward(spec, w, &current, &shapes[i + 1]);
    }
    Ok(margin)
}

fn pool_tie_margin(spec: &LayerSpec, input: &Tensor) -> f64 {
    let mut margin = f64::INFINITY;
    let n = input.batch_size();
    let sample = input.sample_shape().to_vec();
    let per = input.sample_len();
    let mut window_margin = |vals: &mut Vec<f64>| {
        if vals.len() < 2 {
            return;
        }
        vals.sort_by(|a, b| b.total_cmp(a));
        // A tie between exact zeros is an upstream-ReLU flat, not a kink:
        // the pooled output is insensitive there and the ReLU margin check
        // already guards the underlying pre-activations.
        if vals[0] == 0.0 && vals[1] == 0.0 {
            return;
        }
        margin = margin.min(vals[0] - vals[1]);
    };
    for s in 0..n {
        let x = &input.data[s * per..(s + 1) * per];
        match *spec {
            LayerSpec::MaxPool1d { size } => {
                let (c_n, l_in) = (sample[0], sample[1]);
                for c in 0..c_n {
                    for j in 0..l_in / size {
                        let mut vals: Vec<f64> =
                            x[c * l_in + j * size..c * l_in + (j + 1) * size].to_vec();
                        window_margin(&mut vals);
                    }
                }
            }
            LayerSpec::MaxPool2d { size_h, size_w } => {
                let (c_n, h_in, w_in) = (sample[0], sample[1], sample[2]);
                for c in 0..c_n {
                    for i in 0..h_in / size_h {
                        for j in 0..w_in / size_w {
                            let mut vals = Vec::with_capacity(size_h * size_w);
                            for u in 0..size_h {
                                for v in 0..size_w {
                                    vals.push(x[(c * h_in + i * size_h + u) * w_in + j * size_w + v]);
                                }
                            }
                            window_margin(&mut vals);
                        }
                    }
                }
            }
            _ => unreachable!(),
        }
    }
    margin
}
