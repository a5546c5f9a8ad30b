//! Forward and backward kernels for each layer type. All kernels loop over
//! the batch dimension sample by sample in ascending order so gradient
//! accumulation is deterministic.

use super::arch::LayerSpec;
use super::tensor::Tensor;

/// Apply one layer to a batch. `out_shape` is the precomputed output sample
/// shape for this layer.
pub fn forward(spec: &LayerSpec, weights: &[f64], input: &Tensor, out_shape: &[usize]) -> Tensor {
    let n = input.batch_size();
    let mut shape = vec![n];
    shape.extend_from_slice(out_shape);
    let mut out = Tensor::zeros(shape);
    let in_len = input.sample_len();
    let out_len: usize = out_shape.iter().product();
    for s in 0..n {
        let x = &input.data[s * in_len..(s + 1) * in_len];
        let y = &mut out.data[s * out_len..(s + 1) * out_len];
        forward_sample(spec, weights, x, y, input.sample_shape(), out_shape);
    }
    out
}

fn forward_sample(
    spec: &LayerSpec,
    w: &[f64],
    x: &[f64],
    y: &mut [f64],
    in_shape: &[usize],
    out_shape: &[usize],
) {
    match *spec {
        LayerSpec::Dense { inputs, outputs } => {
            let bias = &w[inputs * outputs..];
            for o in 0..outputs {
                let row = &w[o * inputs..(o + 1) * inputs];
                let mut acc = bias[o];
                for i in 0..inputs {
                    acc += row[i] * x[i];
                }
                y[o] = acc;
            }
        }
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel,
        } => {
            let l_in = in_shape[1];
            let l_out = out_shape[1];
            let bias = &w[out_channels * in_channels * kernel..];
            for o in 0..out_channels {
                for j in 0..l_out {
                    let mut acc = bias[o];
                    for c in 0..in_channels {
                        let wrow = &w[(o * in_channels + c) * kernel..];
                        let xrow = &x[c * l_in + j..];
                        for u in 0..kernel {
                            acc += wrow[u] * xrow[u];
                        }
                    }
                    y[o * l_out + j] = acc;
                }
            }
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
        } => {
            let (h_in, w_in) = (in_shape[1], in_shape[2]);
            let (h_out, w_out) = (out_shape[1], out_shape[2]);
            let bias = &w[out_channels * in_channels * kernel_h * kernel_w..];
            for o in 0..out_channels {
                for i in 0..h_out {
                    for j in 0..w_out {
                        let mut acc = bias[o];
                        for c in 0..in_channels {
                            for u in 0..kernel_h {
                                let wrow =
                                    &w[((o * in_channels + c) * kernel_h + u) * kernel_w..];
                                let xrow = &x[(c * h_in + i + u) * w_in + j..];
                                for v in 0..kernel_w {
                                    acc += wrow[v] * xrow[v];
                                }
                            }
                        }
                        y[(o * h_out + i) * w_out + j] = acc;
                    }
                }
            }
        }
        LayerSpec::MaxPool1d { size } => {
            let (c_n, l_in) = (in_shape[0], in_shape[1]);
            let l_out = out_shape[1];
            for c in 0..c_n {
                for j in 0..l_out {
                    let window = &x[c * l_in + j * size..c * l_in + (j + 1) * size];
                    y[c * l_out + j] = window.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v));
                }
            }
        }
        LayerSpec::MaxPool2d { size_h, size_w } => {
            let (c_n, h_in, w_in) = (in_shape[0], in_shape[1], in_shape[2]);
            let (h_out, w_out) = (out_shape[1], out_shape[2]);
            for c in 0..c_n {
                for i in 0..h_out {
                    for j in 0..w_out {
                        let mut m = f64::NEG_INFINITY;
                        for u in 0..size_h {
                            for v in 0..size_w {
                                let val = x[(c * h_in + i * size_h + u) * w_in + j * size_w + v];
                                if val > m {
                                    m = val;
                                }
                            }
                        }
                        y[(c * h_out + i) * w_out + j] = m;
                    }
                }
            }
        }
        LayerSpec::Relu => {
            for (yi, &xi) in y.iter_mut().zip(x) {
                *yi = xi.max(0.0);
            }
        }
        LayerSpec::Sigmoid => {
            for (yi, &xi) in y.iter_mut().zip(x) {
                *yi = 1.0 / (1.0 + (-xi).exp());
            }
        }
    }
}

/// Backpropagate one layer: given the upstream gradient `d_out` (w.r.t. the
/// layer output, summed over the batch convention), accumulate parameter
/// gradients into `grad` and return the gradient w.r.t. the layer input.
pub fn backward(
    spec: &LayerSpec,
    weights: &[f64],
    input: &Tensor,
    output: &Tensor,
    d_out: &Tensor,
    grad: &mut [f64],
) -> Tensor {
    let n = input.batch_size();
    let mut d_in = Tensor::zeros(input.shape.clone());
    let in_len = input.sample_len();
    let out_len = output.sample_len();
    for s in 0..n {
        let x = &input.data[s * in_len..(s + 1) * in_len];
        let y = &output.data[s * out_len..(s + 1) * out_len];
        let dy = &d_out.data[s * out_len..(s + 1) * out_len];
        let dx = &mut d_in.data[s * in_len..(s + 1) * in_len];
        backward_sample(
            spec,
            weights,
            x,
            y,
            dy,
            dx,
            grad,
            input.sample_shape(),
            output.sample_shape(),
        );
    }
    d_in
}

#[allow(clippy::too_many_arguments)]
fn backward_sample(
    spec: &LayerSpec,
    w: &[f64],
    x: &[f64],
    y: &[f64],
    dy: &[f64],
    dx: &mut [f64],
    grad: &mut [f64],
    in_shape: &[usize],
    out_shape: &[usize],
) {
    match *spec {
        LayerSpec::Dense { inputs, outputs } => {
            let (gw, gb) = grad.split_at_mut(inputs * outputs);
            for o in 0..outputs {
                let d = dy[o];
                gb[o] += d;
                let wrow = &w[o * inputs..(o + 1) * inputs];
                let grow = &mut gw[o * inputs..(o + 1) * inputs];
                for i in 0..inputs {
                    grow[i] += d * x[i];
                    dx[i] += d * wrow[i];
                }
            }
        }
        LayerSpec::Conv1d {
            in_channels,
            out_channels,
            kernel,
        } => {
            let l_in = in_shape[1];
            let l_out = out_shape[1];
            let n_w = out_channels * in_channels * kernel;
            let (gw, gb) = grad.split_at_mut(n_w);
            for o in 0..out_channels {
                for j in 0..l_out {
                    let d = dy[o * l_out + j];
                    gb[o] += d;
                    for c in 0..in_channels {
                        let base_w = (o * in_channels + c) * kernel;
                        let base_x = c * l_in + j;
                        for u in 0..kernel {
                            gw[base_w + u] += d * x[base_x + u];
                            dx[base_x + u] += d * w[base_w + u];
                        }
                    }
                }
            }
        }
        LayerSpec::Conv2d {
            in_channels,
            out_channels,
            kernel_h,
            kernel_w,
        } => {
            let (h_in, w_in) = (in_shape[1], in_shape[2]);
            let (h_out, w_out) = (out_shape[1], out_shape[2]);
            let n_w = out_channels * in_channels * kernel_h * kernel_w;
            let (gw, gb) = grad.split_at_mut(n_w);
            for o in 0..out_channels {
                for i in 0..h_out {
                    for j in 0..w_out {
                        let d = dy[(o * h_out + i) * w_out + j];
                        gb[o] += d;
                        for c in 0..in_channels {
                            for u in 0..kernel_h {
                                let base_w = ((o * in_channels + c) * kernel_h + u) * kernel_w;
                                let base_x = (c * h_in + i + u) * w_in + j;
                                for v in 0..kernel_w {
                                    gw[base_w + v] += d * x[base_x + v];
                                    dx[base_x + v] += d * w[base_w + v];
                                }
                            }
                        }
                    }
                }
            }
        }
        LayerSpec::MaxPool1d { size } => {
            let (c_n, l_in) = (in_shape[0], in_shape[1]);
            let l_out = out_shape[1];
            for c in 0..c_n {
                for j in 0..l_out {
                    // Ties route to the lowest index.
                    let base = c * l_in + j * size;
                    let mut best = 0;
                    for u in 1..size {
                        if x[base + u] > x[base + best] {
                            best = u;
                        }
                    }
                    dx[base + best] += dy[c * l_out + j];
                }
            }
        }
        LayerSpec::MaxPool2d { size_h, size_w } => {
            let (c_n, h_in, w_in) = (in_shape[0], in_shape[1], in_shape[2]);
            let (h_out, w_out) = (out_shape[1], out_shape[2]);
            for c in 0..c_n {
                for i in 0..h_out {
                    for j in 0..w_out {
                        let mut best_idx = 0;
                        let mut best = f64::NEG_INFINITY;
                        for u in 0..size_h {
                            for v in 0..size_w {
                                let idx = (c * h_in + i * size_h + u) * w_in + j * size_w + v;
                                if x[idx] > best {
                                    best = x[idx];
                                    best_idx = idx;
                                }
                            }
                        }
                        dx[best_idx] += dy[(c * h_out + i) * w_out + j];
                    }
                }
            }
        }
        LayerSpec::Relu => {
            for i in 0..dx.len() {
                dx[i] = if x[i] > 0.0 { dy[i] } else { 0.0 };
            }
        }
        LayerSpec::Sigmoid => {
            for i in 0..dx.len() {
                dx[i] = dy[i] * y[i] * (1.0 - y[i]);
            }
        }
    }
}
