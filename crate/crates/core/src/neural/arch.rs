//! Layer specifications, shape inference, and parameter layout.

use serde::{Deserialize, Serialize};
use std::ops::Range;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "layer", rename_all = "snake_case")]
pub enum LayerSpec {
    Dense {
        inputs: usize,
        outputs: usize,
    },
    Conv1d {
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
    },
    Conv2d {
        in_channels: usize,
        out_channels: usize,
        kernel_h: usize,
        kernel_w: usize,
    },
    MaxPool1d {
        size: usize,
    },
    MaxPool2d {
        size_h: usize,
        size_w: usize,
    },
    Relu,
    Sigmoid,
}

impl LayerSpec {
    pub fn kind(&self) -> &'static str {
        match self {
            LayerSpec::Dense { .. } => "dense",
            LayerSpec::Conv1d { .. } => "conv1d",
            LayerSpec::Conv2d { .. } => "conv2d",
            LayerSpec::MaxPool1d { .. } => "max_pool1d",
            LayerSpec::MaxPool2d { .. } => "max_pool2d",
            LayerSpec::Relu => "relu",
            LayerSpec::Sigmoid => "sigmoid",
        }
    }

    pub fn param_count(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, outputs } => inputs * outputs + outputs,
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
            } => out_channels * in_channels * kernel + out_channels,
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
            } => out_channels * in_channels * kernel_h * kernel_w + out_channels,
            _ => 0,
        }
    }

    /// Inputs feeding one output unit; used to scale weight initialization.
    pub fn fan_in(&self) -> usize {
        match *self {
            LayerSpec::Dense { inputs, .. } => inputs,
            LayerSpec::Conv1d {
                in_channels, kernel, ..
            } => in_channels * kernel,
            LayerSpec::Conv2d {
                in_channels,
                kernel_h,
                kernel_w,
                ..
            } => in_channels * kernel_h * kernel_w,
            _ => 0,
        }
    }

    /// Output sample shape for a given input sample shape.
    pub fn output_shape(&self, layer_idx: usize, input: &[usize]) -> Result<Vec<usize>> {
        let err = |reason: String| Error::ShapeMismatch {
            layer: layer_idx,
            kind: self.kind().to_string(),
            reason,
        };
        match *self {
            LayerSpec::Dense { inputs, outputs } => {
                let flat: usize = input.iter().product();
                if flat != inputs {
                    return Err(err(format!("expected {inputs} inputs, got {flat}")));
                }
                Ok(vec![outputs])
            }
            LayerSpec::Conv1d {
                in_channels,
                out_channels,
                kernel,
            } => {
                let [c, l] = two_dims(input).ok_or_else(|| err("expects [C, L] input".into()))?;
                if c != in_channels {
                    return Err(err(format!("expected {in_channels} channels, got {c}")));
                }
                if l < kernel {
                    return Err(err(format!("length {l} shorter than kernel {kernel}")));
                }
                Ok(vec![out_channels, l - kernel + 1])
            }
            LayerSpec::Conv2d {
                in_channels,
                out_channels,
                kernel_h,
                kernel_w,
            } => {
                let [c, h, w] =
                    three_dims(input).ok_or_else(|| err("expects [C, H, W] input".into()))?;
                if c != in_channels {
                    return Err(err(format!("expected {in_channels} channels, got {c}")));
                }
                if h < kernel_h || w < kernel_w {
                    return Err(err(format!("input {h}x{w} smaller than kernel")));
                }
                Ok(vec![out_channels, h - kernel_h + 1, w - kernel_w + 1])
            }
            LayerSpec::MaxPool1d { size } => {
                let [c, l] = two_dims(input).ok_or_else(|| err("expects [C, L] input".into()))?;
                if size == 0 || l / size == 0 {
                    return Err(err(format!("cannot pool length {l} by {size}")));
                }
                Ok(vec![c, l / size])
            }
            LayerSpec::MaxPool2d { size_h, size_w } => {
                let [c, h, w] =
                    three_dims(input).ok_or_else(|| err("expects [C, H, W] input".into()))?;
                if size_h == 0 || size_w == 0 || h / size_h == 0 || w / size_w == 0 {
                    return Err(err(format!("cannot pool {h}x{w} by {size_h}x{size_w}")));
                }
                Ok(vec![c, h / size_h, w / size_w])
            }
            LayerSpec::Relu | LayerSpec::Sigmoid => Ok(input.to_vec()),
        }
    }
}

fn two_dims(shape: &[usize]) -> Option<[usize; 2]> {
    match shape {
        [c, l] => Some([*c, *l]),
        _ => None,
    }
}

fn three_dims(shape: &[usize]) -> Option<[usize; 3]> {
    match shape {
        [c, h, w] => Some([*c, *h, *w]),
        _ => None,
    }
}

/// Per-layer sample shapes from input to output, validating the whole stack.
pub fn infer_shapes(arch: &[LayerSpec], input_shape: &[usize]) -> Result<Vec<Vec<usize>>> {
    let mut shapes = vec![input_shape.to_vec()];
    for (i, spec) in arch.iter().enumerate() {
        let next = spec.output_shape(i, shapes.last().unwrap())?;
        shapes.push(next);
    }
    Ok(shapes)
}

pub fn total_params(arch: &[LayerSpec]) -> usize {
    arch.iter().map(|l| l.param_count()).sum()
}

/// Weight-vector range of each layer, in architecture order.
pub fn param_ranges(arch: &[LayerSpec]) -> Vec<Range<usize>> {
    let mut out = Vec::with_capacity(arch.len());
    let mut offset = 0;
    for spec in arch {
        let n = spec.param_count();
        out.push(offset..offset + n);
        offset += n;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_param_count_is_weights_plus_bias() {
        let arch = [
            LayerSpec::Dense {
                inputs: 60,
                outputs: 64,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 64,
                outputs: 64,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 64,
                outputs: 1,
            },
            LayerSpec::Sigmoid,
        ];
        let count = total_params(&arch);
        assert_eq!(count, (60 * 64 + 64) + (64 * 64 + 64) + (64 + 1));
        assert!(count < 50_000);
    }

    #[test]
    fn shape_inference_conv_stack() {
        let arch = [
            LayerSpec::Conv2d {
                in_channels: 1,
                out_channels: 8,
                kernel_h: 6,
                kernel_w: 8,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d {
                size_h: 3,
                size_w: 3,
            },
            LayerSpec::Conv2d {
                in_channels: 8,
                out_channels: 16,
                kernel_h: 6,
                kernel_w: 6,
            },
            LayerSpec::Relu,
            LayerSpec::MaxPool2d {
                size_h: 3,
                size_w: 3,
            },
        ];
        let shapes = infer_shapes(&arch, &[1, 500, 64]).unwrap();
        assert_eq!(shapes[1], vec![8, 495, 57]);
        assert_eq!(shapes[3], vec![8, 165, 19]);
        assert_eq!(shapes[4], vec![16, 160, 14]);
        assert_eq!(shapes[6], vec![16, 53, 4]);
    }

    #[test]
    fn shape_errors_name_layer() {
        let arch = [LayerSpec::Dense {
            inputs: 10,
            outputs: 2,
        }];
        match infer_shapes(&arch, &[9]) {
            Err(Error::ShapeMismatch { layer, kind, .. }) => {
                assert_eq!(layer, 0);
                assert_eq!(kind, "dense");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn param_ranges_are_contiguous() {
        let arch = [
            LayerSpec::Conv1d {
                in_channels: 2,
                out_channels: 3,
                kernel: 4,
            },
            LayerSpec::Relu,
            LayerSpec::Dense {
                inputs: 3 * 7,
                outputs: 1,
            },
        ];
        let ranges = param_ranges(&arch);
        assert_eq!(ranges[0], 0..(3 * 2 * 4 + 3));
        assert_eq!(ranges[1], 27..27);
        assert_eq!(ranges[2].end, total_params(&arch));
    }
}
