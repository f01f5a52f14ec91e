use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Relu,
    Linear,
}

/// One layer of the pose network. Convolutions are 3×3, stride 1, no padding,
/// followed by ReLU; pooling is 2×2 max with stride 2 (odd edges dropped).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum LayerSpec {
    Conv { out_channels: usize },
    MaxPool,
    Flatten,
    Dense { units: usize, activation: Activation },
    Dropout { rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputShape {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkSpec {
    pub input: InputShape,
    pub layers: Vec<LayerSpec>,
    /// Flow components are divided by this before entering the network
    /// (the flow patch size, px).
    pub input_scale: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Shape {
    Chw(usize, usize, usize),
    Flat(usize),
}

impl Shape {
    pub fn len(&self) -> usize {
        match *self {
            Shape::Chw(c, h, w) => c * h * w,
            Shape::Flat(n) => n,
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// A layer resolved against its input shape, with its slice of the flat
/// parameter vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerPlan {
    pub spec: LayerSpec,
    pub input: Shape,
    pub output: Shape,
    pub param_offset: usize,
    pub param_count: usize,
}

pub const CONV_KERNEL: usize = 3;

impl NetworkSpec {
    /// conv3×3-64 → maxpool → conv3×3-64 → maxpool → conv3×3-32 → maxpool →
    /// flatten → dense-128 → dropout-0.3 → dense-2.
    pub fn standard(height: usize, width: usize) -> Self {
        use LayerSpec::*;
        Self {
            input: InputShape {
                height,
                width,
                channels: 2,
            },
            layers: vec![
                Conv { out_channels: 64 },
                MaxPool,
                Conv { out_channels: 64 },
                MaxPool,
                Conv { out_channels: 32 },
                MaxPool,
                Flatten,
                Dense {
                    units: 128,
                    activation: Activation::Relu,
                },
                Dropout { rate: 0.3 },
                Dense {
                    units: 2,
                    activation: Activation::Linear,
                },
            ],
            input_scale: 8.0,
        }
    }

    /// Full-resolution network input, 214×182×2.
    pub fn paper_default() -> Self {
        Self::standard(182, 214)
    }

    /// Reduced 32×28×2 input for quick runs.
    pub fn ci() -> Self {
        Self::standard(28, 32)
    }

    /// Resolves layer shapes and parameter offsets, validating the stack.
    pub fn plan(&self) -> Result<Vec<LayerPlan>> {
        let mut shape = Shape::Chw(self.input.channels, self.input.height, self.input.width);
        if shape.is_empty() {
            return Err(Error::InvalidArgument("network input has a zero dimension".into()));
        }
        if !(self.input_scale > 0.0) {
            return Err(Error::InvalidArgument("input_scale must be > 0".into()));
        }
        let mut offset = 0;
        let mut plans = Vec::with_capacity(self.layers.len());
        for (i, layer) in self.layers.iter().enumerate() {
            let bad = |msg: String| Err(Error::InvalidArgument(format!("layer {i}: {msg}")));
            let (out, count) = match (layer, shape) {
                (LayerSpec::Conv { out_channels }, Shape::Chw(c, h, w)) => {
                    if h < CONV_KERNEL || w < CONV_KERNEL || *out_channels == 0 {
                        return bad(format!("conv on {c}x{h}x{w} leaves no output"));
                    }
                    let oh = h - CONV_KERNEL + 1;
                    let ow = w - CONV_KERNEL + 1;
                    (
                        Shape::Chw(*out_channels, oh, ow),
                        out_channels * c * CONV_KERNEL * CONV_KERNEL + out_channels,
                    )
                }
                (LayerSpec::MaxPool, Shape::Chw(c, h, w)) => {
                    if h < 2 || w < 2 {
                        return bad(format!("max pool on {c}x{h}x{w} leaves no output"));
                    }
                    (Shape::Chw(c, h / 2, w / 2), 0)
                }
                (LayerSpec::Flatten, s) => (Shape::Flat(s.len()), 0),
                (LayerSpec::Dense { units, .. }, Shape::Flat(n)) => {
                    if *units == 0 {
                        return bad("dense layer with zero units".into());
                    }
                    (Shape::Flat(*units), units * n + units)
                }
                (LayerSpec::Dropout { rate }, s) => {
                    if !(0.0..1.0).contains(rate) {
                        return bad(format!("dropout rate {rate} outside [0, 1)"));
                    }
                    (s, 0)
                }
                (l, s) => return bad(format!("{l:?} cannot follow shape {s:?}")),
            };
            plans.push(LayerPlan {
                spec: layer.clone(),
                input: shape,
                output: out,
                param_offset: offset,
                param_count: count,
            });
            offset += count;
            shape = out;
        }
        if shape != Shape::Flat(2) {
            return Err(Error::InvalidArgument(format!(
                "network must end in 2 outputs, ends in {shape:?}"
            )));
        }
        Ok(plans)
    }

    /// Analytic parameter count.
    pub fn param_count(&self) -> Result<usize> {
        Ok(self.plan()?.iter().map(|p| p.param_count).sum())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_shapes() {
        let plan = NetworkSpec::ci().plan().unwrap();
        assert_eq!(plan[0].output, Shape::Chw(64, 26, 30));
        assert_eq!(plan[1].output, Shape::Chw(64, 13, 15));
        assert_eq!(plan[5].output, Shape::Chw(32, 1, 2));
        assert_eq!(plan[6].output, Shape::Flat(64));
        let count = NetworkSpec::ci().param_count().unwrap();
        let expected = (64 * 2 * 9 + 64) + (64 * 64 * 9 + 64) + (32 * 64 * 9 + 32) + (128 * 64 + 128) + (2 * 128 + 2);
        assert_eq!(count, expected);
    }

    #[test]
    fn paper_input_fits() {
        let plan = NetworkSpec::paper_default().plan().unwrap();
        assert_eq!(plan[6].output, Shape::Flat(32 * 21 * 25));
    }

    #[test]
    fn rejects_bad_stacks() {
        let mut s = NetworkSpec::standard(8, 8);
        assert!(s.plan().is_err());
        s = NetworkSpec::ci();
        s.layers.pop();
        assert!(s.plan().is_err());
        s = NetworkSpec::ci();
        s.layers.insert(
            0,
            LayerSpec::Dense {
                units: 3,
                activation: Activation::Relu,
            },
        );
        assert!(s.plan().is_err());
    }
}
