use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::Tensor;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayerKind {
    /// 3×3 convolution, stride 1, padding 1, followed by ReLU.
    Conv3x3,
    /// 3×3 convolution, stride 2, padding 1, followed by ReLU.
    Downsample,
    /// Affine classifier; spatial input is global-average-pooled first.
    Dense,
}

impl LayerKind {
    pub fn stride(self) -> usize {
        match self {
            LayerKind::Downsample => 2,
            _ => 1,
        }
    }

    pub fn is_conv(self) -> bool {
        !matches!(self, LayerKind::Dense)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct LayerParams {
    pub kind: LayerKind,
    /// `(out, in, 3, 3)` for convolutions, `(out, in)` for dense.
    pub weights: Tensor,
    pub bias: Tensor,
}

impl LayerParams {
    /// Zero-initialized layer.
    pub fn zeros(kind: LayerKind, in_dim: usize, out_dim: usize) -> Self {
        let wshape: Vec<usize> = if kind.is_conv() {
            vec![out_dim, in_dim, 3, 3]
        } else {
            vec![out_dim, in_dim]
        };
        LayerParams {
            kind,
            weights: Tensor::zeros(&wshape),
            bias: Tensor::zeros(&[out_dim]),
        }
    }

    pub fn out_dim(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn in_dim(&self) -> usize {
        self.weights.shape()[1]
    }

    pub fn param_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn validate(&self) -> Result<()> {
        let ws = self.weights.shape();
        let ok = if self.kind.is_conv() {
            ws.len() == 4 && ws[2] == 3 && ws[3] == 3
        } else {
            ws.len() == 2
        };
        if !ok {
            return Err(Error::dim(format!(
                "{:?} layer has weight shape {ws:?}",
                self.kind
            )));
        }
        if self.bias.shape() != [ws[0]] {
            return Err(Error::dim(format!(
                "bias shape {:?} does not match {} outputs",
                self.bias.shape(),
                ws[0]
            )));
        }
        Ok(())
    }

    /// Per-sample output shape for a per-sample input shape.
    pub fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match (self.kind.is_conv(), input) {
            (true, &[c, h, w]) if c == self.in_dim() => {
                let s = self.kind.stride();
                Ok(vec![self.out_dim(), (h - 1) / s + 1, (w - 1) / s + 1])
            }
            (false, &[c, _, _]) | (false, &[c]) if c == self.in_dim() => Ok(vec![self.out_dim()]),
            _ => Err(Error::dim(format!(
                "{:?} layer with {} inputs cannot take samples of shape {input:?}",
                self.kind,
                self.in_dim()
            ))),
        }
    }

    pub fn bitwise_eq(&self, other: &LayerParams) -> bool {
        self.kind == other.kind
            && self.weights.bitwise_eq(&other.weights)
            && self.bias.bitwise_eq(&other.bias)
    }
}

/// Gradient of a scalar loss with respect to one layer's parameters.
#[derive(Clone, Debug, PartialEq)]
pub struct LayerGrads {
    pub weights: Tensor,
    pub bias: Tensor,
}

impl LayerGrads {
    pub fn zeros_like(p: &LayerParams) -> Self {
        LayerGrads {
            weights: Tensor::zeros(p.weights.shape()),
            bias: Tensor::zeros(p.bias.shape()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_shapes() {
        let conv = LayerParams::zeros(LayerKind::Conv3x3, 3, 16);
        assert_eq!(conv.output_shape(&[3, 32, 32]).unwrap(), vec![16, 32, 32]);
        let down = LayerParams::zeros(LayerKind::Downsample, 16, 32);
        assert_eq!(down.output_shape(&[16, 32, 32]).unwrap(), vec![32, 16, 16]);
        assert_eq!(down.output_shape(&[16, 5, 5]).unwrap(), vec![32, 3, 3]);
        let dense = LayerParams::zeros(LayerKind::Dense, 64, 10);
        assert_eq!(dense.output_shape(&[64, 8, 8]).unwrap(), vec![10]);
        assert_eq!(dense.output_shape(&[64]).unwrap(), vec![10]);
        assert!(conv.output_shape(&[4, 32, 32]).is_err());
        assert!(dense.output_shape(&[10]).is_err());
    }

    #[test]
    fn validate_rejects_bad_shapes() {
        let mut l = LayerParams::zeros(LayerKind::Conv3x3, 2, 4);
        assert!(l.validate().is_ok());
        l.bias = Tensor::zeros(&[3]);
        assert!(l.validate().is_err());
        let bad = LayerParams {
            kind: LayerKind::Dense,
            weights: Tensor::zeros(&[2, 2, 3, 3]),
            bias: Tensor::zeros(&[2]),
        };
        assert!(bad.validate().is_err());
    }
}
