use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const CONV_BLOCKS: usize = 6;
pub const FC_LAYERS: usize = 3;

/// Layer sizes of the six-block convolutional identifier.
///
/// Block 1 convolves the `input_rows × input_width` input with a
/// `input_rows × first_kernel_width` kernel (valid in height, same in width),
/// collapsing the row axis; blocks 2–6 use `1 × kernel_width` kernels. Every
/// block is conv, batch norm, leaky ReLU, 1×2 max pool. Convolutions carry no
/// bias since batch norm's shift replaces it. Three dense layers follow, with
/// leaky ReLUs between them, then softmax.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CnnConfig {
    pub n_classes: usize,
    pub input_rows: usize,
    pub input_width: usize,
    pub channels: Vec<usize>,
    pub first_kernel_width: usize,
    pub kernel_width: usize,
    pub fc_hidden: [usize; 2],
    pub leaky_slope: f64,
    /// Multiplies every input value before block 1.
    pub input_scale: f64,
    pub bn_eps: f64,
    pub bn_momentum: f64,
}

impl CnnConfig {
    /// Full-size layout: channels 8→128, dense 8192→512→128→n.
    pub fn reference(n_classes: usize) -> Self {
        CnnConfig {
            n_classes,
            input_rows: 2,
            input_width: 4096,
            channels: vec![8, 16, 32, 64, 64, 128],
            first_kernel_width: 7,
            kernel_width: 5,
            fc_hidden: [512, 128],
            leaky_slope: 0.01,
            input_scale: 1.0,
            bn_eps: 1e-5,
            bn_momentum: 0.1,
        }
    }

    /// Same block structure with narrower layers; trains in minutes on one core.
    pub fn compact(n_classes: usize) -> Self {
        CnnConfig {
            channels: vec![4, 8, 16, 16, 32, 32],
            fc_hidden: [128, 64],
            ..Self::reference(n_classes)
        }
    }

    /// Tiny width-64 variant for finite-difference checks.
    pub fn miniature(n_classes: usize) -> Self {
        CnnConfig {
            input_width: 64,
            channels: vec![2, 3, 3, 4, 4, 4],
            first_kernel_width: 5,
            kernel_width: 3,
            fc_hidden: [6, 5],
            ..Self::reference(n_classes)
        }
    }

    pub fn with_input_scale(mut self, s: f64) -> Self {
        self.input_scale = s;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.channels.len() != CONV_BLOCKS {
            return Err(Error::validation(format!(
                "architecture needs exactly {CONV_BLOCKS} conv blocks, got {}",
                self.channels.len()
            )));
        }
        if self.n_classes == 0
            || self.input_rows == 0
            || self.channels.contains(&0)
            || self.fc_hidden.contains(&0)
        {
            return Err(Error::validation("layer sizes must be positive"));
        }
        if self.input_width % (1 << CONV_BLOCKS) != 0 {
            return Err(Error::validation(format!(
                "input width {} must be divisible by {}",
                self.input_width,
                1 << CONV_BLOCKS
            )));
        }
        if self.first_kernel_width % 2 == 0 || self.kernel_width % 2 == 0 {
            return Err(Error::validation(
                "kernel widths must be odd for same padding",
            ));
        }
        let finite = [
            self.leaky_slope,
            self.input_scale,
            self.bn_eps,
            self.bn_momentum,
        ];
        if finite.iter().any(|v| !v.is_finite()) || self.input_scale <= 0.0 || self.bn_eps <= 0.0 {
            return Err(Error::validation("slope, input scale and batch-norm constants must be finite; scale and eps positive"));
        }
        if !(0.0..=1.0).contains(&self.bn_momentum) {
            return Err(Error::validation("batch-norm momentum must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn input_len(&self) -> usize {
        self.input_rows * self.input_width
    }

    /// `(in_channels, kernel_width, width)` seen by block `b`'s convolution.
    pub fn block_geometry(&self, b: usize) -> (usize, usize, usize) {
        if b == 0 {
            (self.input_rows, self.first_kernel_width, self.input_width)
        } else {
            (
                self.channels[b - 1],
                self.kernel_width,
                self.input_width >> b,
            )
        }
    }

    pub fn flatten_len(&self) -> usize {
        self.channels[CONV_BLOCKS - 1] * (self.input_width >> CONV_BLOCKS)
    }

    /// `(in, out)` of each dense layer.
    pub fn dense_shapes(&self) -> [(usize, usize); FC_LAYERS] {
        [
            (self.flatten_len(), self.fc_hidden[0]),
            (self.fc_hidden[0], self.fc_hidden[1]),
            (self.fc_hidden[1], self.n_classes),
        ]
    }

    /// Trainable parameters:
    /// `Σ_b (c_{b-1}·c_b·k_b + 2·c_b) + Σ_j (in_j·out_j + out_j)`, with
    /// `c_0 = input_rows`. Batch-norm running statistics are not counted.
    pub fn parameter_count(&self) -> usize {
        let conv: usize = (0..CONV_BLOCKS)
            .map(|b| {
                let (cin, k, _) = self.block_geometry(b);
                cin * self.channels[b] * k + 2 * self.channels[b]
            })
            .sum();
        let dense: usize = self.dense_shapes().iter().map(|(i, o)| i * o + o).sum();
        conv + dense
    }

    /// Multiply-accumulates in one forward pass of one sample.
    pub fn forward_macs(&self) -> usize {
        let conv: usize = (0..CONV_BLOCKS)
            .map(|b| {
                let (cin, k, w) = self.block_geometry(b);
                cin * self.channels[b] * k * w
            })
            .sum();
        conv + self
            .dense_shapes()
            .iter()
            .map(|(i, o)| i * o)
            .sum::<usize>()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_layout_matches_documented_sizes() {
        let c = CnnConfig::reference(15);
        c.validate().unwrap();
        assert_eq!(c.flatten_len(), 8192);
        assert_eq!(c.dense_shapes(), [(8192, 512), (512, 128), (128, 15)]);
        let want = (2 * 8 * 7 + 16)
            + (8 * 16 * 5 + 32)
            + (16 * 32 * 5 + 64)
            + (32 * 64 * 5 + 128)
            + (64 * 64 * 5 + 128)
            + (64 * 128 * 5 + 256)
            + (8192 * 512 + 512)
            + (512 * 128 + 128)
            + (128 * 15 + 15);
        assert_eq!(c.parameter_count(), want);
    }

    #[test]
    fn structure_is_enforced() {
        let mut c = CnnConfig::compact(3);
        c.validate().unwrap();
        c.channels.pop();
        assert!(c.validate().is_err());
        let mut c = CnnConfig::compact(3);
        c.input_width = 100;
        assert!(c.validate().is_err());
        let mut c = CnnConfig::compact(3);
        c.kernel_width = 4;
        assert!(c.validate().is_err());
    }
}
