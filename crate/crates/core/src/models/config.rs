use serde::{Deserialize, Serialize};

use crate::error::CoreError;
use fdfnet_nn::Conv2dSpec;

/// Stage-1 magnitude enhancement network topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FmeConfig {
    pub encoder_channels: Vec<usize>,
    pub decoder_channels: Vec<usize>,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub gru_hidden: Vec<usize>,
    pub fc_units: usize,
    pub input_bins: usize,
}

impl Default for FmeConfig {
    fn default() -> Self {
        Self {
            encoder_channels: vec![16, 32, 64, 128, 256],
            decoder_channels: vec![128, 64, 32, 16, 1],
            kernel: (3, 2),
            stride: (2, 1),
            gru_hidden: vec![128, 64, 32],
            fc_units: 2304,
            input_bins: 257,
        }
    }
}

impl FmeConfig {
    pub fn freq_pad(&self) -> usize {
        self.kernel.0 / 2
    }

    /// Frequency extents through the encoder, input first.
    pub fn freq_ladder(&self) -> Vec<usize> {
        freq_ladder(self.input_bins, self.kernel, self.stride, self.encoder_channels.len())
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.encoder_channels.len() != self.decoder_channels.len() {
            return Err(CoreError::Config("encoder/decoder depth mismatch".into()));
        }
        if *self.decoder_channels.last().unwrap() != 1 {
            return Err(CoreError::Config("decoder must end in one channel".into()));
        }
        let ladder = self.freq_ladder();
        let bottleneck_bins = *ladder.last().unwrap();
        let bottleneck_ch = *self.encoder_channels.last().unwrap();
        if bottleneck_bins * bottleneck_ch != self.fc_units {
            return Err(CoreError::Config(format!(
                "fc_units {} does not match bottleneck {} bins x {} channels",
                self.fc_units, bottleneck_bins, bottleneck_ch
            )));
        }
        Ok(())
    }
}

/// Stage-2 spectrum refinement network topology.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DsrConfig {
    pub encoder_channels: Vec<usize>,
    pub decoder_channels: Vec<usize>,
    pub kernel: (usize, usize),
    pub stride: (usize, usize),
    pub tfsm_hidden: Vec<usize>,
    pub input_bins: usize,
    pub input_channels: usize,
}

impl Default for DsrConfig {
    fn default() -> Self {
        Self {
            encoder_channels: vec![16, 32, 64, 128, 256],
            decoder_channels: vec![128, 64, 32, 16, 1],
            kernel: (5, 2),
            stride: (2, 1),
            tfsm_hidden: vec![128, 64, 32],
            input_bins: 512,
            input_channels: 2,
        }
    }
}

impl DsrConfig {
    pub fn freq_pad(&self) -> usize {
        self.kernel.0 / 2
    }

    pub fn freq_ladder(&self) -> Vec<usize> {
        freq_ladder(self.input_bins, self.kernel, self.stride, self.encoder_channels.len())
    }

    pub fn validate(&self) -> Result<(), CoreError> {
        if self.encoder_channels.len() != self.decoder_channels.len() {
            return Err(CoreError::Config("encoder/decoder depth mismatch".into()));
        }
        if self.input_channels != 2 {
            return Err(CoreError::Config("refinement stage stacks two input spectra".into()));
        }
        Ok(())
    }
}

fn freq_ladder(
    input_bins: usize,
    kernel: (usize, usize),
    stride: (usize, usize),
    depth: usize,
) -> Vec<usize> {
    let mut ladder = vec![input_bins];
    let mut f = input_bins;
    for _ in 0..depth {
        let spec = Conv2dSpec {
            in_ch: 1,
            out_ch: 1,
            kernel,
            stride,
            pad_f: kernel.0 / 2,
        };
        f = spec.out_freq(f).unwrap_or(0);
        ladder.push(f);
    }
    ladder
}
