use serde::{Deserialize, Serialize};

use crate::Error;

/// One encoder branch: a strided 1-D convolution from the raw waveform into
/// `channels` basis signals.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderFilter {
    /// Analysis window length in samples.
    pub kernel: usize,
    /// Hop between windows in samples.
    pub stride: usize,
}

/// Padding mode for the dilated depthwise rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PadMode {
    /// No padding; every output frame sees only real input frames.
    Valid,
    /// Symmetric zero padding so the frame count is preserved. Needed for the
    /// deeper dilation rows, whose receptive field exceeds a single hop of
    /// input.
    Same,
}

/// Geometry of a complete separator network.
///
/// The structure is fixed: a bank of parallel encoder branches, a pointwise
/// bottleneck, `repeats` repeats of `blocks_per_repeat` dilated convolution
/// blocks, a pointwise mask estimator, elementwise mask application per
/// source, and one transposed-convolution decoder per (source, branch) pair.
/// Only the sizes vary.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct NetworkConfig {
    /// Encoder branches, one strided conv each. Order matters: branch 0 fixes
    /// the frame rate the separator runs at.
    pub encoder_filters: Vec<EncoderFilter>,
    /// Basis size per encoder branch (and decoder input width).
    pub channels: usize,
    /// Width of the residual path between blocks.
    pub bottleneck: usize,
    /// Inner width of each dilated block.
    pub block_channels: usize,
    /// Blocks per repeat; dilation grows across these.
    pub blocks_per_repeat: usize,
    /// How many times the block stack is repeated.
    pub repeats: usize,
    /// Depthwise kernel length inside each block.
    pub dw_kernel: usize,
    /// Zeros inserted between depthwise taps, one entry per block within a
    /// repeat. Empty means the doubling schedule `2^x - 1` for block x.
    #[serde(default)]
    pub dilation_schedule: Vec<usize>,
    /// Number of sources the mask estimator separates.
    pub num_sources: usize,
    /// Padding for the dilated depthwise rows.
    pub dilated_padding: PadMode,
}

impl NetworkConfig {
    /// Bundled baseline geometry.
    pub fn baseline() -> Self {
        Self::from_toml_str(include_str!("../../fixtures/baseline.toml"))
            .expect("bundled baseline fixture is valid")
    }

    /// Bundled pruned geometry (the baseline after structured shrinking).
    pub fn pruned() -> Self {
        Self::from_toml_str(include_str!("../../fixtures/pruned.toml"))
            .expect("bundled pruned fixture is valid")
    }

    /// Parse a config from TOML text, fill defaults, and validate.
    pub fn from_toml_str(text: &str) -> Result<Self, Error> {
        let mut cfg: NetworkConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.finalize()?;
        Ok(cfg)
    }

    /// Fill derived defaults and check internal consistency.
    pub fn finalize(&mut self) -> Result<(), Error> {
        if self.dilation_schedule.is_empty() {
            self.dilation_schedule = (0..self.blocks_per_repeat)
                .map(|x| (1usize << x) - 1)
                .collect();
        }
        self.validate()
    }

    fn validate(&self) -> Result<(), Error> {
        if self.encoder_filters.is_empty() {
            return Err(Error::Config("at least one encoder branch required".into()));
        }
        for (b, f) in self.encoder_filters.iter().enumerate() {
            if f.kernel == 0 || f.stride == 0 {
                return Err(Error::Config(format!(
                    "encoder branch {b}: kernel and stride must be nonzero"
                )));
            }
            if f.kernel < f.stride {
                return Err(Error::Config(format!(
                    "encoder branch {b}: kernel {} shorter than stride {}",
                    f.kernel, f.stride
                )));
            }
        }
        let s0 = self.min_stride();
        for (b, f) in self.encoder_filters.iter().enumerate() {
            if f.stride % s0 != 0 {
                return Err(Error::Config(format!(
                    "encoder branch {b}: stride {} not a multiple of the \
                     smallest stride {s0}, so branch frames cannot be aligned \
                     by integer repetition",
                    f.stride
                )));
            }
        }
        for (name, v) in [
            ("channels", self.channels),
            ("bottleneck", self.bottleneck),
            ("block_channels", self.block_channels),
            ("blocks_per_repeat", self.blocks_per_repeat),
            ("repeats", self.repeats),
            ("dw_kernel", self.dw_kernel),
            ("num_sources", self.num_sources),
        ] {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be nonzero")));
            }
        }
        if self.dilation_schedule.len() != self.blocks_per_repeat {
            return Err(Error::Config(format!(
                "dilation_schedule has {} entries but blocks_per_repeat is {}",
                self.dilation_schedule.len(),
                self.blocks_per_repeat
            )));
        }
        Ok(())
    }

    /// Number of encoder branches.
    pub fn branches(&self) -> usize {
        self.encoder_filters.len()
    }

    /// Smallest encoder stride; the separator's frame rate is the input rate
    /// divided by this.
    pub fn min_stride(&self) -> usize {
        self.encoder_filters
            .iter()
            .map(|f| f.stride)
            .min()
            .expect("validated config has at least one branch")
    }

    /// Frame-repetition factor that lifts branch `b` to the common rate.
    pub fn branch_ratio(&self, b: usize) -> usize {
        self.encoder_filters[b].stride / self.min_stride()
    }

    /// Channel count of the concatenated encoder output.
    pub fn concat_channels(&self) -> usize {
        self.branches() * self.channels
    }

    /// Zeros inserted between taps for block `x` within a repeat.
    pub fn dilation(&self, x: usize) -> usize {
        self.dilation_schedule[x]
    }
}
