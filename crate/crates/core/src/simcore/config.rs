use serde::Serialize;

use crate::minifloat::MinifloatFormat;

/// Hardware shape of the array and its memories.
#[derive(Debug, Clone, Serialize)]
pub struct PeArrayConfig {
    /// Processing elements working one stream (also the lockstep width).
    pub pe_count: usize,
    /// Activations the detection unit compares per cycle.
    pub group_width: usize,
    pub clock_hz: u64,
    /// One input bank, in 64-bit words (banks are doubled for ping-pong).
    pub input_buffer_words: usize,
    /// One output bank, in 64-bit words.
    pub output_buffer_words: usize,
    /// One weight bank, in 64-bit words.
    pub weight_buffer_words: usize,
    /// Staging buffer that holds the second operand of fused rows (the
    /// encoder features consumed by the mask row), in 64-bit words.
    pub fused_buffer_words: usize,
}

impl PeArrayConfig {
    /// The modelled accelerator: 8 PEs at 150 MHz with 256-word activation
    /// banks and 1024-word weight banks.
    pub fn default_accelerator() -> Self {
        Self {
            pe_count: 8,
            group_width: 8,
            clock_hz: 150_000_000,
            input_buffer_words: 256,
            output_buffer_words: 256,
            weight_buffer_words: 1024,
            fused_buffer_words: 256,
        }
    }

    pub fn input_bytes(&self) -> usize {
        self.input_buffer_words * 8
    }

    pub fn output_bytes(&self) -> usize {
        self.output_buffer_words * 8
    }

    pub fn weight_bytes(&self) -> usize {
        self.weight_buffer_words * 8
    }

    pub fn fused_bytes(&self) -> usize {
        self.fused_buffer_words * 8
    }
}

/// Measured timing constants. Versioned so reported numbers can be traced
/// to the constants that produced them.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationSpec {
    pub version: &'static str,
    /// Pipeline fill per tile for the broadcast flow (six stages).
    pub fill_broadcast: u64,
    /// Pipeline fill per tile for the gated depthwise flow (four stages).
    pub fill_gated: u64,
    /// Pipeline fill per tile for the transposed flow (five stages, adder
    /// tree included).
    pub fill_transposed: u64,
    /// Bank-swap bubble charged per activation tile.
    pub tile_swap_cycles: u64,
    /// Weight ping-pong swap bubble charged once per row.
    pub weight_swap_cycles: u64,
    /// Scalar-unit passes over the data for a plain rectifier row.
    pub relu_passes: u64,
    /// Passes for a global-layer-norm row (mean, variance, normalise).
    pub gln_passes: u64,
}

impl CalibrationSpec {
    pub fn current() -> Self {
        Self {
            version: "cal-2026.08",
            fill_broadcast: 6,
            fill_gated: 4,
            fill_transposed: 5,
            tile_swap_cycles: 8,
            weight_swap_cycles: 16,
            relu_passes: 1,
            gln_passes: 3,
        }
    }
}

/// Everything a simulation run needs beyond the network itself.
#[derive(Debug, Clone)]
pub struct SimOptions {
    pub pe: PeArrayConfig,
    pub calibration: CalibrationSpec,
    /// Skip zero activations in the broadcast flow. Timing only: the
    /// executed arithmetic is identical either way.
    pub zero_skip: bool,
    /// Activation storage format. `None` stores activations as f32 words
    /// (wider tiles are then needed, and some full-size layers stop fitting
    /// the banks, which is reported as a capacity error rather than hidden).
    pub quantize: Option<MinifloatFormat>,
    /// Keep every row output (small networks only).
    pub keep_rows: bool,
    /// Corrupt the named row's first output element after it is computed.
    /// Exists so end-to-end verification can prove it detects divergence.
    pub fault_row: Option<usize>,
}

impl SimOptions {
    pub fn new() -> Self {
        Self {
            pe: PeArrayConfig::default_accelerator(),
            calibration: CalibrationSpec::current(),
            zero_skip: true,
            quantize: Some(MinifloatFormat::fp8_shifted()),
            keep_rows: false,
            fault_row: None,
        }
    }

    /// Bytes one stored activation occupies.
    pub fn element_bytes(&self) -> usize {
        match &self.quantize {
            Some(fmt) => (fmt.width() as usize).div_ceil(8),
            None => 4,
        }
    }
}

impl Default for SimOptions {
    fn default() -> Self {
        Self::new()
    }
}
