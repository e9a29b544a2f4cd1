//! Machine-readable run reports. Every command can emit one with `--json`;
//! the human tables are rendered from the same data.

use serde::Serialize;

use sepsim_core::compress::CompressionReport;
use sepsim_core::model::NetworkConfig;
use sepsim_core::simcore::{HopEstimate, ScheduleTrace};

#[derive(Debug, Serialize)]
pub struct RunReport {
    pub command: &'static str,
    pub config: NetworkConfig,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub analytic: Option<Analytic>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub simulation: Option<Simulation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub compression: Option<CompressionSection>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantization: Option<QuantizationSection>,
}

impl RunReport {
    pub fn new(command: &'static str, config: NetworkConfig) -> Self {
        RunReport {
            command,
            config,
            analytic: None,
            simulation: None,
            compression: None,
            quantization: None,
        }
    }
}

/// Static complexity figures for one config.
#[derive(Debug, Serialize)]
pub struct Analytic {
    pub parameters: u64,
    pub weight_mb_fp32: f64,
    pub weight_mb_fp8: f64,
    /// MACs for one second of 16 kHz input, dense schedules.
    pub naive_gmacs_per_s: f64,
    /// Same input, zero-free decomposed schedules.
    pub decomposed_gmacs_per_s: f64,
    pub enc_dec_fraction: f64,
    pub separator_fraction: f64,
    pub per_row: Vec<AnalyticRow>,
}

#[derive(Debug, Serialize)]
pub struct AnalyticRow {
    pub row: usize,
    pub label: String,
    pub weights: u64,
    pub naive_macs: u64,
    pub decomposed_macs: u64,
}

/// Aggregates of one simulated pass.
#[derive(Debug, Serialize)]
pub struct Totals {
    pub cycles: u64,
    pub mac_cycles: u64,
    pub overhead_cycles: u64,
    pub performed_macs: u64,
    pub skipped_zero_macs: u64,
    pub dense_macs: u64,
}

impl Totals {
    pub fn of(trace: &ScheduleTrace) -> Self {
        Totals {
            cycles: trace.total_cycles(),
            mac_cycles: trace.mac_cycles(),
            overhead_cycles: trace.overhead_cycles(),
            performed_macs: trace.performed_macs(),
            skipped_zero_macs: trace.skipped_zero_macs(),
            dense_macs: trace.dense_macs(),
        }
    }
}

#[derive(Debug, Serialize)]
pub struct Simulation {
    pub zero_skip: bool,
    /// Activation storage format name, "fp32" meaning quantization off.
    pub format: String,
    pub input_samples: usize,
    pub input_zero_fraction: f64,
    pub output_lens: Vec<usize>,
    /// Exactly-zero share of all output samples. 1.0 flags a silenced
    /// network (over-pruned weights or a format whose range flushed them).
    pub output_zero_fraction: f64,
    /// FNV-1a over the raw bits of every output sample, for cheap equality
    /// checks between runs.
    pub output_digest: String,
    pub totals: Totals,
    pub wall_ms_at_clock: f64,
    pub clock_hz: u64,
    pub realtime: bool,
    pub hop: HopEstimate,
    pub trace: ScheduleTrace,
}

#[derive(Debug, Serialize)]
pub struct CompressionSection {
    pub report: CompressionReport,
    pub output_path: String,
    pub format: String,
    pub stored_weights: u64,
    pub masked_weights: u64,
}

#[derive(Debug, Serialize)]
pub struct QuantizationSection {
    pub format: String,
    pub weights: u64,
    pub max_abs_error: f64,
    pub mean_abs_error: f64,
    pub zero_fraction: f64,
    pub min_normal: f64,
    pub max_value: f64,
    pub output_path: String,
}

/// Print either the JSON form of `report` or the prepared human text.
pub fn emit<T: Serialize>(json: bool, report: &T, human: &str) {
    if json {
        println!("{}", serde_json::to_string_pretty(report).expect("report serializes"));
    } else {
        print!("{human}");
    }
}

/// FNV-1a over the bit patterns of a stream of samples.
pub fn digest_samples<'a>(streams: impl Iterator<Item = &'a [f64]>) -> String {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for s in streams {
        for &v in s {
            for b in v.to_bits().to_le_bytes() {
                h ^= b as u64;
                h = h.wrapping_mul(0x1000_0000_01b3);
            }
        }
    }
    format!("{h:016x}")
}
