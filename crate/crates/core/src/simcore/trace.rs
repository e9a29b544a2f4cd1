use serde::Serialize;

use super::flows::FlowKind;
use crate::model::NetworkPlan;
use crate::{HOP_SAMPLES, SAMPLE_RATE};

/// Cost record for one executed row.
#[derive(Debug, Clone, Serialize)]
pub struct RowCost {
    pub row: usize,
    pub label: String,
    pub flow: FlowKind,
    pub out_frames: usize,
    pub out_channels: usize,
    pub mac_cycles: u64,
    pub overhead_cycles: u64,
    /// Multiplies executed (nonzero operands).
    pub performed_macs: u64,
    /// Multiply slots whose operand was zero (skipped by the broadcast
    /// detector or gated off in lockstep flows).
    pub skipped_zero_macs: u64,
    /// What a dense engine would execute for this row.
    pub dense_macs: u64,
    pub tiles: u64,
    pub out_zeros: u64,
    pub out_elements: u64,
}

impl RowCost {
    pub fn cycles(&self) -> u64 {
        self.mac_cycles + self.overhead_cycles
    }
}

/// Execution record of a whole network pass.
#[derive(Debug, Clone, Serialize)]
pub struct ScheduleTrace {
    pub rows: Vec<RowCost>,
    pub calibration_version: String,
}

impl ScheduleTrace {
    pub fn total_cycles(&self) -> u64 {
        self.rows.iter().map(RowCost::cycles).sum()
    }

    pub fn mac_cycles(&self) -> u64 {
        self.rows.iter().map(|r| r.mac_cycles).sum()
    }

    pub fn overhead_cycles(&self) -> u64 {
        self.rows.iter().map(|r| r.overhead_cycles).sum()
    }

    pub fn performed_macs(&self) -> u64 {
        self.rows.iter().map(|r| r.performed_macs).sum()
    }

    pub fn skipped_zero_macs(&self) -> u64 {
        self.rows.iter().map(|r| r.skipped_zero_macs).sum()
    }

    pub fn dense_macs(&self) -> u64 {
        self.rows.iter().map(|r| r.dense_macs).sum()
    }

    /// Zero fraction of the activation traffic seen by the zero-skipping
    /// broadcast rows: the sparsity the skip logic actually exploited.
    pub fn broadcast_input_sparsity(&self) -> f64 {
        let (mut performed, mut skipped) = (0u64, 0u64);
        for r in &self.rows {
            if r.flow == FlowKind::Broadcast {
                performed += r.performed_macs;
                skipped += r.skipped_zero_macs;
            }
        }
        if performed + skipped == 0 {
            return 0.0;
        }
        skipped as f64 / (performed + skipped) as f64
    }

    /// Fixed-width table for terminal reports.
    pub fn render_table(&self) -> String {
        let mut s = String::new();
        s.push_str(&format!(
            "{:<26} {:>11} {:>12} {:>10} {:>12} {:>12} {:>6}\n",
            "row", "flow", "out", "tiles", "mac cyc", "ovh cyc", "skip%"
        ));
        for r in &self.rows {
            let slots = r.performed_macs + r.skipped_zero_macs;
            let skip_pct = if slots == 0 {
                "-".to_string()
            } else {
                format!("{:.0}", 100.0 * r.skipped_zero_macs as f64 / slots as f64)
            };
            s.push_str(&format!(
                "{:<26} {:>11} {:>5}x{:<6} {:>10} {:>12} {:>12} {:>6}\n",
                r.label,
                format!("{:?}", r.flow),
                r.out_channels,
                r.out_frames,
                r.tiles,
                r.mac_cycles,
                r.overhead_cycles,
                skip_pct
            ));
        }
        s.push_str(&format!(
            "total: {} cycles ({} mac + {} overhead), calibration {}\n",
            self.total_cycles(),
            self.mac_cycles(),
            self.overhead_cycles(),
            self.calibration_version
        ));
        s
    }
}

/// Steady-state cost of one hop of input (`HOP_SAMPLES` samples).
#[derive(Debug, Clone, Serialize)]
pub struct HopEstimate {
    pub cycles_per_hop: f64,
    pub ms_per_hop: f64,
    /// Wall-clock duration of one hop of audio.
    pub hop_ms: f64,
    /// Whether the hop is processed faster than it arrives.
    pub realtime: bool,
    pub broadcast_sparsity: f64,
    pub per_row_cycles: Vec<f64>,
    pub calibration_version: String,
}

/// Scale a measured trace to steady-state per-hop cost.
///
/// Each row's measured cycles are divided by the frames it actually produced
/// and multiplied by the frames it produces per hop once the pipeline is in
/// steady state. Per-output cost is constant per row (up to sparsity noise
/// in the broadcast rows), so any input long enough to execute every row
/// yields the same estimate; edges merely add noise that shrinks with input
/// length.
pub fn hop_estimate(plan: &NetworkPlan, trace: &ScheduleTrace, clock_hz: u64) -> HopEstimate {
    let mut per_row = Vec::with_capacity(trace.rows.len());
    let mut total = 0.0f64;
    for r in &trace.rows {
        let steady = plan.steady_frames_per_hop(r.row);
        let scale = steady / r.out_frames.max(1) as f64;
        let cycles = r.cycles() as f64 * scale;
        per_row.push(cycles);
        total += cycles;
    }
    let ms = total / clock_hz as f64 * 1e3;
    let hop_ms = HOP_SAMPLES as f64 / SAMPLE_RATE as f64 * 1e3;
    HopEstimate {
        cycles_per_hop: total,
        ms_per_hop: ms,
        hop_ms,
        realtime: ms <= hop_ms,
        broadcast_sparsity: trace.broadcast_input_sparsity(),
        per_row_cycles: per_row,
        calibration_version: trace.calibration_version.clone(),
    }
}
