use serde::Serialize;

use super::layers::{transposed_phase_taps, LayerSpec, NetworkPlan, Section};
use crate::Error;

/// How multiply-accumulates are charged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum CountMode {
    /// What a dense engine executes: dilated rows are charged for the whole
    /// zero-inserted kernel, transposed rows for every kernel tap at every
    /// output (the zero-stuffed input included).
    Naive,
    /// What the decomposed schedules execute: dilated rows only touch real
    /// taps, transposed rows only the taps belonging to each output's phase.
    Decomposed,
}

/// Multiply-accumulate total for one layer on `t_in` input frames. Returns
/// `(t_out, macs)`.
///
/// Only convolution weight multiplies are charged. The elementwise mask and
/// the norm rows do real arithmetic but no weight multiplies; across the
/// bundled geometries they are below 0.03% of the total, so excluding them
/// keeps the counter comparable with conventional complexity figures.
pub fn layer_macs(spec: &LayerSpec, t_in: usize, mode: CountMode) -> Result<(usize, u64), Error> {
    let t_out = spec.out_len(t_in)?;
    let macs = match *spec {
        LayerSpec::Conv1D { in_ch, out_ch, kernel, .. } => {
            t_out as u64 * kernel as u64 * in_ch as u64 * out_ch as u64
        }
        LayerSpec::Pointwise { in_ch, out_ch } => t_out as u64 * in_ch as u64 * out_ch as u64,
        LayerSpec::DepthwiseDilated { channels, kernel, .. } => {
            let taps = match mode {
                CountMode::Naive => spec.effective_kernel().expect("depthwise has a kernel"),
                CountMode::Decomposed => kernel,
            };
            t_out as u64 * taps as u64 * channels as u64
        }
        LayerSpec::TransposedConv1D { in_ch, out_ch, kernel, stride } => {
            let taps: u64 = match mode {
                CountMode::Naive => t_out as u64 * kernel as u64,
                CountMode::Decomposed => {
                    (1..=t_out).map(|n| transposed_phase_taps(kernel, stride, n) as u64).sum()
                }
            };
            taps * in_ch as u64 * out_ch as u64
        }
        LayerSpec::ElementwiseMask { .. } | LayerSpec::NormAct { .. } => 0,
    };
    Ok((t_out, macs))
}

/// Scalar weight count of one layer.
pub fn layer_weight_count(spec: &LayerSpec) -> u64 {
    spec.weight_count()
}

/// Network-wide multiply-accumulate totals for `t_in` input samples.
#[derive(Debug, Clone, Serialize)]
pub struct MacReport {
    pub total: u64,
    pub enc_dec: u64,
    pub separator: u64,
    pub per_row: Vec<u64>,
}

impl MacReport {
    /// Share of work spent in the encoders and decoders.
    pub fn enc_dec_fraction(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.enc_dec as f64 / self.total as f64
    }
}

/// Count multiply-accumulates over the whole network, using the plan's shape
/// trace so the figures match what the executors actually compute.
pub fn count_macs(plan: &NetworkPlan, t_in: usize, mode: CountMode) -> Result<MacReport, Error> {
    let shapes = plan.shape_trace(t_in)?;
    let mut report =
        MacReport { total: 0, enc_dec: 0, separator: 0, per_row: Vec::with_capacity(shapes.len()) };
    for (row, shape) in plan.rows.iter().zip(&shapes) {
        let (_, macs) = layer_macs(&row.spec, shape.t_in, mode)?;
        report.total += macs;
        match row.role.section() {
            Section::EncDec => report.enc_dec += macs,
            Section::Separator => report.separator += macs,
        }
        report.per_row.push(macs);
    }
    Ok(report)
}

/// Total weight storage in bytes when every weight is stored in
/// `bits_per_weight` bits, packed per tensor.
pub fn weight_bytes(plan: &NetworkPlan, bits_per_weight: u32) -> u64 {
    plan.rows
        .iter()
        .map(|r| (r.spec.weight_count() * bits_per_weight as u64).div_ceil(8))
        .sum()
}

/// Same total expressed in decimal megabytes (1 MB = 10^6 bytes), the unit
/// model-size figures are conventionally quoted in.
pub fn weight_megabytes(plan: &NetworkPlan, bits_per_weight: u32) -> f64 {
    weight_bytes(plan, bits_per_weight) as f64 / 1e6
}
