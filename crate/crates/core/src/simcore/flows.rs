use serde::Serialize;

use super::config::SimOptions;
use super::detect::detect_nonzeros;
use crate::decompose::{DilatedSchedule, TransposedSchedule};
use crate::model::{NormActKind, PadMode, Tensor1D, WeightTensor};
use crate::refexec::ref_normact;
use crate::Error;

/// Which engine a row ran on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FlowKind {
    /// Zero-skipping broadcast stream (dense conv, pointwise).
    Broadcast,
    /// Gated lockstep over the dilated pair schedule.
    GatedDepthwise,
    /// Gated lockstep with adder tree over the transposed pair schedule.
    GatedTransposed,
    /// Gated lockstep elementwise multiply.
    Elementwise,
    /// Scalar normalisation/activation unit.
    Scalar,
}

/// One row's execution: functional output plus its cost breakdown.
#[derive(Debug)]
pub(crate) struct FlowResult {
    pub output: Tensor1D,
    pub kind: FlowKind,
    pub mac_cycles: u64,
    pub overhead_cycles: u64,
    pub performed_macs: u64,
    pub skipped_zero_macs: u64,
    pub tiles: u64,
}

fn cap_err(buffer: &'static str, needed: usize, capacity: usize) -> Error {
    Error::BufferCapacity { buffer, needed, capacity }
}

/// Accumulator width in bytes: partial sums are kept wide regardless of the
/// activation storage format.
const PSUM_BYTES: usize = 4;

/// Broadcast flow for dense and pointwise convolutions (pointwise is the
/// `kernel = 1, stride = 1` case).
///
/// Weights stay resident: each PE owns one output channel of the current
/// eight. The input window for each output frame is flattened channel-major
/// (taps innermost, matching the reference accumulation order), scanned by
/// the detection unit in groups of `group_width`, and every surviving
/// (offset, value) pair is broadcast to the eight PEs in one cycle. The scan
/// repeats once per group of eight output channels. With zero-skipping
/// disabled the stream carries zeros too, costing the full window width;
/// the arithmetic is unchanged because a zero activation contributes
/// nothing either way.
pub(crate) fn run_broadcast(
    x: &Tensor1D,
    w: &WeightTensor,
    kernel: usize,
    stride: usize,
    opts: &SimOptions,
) -> Result<FlowResult, Error> {
    let (out_ch, in_ch) = (w.dims[0], w.dims[1]);
    let taps: usize = if w.dims.len() == 3 { w.dims[2] } else { 1 };
    debug_assert_eq!(taps, kernel);
    debug_assert_eq!(x.channels, in_ch);
    if x.len < kernel {
        return Err(Error::shape("broadcast", format!("{} frames < kernel {kernel}", x.len)));
    }
    let t_out = (x.len - kernel) / stride + 1;
    let ebytes = opts.element_bytes();
    let pe = &opts.pe;

    // Weights for one PE group must fit a weight bank.
    let group_weight_bytes = pe.pe_count * in_ch * kernel * ebytes;
    if group_weight_bytes > pe.weight_bytes() {
        return Err(cap_err("weight", group_weight_bytes, pe.weight_bytes()));
    }
    // Input bank holds the window span for a tile of output frames.
    let span_frames = pe.input_bytes() / (in_ch * ebytes);
    if span_frames < kernel {
        return Err(cap_err("input", in_ch * kernel * ebytes, pe.input_bytes()));
    }
    let tile_in = (span_frames - kernel) / stride + 1;
    let tile_out = pe.output_bytes() / (out_ch * ebytes);
    if tile_out == 0 {
        return Err(cap_err("output", out_ch * ebytes, pe.output_bytes()));
    }
    let tile = tile_in.min(tile_out).min(t_out).max(1);
    let tiles = t_out.div_ceil(tile) as u64;

    let window = in_ch * kernel;
    let out_groups = out_ch.div_ceil(pe.pe_count) as u64;
    let mut out = Tensor1D::zeros(out_ch, t_out);
    let mut mac_cycles = 0u64;
    let mut performed = 0u64;
    let mut skipped = 0u64;
    let mut flat: Vec<f64> = vec![0.0; window];
    let mut pairs: Vec<(usize, f64)> = Vec::with_capacity(window);

    for i in 0..t_out {
        for c in 0..in_ch {
            for k in 0..kernel {
                flat[c * kernel + k] = x.get(c, i * stride + k);
            }
        }
        pairs.clear();
        for (g, group) in flat.chunks(pe.group_width).enumerate() {
            let base = g * pe.group_width;
            for (off, v) in detect_nonzeros(group) {
                pairs.push((base + off as usize - 1, v));
            }
        }
        let nnz = pairs.len() as u64;
        mac_cycles += out_groups * if opts.zero_skip { nnz } else { window as u64 };
        performed += out_ch as u64 * nnz;
        skipped += out_ch as u64 * (window as u64 - nnz);
        for o in 0..out_ch {
            let wrow = &w.data[o * window..(o + 1) * window];
            let mut acc = 0.0f64;
            for &(idx, v) in &pairs {
                acc += wrow[idx] * v;
            }
            out.set(o, i, acc);
        }
    }

    let cal = &opts.calibration;
    let overhead =
        tiles * (cal.fill_broadcast + cal.tile_swap_cycles) + cal.weight_swap_cycles;
    Ok(FlowResult {
        output: out,
        kind: FlowKind::Broadcast,
        mac_cycles,
        overhead_cycles: overhead,
        performed_macs: performed,
        skipped_zero_macs: skipped,
        tiles,
    })
}

/// Gated lockstep flow for dilated depthwise rows.
///
/// Eight channels advance together through the decomposed pair schedule
/// (every real tap, no inserted zeros), one tap slot per cycle per lockstep
/// group. Zero or padded operands gate their lane's multiplier off; the slot
/// still takes its cycle. Each tap is a separate stream into the input bank,
/// so a tile of output frames keeps `kernel` concurrent streams resident.
pub(crate) fn run_depthwise(
    x: &Tensor1D,
    w: &WeightTensor,
    dilation: usize,
    pad: PadMode,
    opts: &SimOptions,
) -> Result<FlowResult, Error> {
    let (channels, kernel) = (w.dims[0], w.dims[1]);
    debug_assert_eq!(x.channels, channels);
    let sched = DilatedSchedule::new(kernel, dilation, pad, x.len)?;
    let ebytes = opts.element_bytes();
    let pe = &opts.pe;

    let group_weight_bytes = pe.pe_count * kernel * ebytes;
    if group_weight_bytes > pe.weight_bytes() {
        return Err(cap_err("weight", group_weight_bytes, pe.weight_bytes()));
    }
    let per_frame = kernel * channels * ebytes;
    let tile_in = pe.input_bytes() / per_frame;
    if tile_in == 0 {
        return Err(cap_err("input", per_frame, pe.input_bytes()));
    }
    let tile_out = pe.output_bytes() / (channels * ebytes);
    if tile_out == 0 {
        return Err(cap_err("output", channels * ebytes, pe.output_bytes()));
    }
    let tile = tile_in.min(tile_out).min(sched.t_out).max(1);
    let tiles = sched.t_out.div_ceil(tile) as u64;

    let groups = channels.div_ceil(pe.pe_count) as u64;
    let mac_cycles = sched.t_out as u64 * kernel as u64 * groups;
    let mut out = Tensor1D::zeros(channels, sched.t_out);
    let mut performed = 0u64;
    let mut skipped = 0u64;
    for i in 0..sched.t_out {
        let pairs = sched.pairs(i);
        for c in 0..channels {
            let mut acc = 0.0f64;
            for p in &pairs {
                match p.input_index {
                    Some(t) => {
                        let v = x.get(c, t);
                        if v != 0.0 {
                            acc += w.data[c * kernel + p.tap_index] * v;
                            performed += 1;
                        } else {
                            skipped += 1;
                        }
                    }
                    None => skipped += 1,
                }
            }
            out.set(c, i, acc);
        }
    }

    let cal = &opts.calibration;
    let overhead = tiles * (cal.fill_gated + cal.tile_swap_cycles) + cal.weight_swap_cycles;
    Ok(FlowResult {
        output: out,
        kind: FlowKind::GatedDepthwise,
        mac_cycles,
        overhead_cycles: overhead,
        performed_macs: performed,
        skipped_zero_macs: skipped,
        tiles,
    })
}

/// Gated lockstep flow for transposed rows.
///
/// The hardware is input-stationary: input frames stream one at a time
/// (only one frame of every channel needs to sit in the input bank) while a
/// window of `kernel` wide partial sums lives in the output bank, and an
/// adder tree folds the eight lanes of each lockstep group. Walking outputs
/// gather-style, as done here, visits exactly the same (tap, input) pairs
/// in the same ascending-tap, channels-inner order and costs the same
/// cycles, so the model uses the simpler walk and keeps the stationary
/// layout only for the capacity checks.
pub(crate) fn run_transposed(
    x: &Tensor1D,
    w: &WeightTensor,
    stride: usize,
    opts: &SimOptions,
) -> Result<FlowResult, Error> {
    let (out_ch, in_ch, kernel) = (w.dims[0], w.dims[1], w.dims[2]);
    debug_assert_eq!(x.channels, in_ch);
    let sched = TransposedSchedule::new(kernel, stride, x.len)?;
    let ebytes = opts.element_bytes();
    let pe = &opts.pe;

    let group_weight_bytes = pe.pe_count * kernel * ebytes;
    if group_weight_bytes > pe.weight_bytes() {
        return Err(cap_err("weight", group_weight_bytes, pe.weight_bytes()));
    }
    let frame_bytes = in_ch * ebytes;
    let frames_per_fill = pe.input_bytes() / frame_bytes;
    if frames_per_fill == 0 {
        return Err(cap_err("input", frame_bytes, pe.input_bytes()));
    }
    let psum_bytes = kernel * out_ch * PSUM_BYTES;
    if psum_bytes > pe.output_bytes() {
        return Err(cap_err("output", psum_bytes, pe.output_bytes()));
    }
    let tiles = x.len.div_ceil(frames_per_fill) as u64;

    let in_groups = in_ch.div_ceil(pe.pe_count) as u64;
    let mut out = Tensor1D::zeros(out_ch, sched.t_out);
    let mut mac_cycles = 0u64;
    let mut performed = 0u64;
    let mut skipped = 0u64;
    for i in 0..sched.t_out {
        let pairs = sched.pairs(i);
        mac_cycles += pairs.len() as u64 * in_groups * out_ch as u64;
        for o in 0..out_ch {
            let mut acc = 0.0f64;
            for p in &pairs {
                let t = p.input_index.expect("transposed pairs are real");
                for c in 0..in_ch {
                    let v = x.get(c, t);
                    if v != 0.0 {
                        acc += w.data[(o * in_ch + c) * kernel + p.tap_index] * v;
                        performed += 1;
                    } else {
                        skipped += 1;
                    }
                }
            }
            out.set(o, i, acc);
        }
    }

    let cal = &opts.calibration;
    let overhead =
        tiles * (cal.fill_transposed + cal.tile_swap_cycles) + cal.weight_swap_cycles;
    Ok(FlowResult {
        output: out,
        kind: FlowKind::GatedTransposed,
        mac_cycles,
        overhead_cycles: overhead,
        performed_macs: performed,
        skipped_zero_macs: skipped,
        tiles,
    })
}

/// Gated lockstep elementwise multiply of masks against features. The mask
/// operand streams through the input bank, the feature operand through the
/// staging buffer. Mask multiplies are not weight MACs, so the performed
/// and skipped counters stay zero by convention (matching the analytic
/// counters).
pub(crate) fn run_mask(
    features: &Tensor1D,
    masks: &Tensor1D,
    opts: &SimOptions,
) -> Result<FlowResult, Error> {
    debug_assert_eq!(features.len, masks.len);
    let ebytes = opts.element_bytes();
    let pe = &opts.pe;
    let tile_masks = pe.input_bytes() / (masks.channels * ebytes);
    if tile_masks == 0 {
        return Err(cap_err("input", masks.channels * ebytes, pe.input_bytes()));
    }
    let tile_feat = pe.fused_bytes() / (features.channels * ebytes);
    if tile_feat == 0 {
        return Err(cap_err("fused", features.channels * ebytes, pe.fused_bytes()));
    }
    let tile_out = pe.output_bytes() / (masks.channels * ebytes);
    if tile_out == 0 {
        return Err(cap_err("output", masks.channels * ebytes, pe.output_bytes()));
    }
    let tile = tile_masks.min(tile_feat).min(tile_out).min(masks.len).max(1);
    let tiles = masks.len.div_ceil(tile) as u64;

    let c_feat = features.channels;
    let out = Tensor1D::from_fn(masks.channels, masks.len, |sc, t| {
        masks.get(sc, t) * features.get(sc % c_feat, t)
    });
    let groups = masks.channels.div_ceil(pe.pe_count) as u64;
    let mac_cycles = masks.len as u64 * groups;
    let cal = &opts.calibration;
    let overhead = tiles * (cal.fill_gated + cal.tile_swap_cycles);
    Ok(FlowResult {
        output: out,
        kind: FlowKind::Elementwise,
        mac_cycles,
        overhead_cycles: overhead,
        performed_macs: 0,
        skipped_zero_macs: 0,
        tiles,
    })
}

/// Normalisation/activation on the scalar unit: `passes` sweeps over the
/// map at eight elements per cycle. Shares the reference arithmetic; the
/// norm unit is outside the PE array and is not what this model studies.
pub(crate) fn run_norm(
    x: &Tensor1D,
    kind: NormActKind,
    opts: &SimOptions,
) -> Result<FlowResult, Error> {
    let ebytes = opts.element_bytes();
    let pe = &opts.pe;
    let tile = pe.input_bytes() / (x.channels * ebytes);
    if tile == 0 {
        return Err(cap_err("input", x.channels * ebytes, pe.input_bytes()));
    }
    let tiles = x.len.div_ceil(tile.min(x.len.max(1)).max(1)) as u64;
    let cal = &opts.calibration;
    let passes = match kind {
        NormActKind::Relu => cal.relu_passes,
        NormActKind::GlnRelu => cal.gln_passes,
    };
    let elements = (x.channels * x.len) as u64;
    let mac_cycles = passes * elements.div_ceil(pe.pe_count as u64);
    let overhead = tiles * cal.tile_swap_cycles;
    Ok(FlowResult {
        output: ref_normact(x, kind),
        kind: FlowKind::Scalar,
        mac_cycles,
        overhead_cycles: overhead,
        performed_macs: 0,
        skipped_zero_macs: 0,
        tiles,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::refexec::{ref_conv1d, ref_dilated, ref_pointwise, ref_transposed};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn opts() -> SimOptions {
        let mut o = SimOptions::new();
        o.quantize = None;
        o
    }

    fn rand_tensor(rng: &mut ChaCha8Rng, ch: usize, len: usize, zero_p: f64) -> Tensor1D {
        Tensor1D::from_fn(ch, len, |_, _| {
            if rng.gen_bool(zero_p) {
                0.0
            } else {
                rng.gen_range(-2.0..2.0)
            }
        })
    }

    fn rand_weights(rng: &mut ChaCha8Rng, dims: &[usize]) -> WeightTensor {
        WeightTensor {
            dims: dims.to_vec(),
            data: (0..dims.iter().product::<usize>()).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            pruned: None,
        }
    }

    #[test]
    fn broadcast_matches_reference_and_counts_cycles() {
        let mut rng = ChaCha8Rng::seed_from_u64(301);
        let x = rand_tensor(&mut rng, 3, 20, 0.4);
        let w = rand_weights(&mut rng, &[5, 3, 4]);
        let r = run_broadcast(&x, &w, 4, 2, &opts()).unwrap();
        let want = ref_conv1d(&x, &w, 2).unwrap();
        assert_eq!(r.output.data, want.output.data);
        // Every window element is either broadcast or skipped, over all
        // output channels: together they account for the dense MAC count.
        assert_eq!(r.performed_macs + r.skipped_zero_macs, want.mac_events);
        // 5 output channels -> one PE group; cycles equal total nonzero
        // window elements.
        let t_out = r.output.len;
        assert!(r.mac_cycles < t_out as u64 * 12);
        let mut dense = opts();
        dense.zero_skip = false;
        let d = run_broadcast(&x, &w, 4, 2, &dense).unwrap();
        assert_eq!(d.output.data, r.output.data);
        assert_eq!(d.mac_cycles, t_out as u64 * 12);
        assert!(d.mac_cycles > r.mac_cycles);
    }

    #[test]
    fn broadcast_cycles_scale_with_output_channel_groups() {
        let mut rng = ChaCha8Rng::seed_from_u64(302);
        let x = rand_tensor(&mut rng, 4, 10, 0.0);
        let w9 = rand_weights(&mut rng, &[9, 4, 1]);
        let w8 = rand_weights(&mut rng, &[8, 4, 1]);
        let r9 = run_broadcast(&x, &w9, 1, 1, &opts()).unwrap();
        let r8 = run_broadcast(&x, &w8, 1, 1, &opts()).unwrap();
        // Nine output channels need two PE groups, eight need one.
        assert_eq!(r9.mac_cycles, 2 * r8.mac_cycles);
    }

    #[test]
    fn pointwise_broadcast_matches_reference() {
        let mut rng = ChaCha8Rng::seed_from_u64(303);
        let x = rand_tensor(&mut rng, 6, 15, 0.5);
        let w = rand_weights(&mut rng, &[4, 6]);
        let r = run_broadcast(&x, &WeightTensor { dims: vec![4, 6, 1], data: w.data.clone(), pruned: None }, 1, 1, &opts()).unwrap();
        let want = ref_pointwise(&x, &w).unwrap();
        assert_eq!(r.output.data, want.output.data);
    }

    #[test]
    fn depthwise_cycles_ignore_zeros_but_gate_multiplies() {
        let mut rng = ChaCha8Rng::seed_from_u64(304);
        let dense_x = rand_tensor(&mut rng, 4, 30, 0.0);
        let sparse_x = rand_tensor(&mut rng, 4, 30, 0.6);
        let w = rand_weights(&mut rng, &[4, 3]);
        let a = run_depthwise(&dense_x, &w, 2, PadMode::Valid, &opts()).unwrap();
        let b = run_depthwise(&sparse_x, &w, 2, PadMode::Valid, &opts()).unwrap();
        assert_eq!(a.mac_cycles, b.mac_cycles);
        assert!(b.skipped_zero_macs > a.skipped_zero_macs);
        let want = ref_dilated(&sparse_x, &w, 2, PadMode::Valid).unwrap();
        assert_eq!(b.output.data, want.output.data);
        // Slots partition into performed and gated-off.
        let slots = (b.output.len * 3 * 4) as u64;
        assert_eq!(b.performed_macs + b.skipped_zero_macs, slots);
    }

    #[test]
    fn transposed_matches_reference_and_schedule_counts() {
        let mut rng = ChaCha8Rng::seed_from_u64(305);
        let x = rand_tensor(&mut rng, 5, 12, 0.3);
        let w = rand_weights(&mut rng, &[1, 5, 9]);
        let r = run_transposed(&x, &w, 3, &opts()).unwrap();
        let want = ref_transposed(&x, &w, 3).unwrap();
        assert_eq!(r.output.data, want.output.data);
        let sched = TransposedSchedule::new(9, 3, 12).unwrap();
        assert_eq!(r.performed_macs + r.skipped_zero_macs, sched.pair_count() * 5);
        assert_eq!(r.mac_cycles, sched.pair_count());
    }

    #[test]
    fn capacity_errors_name_the_buffer() {
        let mut rng = ChaCha8Rng::seed_from_u64(306);
        // 600 channels of f32 cannot fit one 2048-byte input bank frame.
        let x = rand_tensor(&mut rng, 600, 4, 0.0);
        let w = rand_weights(&mut rng, &[8, 600, 1]);
        let mut o = opts();
        o.pe.weight_buffer_words = 1 << 20; // keep the weight check out of the way
        let err = run_broadcast(&x, &w, 1, 1, &o).unwrap_err();
        match err {
            Error::BufferCapacity { buffer, needed, capacity } => {
                assert_eq!(buffer, "input");
                assert!(needed > capacity);
            }
            other => panic!("expected capacity error, got {other}"),
        }
        // Default weight bank cannot hold eight PEs' worth of 600-channel rows.
        let err = run_broadcast(&x, &w, 1, 1, &opts()).unwrap_err();
        match err {
            Error::BufferCapacity { buffer, .. } => assert_eq!(buffer, "weight"),
            other => panic!("expected capacity error, got {other}"),
        }
    }

    #[test]
    fn mask_and_norm_cost_by_elements() {
        let mut rng = ChaCha8Rng::seed_from_u64(307);
        let feats = rand_tensor(&mut rng, 4, 10, 0.2);
        let masks = rand_tensor(&mut rng, 8, 10, 0.4);
        let m = run_mask(&feats, &masks, &opts()).unwrap();
        assert_eq!(m.mac_cycles, 10); // one lockstep group of 8 channels
        for sc in 0..8 {
            for t in 0..10 {
                assert_eq!(m.output.get(sc, t), masks.get(sc, t) * feats.get(sc % 4, t));
            }
        }
        let n = run_norm(&feats, NormActKind::GlnRelu, &opts()).unwrap();
        // 40 elements, 8 lanes, 3 passes.
        assert_eq!(n.mac_cycles, 3 * 5);
        let r = run_norm(&feats, NormActKind::Relu, &opts()).unwrap();
        assert_eq!(r.mac_cycles, 5);
    }

    #[test]
    fn tiling_grows_overhead_but_not_results() {
        let mut rng = ChaCha8Rng::seed_from_u64(308);
        let x = rand_tensor(&mut rng, 8, 200, 0.3);
        let w = rand_weights(&mut rng, &[8, 8, 3]);
        let big = run_broadcast(&x, &w, 3, 1, &opts()).unwrap();
        let mut small = opts();
        small.pe.input_buffer_words = 16; // 128 bytes: a handful of frames per tile
        small.pe.output_buffer_words = 16;
        let tiled = run_broadcast(&x, &w, 3, 1, &small).unwrap();
        assert_eq!(tiled.output.data, big.output.data);
        assert!(tiled.tiles > big.tiles);
        assert!(tiled.overhead_cycles > big.overhead_cycles);
        assert_eq!(tiled.mac_cycles, big.mac_cycles);
    }
}
