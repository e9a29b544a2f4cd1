use super::config::SimOptions;
use super::flows::{self, FlowResult};
use super::trace::{RowCost, ScheduleTrace};
use crate::model::{layer_macs, CountMode, LayerSpec, NetworkPlan, Tensor1D, WeightBank};
use crate::refexec::{drive_network, quantize_tensor, NetworkOutputs, RowInput};
use crate::Error;

/// A full simulated pass: functional outputs plus the execution trace.
pub struct SimRun {
    pub outputs: NetworkOutputs,
    pub trace: ScheduleTrace,
}

/// Run the network through the array model.
///
/// Routing, quantization points, and norm arithmetic are shared with the
/// reference executor; the convolution rows are computed by the scheduled
/// flows. With `quantize: None` the outputs therefore match `ref_network`
/// exactly, which the tests assert. Timing is accumulated per row into a
/// [`ScheduleTrace`].
pub fn simulate_network(
    plan: &NetworkPlan,
    bank: &WeightBank,
    input: &[f64],
    opts: &SimOptions,
) -> Result<SimRun, Error> {
    bank.validate_for(plan)?;
    let shapes = plan.shape_trace(input.len())?;
    let weight_rows = plan.weight_rows();

    let mut wave = Tensor1D::from_samples(input);
    if let Some(fmt) = &opts.quantize {
        quantize_tensor(&mut wave, fmt);
    }

    let mut next_weight = 0usize;
    let mut costs: Vec<RowCost> = Vec::with_capacity(plan.rows.len());
    let outputs = drive_network(plan, &wave, opts.keep_rows, |i, row, feed| {
        let result: FlowResult = match (row.spec, &feed) {
            (LayerSpec::Conv1D { kernel, stride, .. }, RowInput::Feed(x)) => {
                flows::run_broadcast(x, &bank.tensors[next_weight], kernel, stride, opts)?
            }
            (LayerSpec::Pointwise { .. }, RowInput::Feed(x)) => {
                flows::run_broadcast(x, &bank.tensors[next_weight], 1, 1, opts)?
            }
            (LayerSpec::DepthwiseDilated { dilation, pad, .. }, RowInput::Feed(x)) => {
                flows::run_depthwise(x, &bank.tensors[next_weight], dilation, pad, opts)?
            }
            (LayerSpec::TransposedConv1D { stride, .. }, RowInput::Feed(x)) => {
                flows::run_transposed(x, &bank.tensors[next_weight], stride, opts)?
            }
            (LayerSpec::ElementwiseMask { .. }, RowInput::Masking { features, masks }) => {
                flows::run_mask(features, masks, opts)?
            }
            (LayerSpec::NormAct { kind, .. }, RowInput::Feed(x)) => {
                flows::run_norm(x, kind, opts)?
            }
            _ => return Err(Error::shape("sim", format!("row {i} fed the wrong input kind"))),
        };
        if row.spec.weight_count() > 0 {
            debug_assert_eq!(weight_rows[next_weight], i);
            next_weight += 1;
        }
        let mut out = result.output;
        if let Some(fmt) = &opts.quantize {
            if !crate::refexec::followed_by_normact(plan, i) {
                quantize_tensor(&mut out, fmt);
            }
        }
        if opts.fault_row == Some(i) && !out.data.is_empty() {
            let poison = match &opts.quantize {
                Some(fmt) => fmt.max_value(),
                None => 1e6,
            };
            out.data[0] = if out.data[0] == poison { -poison } else { poison };
        }
        let (_, dense) = layer_macs(&row.spec, shapes[i].t_in, CountMode::Naive)?;
        costs.push(RowCost {
            row: i,
            label: row.describe(),
            flow: result.kind,
            out_frames: out.len,
            out_channels: out.channels,
            mac_cycles: result.mac_cycles,
            overhead_cycles: result.overhead_cycles,
            performed_macs: result.performed_macs,
            skipped_zero_macs: result.skipped_zero_macs,
            dense_macs: dense,
            tiles: result.tiles,
            out_zeros: out.zero_count() as u64,
            out_elements: (out.channels * out.len) as u64,
        });
        Ok(out)
    })?;

    Ok(SimRun {
        outputs,
        trace: ScheduleTrace {
            rows: costs,
            calibration_version: opts.calibration.version.to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::decompose::TransposedSchedule;
    use crate::minifloat::MinifloatFormat;
    use crate::model::{EncoderFilter, NetworkConfig, PadMode};
    use crate::refexec::ref_network;
    use crate::simcore::{hop_estimate, FlowKind};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg(branches: &[(usize, usize)], pad: PadMode) -> NetworkConfig {
        NetworkConfig {
            encoder_filters: branches
                .iter()
                .map(|&(kernel, stride)| EncoderFilter { kernel, stride })
                .collect(),
            channels: 4,
            bottleneck: 4,
            block_channels: 6,
            blocks_per_repeat: 2,
            repeats: 1,
            dw_kernel: 3,
            dilation_schedule: vec![],
            num_sources: 2,
            dilated_padding: pad,
        }
    }

    fn input(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-0.9..0.9)).collect()
    }

    fn wide_opts() -> SimOptions {
        let mut o = SimOptions::new();
        o.quantize = None;
        o
    }

    #[test]
    fn matches_reference_bit_for_bit_without_quantization() {
        for (cfg, t_in, seed) in [
            (tiny_cfg(&[(4, 2)], PadMode::Valid), 64, 1u64),
            (tiny_cfg(&[(4, 2), (8, 4)], PadMode::Same), 57, 2),
            (tiny_cfg(&[(3, 1), (6, 2)], PadMode::Same), 41, 3),
        ] {
            let plan = NetworkPlan::build(cfg).unwrap();
            let bank = WeightBank::synth(&plan, seed);
            let x = input(t_in, seed + 10);
            let sim = simulate_network(&plan, &bank, &x, &wide_opts()).unwrap();
            let reference = ref_network(&plan, &bank, &x, None, false).unwrap();
            assert_eq!(sim.outputs.sources.len(), reference.outputs.sources.len());
            for (a, b) in sim.outputs.sources.iter().zip(&reference.outputs.sources) {
                assert_eq!(a.data, b.data);
            }
        }
    }

    #[test]
    fn matches_reference_bit_for_bit_with_quantization() {
        let fmt = MinifloatFormat::fp8_shifted();
        let plan = NetworkPlan::build(tiny_cfg(&[(4, 2), (8, 4)], PadMode::Same)).unwrap();
        let bank = WeightBank::synth(&plan, 5);
        let x = input(48, 6);
        let mut opts = wide_opts();
        opts.quantize = Some(fmt);
        let sim = simulate_network(&plan, &bank, &x, &opts).unwrap();
        let reference = ref_network(&plan, &bank, &x, Some(&fmt), false).unwrap();
        for (a, b) in sim.outputs.sources.iter().zip(&reference.outputs.sources) {
            assert_eq!(a.data, b.data);
        }
    }

    #[test]
    fn zero_skip_changes_cycles_not_results() {
        let plan = NetworkPlan::build(tiny_cfg(&[(4, 2)], PadMode::Same)).unwrap();
        let bank = WeightBank::synth(&plan, 7);
        let x = input(60, 8);
        let on = simulate_network(&plan, &bank, &x, &wide_opts()).unwrap();
        let mut off_opts = wide_opts();
        off_opts.zero_skip = false;
        let off = simulate_network(&plan, &bank, &x, &off_opts).unwrap();
        for (a, b) in on.outputs.sources.iter().zip(&off.outputs.sources) {
            assert_eq!(a.data, b.data);
        }
        // The rectifiers zero out a large share of the activations, so the
        // pointwise rows must get cheaper with skipping on.
        assert!(on.trace.total_cycles() < off.trace.total_cycles());
        // Gated rows cost the same either way.
        for (ra, rb) in on.trace.rows.iter().zip(&off.trace.rows) {
            if ra.flow != FlowKind::Broadcast {
                assert_eq!(ra.mac_cycles, rb.mac_cycles, "{}", ra.label);
            }
        }
    }

    #[test]
    fn trace_slots_are_conserved() {
        let plan = NetworkPlan::build(tiny_cfg(&[(4, 2), (8, 4)], PadMode::Same)).unwrap();
        let bank = WeightBank::synth(&plan, 9);
        let x = input(57, 11);
        let sim = simulate_network(&plan, &bank, &x, &wide_opts()).unwrap();
        let shapes = plan.shape_trace(57).unwrap();
        for (cost, row) in sim.trace.rows.iter().zip(&plan.rows) {
            let slots = cost.performed_macs + cost.skipped_zero_macs;
            match row.spec {
                LayerSpec::Conv1D { .. } | LayerSpec::Pointwise { .. } => {
                    // Broadcast rows partition the dense count exactly.
                    assert_eq!(slots, cost.dense_macs, "{}", cost.label);
                }
                LayerSpec::DepthwiseDilated { channels, kernel, .. } => {
                    assert_eq!(
                        slots,
                        (cost.out_frames * kernel * channels) as u64,
                        "{}",
                        cost.label
                    );
                }
                LayerSpec::TransposedConv1D { in_ch, kernel, stride, .. } => {
                    let sched =
                        TransposedSchedule::new(kernel, stride, shapes[cost.row].t_in).unwrap();
                    assert_eq!(slots, sched.pair_count() * in_ch as u64, "{}", cost.label);
                }
                _ => assert_eq!(slots, 0, "{}", cost.label),
            }
        }
        assert_eq!(sim.trace.rows.len(), plan.rows.len());
    }

    #[test]
    fn fault_injection_perturbs_output() {
        let plan = NetworkPlan::build(tiny_cfg(&[(4, 2)], PadMode::Same)).unwrap();
        let bank = WeightBank::synth(&plan, 13);
        let x = input(40, 14);
        let clean = simulate_network(&plan, &bank, &x, &wide_opts()).unwrap();
        let mut faulty_opts = wide_opts();
        faulty_opts.fault_row = Some(plan.rows.len() - 1);
        let faulty = simulate_network(&plan, &bank, &x, &faulty_opts).unwrap();
        assert_ne!(
            clean.outputs.sources.last().unwrap().data,
            faulty.outputs.sources.last().unwrap().data
        );
    }

    #[test]
    fn hop_estimate_is_stable_across_input_lengths() {
        let plan = NetworkPlan::build(tiny_cfg(&[(4, 2), (8, 4)], PadMode::Same)).unwrap();
        let bank = WeightBank::synth(&plan, 15);
        let short = simulate_network(&plan, &bank, &input(120, 16), &wide_opts()).unwrap();
        let long = simulate_network(&plan, &bank, &input(480, 16), &wide_opts()).unwrap();
        let clock = SimOptions::new().pe.clock_hz;
        let a = hop_estimate(&plan, &short.trace, clock);
        let b = hop_estimate(&plan, &long.trace, clock);
        assert!(a.cycles_per_hop > 0.0 && b.cycles_per_hop > 0.0);
        // Steady-state normalisation: per-hop cost is a per-output property,
        // so a 4x longer input moves the estimate only through edge effects
        // and sparsity noise.
        let ratio = a.cycles_per_hop / b.cycles_per_hop;
        assert!((0.8..1.25).contains(&ratio), "ratio {ratio}");
        assert_eq!(a.hop_ms, 32.0);
    }

    #[test]
    fn quantized_full_rows_fit_default_buffers() {
        // The pruned geometry must tile through the default banks when
        // quantized; a capacity error here would mean the modelled memories
        // cannot run the workload they were sized for.
        let plan = NetworkPlan::build(NetworkConfig::pruned()).unwrap();
        let bank = WeightBank::synth(&plan, 17);
        let mut opts = SimOptions::new();
        opts.quantize = Some(MinifloatFormat::fp8_shifted());
        let x = input(1536, 18);
        let sim = simulate_network(&plan, &bank, &x, &opts).unwrap();
        assert!(sim.trace.total_cycles() > 0);
        let est = hop_estimate(&plan, &sim.trace, opts.pe.clock_hz);
        assert!(est.cycles_per_hop > 1e6, "implausibly cheap: {}", est.cycles_per_hop);
    }
}
