use super::driver::{drive_network, followed_by_normact, NetworkOutputs, RowInput};
use super::kernels;
use crate::minifloat::MinifloatFormat;
use crate::model::{LayerSpec, NetworkPlan, Tensor1D, WeightBank};
use crate::Error;

/// A full reference run.
pub struct RefRun {
    pub outputs: NetworkOutputs,
    /// Total weight multiplies, dense accounting.
    pub mac_events: u64,
    /// Weight multiplies per row (norm and mask rows are zero).
    pub per_row_macs: Vec<u64>,
}

/// Quantize every element in place. Exact-zero values stay exact zeros, so
/// sparsity is preserved.
pub fn quantize_tensor(t: &mut Tensor1D, fmt: &MinifloatFormat) {
    for v in t.data.iter_mut() {
        *v = fmt.quantize(*v);
    }
}

/// Execute the network with the textbook kernels.
///
/// With `quant` set, the run models format-coded activation storage: the
/// input waveform is quantized on entry and every row's output is quantized
/// before the next row reads it, except that a convolution immediately
/// followed by its norm row hands over wide values and the quantization
/// happens after the norm. Accumulation inside every row is f64 either way.
/// Weights are used exactly as stored in `bank`; quantizing weights is a
/// separate (compression) step.
///
/// The driver's final branch summation is plain f64 addition of quantized
/// row outputs and is not re-quantized; it models the output assembly done
/// outside the array.
pub fn ref_network(
    plan: &NetworkPlan,
    bank: &WeightBank,
    input: &[f64],
    quant: Option<&MinifloatFormat>,
    keep_rows: bool,
) -> Result<RefRun, Error> {
    bank.validate_for(plan)?;
    let weight_rows = plan.weight_rows();
    let mut per_row_macs = vec![0u64; plan.rows.len()];

    let mut wave = Tensor1D::from_samples(input);
    if let Some(fmt) = quant {
        quantize_tensor(&mut wave, fmt);
    }

    let mut next_weight = 0usize;
    let outputs = drive_network(plan, &wave, keep_rows, |i, row, feed| {
        let tensor = |feed: &RowInput| -> Result<kernels::ExecResult, Error> {
            match (row.spec, feed) {
                (LayerSpec::Conv1D { stride, .. }, RowInput::Feed(x)) => {
                    let w = &bank.tensors[next_weight];
                    kernels::ref_conv1d(x, w, stride)
                }
                (LayerSpec::Pointwise { .. }, RowInput::Feed(x)) => {
                    let w = &bank.tensors[next_weight];
                    kernels::ref_pointwise(x, w)
                }
                (LayerSpec::DepthwiseDilated { dilation, pad, .. }, RowInput::Feed(x)) => {
                    let w = &bank.tensors[next_weight];
                    kernels::ref_dilated(x, w, dilation, pad)
                }
                (LayerSpec::TransposedConv1D { stride, .. }, RowInput::Feed(x)) => {
                    let w = &bank.tensors[next_weight];
                    kernels::ref_transposed(x, w, stride)
                }
                (LayerSpec::ElementwiseMask { .. }, RowInput::Masking { features, masks }) => {
                    kernels::ref_mask(features, masks)
                }
                (LayerSpec::NormAct { kind, .. }, RowInput::Feed(x)) => {
                    Ok(kernels::ExecResult { output: kernels::ref_normact(x, kind), mac_events: 0 })
                }
                _ => Err(Error::shape("ref", format!("row {i} fed the wrong input kind"))),
            }
        };
        let result = tensor(&feed)?;
        if row.spec.weight_count() > 0 {
            debug_assert_eq!(weight_rows[next_weight], i);
            next_weight += 1;
        }
        per_row_macs[i] = result.mac_events;
        let mut out = result.output;
        if let Some(fmt) = quant {
            if !followed_by_normact(plan, i) {
                quantize_tensor(&mut out, fmt);
            }
        }
        Ok(out)
    })?;

    Ok(RefRun { outputs, mac_events: per_row_macs.iter().sum(), per_row_macs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{count_macs, CountMode, EncoderFilter, NetworkConfig, PadMode, WeightBank};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tiny_cfg(branches: &[(usize, usize)], pad: PadMode) -> NetworkConfig {
        NetworkConfig {
            encoder_filters: branches
                .iter()
                .map(|&(kernel, stride)| EncoderFilter { kernel, stride })
                .collect(),
            channels: 3,
            bottleneck: 4,
            block_channels: 5,
            blocks_per_repeat: 2,
            repeats: 1,
            dw_kernel: 3,
            dilation_schedule: vec![],
            num_sources: 2,
            dilated_padding: pad,
        }
    }

    fn random_input(len: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len).map(|_| rng.gen_range(-0.9..0.9)).collect()
    }

    #[test]
    fn mac_events_match_dense_analytic_counts() {
        for (cfg, t_in) in [
            (tiny_cfg(&[(4, 2)], PadMode::Valid), 64),
            (tiny_cfg(&[(4, 2), (8, 4)], PadMode::Same), 57),
            (tiny_cfg(&[(3, 1), (6, 2), (12, 4)], PadMode::Same), 50),
        ] {
            let plan = crate::model::NetworkPlan::build(cfg).unwrap();
            let bank = WeightBank::synth(&plan, 11);
            let run = ref_network(&plan, &bank, &random_input(t_in, 5), None, false).unwrap();
            let analytic = count_macs(&plan, t_in, CountMode::Naive).unwrap();
            assert_eq!(run.mac_events, analytic.total);
            assert_eq!(run.per_row_macs, analytic.per_row);
        }
    }

    #[test]
    fn outputs_have_traced_lengths() {
        let plan = crate::model::NetworkPlan::build(tiny_cfg(&[(4, 2), (8, 4)], PadMode::Same))
            .unwrap();
        let bank = WeightBank::synth(&plan, 3);
        let run = ref_network(&plan, &bank, &random_input(64, 1), None, true).unwrap();
        assert_eq!(run.outputs.sources.len(), 2);
        let want = plan.output_len_per_source(64).unwrap();
        for s in &run.outputs.sources {
            assert_eq!(s.len, want);
        }
        let shapes = plan.shape_trace(64).unwrap();
        let rows = run.outputs.row_outputs.unwrap();
        for ((t, shape), row) in rows.iter().zip(&shapes).zip(&plan.rows) {
            assert_eq!(t.len, shape.t_out, "{}", row.describe());
            assert_eq!(t.channels, shape.out_ch, "{}", row.describe());
        }
    }

    #[test]
    fn quantized_run_stores_representable_activations() {
        let fmt = MinifloatFormat::fp8_shifted();
        let plan = crate::model::NetworkPlan::build(tiny_cfg(&[(4, 2)], PadMode::Same)).unwrap();
        let bank = WeightBank::synth(&plan, 21);
        let run = ref_network(&plan, &bank, &random_input(40, 9), Some(&fmt), true).unwrap();
        // A row followed by its norm hands over wide values; every other row
        // output must already be format-coded (quantize is idempotent).
        let rows = run.outputs.row_outputs.unwrap();
        for (i, (t, row)) in rows.iter().zip(&plan.rows).enumerate() {
            if followed_by_normact(&plan, i) {
                continue;
            }
            for v in &t.data {
                assert_eq!(*v, fmt.quantize(*v), "row {} not format-coded", row.describe());
            }
        }
        // The unquantized path must differ somewhere, or the flag is dead.
        let wide = ref_network(&plan, &bank, &random_input(40, 9), None, false).unwrap();
        assert_ne!(wide.outputs.sources[0].data, run.outputs.sources[0].data);
    }

    #[test]
    fn branch_summation_adds_decoder_waves() {
        // One source, two identical branches: the output must be exactly the
        // sum of the two decoder waveforms.
        let mut cfg = tiny_cfg(&[(4, 2), (4, 2)], PadMode::Same);
        cfg.num_sources = 1;
        let plan = crate::model::NetworkPlan::build(cfg).unwrap();
        let bank = WeightBank::synth(&plan, 2);
        let run = ref_network(&plan, &bank, &random_input(32, 4), None, true).unwrap();
        let rows = run.outputs.row_outputs.unwrap();
        let n = rows.len();
        let (a, b) = (&rows[n - 2], &rows[n - 1]);
        let len = a.len.min(b.len);
        for t in 0..len {
            assert_eq!(run.outputs.sources[0].data[t], a.data[t] + b.data[t]);
        }
    }
}
