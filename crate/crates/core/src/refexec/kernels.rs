use crate::model::{NormActKind, PadMode, Tensor1D, WeightTensor};
use crate::Error;

/// Variance floor for the global layer norm.
pub const GLN_EPSILON: f64 = 1e-8;

/// A layer's output together with the number of weight multiplies performed.
#[derive(Debug, Clone, PartialEq)]
pub struct ExecResult {
    pub output: Tensor1D,
    pub mac_events: u64,
}

fn w3(w: &WeightTensor, o: usize, c: usize, k: usize) -> f64 {
    let (in_ch, kernel) = (w.dims[1], w.dims[2]);
    w.data[(o * in_ch + c) * kernel + k]
}

fn w2(w: &WeightTensor, o: usize, c: usize) -> f64 {
    w.data[o * w.dims[1] + c]
}

fn expect_dims(w: &WeightTensor, n: usize, ctx: &str) -> Result<(), Error> {
    if w.dims.len() != n {
        return Err(Error::shape(ctx, format!("weight tensor must have {n} dims, got {:?}", w.dims)));
    }
    Ok(())
}

/// Strided valid 1-D convolution. Weights are `[out_ch, in_ch, kernel]`.
///
/// Each output accumulates channels in ascending order with kernel taps
/// innermost: `out[o,i] = sum_c sum_k w[o,c,k] * x[c, i*stride + k]`.
pub fn ref_conv1d(x: &Tensor1D, w: &WeightTensor, stride: usize) -> Result<ExecResult, Error> {
    expect_dims(w, 3, "conv1d")?;
    let (out_ch, in_ch, kernel) = (w.dims[0], w.dims[1], w.dims[2]);
    if x.channels != in_ch {
        return Err(Error::shape("conv1d", format!("{} input channels, weights expect {in_ch}", x.channels)));
    }
    if x.len < kernel {
        return Err(Error::shape("conv1d", format!("input of {} frames shorter than kernel {kernel}", x.len)));
    }
    let t_out = (x.len - kernel) / stride + 1;
    let mut out = Tensor1D::zeros(out_ch, t_out);
    let mut macs = 0u64;
    for o in 0..out_ch {
        for i in 0..t_out {
            let mut acc = 0.0f64;
            for c in 0..in_ch {
                for k in 0..kernel {
                    acc += w3(w, o, c, k) * x.get(c, i * stride + k);
                    macs += 1;
                }
            }
            out.set(o, i, acc);
        }
    }
    Ok(ExecResult { output: out, mac_events: macs })
}

/// 1x1 convolution: per-frame matrix multiply, channels ascending.
pub fn ref_pointwise(x: &Tensor1D, w: &WeightTensor) -> Result<ExecResult, Error> {
    expect_dims(w, 2, "pointwise")?;
    let (out_ch, in_ch) = (w.dims[0], w.dims[1]);
    if x.channels != in_ch {
        return Err(Error::shape("pointwise", format!("{} input channels, weights expect {in_ch}", x.channels)));
    }
    let mut out = Tensor1D::zeros(out_ch, x.len);
    let mut macs = 0u64;
    for o in 0..out_ch {
        for i in 0..x.len {
            let mut acc = 0.0f64;
            for c in 0..in_ch {
                acc += w2(w, o, c) * x.get(c, i);
                macs += 1;
            }
            out.set(o, i, acc);
        }
    }
    Ok(ExecResult { output: out, mac_events: macs })
}

/// Dilated depthwise convolution, run the dense way: the kernel is expanded
/// with `dilation` explicit zeros between taps and every expanded tap is
/// multiplied, inserted zeros included. Real taps therefore land in
/// ascending tap order. Weights are `[channels, kernel]`. `Same` padding is
/// symmetric (the expanded kernel length is odd whenever the tap count is
/// odd, which holds for every bundled geometry).
pub fn ref_dilated(
    x: &Tensor1D,
    w: &WeightTensor,
    dilation: usize,
    pad: PadMode,
) -> Result<ExecResult, Error> {
    expect_dims(w, 2, "depthwise")?;
    let (channels, kernel) = (w.dims[0], w.dims[1]);
    if x.channels != channels {
        return Err(Error::shape("depthwise", format!("{} input channels, weights expect {channels}", x.channels)));
    }
    let keff = kernel + (kernel - 1) * dilation;
    let (t_out, left_pad) = match pad {
        PadMode::Same => (x.len, (keff - 1) / 2),
        PadMode::Valid => {
            if x.len < keff {
                return Err(Error::shape(
                    "depthwise",
                    format!("input of {} frames shorter than effective kernel {keff}", x.len),
                ));
            }
            (x.len - keff + 1, 0)
        }
    };
    // Materialise the zero-inserted kernel once per channel.
    let mut expanded = vec![0.0f64; keff];
    let mut out = Tensor1D::zeros(channels, t_out);
    let mut macs = 0u64;
    for c in 0..channels {
        expanded.iter_mut().for_each(|v| *v = 0.0);
        for j in 0..kernel {
            expanded[j * (dilation + 1)] = w.data[c * kernel + j];
        }
        for i in 0..t_out {
            let mut acc = 0.0f64;
            for (kk, &wv) in expanded.iter().enumerate() {
                let idx = (i + kk) as isize - left_pad as isize;
                let xv = if idx < 0 || idx as usize >= x.len { 0.0 } else { x.get(c, idx as usize) };
                acc += wv * xv;
                macs += 1;
            }
            out.set(c, i, acc);
        }
    }
    Ok(ExecResult { output: out, mac_events: macs })
}

/// Fractionally-strided convolution, run the dense way: `stride - 1` zeros
/// are inserted between input frames and the result is valid-correlated with
/// the stored kernel (no flip):
/// `out[o,i] = sum_k sum_c w[o,c,k] * z[c, i+k]`,
/// taps ascending with channels accumulated innermost. Weights are
/// `[out_ch, in_ch, kernel]`. Output length is `(t_in-1)*stride + 2 - kernel`:
/// only positions fully covered by the kernel are kept.
pub fn ref_transposed(x: &Tensor1D, w: &WeightTensor, stride: usize) -> Result<ExecResult, Error> {
    expect_dims(w, 3, "transposed")?;
    let (out_ch, in_ch, kernel) = (w.dims[0], w.dims[1], w.dims[2]);
    if x.channels != in_ch {
        return Err(Error::shape("transposed", format!("{} input channels, weights expect {in_ch}", x.channels)));
    }
    if x.len == 0 || (x.len - 1) * stride + 1 < kernel {
        return Err(Error::shape(
            "transposed",
            format!("{} input frames too few for kernel {kernel} at stride {stride}", x.len),
        ));
    }
    // Zero-stuffed input: z[t*stride] = x[t].
    let z_len = (x.len - 1) * stride + 1;
    let mut z = Tensor1D::zeros(in_ch, z_len);
    for c in 0..in_ch {
        for t in 0..x.len {
            z.set(c, t * stride, x.get(c, t));
        }
    }
    let t_out = z_len - kernel + 1;
    let mut out = Tensor1D::zeros(out_ch, t_out);
    let mut macs = 0u64;
    for o in 0..out_ch {
        for i in 0..t_out {
            let mut acc = 0.0f64;
            for k in 0..kernel {
                for c in 0..in_ch {
                    acc += w3(w, o, c, k) * z.get(c, i + k);
                    macs += 1;
                }
            }
            out.set(o, i, acc);
        }
    }
    Ok(ExecResult { output: out, mac_events: macs })
}

/// Apply per-source masks to a shared feature map. `masks` holds every
/// source's mask stacked channel-wise (`sources * features.channels` rows);
/// the output has the same stacked layout:
/// `out[s*C + c, t] = masks[s*C + c, t] * features[c, t]`.
/// Mask multiplies are not weight multiplies, so `mac_events` is zero.
pub fn ref_mask(features: &Tensor1D, masks: &Tensor1D) -> Result<ExecResult, Error> {
    if features.channels == 0 || !masks.channels.is_multiple_of(features.channels) {
        return Err(Error::shape(
            "mask",
            format!("{} mask rows not a multiple of {} feature rows", masks.channels, features.channels),
        ));
    }
    if features.len != masks.len {
        return Err(Error::shape(
            "mask",
            format!("feature length {} != mask length {}", features.len, masks.len),
        ));
    }
    let c_feat = features.channels;
    let out = Tensor1D::from_fn(masks.channels, masks.len, |sc, t| {
        masks.get(sc, t) * features.get(sc % c_feat, t)
    });
    Ok(ExecResult { output: out, mac_events: 0 })
}

/// Normalisation/activation rows. `Relu` clamps negatives to zero.
/// `GlnRelu` is a global layer norm: one mean and one (biased) variance over
/// every element of the map, no learned affine, then a rectifier. Statistics
/// are accumulated in storage order (channel-major) so any executor
/// reproduces them bit for bit.
pub fn ref_normact(x: &Tensor1D, kind: NormActKind) -> Tensor1D {
    match kind {
        NormActKind::Relu => {
            Tensor1D::from_fn(x.channels, x.len, |c, t| x.get(c, t).max(0.0))
        }
        NormActKind::GlnRelu => {
            let n = x.data.len() as f64;
            let mut mean = 0.0f64;
            for v in &x.data {
                mean += v;
            }
            mean /= n;
            let mut var = 0.0f64;
            for v in &x.data {
                let d = v - mean;
                var += d * d;
            }
            var /= n;
            let scale = 1.0 / (var + GLN_EPSILON).sqrt();
            Tensor1D::from_fn(x.channels, x.len, |c, t| ((x.get(c, t) - mean) * scale).max(0.0))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn tensor(ch: usize, vals: &[f64]) -> Tensor1D {
        assert_eq!(vals.len() % ch, 0);
        Tensor1D { channels: ch, len: vals.len() / ch, data: vals.to_vec() }
    }

    fn wt(dims: &[usize], vals: &[f64]) -> WeightTensor {
        assert_eq!(vals.len(), dims.iter().product::<usize>());
        WeightTensor { dims: dims.to_vec(), data: vals.to_vec(), pruned: None }
    }

    #[test]
    fn boxcar_conv_sums_window() {
        let x = tensor(1, &[1.0, 2.0, 3.0]);
        let w = wt(&[1, 1, 3], &[1.0, 1.0, 1.0]);
        let r = ref_conv1d(&x, &w, 1).unwrap();
        assert_eq!(r.output.data, vec![6.0]);
        assert_eq!(r.mac_events, 3);
    }

    #[test]
    fn dilated_first_output_uses_strided_taps() {
        // Two zeros between taps: the first output of a valid dilated conv
        // reads inputs 1, 4 and 7 (1-based) against taps 1, 2 and 3.
        let x = tensor(1, &[10.0, 0.0, 0.0, 20.0, 0.0, 0.0, 30.0]);
        let w = wt(&[1, 3], &[2.0, 3.0, 5.0]);
        let r = ref_dilated(&x, &w, 2, PadMode::Valid).unwrap();
        assert_eq!(r.output.data, vec![10.0 * 2.0 + 20.0 * 3.0 + 30.0 * 5.0]);
        // Dense execution charges the whole zero-inserted kernel.
        assert_eq!(r.mac_events, 7);
    }

    #[test]
    fn dilated_same_padding_keeps_length_and_centres_kernel() {
        let x = tensor(1, &[1.0, 2.0, 4.0, 8.0, 16.0]);
        let w = wt(&[1, 3], &[1.0, 1.0, 1.0]);
        // d=1: expanded kernel 1 0 1 0 1, left pad 2.
        let r = ref_dilated(&x, &w, 1, PadMode::Same).unwrap();
        assert_eq!(r.output.len, 5);
        assert_eq!(r.output.data, vec![
            1.0 + 4.0,        // pads, x0, x2
            2.0 + 8.0,        // pads, x1, x3
            1.0 + 4.0 + 16.0, // x0, x2, x4
            2.0 + 8.0,        // x1, x3, pad
            4.0 + 16.0,       // x2, x4, pad
        ]);
        assert_eq!(r.mac_events, 5 * 5);
    }

    #[test]
    fn transposed_phases_match_hand_expansion() {
        // Kernel 9, stride 3: each output reads one phase of three taps.
        let w = wt(&[1, 1, 9], &[2.0, 3.0, 5.0, 7.0, 11.0, 13.0, 17.0, 19.0, 23.0]);
        // Three frames stuff to 7 < 9 positions, too few to cover the kernel.
        let x3 = tensor(1, &[1.0, 10.0, 100.0]);
        assert!(ref_transposed(&x3, &w, 3).is_err());
        let x4 = tensor(1, &[1.0, 10.0, 100.0, 1000.0]);
        let r4 = ref_transposed(&x4, &w, 3).unwrap();
        assert_eq!(r4.output.len, 2);
        // out[1] (1-based): taps 1,4,7 against inputs 1,2,3.
        assert_eq!(r4.output.data[0], 2.0 * 1.0 + 7.0 * 10.0 + 17.0 * 100.0);
        // out[2]: taps 3,6,9, each one input frame later.
        assert_eq!(r4.output.data[1], 5.0 * 10.0 + 13.0 * 100.0 + 23.0 * 1000.0);
        assert_eq!(r4.mac_events, 2 * 9);
    }

    #[test]
    fn transposed_matches_scatter_oracle() {
        // Independent formulation: every input frame scatters x*w[k] to
        // output position t*stride - k (dropping out-of-range hits).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        for _ in 0..50 {
            let in_ch: usize = rng.gen_range(1..4);
            let kernel: usize = rng.gen_range(1..10);
            let stride: usize = rng.gen_range(1..4);
            let t_in = rng.gen_range(kernel.div_ceil(stride).max(2)..12);
            if (t_in - 1) * stride + 1 < kernel {
                continue;
            }
            let x = Tensor1D::from_fn(in_ch, t_in, |_, _| rng.gen_range(-2.0..2.0));
            let w = WeightTensor {
                dims: vec![1, in_ch, kernel],
                data: (0..in_ch * kernel).map(|_| rng.gen_range(-2.0..2.0)).collect(),
                pruned: None,
            };
            let got = ref_transposed(&x, &w, stride).unwrap().output;
            let t_out = (t_in - 1) * stride + 2 - kernel;
            let mut want = vec![0.0f64; t_out];
            for t in 0..t_in {
                for k in 0..kernel {
                    for c in 0..in_ch {
                        let p = t as isize * stride as isize - k as isize;
                        if p >= 0 && (p as usize) < t_out {
                            want[p as usize] += x.get(c, t) * w.data[c * kernel + k];
                        }
                    }
                }
            }
            for (a, b) in got.data.iter().zip(&want) {
                assert!((a - b).abs() <= 1e-9 * b.abs().max(1.0), "{a} vs {b}");
            }
        }
    }

    #[test]
    fn pointwise_is_per_frame_matrix() {
        let x = tensor(2, &[3.0, 1.0, 2.0, 5.0]); // ch0 = [3,1], ch1 = [2,5]
        let w = wt(&[2, 2], &[1.0, 10.0, 100.0, 1000.0]);
        let r = ref_pointwise(&x, &w).unwrap();
        assert_eq!(r.output.data, vec![23.0, 51.0, 2300.0, 5100.0]);
        assert_eq!(r.mac_events, 8);
    }

    #[test]
    fn conv_is_linear_in_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = Tensor1D::from_fn(3, 20, |_, _| rng.gen_range(-1.0..1.0));
        let w = WeightTensor {
            dims: vec![2, 3, 4],
            data: (0..24).map(|_| rng.gen_range(-1.0..1.0)).collect(),
            pruned: None,
        };
        let base = ref_conv1d(&x, &w, 2).unwrap().output;
        let scaled_in = Tensor1D::from_fn(3, 20, |c, t| 3.5 * x.get(c, t));
        let scaled_out = ref_conv1d(&scaled_in, &w, 2).unwrap().output;
        for (a, b) in scaled_out.data.iter().zip(&base.data) {
            assert!((a - 3.5 * b).abs() <= 1e-9 * b.abs().max(1.0));
        }
    }

    #[test]
    fn mask_broadcasts_features_across_sources() {
        let feat = tensor(2, &[1.0, 2.0, 3.0, 4.0]);
        let masks = tensor(4, &[0.5, 0.5, 1.0, 0.0, 2.0, 0.0, 1.0, 1.0]);
        let r = ref_mask(&feat, &masks).unwrap();
        assert_eq!(r.output.data, vec![0.5, 1.0, 3.0, 0.0, 2.0, 0.0, 3.0, 4.0]);
        assert_eq!(r.mac_events, 0);
    }

    #[test]
    fn gln_normalises_then_rectifies() {
        let x = tensor(1, &[1.0, 3.0]);
        // mean 2, var 1: outputs (-1, 1) / sqrt(1 + eps), rectified.
        let y = ref_normact(&x, NormActKind::GlnRelu);
        assert_eq!(y.data[0], 0.0);
        assert!((y.data[1] - 1.0 / (1.0 + GLN_EPSILON).sqrt()).abs() < 1e-15);
        let r = ref_normact(&tensor(1, &[-2.0, 5.0]), NormActKind::Relu);
        assert_eq!(r.data, vec![0.0, 5.0]);
    }

    #[test]
    fn shape_errors_are_reported() {
        let x = tensor(1, &[1.0, 2.0]);
        let w = wt(&[1, 1, 3], &[1.0, 1.0, 1.0]);
        assert!(ref_conv1d(&x, &w, 1).is_err());
        assert!(ref_transposed(&x, &wt(&[1, 1, 5], &[1.0; 5]), 2).is_err());
        let wrong_ch = wt(&[1, 2, 2], &[1.0; 4]);
        assert!(ref_conv1d(&x, &wrong_ch, 1).is_err());
    }
}
