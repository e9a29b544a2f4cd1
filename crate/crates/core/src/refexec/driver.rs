use crate::model::{LayerRole, LayerSpec, NetworkPlan, PlannedLayer, Tensor1D};
use crate::Error;

/// What a row consumes. Every row takes one feature map except the mask
/// row, which combines the encoder concat with the estimated masks.
pub enum RowInput<'a> {
    Feed(&'a Tensor1D),
    Masking { features: &'a Tensor1D, masks: &'a Tensor1D },
}

/// Final per-source waveforms, plus every row's output when requested
/// (small networks only; a full-size network holds tens of megabytes per
/// row).
pub struct NetworkOutputs {
    pub sources: Vec<Tensor1D>,
    pub row_outputs: Option<Vec<Tensor1D>>,
}

/// Walk the plan's rows in order, routing tensors between them, and let
/// `run_row` do the per-row compute. Both executors run on top of this so
/// they cannot disagree about routing:
///
/// * encoder rows read the raw waveform, one chain per branch;
/// * before the bottleneck, branch outputs are lifted to the common frame
///   rate by frame repetition, trimmed to the shortest, and concatenated in
///   branch order;
/// * the separator chain runs row by row;
/// * the mask row sees the encoder concat (trimmed to the mask length if
///   valid padding shrank the chain) next to the estimated masks;
/// * each decoder reads its (source, branch) channel slab of the masked map
///   at the branch rate (every ratio-th frame);
/// * a source's branch waveforms are trimmed to the shortest and summed in
///   branch order. The summation is plain f64 addition; it is the only
///   arithmetic the driver itself performs.
pub fn drive_network(
    plan: &NetworkPlan,
    input: &Tensor1D,
    keep_rows: bool,
    mut run_row: impl FnMut(usize, &PlannedLayer, RowInput) -> Result<Tensor1D, Error>,
) -> Result<NetworkOutputs, Error> {
    if input.channels != 1 {
        return Err(Error::shape("driver", "network input must be a single-channel waveform"));
    }
    let cfg = &plan.cfg;
    let n = cfg.channels;
    let cat_ch = cfg.concat_channels();

    let mut row_outputs: Vec<Tensor1D> = Vec::new();
    let mut keep = |t: &Tensor1D| {
        if keep_rows {
            row_outputs.push(t.clone());
        }
    };

    let mut enc_branch: Vec<Option<Tensor1D>> = vec![None; cfg.branches()];
    let mut enc_cat: Option<Tensor1D> = None;
    let mut chain: Option<Tensor1D> = None;
    let mut masked: Option<Tensor1D> = None;
    let mut dec_waves: Vec<Vec<Tensor1D>> = vec![Vec::new(); cfg.num_sources];

    for (i, row) in plan.rows.iter().enumerate() {
        match row.role {
            LayerRole::Encoder { branch } => {
                let src = match &enc_branch[branch] {
                    None => input,
                    Some(t) => t,
                };
                let out = run_row(i, row, RowInput::Feed(src))?;
                keep(&out);
                enc_branch[branch] = Some(out);
            }
            LayerRole::Bottleneck
            | LayerRole::Block { .. }
            | LayerRole::MaskEstimate => {
                if chain.is_none() {
                    // First separator row: assemble the encoder concat.
                    let mut lifted: Vec<Tensor1D> = Vec::with_capacity(cfg.branches());
                    for (b, t) in enc_branch.iter().enumerate() {
                        let t = t.as_ref().ok_or_else(|| {
                            Error::shape("driver", format!("encoder branch {b} produced no output"))
                        })?;
                        lifted.push(t.repeat_frames(cfg.branch_ratio(b)));
                    }
                    let tc = lifted.iter().map(|t| t.len).min().expect("at least one branch");
                    let trimmed: Vec<Tensor1D> =
                        lifted.into_iter().map(|t| t.truncate_len(tc)).collect();
                    let refs: Vec<&Tensor1D> = trimmed.iter().collect();
                    let cat = Tensor1D::concat_channels(&refs);
                    debug_assert_eq!(cat.channels, cat_ch);
                    enc_cat = Some(cat);
                    chain = Some(enc_cat.clone().expect("just set"));
                }
                let cur = chain.take().expect("separator chain input");
                let out = run_row(i, row, RowInput::Feed(&cur))?;
                keep(&out);
                chain = Some(out);
            }
            LayerRole::MaskApply => {
                let masks = chain.take().ok_or_else(|| {
                    Error::shape("driver", "mask row reached before the separator chain ran")
                })?;
                let enc = enc_cat.as_ref().ok_or_else(|| {
                    Error::shape("driver", "mask row reached before the encoders ran")
                })?;
                let enc_trimmed = enc.truncate_len(masks.len.min(enc.len));
                if enc_trimmed.len != masks.len {
                    return Err(Error::shape(
                        "driver",
                        format!(
                            "mask length {} exceeds encoder length {}",
                            masks.len, enc.len
                        ),
                    ));
                }
                let out =
                    run_row(i, row, RowInput::Masking { features: &enc_trimmed, masks: &masks })?;
                keep(&out);
                masked = Some(out);
            }
            LayerRole::Decoder { source, branch } => {
                let m = masked.as_ref().ok_or_else(|| {
                    Error::shape("driver", "decoder reached before the mask was applied")
                })?;
                let slab = m
                    .slice_channels(source * cat_ch + branch * n, n)
                    .stride_frames(cfg.branch_ratio(branch));
                let out = run_row(i, row, RowInput::Feed(&slab))?;
                keep(&out);
                dec_waves[source].push(out);
            }
        }
    }

    let mut sources = Vec::with_capacity(cfg.num_sources);
    for (s, waves) in dec_waves.iter().enumerate() {
        if waves.is_empty() {
            return Err(Error::shape("driver", format!("source {s} has no decoder outputs")));
        }
        let len = waves.iter().map(|w| w.len).min().expect("nonempty");
        let mut sum = Tensor1D::zeros(1, len);
        for w in waves {
            for t in 0..len {
                sum.data[t] += w.data[t];
            }
        }
        sources.push(sum);
    }

    Ok(NetworkOutputs { sources, row_outputs: keep_rows.then_some(row_outputs) })
}

/// Convenience used by both executors: whether the row after `i` is a norm
/// row (in which case quantization is deferred until after it runs).
pub(crate) fn followed_by_normact(plan: &NetworkPlan, i: usize) -> bool {
    plan.rows
        .get(i + 1)
        .is_some_and(|r| matches!(r.spec, LayerSpec::NormAct { .. }))
}
