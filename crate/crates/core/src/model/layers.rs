use serde::Serialize;

use super::config::{NetworkConfig, PadMode};
use crate::{Error, HOP_SAMPLES};

/// Normalisation/activation applied in place after a convolution row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum NormActKind {
    /// Plain rectifier.
    Relu,
    /// Global layer norm over (channel, frame), then a rectifier.
    GlnRelu,
}

/// One computational layer, described by what it does to a channel-major
/// feature map. Weight-bearing variants carry their full geometry so a row is
/// self-describing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LayerSpec {
    /// Strided dense 1-D convolution (valid padding).
    Conv1D { in_ch: usize, out_ch: usize, kernel: usize, stride: usize },
    /// 1x1 convolution: a matrix applied per frame.
    Pointwise { in_ch: usize, out_ch: usize },
    /// Per-channel convolution with `dilation` zeros inserted between taps.
    DepthwiseDilated { channels: usize, kernel: usize, dilation: usize, pad: PadMode },
    /// Fractionally-strided 1-D convolution: conceptually inserts
    /// `stride - 1` zeros between input frames, then valid-correlates.
    TransposedConv1D { in_ch: usize, out_ch: usize, kernel: usize, stride: usize },
    /// Elementwise multiply of a feature map by an estimated mask.
    ElementwiseMask { channels: usize },
    /// Weightless normalisation + activation row.
    NormAct { kind: NormActKind, channels: usize },
}

impl LayerSpec {
    /// Kernel span in input frames once dilation zeros are counted.
    pub fn effective_kernel(&self) -> Option<usize> {
        match self {
            LayerSpec::Conv1D { kernel, .. } => Some(*kernel),
            LayerSpec::DepthwiseDilated { kernel, dilation, .. } => {
                Some(kernel + (kernel - 1) * dilation)
            }
            LayerSpec::TransposedConv1D { kernel, .. } => Some(*kernel),
            _ => None,
        }
    }

    /// Output frame count for `t_in` input frames.
    pub fn out_len(&self, t_in: usize) -> Result<usize, Error> {
        match self {
            LayerSpec::Conv1D { kernel, stride, .. } => {
                if t_in < *kernel {
                    return Err(Error::shape(
                        "conv1d",
                        format!("input of {t_in} frames shorter than kernel {kernel}"),
                    ));
                }
                Ok((t_in - kernel) / stride + 1)
            }
            LayerSpec::Pointwise { .. } => Ok(t_in),
            LayerSpec::DepthwiseDilated { pad, .. } => {
                let keff = self.effective_kernel().expect("depthwise has a kernel");
                match pad {
                    PadMode::Same => Ok(t_in),
                    PadMode::Valid => {
                        if t_in < keff {
                            return Err(Error::shape(
                                "depthwise",
                                format!(
                                    "input of {t_in} frames shorter than effective kernel {keff}"
                                ),
                            ));
                        }
                        Ok(t_in - keff + 1)
                    }
                }
            }
            LayerSpec::TransposedConv1D { kernel, stride, .. } => {
                if t_in == 0 || (t_in - 1) * stride + 1 < *kernel {
                    return Err(Error::shape(
                        "transposed",
                        format!(
                            "{t_in} input frames too few for kernel {kernel} at stride {stride}"
                        ),
                    ));
                }
                Ok((t_in - 1) * stride + 2 - kernel)
            }
            LayerSpec::ElementwiseMask { .. } | LayerSpec::NormAct { .. } => Ok(t_in),
        }
    }

    pub fn in_channels(&self) -> usize {
        match self {
            LayerSpec::Conv1D { in_ch, .. }
            | LayerSpec::Pointwise { in_ch, .. }
            | LayerSpec::TransposedConv1D { in_ch, .. } => *in_ch,
            LayerSpec::DepthwiseDilated { channels, .. }
            | LayerSpec::ElementwiseMask { channels }
            | LayerSpec::NormAct { channels, .. } => *channels,
        }
    }

    pub fn out_channels(&self) -> usize {
        match self {
            LayerSpec::Conv1D { out_ch, .. }
            | LayerSpec::Pointwise { out_ch, .. }
            | LayerSpec::TransposedConv1D { out_ch, .. } => *out_ch,
            LayerSpec::DepthwiseDilated { channels, .. }
            | LayerSpec::ElementwiseMask { channels }
            | LayerSpec::NormAct { channels, .. } => *channels,
        }
    }

    /// Shape of this row's weight tensor, if it has one. Conventions:
    /// `[out_ch, in_ch, kernel]` for convolutions, `[out_ch, in_ch]` for
    /// pointwise, `[channels, kernel]` for depthwise. None of the rows carry
    /// biases and the norm rows are non-parametric, so weights are the whole
    /// parameter budget.
    pub fn weight_dims(&self) -> Option<Vec<usize>> {
        match *self {
            LayerSpec::Conv1D { in_ch, out_ch, kernel, .. } => Some(vec![out_ch, in_ch, kernel]),
            LayerSpec::Pointwise { in_ch, out_ch } => Some(vec![out_ch, in_ch]),
            LayerSpec::DepthwiseDilated { channels, kernel, .. } => Some(vec![channels, kernel]),
            LayerSpec::TransposedConv1D { in_ch, out_ch, kernel, .. } => {
                Some(vec![out_ch, in_ch, kernel])
            }
            LayerSpec::ElementwiseMask { .. } | LayerSpec::NormAct { .. } => None,
        }
    }

    /// Number of scalar weights in this row.
    pub fn weight_count(&self) -> u64 {
        self.weight_dims().map_or(0, |d| d.iter().map(|&x| x as u64).product())
    }
}

/// Number of kernel taps a transposed convolution actually applies when
/// producing output sample `n` (1-based). Outputs cycle through `stride`
/// phases; tap `j` (1-based) contributes to phase `n` iff
/// `j = 2 - n (mod stride)`. Summed over any `stride` consecutive outputs the
/// counts add up to `kernel`, which is where the transposed work reduction
/// comes from.
pub fn transposed_phase_taps(kernel: usize, stride: usize, n: usize) -> usize {
    assert!(stride >= 1 && n >= 1);
    let s = stride as i64;
    let r = ((2 - n as i64) % s + s) % s;
    let k = kernel as i64;
    if r == 0 {
        (k / s) as usize
    } else if r <= k {
        ((k - r) / s + 1) as usize
    } else {
        0
    }
}

/// Which half of the workload a row belongs to when reporting the
/// encoder/decoder versus separator split.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Section {
    EncDec,
    Separator,
}

/// Position of a row inside a dilated block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum BlockPart {
    PwIn,
    Dw,
    PwOut,
}

/// Where a row sits in the network. Norm rows share the role of the
/// convolution they follow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum LayerRole {
    Encoder { branch: usize },
    Bottleneck,
    Block { repeat: usize, index: usize, part: BlockPart },
    MaskEstimate,
    MaskApply,
    Decoder { source: usize, branch: usize },
}

impl LayerRole {
    pub fn section(&self) -> Section {
        match self {
            LayerRole::Encoder { .. } | LayerRole::Decoder { .. } => Section::EncDec,
            _ => Section::Separator,
        }
    }
}

/// One row of the expanded network: an operation plus its position.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PlannedLayer {
    pub role: LayerRole,
    pub spec: LayerSpec,
}

impl PlannedLayer {
    /// Short human-readable label, used in tables and schedule dumps.
    pub fn describe(&self) -> String {
        let role = match self.role {
            LayerRole::Encoder { branch } => format!("enc{branch}"),
            LayerRole::Bottleneck => "bottleneck".into(),
            LayerRole::Block { repeat, index, part } => format!(
                "blk{repeat}.{index}.{}",
                match part {
                    BlockPart::PwIn => "pw_in",
                    BlockPart::Dw => "dw",
                    BlockPart::PwOut => "pw_out",
                }
            ),
            LayerRole::MaskEstimate => "mask_est".into(),
            LayerRole::MaskApply => "mask_apply".into(),
            LayerRole::Decoder { source, branch } => format!("dec{source}.{branch}"),
        };
        let op = match self.spec {
            LayerSpec::Conv1D { in_ch, out_ch, kernel, stride } => {
                format!("conv1d {in_ch}->{out_ch} k{kernel} s{stride}")
            }
            LayerSpec::Pointwise { in_ch, out_ch } => format!("pointwise {in_ch}->{out_ch}"),
            LayerSpec::DepthwiseDilated { channels, kernel, dilation, .. } => {
                format!("depthwise {channels} k{kernel} d{dilation}")
            }
            LayerSpec::TransposedConv1D { in_ch, out_ch, kernel, stride } => {
                format!("transposed {in_ch}->{out_ch} k{kernel} s{stride}")
            }
            LayerSpec::ElementwiseMask { channels } => format!("mask x{channels}"),
            LayerSpec::NormAct { kind, .. } => match kind {
                NormActKind::Relu => "relu".into(),
                NormActKind::GlnRelu => "gln+relu".into(),
            },
        };
        format!("{role}: {op}")
    }
}

/// Frame extents of one row for a particular input length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct RowShape {
    pub t_in: usize,
    pub t_out: usize,
    pub in_ch: usize,
    pub out_ch: usize,
}

/// A config expanded into its ordered rows.
///
/// Row order is fixed and documented here because three independent
/// consumers (analytics, the reference executor, the simulator) walk it and
/// must agree:
///
/// 1. per encoder branch: `Conv1D` then `NormAct(Relu)`;
/// 2. bottleneck `Pointwise` then `NormAct(GlnRelu)`; the bottleneck input
///    is the branch outputs lifted to the common frame rate by frame
///    repetition, trimmed to the shortest, and concatenated channel-wise in
///    branch order;
/// 3. for each repeat r and block x: `Pointwise`, `NormAct(GlnRelu)`,
///    `DepthwiseDilated`, `NormAct(GlnRelu)`, `Pointwise`, `NormAct(GlnRelu)`;
/// 4. mask estimate `Pointwise` (to sources * concat channels) then
///    `NormAct(Relu)`;
/// 5. one `ElementwiseMask` row applying every source's mask to the encoder
///    concat (trimmed to the mask length if valid padding shrank it);
/// 6. per source, per branch: `TransposedConv1D` back to one waveform. Each
///    decoder reads its branch's channel slab of the masked map, dropped back
///    to the branch rate by taking every ratio-th frame. A source's branch
///    waveforms are summed after trimming to the shortest.
#[derive(Debug, Clone)]
pub struct NetworkPlan {
    pub cfg: NetworkConfig,
    pub rows: Vec<PlannedLayer>,
}

impl NetworkPlan {
    pub fn build(mut cfg: NetworkConfig) -> Result<Self, Error> {
        cfg.finalize()?;
        let n = cfg.channels;
        let cat = cfg.concat_channels();
        let b_ch = cfg.bottleneck;
        let h = cfg.block_channels;
        let mut rows = Vec::new();

        for (b, f) in cfg.encoder_filters.iter().enumerate() {
            let role = LayerRole::Encoder { branch: b };
            rows.push(PlannedLayer {
                role,
                spec: LayerSpec::Conv1D { in_ch: 1, out_ch: n, kernel: f.kernel, stride: f.stride },
            });
            rows.push(PlannedLayer {
                role,
                spec: LayerSpec::NormAct { kind: NormActKind::Relu, channels: n },
            });
        }

        rows.push(PlannedLayer {
            role: LayerRole::Bottleneck,
            spec: LayerSpec::Pointwise { in_ch: cat, out_ch: b_ch },
        });
        rows.push(PlannedLayer {
            role: LayerRole::Bottleneck,
            spec: LayerSpec::NormAct { kind: NormActKind::GlnRelu, channels: b_ch },
        });

        for repeat in 0..cfg.repeats {
            for index in 0..cfg.blocks_per_repeat {
                let part = |p| LayerRole::Block { repeat, index, part: p };
                let gln = |channels| LayerSpec::NormAct { kind: NormActKind::GlnRelu, channels };
                rows.push(PlannedLayer {
                    role: part(BlockPart::PwIn),
                    spec: LayerSpec::Pointwise { in_ch: b_ch, out_ch: h },
                });
                rows.push(PlannedLayer { role: part(BlockPart::PwIn), spec: gln(h) });
                rows.push(PlannedLayer {
                    role: part(BlockPart::Dw),
                    spec: LayerSpec::DepthwiseDilated {
                        channels: h,
                        kernel: cfg.dw_kernel,
                        dilation: cfg.dilation(index),
                        pad: cfg.dilated_padding,
                    },
                });
                rows.push(PlannedLayer { role: part(BlockPart::Dw), spec: gln(h) });
                rows.push(PlannedLayer {
                    role: part(BlockPart::PwOut),
                    spec: LayerSpec::Pointwise { in_ch: h, out_ch: b_ch },
                });
                rows.push(PlannedLayer { role: part(BlockPart::PwOut), spec: gln(b_ch) });
            }
        }

        rows.push(PlannedLayer {
            role: LayerRole::MaskEstimate,
            spec: LayerSpec::Pointwise { in_ch: b_ch, out_ch: cfg.num_sources * cat },
        });
        rows.push(PlannedLayer {
            role: LayerRole::MaskEstimate,
            spec: LayerSpec::NormAct { kind: NormActKind::Relu, channels: cfg.num_sources * cat },
        });

        rows.push(PlannedLayer {
            role: LayerRole::MaskApply,
            spec: LayerSpec::ElementwiseMask { channels: cfg.num_sources * cat },
        });

        for source in 0..cfg.num_sources {
            for (b, f) in cfg.encoder_filters.iter().enumerate() {
                rows.push(PlannedLayer {
                    role: LayerRole::Decoder { source, branch: b },
                    spec: LayerSpec::TransposedConv1D {
                        in_ch: n,
                        out_ch: 1,
                        kernel: f.kernel,
                        stride: f.stride,
                    },
                });
            }
        }

        Ok(Self { cfg, rows })
    }

    /// Frame count of the concatenated encoder output for `t_in` samples:
    /// every branch lifted to the common rate, trimmed to the shortest.
    pub fn common_frames(&self, t_in: usize) -> Result<usize, Error> {
        let mut tc = usize::MAX;
        for (b, f) in self.cfg.encoder_filters.iter().enumerate() {
            let spec = LayerSpec::Conv1D {
                in_ch: 1,
                out_ch: self.cfg.channels,
                kernel: f.kernel,
                stride: f.stride,
            };
            tc = tc.min(spec.out_len(t_in)? * self.cfg.branch_ratio(b));
        }
        Ok(tc)
    }

    /// Per-row frame extents for `t_in` input samples. This is the single
    /// source of truth for shapes; the complexity counters and both
    /// executors consume it.
    pub fn shape_trace(&self, t_in: usize) -> Result<Vec<RowShape>, Error> {
        let mut shapes = Vec::with_capacity(self.rows.len());
        let mut enc_out = vec![0usize; self.cfg.branches()];
        // Frame count flowing through the separator chain; set when the
        // bottleneck row is reached.
        let mut cursor = 0usize;
        for row in &self.rows {
            let shape = match row.role {
                LayerRole::Encoder { branch } => match row.spec {
                    LayerSpec::Conv1D { .. } => {
                        let t_out = row.spec.out_len(t_in)?;
                        enc_out[branch] = t_out;
                        RowShape {
                            t_in,
                            t_out,
                            in_ch: row.spec.in_channels(),
                            out_ch: row.spec.out_channels(),
                        }
                    }
                    _ => RowShape {
                        t_in: enc_out[branch],
                        t_out: enc_out[branch],
                        in_ch: row.spec.in_channels(),
                        out_ch: row.spec.out_channels(),
                    },
                },
                LayerRole::Decoder { branch, .. } => {
                    let t_dec = cursor.div_ceil(self.cfg.branch_ratio(branch));
                    RowShape {
                        t_in: t_dec,
                        t_out: row.spec.out_len(t_dec)?,
                        in_ch: row.spec.in_channels(),
                        out_ch: row.spec.out_channels(),
                    }
                }
                _ => {
                    if matches!(
                        (row.role, row.spec),
                        (LayerRole::Bottleneck, LayerSpec::Pointwise { .. })
                    ) {
                        cursor = self.common_frames(t_in)?;
                    }
                    let t_out = row.spec.out_len(cursor)?;
                    let shape = RowShape {
                        t_in: cursor,
                        t_out,
                        in_ch: row.spec.in_channels(),
                        out_ch: row.spec.out_channels(),
                    };
                    cursor = t_out;
                    shape
                }
            };
            shapes.push(shape);
        }
        Ok(shapes)
    }

    /// Waveform length produced per source: branch reconstructions are
    /// trimmed to the shortest before summation.
    pub fn output_len_per_source(&self, t_in: usize) -> Result<usize, Error> {
        let shapes = self.shape_trace(t_in)?;
        let mut out = usize::MAX;
        for (row, shape) in self.rows.iter().zip(&shapes) {
            if matches!(row.role, LayerRole::Decoder { source: 0, .. }) {
                out = out.min(shape.t_out);
            }
        }
        if out == usize::MAX {
            return Err(Error::shape("plan", "network has no decoder rows"));
        }
        Ok(out)
    }

    /// Indices of rows that carry weights, in row order. Weight banks store
    /// one tensor per entry.
    pub fn weight_rows(&self) -> Vec<usize> {
        self.rows
            .iter()
            .enumerate()
            .filter(|(_, r)| r.spec.weight_count() > 0)
            .map(|(i, _)| i)
            .collect()
    }

    /// Steady-state output elements per frame-hop of input (one hop is
    /// `HOP_SAMPLES` samples) measured in frames. Encoder rows run at their
    /// branch rate, decoder rows emit one sample per input sample, and
    /// everything between runs at the common (fastest-branch) frame rate.
    pub fn steady_frames_per_hop(&self, row: usize) -> f64 {
        let hop = HOP_SAMPLES as f64;
        match self.rows[row].role {
            LayerRole::Encoder { branch } => hop / self.cfg.encoder_filters[branch].stride as f64,
            LayerRole::Decoder { .. } => hop,
            _ => hop / self.cfg.min_stride() as f64,
        }
    }
}
