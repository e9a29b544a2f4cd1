//! Weight-space compression transforms and before/after reporting.
//!
//! Three transforms compose into the usual pipeline:
//!
//! 1. [`structured_shrink`]: slice a trained bank down to a smaller network
//!    geometry (fewer channels, blocks, repeats, branches or sources).
//! 2. [`unstructured_prune`]: zero out individual weights below a magnitude
//!    threshold and record them in the prune mask; [`prune_schedule`] walks an
//!    increasing threshold ladder under an external acceptance callback.
//! 3. [`quantize_bank`]: re-encode every surviving weight in a minifloat
//!    format.
//!
//! All three are pure: they take a bank and return a new one. [`report`]
//! turns a sequence of (weight size, MAC count) stage measurements into the
//! chained reduction percentages used in the analytics output.

use serde::{Deserialize, Serialize};

use crate::minifloat::MinifloatFormat;
use crate::model::{LayerRole, NetworkPlan, WeightBank, WeightTensor};
use crate::Error;

/// What a compression run should do. Any subset of the fields may be active;
/// the pipeline applies structured shrink first, then the threshold schedule,
/// then quantization, since that ordering never wastes work (slicing after
/// pruning would re-inspect weights the slice is about to drop).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PruneSpec {
    /// Structured target geometry. `None` keeps the current structure.
    #[serde(default)]
    pub target_config: Option<crate::model::NetworkConfig>,
    /// Unstructured thresholds, strictly increasing. Each step is offered to
    /// the acceptance callback; the last accepted step wins.
    #[serde(default)]
    pub thresholds: Vec<f64>,
    /// Optional budget the final bank should fit in, in bytes at the chosen
    /// storage width. Checked by the caller after the pipeline runs.
    #[serde(default)]
    pub target_weight_bytes: Option<u64>,
}

impl PruneSpec {
    /// Check the threshold ladder: non-negative, finite, strictly increasing.
    pub fn validate(&self) -> Result<(), Error> {
        let mut prev: Option<f64> = None;
        for (i, &t) in self.thresholds.iter().enumerate() {
            if t.is_nan() || t < 0.0 {
                return Err(Error::Config(format!(
                    "threshold {i} is {t}; thresholds must be non-negative"
                )));
            }
            if let Some(p) = prev {
                if t <= p {
                    return Err(Error::Config(format!(
                        "threshold {i} ({t}) does not increase over {p}"
                    )));
                }
            }
            prev = Some(t);
        }
        Ok(())
    }
}

/// How one axis of a weight tensor moves under a structured shrink: for each
/// kept target index, the source index it is copied from.
type AxisMap = Vec<usize>;

fn lowest(n: usize) -> AxisMap {
    (0..n).collect()
}

/// Map encoder branches of the target onto branches of the source. A branch
/// with an identical (kernel, stride) filter is matched to the first unused
/// source branch with that filter, so a target that drops one of the branches
/// keeps the survivor's weights no matter where it sits in the list. Branches
/// with no filter twin fall back to their own position.
fn branch_map(from: &NetworkPlan, to: &NetworkPlan) -> Vec<usize> {
    let mut used = vec![false; from.cfg.branches()];
    let mut map = Vec::with_capacity(to.cfg.branches());
    for (b, f) in to.cfg.encoder_filters.iter().enumerate() {
        let twin = from
            .cfg
            .encoder_filters
            .iter()
            .enumerate()
            .position(|(i, g)| !used[i] && g == f);
        let src = twin.unwrap_or(b);
        if src < used.len() {
            used[src] = true;
        }
        map.push(src);
    }
    map
}

/// Index map for an axis that is a concatenation of per-branch channel
/// blocks: target (branch, channel) reads source (mapped branch, channel).
fn cat_axis_map(branches: &[usize], n_from: usize, n_to: usize) -> AxisMap {
    let mut map = Vec::with_capacity(branches.len() * n_to);
    for &l in branches {
        for n in 0..n_to {
            map.push(l * n_from + n);
        }
    }
    map
}

/// Gather `from` through one index map per axis.
fn slice_tensor(from: &WeightTensor, maps: &[AxisMap]) -> Result<WeightTensor, Error> {
    if maps.len() != from.dims.len() {
        return Err(Error::Weights(format!(
            "axis count mismatch: {} maps for dims {:?}",
            maps.len(),
            from.dims
        )));
    }
    for (axis, (map, &dim)) in maps.iter().zip(&from.dims).enumerate() {
        if let Some(&bad) = map.iter().find(|&&i| i >= dim) {
            return Err(Error::Weights(format!(
                "incompatible target: axis {axis} asks for source index {bad} \
                 but the source dim is {dim}"
            )));
        }
    }
    let dims: Vec<usize> = maps.iter().map(|m| m.len()).collect();
    let mut strides = vec![1usize; from.dims.len()];
    for i in (0..from.dims.len().saturating_sub(1)).rev() {
        strides[i] = strides[i + 1] * from.dims[i + 1];
    }
    let total: usize = dims.iter().product();
    let mut data = Vec::with_capacity(total);
    let mut mask = from.pruned.as_ref().map(|_| Vec::with_capacity(total));
    let mut idx = vec![0usize; dims.len()];
    for _ in 0..total {
        let src: usize = idx.iter().zip(maps).zip(&strides).map(|((&i, m), &s)| m[i] * s).sum();
        data.push(from.data[src]);
        if let (Some(mask), Some(src_mask)) = (mask.as_mut(), from.pruned.as_ref()) {
            mask.push(src_mask[src]);
        }
        for ax in (0..idx.len()).rev() {
            idx[ax] += 1;
            if idx[ax] < dims[ax] {
                break;
            }
            idx[ax] = 0;
        }
    }
    Ok(WeightTensor { dims, data, pruned: mask })
}

/// Per-axis index maps for one target weight row, given its role.
fn shrink_maps(
    from: &NetworkPlan,
    to: &NetworkPlan,
    branches: &[usize],
    role: LayerRole,
    to_dims: &[usize],
) -> Vec<AxisMap> {
    let n_from = from.cfg.channels;
    let n_to = to.cfg.channels;
    let cat_from = from.cfg.concat_channels();
    match role {
        // The bottleneck's input axis is the concatenation of per-branch
        // encoder channels, so it must be sliced block-wise, not head-first.
        LayerRole::Bottleneck => {
            vec![lowest(to_dims[0]), cat_axis_map(branches, n_from, n_to)]
        }
        // The mask estimate's output axis stacks one concat block per source.
        LayerRole::MaskEstimate => {
            let per_source = cat_axis_map(branches, n_from, n_to);
            let mut out = Vec::with_capacity(to.cfg.num_sources * per_source.len());
            for s in 0..to.cfg.num_sources {
                out.extend(per_source.iter().map(|i| s * cat_from + i));
            }
            vec![out, lowest(to_dims[1])]
        }
        _ => to_dims.iter().map(|&d| lowest(d)).collect(),
    }
}

/// Slice a weight bank for `from` down to the geometry of `to`, keeping the
/// lowest-index slice along every axis. Rows that vanish from the structure
/// (higher repeats, blocks, branches or sources) are dropped whole. There is
/// no saliency ranking: a shrunk network is trained from scratch in practice,
/// so which channels survive is immaterial and lowest-index is the
/// reproducible choice.
pub fn structured_shrink(
    bank: &WeightBank,
    from: &NetworkPlan,
    to: &NetworkPlan,
) -> Result<WeightBank, Error> {
    bank.validate_for(from)?;
    let branches = branch_map(from, to);
    let from_rows = from.weight_rows();
    let mut tensors = Vec::new();
    for row in to.weight_rows() {
        let planned = &to.rows[row];
        let want_role = remap_role(planned.role, &branches);
        let src = from_rows
            .iter()
            .position(|&r| from.rows[r].role == want_role)
            .ok_or_else(|| {
                Error::Weights(format!(
                    "incompatible target: no source row matches {}",
                    planned.describe()
                ))
            })?;
        let to_dims = planned.spec.weight_dims().expect("weight row");
        let maps = shrink_maps(from, to, &branches, planned.role, &to_dims);
        let sliced = slice_tensor(&bank.tensors[src], &maps).map_err(|e| {
            Error::Weights(format!("{}: {e}", planned.describe()))
        })?;
        tensors.push(sliced);
    }
    let out = WeightBank { tensors };
    out.validate_for(to)?;
    Ok(out)
}

/// Rewrite a target row's role in the source plan's terms (encoder branch
/// indices may differ when branches were matched by filter geometry).
fn remap_role(role: LayerRole, branches: &[usize]) -> LayerRole {
    match role {
        LayerRole::Encoder { branch } => LayerRole::Encoder { branch: branches[branch] },
        LayerRole::Decoder { source, branch } => {
            LayerRole::Decoder { source, branch: branches[branch] }
        }
        other => other,
    }
}

/// Zero every weight with `|w| < threshold` and record it in the prune mask.
/// Already-masked weights stay masked, so repeated pruning only grows the
/// mask. Returns the new bank and its total masked fraction.
pub fn unstructured_prune(bank: &WeightBank, threshold: f64) -> Result<(WeightBank, f64), Error> {
    if threshold.is_nan() || threshold < 0.0 {
        return Err(Error::Config(format!(
            "prune threshold must be non-negative, got {threshold}"
        )));
    }
    let mut out = bank.clone();
    let mut masked = 0u64;
    let mut total = 0u64;
    for tensor in out.tensors.iter_mut() {
        let mut mask = tensor
            .pruned
            .take()
            .unwrap_or_else(|| vec![false; tensor.data.len()]);
        for (v, gone) in tensor.data.iter_mut().zip(mask.iter_mut()) {
            if v.abs() < threshold {
                *gone = true;
            }
            if *gone {
                *v = 0.0;
                masked += 1;
            }
        }
        total += mask.len() as u64;
        if mask.iter().any(|&g| g) {
            tensor.pruned = Some(mask);
        }
    }
    let sparsity = if total == 0 { 0.0 } else { masked as f64 / total as f64 };
    Ok((out, sparsity))
}

/// One rung of a pruning ladder.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct ScheduleStep {
    pub threshold: f64,
    pub sparsity: f64,
    pub accepted: bool,
}

/// Walk an increasing threshold ladder. Each candidate bank is offered to
/// `accept` (step index, sparsity, candidate); the first rejection stops the
/// ladder and the last accepted bank is returned. The callback is where an
/// accuracy check plugs in; pass `|_, _, _| true` to take the whole ladder.
pub fn prune_schedule<F>(
    bank: &WeightBank,
    thresholds: &[f64],
    mut accept: F,
) -> Result<(WeightBank, Vec<ScheduleStep>), Error>
where
    F: FnMut(usize, f64, &WeightBank) -> bool,
{
    PruneSpec {
        target_config: None,
        thresholds: thresholds.to_vec(),
        target_weight_bytes: None,
    }
    .validate()?;
    let mut current = bank.clone();
    let mut steps = Vec::with_capacity(thresholds.len());
    for (i, &t) in thresholds.iter().enumerate() {
        let (candidate, sparsity) = unstructured_prune(&current, t)?;
        let accepted = accept(i, sparsity, &candidate);
        steps.push(ScheduleStep { threshold: t, sparsity, accepted });
        if !accepted {
            break;
        }
        current = candidate;
    }
    Ok((current, steps))
}

/// Re-encode every weight in `fmt`. Magnitudes saturate at the format's max;
/// masked weights stay exactly zero.
pub fn quantize_bank(bank: &WeightBank, fmt: &MinifloatFormat) -> WeightBank {
    let mut out = bank.clone();
    for tensor in out.tensors.iter_mut() {
        for v in tensor.data.iter_mut() {
            *v = fmt.quantize(*v);
        }
        tensor.enforce_prune_mask();
    }
    out
}

/// Fraction of exactly-zero weights per tensor, in bank order.
pub fn per_layer_sparsity(bank: &WeightBank) -> Vec<f64> {
    bank.tensors
        .iter()
        .map(|t| {
            if t.is_empty() {
                0.0
            } else {
                (t.len() - t.nonzero_count()) as f64 / t.len() as f64
            }
        })
        .collect()
}

/// One measured point in a compression pipeline. The metrics are
/// unit-agnostic as long as every stage uses the same units; the pipeline
/// feeds bytes and MACs, printed-figure checks feed megabytes and GMACs.
#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub label: String,
    pub weight_bytes: f64,
    pub macs: f64,
}

impl Stage {
    pub fn new(label: impl Into<String>, weight_bytes: f64, macs: f64) -> Self {
        Stage { label: label.into(), weight_bytes, macs }
    }
}

/// Chained stage-over-stage reductions. All reduction fields are fractions in
/// [0, 1): 0.7718 means the stage removed 77.18% of its input.
#[derive(Debug, Clone, Serialize)]
pub struct CompressionReport {
    pub stages: Vec<Stage>,
    /// `1 - after/before` for each consecutive stage pair, weight metric.
    pub weight_stage_reductions: Vec<f64>,
    /// Same for the MAC metric.
    pub mac_stage_reductions: Vec<f64>,
    /// `1 - final/baseline`, weight metric.
    pub overall_weight_reduction: f64,
    /// `1 - final/baseline`, MAC metric.
    pub overall_mac_reduction: f64,
    /// Zero fraction per layer of the final bank, when one was attached.
    pub per_layer_sparsity: Vec<f64>,
}

impl CompressionReport {
    /// Attach the final bank's per-layer sparsity.
    pub fn with_layer_sparsity(mut self, bank: &WeightBank) -> Self {
        self.per_layer_sparsity = per_layer_sparsity(bank);
        self
    }

    /// Plain-text table, one row per stage.
    pub fn render_table(&self) -> String {
        fn eng(v: f64) -> String {
            if v >= 1e9 {
                format!("{:.3}G", v / 1e9)
            } else if v >= 1e6 {
                format!("{:.3}M", v / 1e6)
            } else if v >= 1e3 {
                format!("{:.3}K", v / 1e3)
            } else {
                format!("{v:.4}")
            }
        }
        let mut out = String::new();
        out.push_str(&format!(
            "{:<14} {:>12} {:>9} {:>12} {:>9}\n",
            "stage", "weight", "dW%", "macs", "dM%"
        ));
        for (i, s) in self.stages.iter().enumerate() {
            let (dw, dm) = if i == 0 {
                ("-".to_string(), "-".to_string())
            } else {
                (
                    format!("{:.2}", 100.0 * self.weight_stage_reductions[i - 1]),
                    format!("{:.2}", 100.0 * self.mac_stage_reductions[i - 1]),
                )
            };
            out.push_str(&format!(
                "{:<14} {:>12} {:>9} {:>12} {:>9}\n",
                s.label,
                eng(s.weight_bytes),
                dw,
                eng(s.macs),
                dm
            ));
        }
        out.push_str(&format!(
            "overall: weight -{:.2}%, macs -{:.2}%\n",
            100.0 * self.overall_weight_reduction,
            100.0 * self.overall_mac_reduction
        ));
        out
    }
}

/// Compute chained reductions over ordered stages. Requires at least one
/// stage and strictly positive metrics; a single stage reports 0% overall.
pub fn report(stages: &[Stage]) -> Result<CompressionReport, Error> {
    if stages.is_empty() {
        return Err(Error::Config("compression report needs at least one stage".into()));
    }
    for s in stages {
        if s.weight_bytes.is_nan() || s.weight_bytes <= 0.0 || s.macs.is_nan() || s.macs <= 0.0 {
            return Err(Error::Config(format!(
                "stage {} has non-positive metrics ({}, {})",
                s.label, s.weight_bytes, s.macs
            )));
        }
    }
    let reductions = |pick: fn(&Stage) -> f64| -> Vec<f64> {
        stages.windows(2).map(|w| 1.0 - pick(&w[1]) / pick(&w[0])).collect()
    };
    let first = &stages[0];
    let last = &stages[stages.len() - 1];
    Ok(CompressionReport {
        weight_stage_reductions: reductions(|s| s.weight_bytes),
        mac_stage_reductions: reductions(|s| s.macs),
        overall_weight_reduction: 1.0 - last.weight_bytes / first.weight_bytes,
        overall_mac_reduction: 1.0 - last.macs / first.macs,
        per_layer_sparsity: Vec::new(),
        stages: stages.to_vec(),
    })
}
