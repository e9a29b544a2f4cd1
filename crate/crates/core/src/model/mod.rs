//! Network description and static analysis.
//!
//! A separator network is described by a [`NetworkConfig`] (loaded from TOML
//! or built from the bundled fixtures), expanded into an ordered list of
//! [`PlannedLayer`] rows by [`NetworkPlan::build`], and analysed through the
//! plan's shape trace. The same trace drives the analytic complexity counters
//! here, the reference executor, and the cycle-level simulator, so all three
//! agree on shapes by construction.

mod complexity;
mod config;
mod layers;
mod tensor;
mod weights;

pub use complexity::{
    count_macs, layer_macs, layer_weight_count, weight_bytes, weight_megabytes, CountMode,
    MacReport,
};
pub use config::{EncoderFilter, NetworkConfig, PadMode};
pub use layers::{
    transposed_phase_taps, BlockPart, LayerRole, LayerSpec, NetworkPlan, NormActKind,
    PlannedLayer, RowShape, Section,
};
pub use tensor::Tensor1D;
pub use weights::{WeightBank, WeightTensor};
