//! Cycle-level model of the sparse convolution array.
//!
//! The array has eight processing elements fed by a zero-detection front end
//! and double-buffered on-chip memories. Two execution styles cover every
//! layer:
//!
//! * **Broadcast flow** (dense conv, pointwise): eight PEs each hold one
//!   output channel's weights; the input window streams past once per group
//!   of eight output channels, one activation per cycle. The detection unit
//!   compares eight activations per cycle and queues (offset, value) pairs
//!   for the nonzeros, so with zero-skipping enabled the stream spends
//!   cycles only on nonzero activations.
//! * **Gated lockstep flow** (dilated depthwise, transposed, elementwise
//!   mask): eight channels advance in lockstep through the decomposed
//!   schedule. A zero operand gates the multiplier off to save energy, but
//!   the lane still occupies its cycle, so zeros do not change the timing.
//!
//! Functionally the flows execute the same real multiplies in the same
//! order as the reference executor (zero terms contribute nothing to a wide
//! accumulator), so with quantization off the simulator's outputs equal the
//! reference outputs exactly; that equivalence is asserted in tests rather
//! than assumed.
//!
//! Timing is split into MAC cycles (the streams above) and overhead cycles
//! (pipeline fills, buffer bank swaps, weight ping-pong swaps, and the
//! scalar norm unit), with the constants gathered in [`CalibrationSpec`].

mod config;
mod detect;
mod flows;
mod network;
mod trace;

pub use config::{CalibrationSpec, PeArrayConfig, SimOptions};
pub use detect::detect_nonzeros;
pub use flows::FlowKind;
pub use network::{simulate_network, SimRun};
pub use trace::{hop_estimate, HopEstimate, RowCost, ScheduleTrace};
