//! Reference executor: straight-line textbook implementations of every layer
//! kind, used as the functional ground truth the cycle-level simulator is
//! checked against.
//!
//! The kernels here deliberately materialise what the decomposed schedules
//! avoid: dilated rows multiply through the zero-inserted kernel and
//! transposed rows multiply through the zero-stuffed input. Every weight
//! multiply is counted in `mac_events`, so the totals line up with the
//! dense (`CountMode::Naive`) analytic counts by construction.
//!
//! Accumulation is f64 throughout ("wide" accumulators). Summation orders
//! are fixed and documented per kernel; the simulator follows the same
//! orders, which is what makes bit-exact agreement possible.

mod driver;
mod kernels;
mod network;

pub use driver::{drive_network, NetworkOutputs, RowInput};
pub(crate) use driver::followed_by_normact;
pub use kernels::{
    ref_conv1d, ref_dilated, ref_mask, ref_normact, ref_pointwise, ref_transposed, ExecResult,
    GLN_EPSILON,
};
pub use network::{quantize_tensor, ref_network, RefRun};
