//! Software model of a sparse 1-D convolution accelerator for time-domain
//! speech separation.
//!
//! The crate is organised around one dataflow: a network description
//! ([`model`]) is executed either by plain reference code ([`refexec`]) or by
//! a cycle-level model of the 8-PE accelerator ([`simcore`]). The accelerator
//! model relies on sparse decompositions of dilated and transposed
//! convolutions ([`decompose`]), an 8-bit shifted-bias float codec
//! ([`minifloat`]), and the compression pipeline that shrinks, prunes and
//! quantizes weight banks ([`compress`]).

pub mod compress;
pub mod decompose;
pub mod error;
pub mod minifloat;
pub mod model;
pub mod refexec;
pub mod simcore;

pub use error::Error;

/// Audio sample rate the frame/time arithmetic assumes, in Hz.
pub const SAMPLE_RATE: u32 = 16_000;

/// Samples per 32 ms processing hop at [`SAMPLE_RATE`].
pub const HOP_SAMPLES: usize = 512;
