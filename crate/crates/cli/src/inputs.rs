//! Input waveforms: raw PCM files and deterministic synthetic generators.

use std::fs;
use std::io;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepsim_core::SAMPLE_RATE;

/// Read raw signed 16-bit little-endian mono PCM and scale to [-1, 1).
pub fn read_pcm16(path: &Path) -> io::Result<Vec<f64>> {
    let bytes = fs::read(path)?;
    if bytes.len() % 2 != 0 {
        return Err(io::Error::new(
            io::ErrorKind::InvalidData,
            format!("{}: odd byte count for 16-bit samples", path.display()),
        ));
    }
    Ok(bytes
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
        .collect())
}

/// Built-in waveform generators, all deterministic in (kind, samples, seed).
#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum GenKind {
    /// 440 Hz tone at half amplitude.
    Sine,
    /// Uniform noise in [-0.5, 0.5].
    Noise,
    /// Noise with half the samples forced to zero.
    Sparse,
    /// A single unit impulse at t = 0.
    Impulse,
    /// All zeros.
    Zeros,
}

pub fn generate(kind: GenKind, samples: usize, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    match kind {
        GenKind::Sine => (0..samples)
            .map(|t| 0.5 * (2.0 * std::f64::consts::PI * 440.0 * t as f64 / SAMPLE_RATE as f64).sin())
            .collect(),
        GenKind::Noise => (0..samples).map(|_| rng.gen_range(-0.5..=0.5)).collect(),
        GenKind::Sparse => (0..samples)
            .map(|_| if rng.gen_bool(0.5) { 0.0 } else { rng.gen_range(-0.5..=0.5) })
            .collect(),
        GenKind::Impulse => {
            let mut v = vec![0.0; samples];
            if !v.is_empty() {
                v[0] = 1.0;
            }
            v
        }
        GenKind::Zeros => vec![0.0; samples],
    }
}
