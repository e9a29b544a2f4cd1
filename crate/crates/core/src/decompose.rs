//! Decomposed convolution schedules.
//!
//! A dilated convolution spends most of a dense engine's multiplies on the
//! zeros inserted between taps, and a transposed convolution on the zeros
//! stuffed between input frames. Both layers can instead be decomposed into
//! per-output pair lists that touch only real data:
//!
//! * dilated: output `i` pairs input `i + j*(dilation+1)` with tap `j`, taps
//!   ascending, so the inserted zeros never appear;
//! * transposed: output `i` (0-based) pairs tap `k` with input `(i+k)/stride`
//!   for exactly the taps with `(i+k) % stride == 0`, taps ascending; the
//!   stuffed zeros never appear. Outputs cycle through `stride` tap phases.
//!
//! The schedules here enumerate those pairs, execute them, and report the
//! exact dense-versus-decomposed work ratio. Execution accumulates in f64 in
//! pair order, which matches the reference kernels' real-tap order, so
//! outputs agree exactly (the reference's extra zero multiplies cannot move
//! a wide accumulator).

use crate::model::PadMode;
use crate::Error;

/// One scheduled multiply: which input frame meets which kernel tap.
/// `input_index` is `None` when same-padding put a zero there (the slot is
/// still scheduled, but there is nothing to multiply).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SchedulePair {
    pub input_index: Option<usize>,
    pub tap_index: usize,
}

/// Pair-list schedule for one channel of a dilated convolution.
#[derive(Debug, Clone)]
pub struct DilatedSchedule {
    pub kernel: usize,
    pub dilation: usize,
    pub pad: PadMode,
    pub t_in: usize,
    pub t_out: usize,
    left_pad: usize,
}

impl DilatedSchedule {
    pub fn new(kernel: usize, dilation: usize, pad: PadMode, t_in: usize) -> Result<Self, Error> {
        if kernel == 0 {
            return Err(Error::shape("dilated schedule", "kernel must be nonzero"));
        }
        let keff = kernel + (kernel - 1) * dilation;
        let (t_out, left_pad) = match pad {
            PadMode::Same => (t_in, (keff - 1) / 2),
            PadMode::Valid => {
                if t_in < keff {
                    return Err(Error::shape(
                        "dilated schedule",
                        format!("input of {t_in} frames shorter than effective kernel {keff}"),
                    ));
                }
                (t_in - keff + 1, 0)
            }
        };
        Ok(Self { kernel, dilation, pad, t_in, t_out, left_pad })
    }

    /// Effective (zero-inserted) kernel length a dense engine would sweep.
    pub fn effective_kernel(&self) -> usize {
        self.kernel + (self.kernel - 1) * self.dilation
    }

    /// The pairs computed for output `i`, taps ascending. Always exactly
    /// `kernel` slots.
    pub fn pairs(&self, i: usize) -> Vec<SchedulePair> {
        assert!(i < self.t_out);
        (0..self.kernel)
            .map(|j| {
                let idx = (i + j * (self.dilation + 1)) as isize - self.left_pad as isize;
                let input_index =
                    (idx >= 0 && (idx as usize) < self.t_in).then_some(idx as usize);
                SchedulePair { input_index, tap_index: j }
            })
            .collect()
    }

    /// Scheduled multiply slots over the whole row.
    pub fn pair_count(&self) -> u64 {
        self.t_out as u64 * self.kernel as u64
    }

    /// Multiplies a dense engine sweeping the zero-inserted kernel performs.
    pub fn naive_count(&self) -> u64 {
        self.t_out as u64 * self.effective_kernel() as u64
    }

    /// Execute one channel. Returns the outputs and the multiplies actually
    /// performed (padding slots are scheduled but have nothing to multiply).
    pub fn run(&self, x: &[f64], w: &[f64]) -> (Vec<f64>, u64) {
        assert_eq!(x.len(), self.t_in);
        assert_eq!(w.len(), self.kernel);
        let mut macs = 0u64;
        let out = (0..self.t_out)
            .map(|i| {
                let mut acc = 0.0f64;
                for p in self.pairs(i) {
                    if let Some(t) = p.input_index {
                        acc += w[p.tap_index] * x[t];
                        macs += 1;
                    }
                }
                acc
            })
            .collect();
        (out, macs)
    }

    /// Human-readable dump of the first `max_outputs` pair lists.
    pub fn render(&self, max_outputs: usize) -> String {
        let mut s = format!(
            "dilated k{} d{} ({:?}, {} -> {} frames): {} pairs/output vs {} dense taps\n",
            self.kernel,
            self.dilation,
            self.pad,
            self.t_in,
            self.t_out,
            self.kernel,
            self.effective_kernel()
        );
        for i in 0..self.t_out.min(max_outputs) {
            let terms: Vec<String> = self
                .pairs(i)
                .iter()
                .map(|p| match p.input_index {
                    Some(t) => format!("w[{}]*x[{}]", p.tap_index, t),
                    None => format!("w[{}]*pad", p.tap_index),
                })
                .collect();
            s.push_str(&format!("  out[{i}] <- {}\n", terms.join(" + ")));
        }
        s
    }
}

/// Pair-list schedule for one channel of a transposed convolution.
#[derive(Debug, Clone)]
pub struct TransposedSchedule {
    pub kernel: usize,
    pub stride: usize,
    pub t_in: usize,
    pub t_out: usize,
}

impl TransposedSchedule {
    pub fn new(kernel: usize, stride: usize, t_in: usize) -> Result<Self, Error> {
        if kernel == 0 || stride == 0 {
            return Err(Error::shape("transposed schedule", "kernel and stride must be nonzero"));
        }
        if t_in == 0 || (t_in - 1) * stride + 1 < kernel {
            return Err(Error::shape(
                "transposed schedule",
                format!("{t_in} input frames too few for kernel {kernel} at stride {stride}"),
            ));
        }
        Ok(Self { kernel, stride, t_in, t_out: (t_in - 1) * stride + 2 - kernel })
    }

    /// The pairs computed for output `i` (0-based), taps ascending: exactly
    /// the taps of this output's phase, each against a real input frame.
    pub fn pairs(&self, i: usize) -> Vec<SchedulePair> {
        assert!(i < self.t_out);
        let s = self.stride;
        let first = (s - i % s) % s;
        (first..self.kernel)
            .step_by(s)
            .map(|k| SchedulePair { input_index: Some((i + k) / s), tap_index: k })
            .collect()
    }

    /// Scheduled multiplies over the whole row (every slot is real).
    pub fn pair_count(&self) -> u64 {
        (0..self.t_out).map(|i| self.pairs(i).len() as u64).sum()
    }

    /// Multiplies a dense engine sweeping the zero-stuffed input performs.
    pub fn naive_count(&self) -> u64 {
        self.t_out as u64 * self.kernel as u64
    }

    /// Execute one channel.
    pub fn run(&self, x: &[f64], w: &[f64]) -> (Vec<f64>, u64) {
        assert_eq!(x.len(), self.t_in);
        assert_eq!(w.len(), self.kernel);
        let mut macs = 0u64;
        let out = (0..self.t_out)
            .map(|i| {
                let mut acc = 0.0f64;
                for p in self.pairs(i) {
                    acc += w[p.tap_index] * x[p.input_index.expect("transposed pairs are real")];
                    macs += 1;
                }
                acc
            })
            .collect();
        (out, macs)
    }

    /// Human-readable dump of the first `max_outputs` pair lists.
    pub fn render(&self, max_outputs: usize) -> String {
        let mut s = format!(
            "transposed k{} s{} ({} -> {} frames): {} phases\n",
            self.kernel, self.stride, self.t_in, self.t_out, self.stride
        );
        for i in 0..self.t_out.min(max_outputs) {
            let terms: Vec<String> = self
                .pairs(i)
                .iter()
                .map(|p| format!("w[{}]*x[{}]", p.tap_index, p.input_index.unwrap()))
                .collect();
            s.push_str(&format!("  out[{i}] <- {}\n", terms.join(" + ")));
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{transposed_phase_taps, Tensor1D, WeightTensor};
    use crate::refexec::{ref_dilated, ref_transposed};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn dilated_pairs_touch_only_real_taps() {
        let s = DilatedSchedule::new(3, 2, PadMode::Valid, 9).unwrap();
        assert_eq!(s.t_out, 3);
        let pairs = s.pairs(0);
        assert_eq!(
            pairs.iter().map(|p| (p.input_index.unwrap(), p.tap_index)).collect::<Vec<_>>(),
            vec![(0, 0), (3, 1), (6, 2)]
        );
        // Work drops from 7 dense taps to 3 real taps per output: the saving
        // is exactly 4/7.
        assert_eq!(s.pair_count(), 9);
        assert_eq!(s.naive_count(), 21);
        assert_eq!((s.naive_count() - s.pair_count()) * 7, s.naive_count() * 4);
    }

    #[test]
    fn same_padding_marks_pad_slots() {
        let s = DilatedSchedule::new(3, 1, PadMode::Same, 5).unwrap();
        // Effective kernel 5, left pad 2: output 0 pairs taps with x[-2], x[0], x[2].
        let pairs = s.pairs(0);
        assert_eq!(pairs[0].input_index, None);
        assert_eq!(pairs[1].input_index, Some(0));
        assert_eq!(pairs[2].input_index, Some(2));
    }

    #[test]
    fn transposed_pairs_follow_phases() {
        let s = TransposedSchedule::new(9, 3, 4).unwrap();
        assert_eq!(s.t_out, 2);
        let taps = |i: usize| s.pairs(i).iter().map(|p| p.tap_index + 1).collect::<Vec<_>>();
        // 1-based tap phases: outputs alternate {1,4,7}, {3,6,9}, {2,5,8}.
        assert_eq!(taps(0), vec![1, 4, 7]);
        assert_eq!(taps(1), vec![3, 6, 9]);
        let longer = TransposedSchedule::new(9, 3, 6).unwrap();
        let taps = |i: usize| longer.pairs(i).iter().map(|p| p.tap_index + 1).collect::<Vec<_>>();
        assert_eq!(taps(2), vec![2, 5, 8]);
        assert_eq!(taps(3), vec![1, 4, 7]);
        // Work is exactly a third of the dense sweep: saving 2/3.
        assert_eq!(longer.pair_count() * 3, longer.naive_count());
    }

    #[test]
    fn phase_sizes_agree_with_analytic_counts() {
        for (k, s) in [(9, 3), (3, 2), (5, 4), (2, 3), (8, 3), (7, 1)] {
            let t_in = 16;
            if (t_in - 1) * s + 1 < k {
                continue;
            }
            let sched = TransposedSchedule::new(k, s, t_in).unwrap();
            for i in 0..sched.t_out {
                assert_eq!(
                    sched.pairs(i).len(),
                    transposed_phase_taps(k, s, i + 1),
                    "kernel {k} stride {s} output {i}"
                );
            }
        }
    }

    #[test]
    fn dilated_schedule_matches_reference_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xd11a);
        for _ in 0..120 {
            let kernel: usize = rng.gen_range(1..=9);
            let dilation: usize = rng.gen_range(0..=7);
            let keff = kernel + (kernel - 1) * dilation;
            let pad = if rng.gen_bool(0.5) { PadMode::Same } else { PadMode::Valid };
            let t_in = match pad {
                PadMode::Same => rng.gen_range(1..=64),
                PadMode::Valid => rng.gen_range(keff..=keff + 63),
            };
            let x: Vec<f64> = (0..t_in).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..kernel).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sched = DilatedSchedule::new(kernel, dilation, pad, t_in).unwrap();
            let (got, _) = sched.run(&x, &w);
            let xr = Tensor1D::from_samples(&x);
            let wr = WeightTensor { dims: vec![1, kernel], data: w.clone(), pruned: None };
            let want = ref_dilated(&xr, &wr, dilation, pad).unwrap().output;
            assert_eq!(got, want.data, "k{kernel} d{dilation} {pad:?} t{t_in}");
        }
    }

    #[test]
    fn transposed_schedule_matches_reference_exactly() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7a05);
        for _ in 0..120 {
            let kernel: usize = rng.gen_range(1..=9);
            let stride: usize = rng.gen_range(1..=3);
            let min_t = kernel.div_ceil(stride).max(2);
            let t_in = rng.gen_range(min_t..=min_t + 62);
            if (t_in - 1) * stride + 1 < kernel {
                continue;
            }
            let x: Vec<f64> = (0..t_in).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let w: Vec<f64> = (0..kernel).map(|_| rng.gen_range(-2.0..2.0)).collect();
            let sched = TransposedSchedule::new(kernel, stride, t_in).unwrap();
            let (got, macs) = sched.run(&x, &w);
            assert_eq!(macs, sched.pair_count());
            let xr = Tensor1D::from_samples(&x);
            let wr = WeightTensor { dims: vec![1, 1, kernel], data: w.clone(), pruned: None };
            let want = ref_transposed(&xr, &wr, stride).unwrap().output;
            assert_eq!(got, want.data, "k{kernel} s{stride} t{t_in}");
        }
    }

    #[test]
    fn renders_are_stable() {
        let d = DilatedSchedule::new(3, 2, PadMode::Valid, 9).unwrap();
        let text = d.render(1);
        assert!(text.contains("out[0] <- w[0]*x[0] + w[1]*x[3] + w[2]*x[6]"), "{text}");
        let t = TransposedSchedule::new(9, 3, 4).unwrap();
        let text = t.render(2);
        assert!(text.contains("out[0] <- w[0]*x[0] + w[3]*x[1] + w[6]*x[2]"), "{text}");
        assert!(text.contains("out[1] <- w[2]*x[1] + w[5]*x[2] + w[8]*x[3]"), "{text}");
    }
}
