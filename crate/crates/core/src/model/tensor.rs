/// Channel-major 1-D feature map: `data[c * len + t]`.
///
/// Values are held as f64 regardless of the storage format being modelled;
/// quantized activations are stored as their decoded values, which is exact
/// because every representable minifloat value is an f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor1D {
    pub channels: usize,
    pub len: usize,
    pub data: Vec<f64>,
}

impl Tensor1D {
    pub fn zeros(channels: usize, len: usize) -> Self {
        Self { channels, len, data: vec![0.0; channels * len] }
    }

    pub fn from_fn(channels: usize, len: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut t = Self::zeros(channels, len);
        for c in 0..channels {
            for i in 0..len {
                t.data[c * len + i] = f(c, i);
            }
        }
        t
    }

    /// Single-channel tensor wrapping a waveform.
    pub fn from_samples(samples: &[f64]) -> Self {
        Self { channels: 1, len: samples.len(), data: samples.to_vec() }
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize) -> f64 {
        debug_assert!(c < self.channels && t < self.len);
        self.data[c * self.len + t]
    }

    #[inline]
    pub fn set(&mut self, c: usize, t: usize, v: f64) {
        debug_assert!(c < self.channels && t < self.len);
        self.data[c * self.len + t] = v;
    }

    /// Borrow one channel as a slice.
    pub fn channel(&self, c: usize) -> &[f64] {
        &self.data[c * self.len..(c + 1) * self.len]
    }

    /// Keep only the first `len` frames of every channel.
    pub fn truncate_len(&self, len: usize) -> Self {
        assert!(len <= self.len);
        Self::from_fn(self.channels, len, |c, t| self.get(c, t))
    }

    /// Repeat every frame `factor` times (rate lift between branch clocks).
    pub fn repeat_frames(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        Self::from_fn(self.channels, self.len * factor, |c, t| self.get(c, t / factor))
    }

    /// Keep every `factor`-th frame starting at 0 (rate drop).
    pub fn stride_frames(&self, factor: usize) -> Self {
        assert!(factor >= 1);
        let out_len = self.len.div_ceil(factor);
        Self::from_fn(self.channels, out_len, |c, t| self.get(c, t * factor))
    }

    /// Stack tensors of equal length along the channel axis.
    pub fn concat_channels(parts: &[&Tensor1D]) -> Self {
        assert!(!parts.is_empty());
        let len = parts[0].len;
        assert!(parts.iter().all(|p| p.len == len), "channel concat needs equal lengths");
        let channels = parts.iter().map(|p| p.channels).sum();
        let mut data = Vec::with_capacity(channels * len);
        for p in parts {
            data.extend_from_slice(&p.data);
        }
        Self { channels, len, data }
    }

    /// View rows `[start, start + count)` as their own tensor.
    pub fn slice_channels(&self, start: usize, count: usize) -> Self {
        assert!(start + count <= self.channels);
        Self {
            channels: count,
            len: self.len,
            data: self.data[start * self.len..(start + count) * self.len].to_vec(),
        }
    }

    /// Count of exactly-zero elements.
    pub fn zero_count(&self) -> usize {
        self.data.iter().filter(|v| **v == 0.0).count()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indexing_is_channel_major() {
        let t = Tensor1D::from_fn(2, 3, |c, i| (10 * c + i) as f64);
        assert_eq!(t.data, vec![0.0, 1.0, 2.0, 10.0, 11.0, 12.0]);
        assert_eq!(t.get(1, 2), 12.0);
        assert_eq!(t.channel(1), &[10.0, 11.0, 12.0]);
    }

    #[test]
    fn repeat_then_stride_round_trips() {
        let t = Tensor1D::from_fn(1, 4, |_, i| i as f64);
        let up = t.repeat_frames(3);
        assert_eq!(up.len, 12);
        assert_eq!(up.channel(0)[..6], [0.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let down = up.stride_frames(3);
        assert_eq!(down.data, t.data);
    }

    #[test]
    fn stride_rounds_len_up() {
        let t = Tensor1D::from_fn(1, 5, |_, i| i as f64);
        let down = t.stride_frames(2);
        assert_eq!(down.len, 3);
        assert_eq!(down.data, vec![0.0, 2.0, 4.0]);
    }

    #[test]
    fn concat_and_slice_are_inverses() {
        let a = Tensor1D::from_fn(2, 3, |c, i| (c + i) as f64);
        let b = Tensor1D::from_fn(1, 3, |_, i| 100.0 + i as f64);
        let cat = Tensor1D::concat_channels(&[&a, &b]);
        assert_eq!(cat.channels, 3);
        assert_eq!(cat.slice_channels(0, 2), a);
        assert_eq!(cat.slice_channels(2, 1), b);
    }
}
