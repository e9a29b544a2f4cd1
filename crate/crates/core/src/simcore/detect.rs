/// Zero-detection front end for one comparator group.
///
/// Eight comparators (one per lane) test a group of stored activations
/// against zero in a single cycle and emit an (offset, value) pair for each
/// nonzero, offsets counted from 1 at the start of the group. The pairs are
/// what the broadcast flow consumes, one per cycle, so a group costs as many
/// MAC cycles as it has nonzeros.
pub fn detect_nonzeros(group: &[f64]) -> Vec<(u8, f64)> {
    debug_assert!(group.len() <= u8::MAX as usize);
    group
        .iter()
        .enumerate()
        .filter(|(_, v)| **v != 0.0)
        .map(|(i, v)| ((i + 1) as u8, *v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn worked_group_yields_six_pairs() {
        let group = [18.0, -2.0, 23.0, 4.0, 0.0, -3.0, 2.0, 0.0];
        let pairs = detect_nonzeros(&group);
        let offsets: Vec<u8> = pairs.iter().map(|p| p.0).collect();
        assert_eq!(offsets, vec![1, 2, 3, 4, 6, 7]);
        let values: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        assert_eq!(values, vec![18.0, -2.0, 23.0, 4.0, -3.0, 2.0]);
        // Six nonzeros: the group occupies six MAC cycles instead of eight.
        assert_eq!(pairs.len(), 6);
    }

    #[test]
    fn negative_zero_counts_as_zero() {
        let pairs = detect_nonzeros(&[-0.0, 1.0]);
        assert_eq!(pairs, vec![(2, 1.0)]);
    }

    #[test]
    fn pair_count_always_equals_nonzero_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x0eadbeef);
        for _ in 0..1000 {
            let group: Vec<f64> = (0..rng.gen_range(1..=8))
                .map(|_| if rng.gen_bool(0.4) { 0.0 } else { rng.gen_range(-9.0..9.0) })
                .collect();
            let nonzeros = group.iter().filter(|v| **v != 0.0).count();
            let pairs = detect_nonzeros(&group);
            assert_eq!(pairs.len(), nonzeros);
            for (off, v) in pairs {
                assert_eq!(group[off as usize - 1], v);
                assert_ne!(v, 0.0);
            }
        }
    }
}
