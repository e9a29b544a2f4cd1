//! Exhaustive checks of the 8-bit codec against independent double-precision
//! oracles: every code round-trips, every code pair multiplies exactly, and
//! encoding picks the nearest representable value.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sepsim_core::minifloat::{fp8_mul, Fp8Code, MinifloatFormat};

/// Oracle decode written from the layout definition, sharing no code with the
/// implementation under test.
fn oracle_decode(code: u8, exp_bits: u32, man_bits: u32, bias: i32) -> f64 {
    let sign = if code >> 7 == 1 { -1.0 } else { 1.0 };
    let ef = (code as u32 >> man_bits) & ((1 << exp_bits) - 1);
    let mant = (code as u32) & ((1 << man_bits) - 1);
    if ef == 0 {
        return 0.0 * sign;
    }
    let frac = 1.0 + mant as f64 / (1u64 << man_bits) as f64;
    sign * frac * 2f64.powi(ef as i32 - bias)
}

/// Oracle encode: enumerate all 256 codes and pick the nearest value, with
/// the documented policy that magnitudes below the smallest normal flush to
/// zero and ties go to the even mantissa.
fn oracle_encode(x: f64, exp_bits: u32, man_bits: u32, bias: i32) -> u8 {
    let min_normal = 2f64.powi(1 - bias);
    if x.abs() < min_normal {
        return if x.is_sign_negative() { 0x80 } else { 0x00 };
    }
    let mut best: Option<(u8, f64)> = None;
    for c in 0..=255u8 {
        let ef = (c as u32 >> man_bits) & ((1 << exp_bits) - 1);
        if ef == 0 {
            continue; // zero candidates already handled by the flush rule
        }
        if (c >> 7 == 1) != x.is_sign_negative() {
            continue;
        }
        let v = oracle_decode(c, exp_bits, man_bits, bias);
        let d = (x - v).abs();
        match best {
            None => best = Some((c, d)),
            Some((bc, bd)) => {
                if d < bd || (d == bd && c & 1 == 0 && bc & 1 == 1) {
                    best = Some((c, d));
                }
            }
        }
    }
    best.unwrap().0
}

fn formats() -> [MinifloatFormat; 2] {
    [
        MinifloatFormat::fp8_shifted(),
        MinifloatFormat::fp8_standard(),
    ]
}

#[test]
fn all_256_codes_round_trip() {
    for fmt in formats() {
        for c in 0..=255u8 {
            let v = fmt.decode_bits(c as u32);
            assert_eq!(
                v,
                oracle_decode(c, fmt.exponent_bits, fmt.mantissa_bits, fmt.bias),
                "decode mismatch at code {c:#04x} bias {}",
                fmt.bias
            );
            let back = fmt.decode_bits(fmt.encode_bits(v));
            assert_eq!(back, v, "round trip broke at code {c:#04x} bias {}", fmt.bias);
        }
    }
}

#[test]
fn all_65536_products_match_f64() {
    for fmt in formats() {
        for a in 0..=255u8 {
            let va = fmt.decode_bits(a as u32);
            for b in 0..=255u8 {
                let vb = fmt.decode_bits(b as u32);
                let got = fp8_mul(Fp8Code(a), Fp8Code(b), &fmt);
                assert_eq!(
                    got,
                    va * vb,
                    "mul mismatch at {a:#04x}*{b:#04x} bias {}",
                    fmt.bias
                );
            }
        }
    }
}

#[test]
fn bias_shift_is_a_pure_scale() {
    let b15 = MinifloatFormat::fp8_shifted();
    let b7 = MinifloatFormat::fp8_standard();
    for c in 0..=255u32 {
        // same code, bias 15: exactly 2^-8 times the bias-7 value
        assert_eq!(b15.decode_bits(c) * 256.0, b7.decode_bits(c));
    }
}

#[test]
fn encode_picks_nearest_code() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0801);
    for fmt in formats() {
        // random values across the representable range and beyond
        for _ in 0..4000 {
            let mag = 2f64.powf(rng.gen_range(-18.0..10.0));
            let x = if rng.gen_bool(0.5) { mag } else { -mag };
            let got = fmt.encode_bits(x) as u8;
            let want = oracle_encode(x, fmt.exponent_bits, fmt.mantissa_bits, fmt.bias);
            assert_eq!(
                fmt.decode_bits(got as u32),
                oracle_decode(want, fmt.exponent_bits, fmt.mantissa_bits, fmt.bias),
                "nearest-code mismatch for {x} bias {}",
                fmt.bias
            );
        }
        // exact midpoints between adjacent positive codes exercise ties-to-even
        for c in (0x08..0x7f_u8).step_by(1) {
            let lo = fmt.decode_bits(c as u32);
            let hi = fmt.decode_bits((c + 1) as u32);
            let mid = lo + (hi - lo) / 2.0;
            let got = fmt.encode_bits(mid) as u8;
            let want = oracle_encode(mid, fmt.exponent_bits, fmt.mantissa_bits, fmt.bias);
            assert_eq!(got, want, "tie broke wrong at midpoint of {c:#04x}");
        }
    }
}
