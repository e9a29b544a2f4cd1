//! Minifloat codec: sign / exponent / mantissa bit layouts of up to 16 bits
//! with an arbitrary exponent bias, no Inf/NaN codes, and (by default) no
//! subnormals. The 8-bit instances are what the accelerator datapath and the
//! weight files use; other widths exist for quantization sweeps.
//!
//! Layout, MSB first: 1 sign bit, `exponent_bits`, `mantissa_bits`.
//! A code with exponent field E > 0 decodes to (-1)^S * (1 + M/2^m) * 2^(E-B).
//! E == 0 decodes to zero (flush-to-zero) unless subnormal decoding is
//! enabled. Every exponent value is numeric: there are no Inf or NaN codes,
//! so out-of-range values saturate to the maximum-magnitude code.

use serde::{Deserialize, Serialize};

use crate::error::Error;

/// Bit-layout plus bias of one minifloat format.
///
/// The shifted 8-bit default (`fp8_shifted`) moves the bias from 7 to 15,
/// trading the large-value range for fine resolution in [2^-14, 1.875]:
/// weight distributions after training sit almost entirely below 1, so the
/// shifted format spends its codes where the weights are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MinifloatFormat {
    pub exponent_bits: u32,
    pub mantissa_bits: u32,
    pub bias: i32,
    /// Decode E=0, M!=0 as subnormals instead of flushing to zero.
    /// Off by default; exists for codec experiments only.
    #[serde(default)]
    pub subnormals: bool,
}

impl MinifloatFormat {
    /// 8-bit, 4 exponent bits, 3 mantissa bits, shifted bias 15.
    pub const fn fp8_shifted() -> Self {
        MinifloatFormat {
            exponent_bits: 4,
            mantissa_bits: 3,
            bias: 15,
            subnormals: false,
        }
    }

    /// 8-bit, 4 exponent bits, 3 mantissa bits, standard bias 2^(4-1)-1 = 7.
    pub const fn fp8_standard() -> Self {
        MinifloatFormat {
            exponent_bits: 4,
            mantissa_bits: 3,
            bias: 7,
            subnormals: false,
        }
    }

    /// 16-bit half-precision layout (5/10, bias 15), saturating, no Inf/NaN.
    pub const fn fp16() -> Self {
        MinifloatFormat {
            exponent_bits: 5,
            mantissa_bits: 10,
            bias: 15,
            subnormals: false,
        }
    }

    /// 4-bit toy format (2/1, bias 1) for the low end of quantization sweeps.
    pub const fn fp4() -> Self {
        MinifloatFormat {
            exponent_bits: 2,
            mantissa_bits: 1,
            bias: 1,
            subnormals: false,
        }
    }

    pub fn new(exponent_bits: u32, mantissa_bits: u32, bias: i32) -> Result<Self, Error> {
        let f = MinifloatFormat {
            exponent_bits,
            mantissa_bits,
            bias,
            subnormals: false,
        };
        f.validate()?;
        Ok(f)
    }

    /// Bounds keep all decode/encode/multiply arithmetic exact in f64.
    pub fn validate(&self) -> Result<(), Error> {
        if !(2..=8).contains(&self.exponent_bits) {
            return Err(Error::Config(format!(
                "exponent_bits {} outside 2..=8",
                self.exponent_bits
            )));
        }
        if self.mantissa_bits < 1 || self.width() > 16 {
            return Err(Error::Config(format!(
                "unsupported layout: {} exponent + {} mantissa bits",
                self.exponent_bits, self.mantissa_bits
            )));
        }
        if !(1..=256).contains(&self.bias) {
            return Err(Error::Config(format!("bias {} outside 1..=256", self.bias)));
        }
        Ok(())
    }

    pub fn width(&self) -> u32 {
        1 + self.exponent_bits + self.mantissa_bits
    }

    /// Largest exponent field value; also the exponent field of the max code.
    pub fn max_exponent_field(&self) -> u32 {
        (1 << self.exponent_bits) - 1
    }

    /// Smallest positive normal value, 2^(1-bias).
    pub fn min_normal(&self) -> f64 {
        exp2i(1 - self.bias)
    }

    /// Largest representable magnitude, (2 - 2^-m) * 2^(Emax - bias).
    pub fn max_value(&self) -> f64 {
        let m = self.mantissa_bits;
        let frac = 2.0 - exp2i(-(m as i32));
        frac * exp2i(self.max_exponent_field() as i32 - self.bias)
    }

    fn code_mask(&self) -> u32 {
        (1u32 << self.width()) - 1
    }

    fn max_code_bits(&self, sign: u32) -> u32 {
        (sign << (self.exponent_bits + self.mantissa_bits))
            | (self.max_exponent_field() << self.mantissa_bits)
            | ((1 << self.mantissa_bits) - 1)
    }

    /// Encode a finite f64 to the nearest code. Round-to-nearest-even on the
    /// mantissa; overflow saturates to the max-magnitude code; magnitudes
    /// below the smallest normal flush to signed zero (unless subnormal mode
    /// is on, in which case they round into the subnormal codes).
    pub fn encode_bits(&self, x: f64) -> u32 {
        assert!(x.is_finite(), "encode requires a finite value, got {x}");
        let e = self.exponent_bits;
        let m = self.mantissa_bits;
        let sign = u32::from(x.is_sign_negative());
        let a = x.abs();
        if a == 0.0 {
            return sign << (e + m);
        }
        let bits = a.to_bits();
        let rawexp = ((bits >> 52) & 0x7ff) as i64;
        if rawexp == 0 {
            // f64 subnormal: far below any representable normal here
            return self.underflow_bits(sign, a);
        }
        let ef = rawexp - 1023 + self.bias as i64;
        let emax = self.max_exponent_field() as i64;
        if ef > emax {
            return self.max_code_bits(sign);
        }
        if ef < 1 {
            return self.underflow_bits(sign, a);
        }
        // significand fraction in [1,2); (frac - 1) * 2^m is exact
        let frac = f64::from_bits((bits & 0x000f_ffff_ffff_ffff) | (1023u64 << 52));
        let scaled = (frac - 1.0) * exp2i(m as i32);
        let mut mant = scaled.round_ties_even() as u32;
        let mut ef = ef as u32;
        if mant == 1 << m {
            // mantissa carry-out bumps the exponent
            mant = 0;
            ef += 1;
            if ef > emax as u32 {
                return self.max_code_bits(sign);
            }
        }
        (sign << (e + m)) | (ef << m) | mant
    }

    fn underflow_bits(&self, sign: u32, a: f64) -> u32 {
        let e = self.exponent_bits;
        let m = self.mantissa_bits;
        let zero = sign << (e + m);
        if !self.subnormals {
            return zero;
        }
        // subnormal step is 2^(1 - bias - m)
        let q = a * exp2i(self.bias - 1 + m as i32);
        let mant = q.round_ties_even() as u32;
        if mant == 0 {
            zero
        } else if mant >= 1 << m {
            zero | (1 << m) // rounds up to the smallest normal
        } else {
            zero | mant
        }
    }

    /// Decode a code of this format's width. The value is always exact in f64.
    pub fn decode_bits(&self, code: u32) -> f64 {
        let e = self.exponent_bits;
        let m = self.mantissa_bits;
        debug_assert_eq!(code & !self.code_mask(), 0, "code wider than format");
        let sign = (code >> (e + m)) & 1;
        let ef = (code >> m) & ((1 << e) - 1);
        let mant = code & ((1 << m) - 1);
        let mag = if ef == 0 {
            if self.subnormals && mant != 0 {
                mant as f64 * exp2i(1 - self.bias - m as i32)
            } else {
                0.0
            }
        } else {
            (1.0 + mant as f64 * exp2i(-(m as i32))) * exp2i(ef as i32 - self.bias)
        };
        if sign == 1 {
            -mag
        } else {
            mag
        }
    }

    /// decode(encode(x)): the value x actually takes on after quantization.
    pub fn quantize(&self, x: f64) -> f64 {
        self.decode_bits(self.encode_bits(x))
    }
}

/// One encoded 8-bit value. The byte alone is meaningless; pair it with the
/// [`MinifloatFormat`] that produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Fp8Code(pub u8);

impl Fp8Code {
    pub fn encode(x: f64, fmt: &MinifloatFormat) -> Fp8Code {
        debug_assert_eq!(fmt.width(), 8, "Fp8Code requires an 8-bit format");
        Fp8Code(fmt.encode_bits(x) as u8)
    }

    pub fn decode(self, fmt: &MinifloatFormat) -> f64 {
        fmt.decode_bits(self.0 as u32)
    }

    pub fn is_zero(self, fmt: &MinifloatFormat) -> bool {
        let ef = (self.0 as u32 >> fmt.mantissa_bits) & ((1 << fmt.exponent_bits) - 1);
        ef == 0 && (!fmt.subnormals || self.0 as u32 & ((1 << fmt.mantissa_bits) - 1) == 0)
    }
}

/// Multiply two 8-bit codes the way the PE datapath does: XOR the signs, add
/// the exponents, and integer-multiply the (m+1)-bit significands. The result
/// is returned as the exact real product; accumulation downstream happens in
/// wide arithmetic, so no rounding occurs here.
pub fn fp8_mul(a: Fp8Code, b: Fp8Code, fmt: &MinifloatFormat) -> f64 {
    debug_assert_eq!(fmt.width(), 8);
    let m = fmt.mantissa_bits;
    let e = fmt.exponent_bits;
    let emask = (1u32 << e) - 1;
    let mmask = (1u32 << m) - 1;
    let split = |c: Fp8Code| {
        let c = c.0 as u32;
        let ef = (c >> m) & emask;
        let mant = c & mmask;
        // significand as an integer count of 2^-m units; exponent of the unit
        let (sig, exp) = if ef == 0 {
            if fmt.subnormals {
                (mant, 1 - fmt.bias)
            } else {
                (0, 1 - fmt.bias)
            }
        } else {
            ((1 << m) | mant, ef as i32 - fmt.bias)
        };
        (c >> (e + m) & 1, sig, exp)
    };
    let (sa, siga, expa) = split(a);
    let (sb, sigb, expb) = split(b);
    let sig = (siga as u64 * sigb as u64) as f64;
    let val = sig * exp2i(expa + expb - 2 * m as i32);
    if (sa ^ sb) == 1 {
        -val
    } else {
        val
    }
}

/// Dynamic-range summary of a format.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RangeReport {
    pub min_normal: f64,
    pub max_value: f64,
    pub width: u32,
}

pub fn range_report(fmt: &MinifloatFormat) -> RangeReport {
    RangeReport {
        min_normal: fmt.min_normal(),
        max_value: fmt.max_value(),
        width: fmt.width(),
    }
}

/// Exact 2^k for |k| well inside f64's normal range.
fn exp2i(k: i32) -> f64 {
    debug_assert!((-1000..=1000).contains(&k));
    f64::from_bits(((1023 + k) as u64) << 52)
}
