//! Signed two's-complement Q-format emulation.

use alloc::format;
use core::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Two's-complement format `[x.y]`: `x` integer bits including the sign bit
/// and `y` fractional bits, `x + y` bits per real component.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct FixedPointFormat {
    integer_bits: u32,
    fractional_bits: u32,
}

impl FixedPointFormat {
    pub fn new(integer_bits: u32, fractional_bits: u32) -> Result<Self> {
        if integer_bits < 1 {
            return Err(Error::Config("a signed format needs at least the sign bit".into()));
        }
        if integer_bits + fractional_bits > 48 {
            return Err(Error::Config(format!(
                "[{integer_bits}.{fractional_bits}] exceeds the 48-bit emulation limit"
            )));
        }
        Ok(Self {
            integer_bits,
            fractional_bits,
        })
    }

    /// Const constructor for formats known to be valid.
    pub const fn q(integer_bits: u32, fractional_bits: u32) -> Self {
        assert!(integer_bits >= 1 && integer_bits + fractional_bits <= 48);
        Self {
            integer_bits,
            fractional_bits,
        }
    }

    pub fn integer_bits(&self) -> u32 {
        self.integer_bits
    }

    pub fn fractional_bits(&self) -> u32 {
        self.fractional_bits
    }

    pub fn word_bits(&self) -> u32 {
        self.integer_bits + self.fractional_bits
    }

    /// Weight of the least significant bit.
    pub fn resolution(&self) -> f64 {
        libm::ldexp(1.0, -(self.fractional_bits as i32))
    }

    pub fn min_value(&self) -> f64 {
        -libm::ldexp(1.0, self.integer_bits as i32 - 1)
    }

    pub fn max_value(&self) -> f64 {
        libm::ldexp(1.0, self.integer_bits as i32 - 1) - self.resolution()
    }

    fn min_word(&self) -> i64 {
        -(1i64 << (self.word_bits() - 1))
    }

    fn max_word(&self) -> i64 {
        (1i64 << (self.word_bits() - 1)) - 1
    }

    /// Nearest code word, ties to even, saturated to the representable range.
    pub fn to_word(&self, x: f64) -> i64 {
        if x.is_nan() {
            return 0;
        }
        let scaled = libm::ldexp(x, self.fractional_bits as i32);
        let lo = self.min_word() as f64;
        let hi = self.max_word() as f64;
        if scaled <= lo {
            return self.min_word();
        }
        if scaled >= hi {
            return self.max_word();
        }
        libm::rint(scaled) as i64
    }

    pub fn from_word(&self, word: i64) -> f64 {
        libm::ldexp(word as f64, -(self.fractional_bits as i32))
    }

    /// Two's-complement bit pattern of `word` in the low `word_bits` bits.
    pub fn word_pattern(&self, word: i64) -> u64 {
        let mask = if self.word_bits() == 64 {
            u64::MAX
        } else {
            (1u64 << self.word_bits()) - 1
        };
        (word as u64) & mask
    }

    #[inline]
    pub fn quantize(&self, x: f64) -> f64 {
        self.from_word(self.to_word(x))
    }

    /// Quantizes real and imaginary parts independently.
    #[inline]
    pub fn quantize_complex(&self, z: Complex64) -> Complex64 {
        Complex64::new(self.quantize(z.re), self.quantize(z.im))
    }

    /// Whether `x` is exactly a code word of this format.
    pub fn represents(&self, x: f64) -> bool {
        self.quantize(x) == x
    }
}

impl fmt::Display for FixedPointFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}.{}]", self.integer_bits, self.fractional_bits)
    }
}

impl core::str::FromStr for FixedPointFormat {
    type Err = Error;

    /// Parses `[x.y]` or `x.y`.
    fn from_str(s: &str) -> Result<Self> {
        let inner = s.trim().trim_start_matches('[').trim_end_matches(']');
        let (i, f) = inner
            .split_once('.')
            .ok_or_else(|| Error::Config(format!("format `{s}` is not of the form [x.y]")))?;
        let parse = |p: &str| {
            p.trim()
                .parse::<u32>()
                .map_err(|_| Error::Config(format!("format `{s}` is not of the form [x.y]")))
        };
        FixedPointFormat::new(parse(i)?, parse(f)?)
    }
}

/// Rounds `x` to the nearest multiple of `2^-fractional_bits` (ties to even)
/// and saturates to the range of `fmt`.
pub fn quantize_fixed(x: f64, fmt: FixedPointFormat) -> f64 {
    fmt.quantize(x)
}
