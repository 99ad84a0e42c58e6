//! Wide signed fixed-point arithmetic.
//!
//! A [`Fixed<L>`] is an `L`-limb two's-complement integer `i` read as
//! `i / 2^f`, where the fractional bit count `f` is a property of the whole
//! computation (see [`crate::precision::PrecisionConfig`]) rather than of each
//! number. Only `L = 2` (128-bit) and `L = 4` (256-bit) are supported.
//!
//! Addition and subtraction are exact and wrap modulo `2^width`. Multiplication
//! truncates toward negative infinity. `recip` is a floor, `rsqrt` is a floor
//! of the exact square root, so both are within one unit in the last place.

mod complex;
pub(crate) mod wide;

pub use complex::ComplexFixed;

use std::fmt;
use std::ops::{Add, AddAssign, Neg, Sub, SubAssign};

use thiserror::Error;

use wide::MAX_WIDE;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FixedError {
    #[error("{op} requires a strictly positive operand")]
    Domain { op: &'static str },
    #[error("value {value} does not fit a {width}-bit word with {frac_bits} fractional bits")]
    OutOfRange { value: f64, width: u32, frac_bits: u32 },
    #[error("cannot convert non-finite value {0}")]
    NonFinite(f64),
}

/// Two's-complement fixed-point number stored as `L` little-endian 64-bit limbs.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Fixed<const L: usize> {
    limbs: [u64; L],
}

pub type Fixed128 = Fixed<2>;
pub type Fixed256 = Fixed<4>;

impl<const L: usize> Default for Fixed<L> {
    fn default() -> Self {
        Self::ZERO
    }
}

impl<const L: usize> fmt::Debug for Fixed<L> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Fixed<{}>(0x", Self::WIDTH)?;
        for limb in self.limbs.iter().rev() {
            write!(f, "{limb:016x}")?;
        }
        write!(f, ")")
    }
}

impl<const L: usize> Fixed<L> {
    pub const WIDTH: u32 = 64 * L as u32;
    pub const ZERO: Self = Self { limbs: [0; L] };

    pub const fn from_limbs(limbs: [u64; L]) -> Self {
        Self { limbs }
    }

    pub const fn limbs(&self) -> &[u64; L] {
        &self.limbs
    }

    /// Raw integer `i` (sign-extended), i.e. the value `i / 2^f`.
    pub fn from_raw_i64(i: i64) -> Self {
        let ext = if i < 0 { u64::MAX } else { 0 };
        let mut limbs = [ext; L];
        limbs[0] = i as u64;
        Self { limbs }
    }

    /// The value 1.0 at `frac_bits`.
    pub fn one(frac_bits: u32) -> Self {
        debug_assert!(frac_bits < Self::WIDTH - 1);
        let mut limbs = [0; L];
        wide::set_bit(&mut limbs, frac_bits);
        Self { limbs }
    }

    #[inline]
    pub fn is_negative(&self) -> bool {
        self.limbs[L - 1] >> 63 == 1
    }

    #[inline]
    pub fn is_zero(&self) -> bool {
        wide::is_zero(&self.limbs)
    }

    #[inline]
    pub fn is_positive(&self) -> bool {
        !self.is_negative() && !self.is_zero()
    }

    #[inline]
    pub fn wrapping_add(mut self, rhs: Self) -> Self {
        wide::add_assign(&mut self.limbs, &rhs.limbs);
        self
    }

    #[inline]
    pub fn wrapping_sub(mut self, rhs: Self) -> Self {
        wide::sub_assign(&mut self.limbs, &rhs.limbs);
        self
    }

    #[inline]
    pub fn wrapping_neg(self) -> Self {
        Self::ZERO.wrapping_sub(self)
    }

    /// Negates when `negate` is set, without a data-dependent branch.
    #[inline]
    pub fn conditional_neg(self, negate: bool) -> Self {
        let mask = 0u64.wrapping_sub(negate as u64);
        let mut limbs = self.limbs;
        for w in limbs.iter_mut() {
            *w ^= mask;
        }
        let mut one = [0u64; L];
        one[0] = negate as u64;
        wide::add_assign(&mut limbs, &one);
        Self { limbs }
    }

    /// Addition that reports signed overflow instead of wrapping. Used by the
    /// saturation checks; the kernels themselves always wrap.
    pub fn checked_add(self, rhs: Self) -> Option<Self> {
        let sum = self.wrapping_add(rhs);
        let overflow = self.is_negative() == rhs.is_negative() && sum.is_negative() != self.is_negative();
        (!overflow).then_some(sum)
    }

    /// Signed product scaled back by `2^frac_bits`:
    /// `floor(int(a) * int(b) / 2^f)` truncated to the word width.
    ///
    /// The full unsigned product of the two's-complement patterns differs
    /// from the signed product by `b * 2^W` when `a < 0` and by `a * 2^W` when
    /// `b < 0`; both corrections are applied with masks, then the
    /// double-width result is shifted arithmetically.
    #[inline]
    pub fn mul(self, rhs: Self, frac_bits: u32) -> Self {
        debug_assert!(frac_bits < Self::WIDTH);
        let mut prod = [0u64; MAX_WIDE + 1];
        wide::mul_full(&self.limbs, &rhs.limbs, &mut prod);

        let a_mask = 0u64.wrapping_sub(self.limbs[L - 1] >> 63);
        let b_mask = 0u64.wrapping_sub(rhs.limbs[L - 1] >> 63);
        let mut borrow = 0u64;
        for i in 0..L {
            let (d1, b1) = prod[L + i].overflowing_sub(rhs.limbs[i] & a_mask);
            let (d2, b2) = d1.overflowing_sub(self.limbs[i] & b_mask);
            let (d3, b3) = d2.overflowing_sub(borrow);
            prod[L + i] = d3;
            borrow = b1 as u64 + b2 as u64 + b3 as u64;
        }
        prod[2 * L] = 0u64.wrapping_sub(prod[2 * L - 1] >> 63);

        // frac_bits is fixed for a whole run, so this branch predicts perfectly
        // and every load below has a constant offset
        let bit = frac_bits % 64;
        let limbs = match frac_bits / 64 {
            0 => shift_out::<L, 0>(&prod, bit),
            1 => shift_out::<L, 1>(&prod, bit),
            2 => shift_out::<L, 2>(&prod, bit),
            _ => shift_out::<L, 3>(&prod, bit),
        };
        Self { limbs }
    }

    /// Whether `recip` of this positive value fits the word. The kernel itself
    /// wraps; callers that can meet tiny operands check this first.
    pub fn recip_fits(self, frac_bits: u32) -> bool {
        // floor(2^(2f) / a) < 2^(W-1)  <=>  a > 2^(2f-W+1)
        self.is_positive() && self.exceeds_pow2(2 * frac_bits as i64 - Self::WIDTH as i64 + 1)
    }

    /// Whether `rsqrt` of this positive value fits the word.
    pub fn rsqrt_fits(self, frac_bits: u32) -> bool {
        // floor(sqrt(floor(2^(3f) / a))) < 2^(W-1)  <=>  a > 2^(3f-2W+2)
        self.is_positive() && self.exceeds_pow2(3 * frac_bits as i64 - 2 * Self::WIDTH as i64 + 2)
    }

    /// `int(self) > 2^t` for a positive value.
    fn exceeds_pow2(self, t: i64) -> bool {
        if t < 0 {
            return true;
        }
        // a > 2^t  <=>  a - 1 >= 2^t
        let below = self.wrapping_sub(Self::from_raw_i64(1));
        wide::bit_len(&below.limbs) as i64 > t
    }

    /// `floor(2^(2f) / int(a))`, i.e. `1 / a` rounded down to the grid.
    pub fn recip(self, frac_bits: u32) -> Result<Self, FixedError> {
        if !self.is_positive() {
            return Err(FixedError::Domain { op: "recip" });
        }
        let mut limbs = [0u64; L];
        wide::div_pow2(2 * frac_bits, &self.limbs, &mut limbs);
        Ok(Self { limbs })
    }

    /// `floor(sqrt(2^(3f) / int(a)))`, i.e. `1 / sqrt(a)` rounded down to the grid.
    pub fn rsqrt(self, frac_bits: u32) -> Result<Self, FixedError> {
        if !self.is_positive() {
            return Err(FixedError::Domain { op: "rsqrt" });
        }
        let mut limbs = [0u64; L];
        match L {
            2 => rsqrt_with::<L, 4>(&self.limbs, 3 * frac_bits, &mut limbs),
            4 => rsqrt_with::<L, 8>(&self.limbs, 3 * frac_bits, &mut limbs),
            _ => rsqrt_with::<L, MAX_WIDE>(&self.limbs, 3 * frac_bits, &mut limbs),
        }
        Ok(Self { limbs })
    }

    /// Round-to-nearest (ties away from zero) quantization at step `2^-f`.
    pub fn from_f64(x: f64, frac_bits: u32) -> Result<Self, FixedError> {
        if !x.is_finite() {
            return Err(FixedError::NonFinite(x));
        }
        let out_of_range = || FixedError::OutOfRange { value: x, width: Self::WIDTH, frac_bits };
        if x == 0.0 {
            return Ok(Self::ZERO);
        }
        let bits = x.abs().to_bits();
        let biased = ((bits >> 52) & 0x7ff) as i32;
        let frac = bits & ((1u64 << 52) - 1);
        // |x| = mant * 2^exp
        let (mant, exp) = if biased == 0 { (frac, -1074) } else { (frac | (1u64 << 52), biased - 1075) };
        let shift = exp + frac_bits as i32;
        let mut limbs = [0u64; L];
        if shift >= 0 {
            let shift = shift as u32;
            if 53 + shift > Self::WIDTH {
                return Err(out_of_range());
            }
            let word = (shift / 64) as usize;
            let bit = shift % 64;
            limbs[word] = mant << bit;
            if bit != 0 && word + 1 < L {
                limbs[word + 1] = mant >> (64 - bit);
            }
        } else {
            let k = (-shift) as u32;
            limbs[0] = if k > 64 {
                0
            } else if k == 64 {
                mant >> 63
            } else {
                (mant >> k) + ((mant >> (k - 1)) & 1)
            };
        }
        if wide::bit_len(&limbs) > Self::WIDTH - 1 {
            return Err(out_of_range());
        }
        Ok(Self { limbs }.conditional_neg(x < 0.0))
    }

    /// Nearest `f64` to the represented value; exact when the magnitude has at
    /// most 53 significant bits.
    pub fn to_f64(self, frac_bits: u32) -> f64 {
        let neg = self.is_negative();
        let mag = self.conditional_neg(neg).limbs;
        let n = wide::bit_len(&mag);
        if n == 0 {
            return 0.0;
        }
        let (top, shift) = if n <= 64 {
            (mag[0], 0)
        } else {
            // top 64 bits plus a sticky bit so the u64 -> f64 rounding is correct
            let s = n - 64;
            let word = (s / 64) as usize;
            let bit = s % 64;
            let mut top = mag[word] >> bit;
            if bit != 0 {
                top |= mag[word + 1] << (64 - bit);
            }
            let below_word = mag[..word].iter().any(|&w| w != 0);
            let below_bits = bit != 0 && mag[word] & ((1u64 << bit) - 1) != 0;
            top |= (below_word || below_bits) as u64;
            (top, s as i32)
        };
        let v = top as f64 * pow2(shift - frac_bits as i32);
        if neg {
            -v
        } else {
            v
        }
    }
}

fn pow2(e: i32) -> f64 {
    // powi is exact for powers of two as long as the result is normal; split to stay in range
    if e.abs() < 1000 {
        2f64.powi(e)
    } else {
        2f64.powi(e / 2) * 2f64.powi(e - e / 2)
    }
}

/// Limbs `W..W + L` of `prod` shifted right by `bit`.
#[inline(always)]
fn shift_out<const L: usize, const W: usize>(prod: &[u64; MAX_WIDE + 1], bit: u32) -> [u64; L] {
    let mut limbs = [0u64; L];
    for (i, out) in limbs.iter_mut().enumerate() {
        // (hi << 1) << (63 - bit) is hi << (64 - bit) without the bit == 0 special case
        *out = (prod[W + i] >> bit) | ((prod[W + i + 1] << 1) << (63 - bit));
    }
    limbs
}

/// `isqrt(floor(2^exp / d))` with an `N`-limb quotient, `N >= 2L`.
#[inline]
fn rsqrt_with<const L: usize, const N: usize>(d: &[u64; L], exp: u32, out: &mut [u64; L]) {
    debug_assert!(N >= 2 * L);
    let mut quot = [0u64; N];
    wide::div_pow2(exp, d, &mut quot);
    wide::isqrt(&mut quot, out);
}

impl<const L: usize> Add for Fixed<L> {
    type Output = Self;
    #[inline]
    fn add(self, rhs: Self) -> Self {
        self.wrapping_add(rhs)
    }
}

impl<const L: usize> Sub for Fixed<L> {
    type Output = Self;
    #[inline]
    fn sub(self, rhs: Self) -> Self {
        self.wrapping_sub(rhs)
    }
}

impl<const L: usize> Neg for Fixed<L> {
    type Output = Self;
    #[inline]
    fn neg(self) -> Self {
        self.wrapping_neg()
    }
}

impl<const L: usize> AddAssign for Fixed<L> {
    #[inline]
    fn add_assign(&mut self, rhs: Self) {
        wide::add_assign(&mut self.limbs, &rhs.limbs);
    }
}

impl<const L: usize> SubAssign for Fixed<L> {
    #[inline]
    fn sub_assign(&mut self, rhs: Self) {
        wide::sub_assign(&mut self.limbs, &rhs.limbs);
    }
}

/// A fixed-point value of either supported width, for reports and results
/// whose width is chosen at run time.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug)]
pub enum FixedPoint {
    W128(Fixed128),
    W256(Fixed256),
}

impl FixedPoint {
    pub fn width(&self) -> u32 {
        match self {
            FixedPoint::W128(_) => 128,
            FixedPoint::W256(_) => 256,
        }
    }

    pub fn limbs(&self) -> &[u64] {
        match self {
            FixedPoint::W128(x) => x.limbs(),
            FixedPoint::W256(x) => x.limbs(),
        }
    }

    pub fn to_f64(&self, frac_bits: u32) -> f64 {
        match *self {
            FixedPoint::W128(x) => x.to_f64(frac_bits),
            FixedPoint::W256(x) => x.to_f64(frac_bits),
        }
    }

    /// Lower-case hex of the limbs, most significant first.
    pub fn to_hex(&self) -> String {
        self.limbs().iter().rev().map(|w| format!("{w:016x}")).collect()
    }
}
