use super::{Fixed, FixedError};

/// Complex number with fixed-point parts sharing one width and scale.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Debug, Default)]
pub struct ComplexFixed<const L: usize> {
    pub re: Fixed<L>,
    pub im: Fixed<L>,
}

impl<const L: usize> ComplexFixed<L> {
    pub const ZERO: Self = Self { re: Fixed::ZERO, im: Fixed::ZERO };

    pub const fn new(re: Fixed<L>, im: Fixed<L>) -> Self {
        Self { re, im }
    }

    pub fn from_f64(re: f64, im: f64, frac_bits: u32) -> Result<Self, FixedError> {
        Ok(Self { re: Fixed::from_f64(re, frac_bits)?, im: Fixed::from_f64(im, frac_bits)? })
    }

    pub fn to_f64(self, frac_bits: u32) -> (f64, f64) {
        (self.re.to_f64(frac_bits), self.im.to_f64(frac_bits))
    }

    #[inline]
    pub fn conj(self) -> Self {
        Self { re: self.re, im: -self.im }
    }

    #[inline]
    pub fn add(self, rhs: Self) -> Self {
        Self { re: self.re + rhs.re, im: self.im + rhs.im }
    }

    #[inline]
    pub fn sub(self, rhs: Self) -> Self {
        Self { re: self.re - rhs.re, im: self.im - rhs.im }
    }

    /// Four real multiplies and two additions.
    #[inline]
    pub fn mul(self, rhs: Self, frac_bits: u32) -> Self {
        let rr = self.re.mul(rhs.re, frac_bits);
        let ii = self.im.mul(rhs.im, frac_bits);
        let ri = self.re.mul(rhs.im, frac_bits);
        let ir = self.im.mul(rhs.re, frac_bits);
        Self { re: rr - ii, im: ri + ir }
    }

    /// Product with a real scalar: two real multiplies.
    #[inline]
    pub fn scale(self, k: Fixed<L>, frac_bits: u32) -> Self {
        Self { re: self.re.mul(k, frac_bits), im: self.im.mul(k, frac_bits) }
    }
}
