//! Unsigned little-endian limb helpers shared by the fixed-point kernels.
//!
//! Most helpers work on slices so the same code serves 128-bit and 256-bit
//! words and the double-width intermediates of `mul`. Division and square
//! root are const-generic over the limb count; they sit on the hot path.

/// Largest double-width buffer we ever need (2 × 4 limbs).
pub(crate) const MAX_WIDE: usize = 8;

#[inline]
pub(crate) fn add_assign(acc: &mut [u64], rhs: &[u64]) -> bool {
    let mut carry = false;
    for (a, &b) in acc.iter_mut().zip(rhs) {
        let (s1, c1) = a.overflowing_add(b);
        let (s2, c2) = s1.overflowing_add(carry as u64);
        *a = s2;
        carry = c1 | c2;
    }
    carry
}

#[inline]
pub(crate) fn sub_assign(acc: &mut [u64], rhs: &[u64]) -> bool {
    let mut borrow = false;
    for (a, &b) in acc.iter_mut().zip(rhs) {
        let (d1, b1) = a.overflowing_sub(b);
        let (d2, b2) = d1.overflowing_sub(borrow as u64);
        *a = d2;
        borrow = b1 | b2;
    }
    borrow
}

#[inline]
pub(crate) fn is_zero(a: &[u64]) -> bool {
    a.iter().all(|&x| x == 0)
}

/// Number of significant bits (0 for zero).
#[inline]
pub(crate) fn bit_len(a: &[u64]) -> u32 {
    for (i, &w) in a.iter().enumerate().rev() {
        if w != 0 {
            return 64 * i as u32 + (64 - w.leading_zeros());
        }
    }
    0
}

#[inline]
pub(crate) fn shl1(a: &mut [u64]) {
    let mut carry = 0u64;
    for w in a.iter_mut() {
        let next = *w >> 63;
        *w = (*w << 1) | carry;
        carry = next;
    }
}

#[inline]
pub(crate) fn shr1(a: &mut [u64]) {
    let mut carry = 0u64;
    for w in a.iter_mut().rev() {
        let next = *w << 63;
        *w = (*w >> 1) | carry;
        carry = next;
    }
}

/// Sets bit `pos`; positions at or beyond the slice width are dropped (wrap).
#[inline]
pub(crate) fn set_bit(a: &mut [u64], pos: u32) {
    let word = (pos / 64) as usize;
    if word < a.len() {
        a[word] |= 1u64 << (pos % 64);
    }
}

/// Full unsigned product of two `L`-limb values into `out[..2L]`.
#[inline]
pub(crate) fn mul_full<const L: usize>(a: &[u64; L], b: &[u64; L], out: &mut [u64]) {
    out[..2 * L].fill(0);
    for i in 0..L {
        let mut carry = 0u128;
        let ai = a[i] as u128;
        for j in 0..L {
            let t = ai * b[j] as u128 + out[i + j] as u128 + carry;
            out[i + j] = t as u64;
            carry = t >> 64;
        }
        out[i + L] = carry as u64;
    }
}

/// `a - b` over `N` limbs and whether it borrowed.
#[inline(always)]
fn sub_borrow<const N: usize>(a: &[u64; N], b: &[u64; N]) -> ([u64; N], bool) {
    let mut out = [0u64; N];
    let mut borrow = false;
    for i in 0..N {
        let (d1, b1) = a[i].overflowing_sub(b[i]);
        let (d2, b2) = d1.overflowing_sub(borrow as u64);
        out[i] = d2;
        borrow = b1 | b2;
    }
    (out, borrow)
}

/// Quotient of `2^exp / d` by restoring long division, written into `quot`
/// modulo `2^(64 * quot.len())`. `d` must be nonzero and have its top bit
/// clear so the running remainder never overflows `N` limbs.
///
/// Only the quotient bit positions that can be nonzero are visited, so the
/// loop runs `exp - bit_len(d) + 2` times. Each step subtracts
/// unconditionally and keeps the difference through a mask.
pub(crate) fn div_pow2<const N: usize>(exp: u32, d: &[u64; N], quot: &mut [u64]) {
    quot.fill(0);
    let t = bit_len(d);
    debug_assert!(t > 0 && t < 64 * N as u32);
    if exp + 1 < t {
        return;
    }
    let mut rem = [0u64; N];
    // Partial dividend covering dividend bits >= p is 2^(t-1) < 2^t.
    set_bit(&mut rem, t - 1);
    let mut p = exp + 1 - t;
    loop {
        let (diff, borrow) = sub_borrow(&rem, d);
        let keep = (borrow as u64).wrapping_sub(1);
        for i in 0..N {
            rem[i] = (diff[i] & keep) | (rem[i] & !keep);
        }
        let word = (p / 64) as usize;
        if word < quot.len() {
            quot[word] |= (keep & 1) << (p % 64);
        }
        if p == 0 {
            break;
        }
        shl1(&mut rem);
        p -= 1;
    }
}

/// Integer square root, digit by digit: `floor(sqrt(x))` into `root`
/// (low limbs if `root` is shorter). `x` is consumed.
pub(crate) fn isqrt<const N: usize>(x: &mut [u64; N], root: &mut [u64]) {
    root.fill(0);
    let bl = bit_len(x);
    if bl == 0 {
        return;
    }
    let mut res = [0u64; N];
    // the trial bit walks down from the highest power of four not above x
    let mut pos = (bl - 1) & !1;
    loop {
        // res has no bits at or below pos, so res + bit is an OR
        let mut trial = res;
        trial[(pos / 64) as usize] |= 1u64 << (pos % 64);
        let (diff, borrow) = sub_borrow(x, &trial);
        let keep = (borrow as u64).wrapping_sub(1);
        for i in 0..N {
            x[i] = (diff[i] & keep) | (x[i] & !keep);
        }
        shr1(&mut res);
        let mut add = [0u64; N];
        add[(pos / 64) as usize] = (keep & 1) << (pos % 64);
        add_assign(&mut res, &add);
        if pos < 2 {
            break;
        }
        pos -= 2;
    }
    let m = root.len().min(N);
    root[..m].copy_from_slice(&res[..m]);
}
