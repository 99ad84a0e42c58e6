//! Determinant of a Hermitian positive definite matrix by in-place
//! elimination on the packed upper triangle, in fixed point and in double.
//!
//!     cargo run --example hermitian_det

use num_complex::Complex64;
use torontonian::fixedpt::ComplexFixed;
use torontonian::linalg::{elimination_flops, hermitian_det_fixed, hermitian_det_float, HermitianFixed, HermitianFloat, OpCounters};

fn main() {
    let n = 6;
    // diagonally dominant, so positive definite
    let entry = |i: usize, j: usize| {
        if i == j {
            Complex64::new(2.0 + i as f64 * 0.1, 0.0)
        } else {
            Complex64::new(0.3 / (1 + i + j) as f64, 0.1 * (j as f64 - i as f64))
        }
    };

    let float = HermitianFloat::from_upper_fn(n, entry);
    println!("double:    {:.15e}", hermitian_det_float(&float).unwrap());

    let f = 110;
    let mut fixed = HermitianFixed::<2>::from_upper_fn(n, |i, j| {
        let v = entry(i, j);
        ComplexFixed::from_f64(v.re, v.im, f).unwrap()
    });
    let mut counters = OpCounters::default();
    let det = hermitian_det_fixed(&mut fixed, f, &mut counters).unwrap();
    println!("128-bit:   {:.15e}", det.to_f64(f));
    println!("counted {} real ops, formula {}", counters.elimination_flops(), elimination_flops(n as u64));

    // an indefinite matrix stops at the first bad pivot
    let mut bad = HermitianFixed::<2>::from_upper_fn(2, |i, j| {
        let v = if i == j { 1.0 } else { 2.0 };
        ComplexFixed::from_f64(v, 0.0, f).unwrap()
    });
    println!("indefinite: {:?}", hermitian_det_fixed(&mut bad, f, &mut counters).unwrap_err());
}
