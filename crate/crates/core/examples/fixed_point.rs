//! Wide fixed-point arithmetic: the same values at 128 and 256 bits.
//!
//!     cargo run --example fixed_point

use torontonian::fixedpt::{Fixed128, Fixed256};

fn main() {
    let x = 0.8125;
    let y = -3.0e-5;

    let f = 100;
    let a = Fixed128::from_f64(x, f).unwrap();
    let b = Fixed128::from_f64(y, f).unwrap();
    println!("128-bit, f = {f}");
    println!("  a + b     = {:.20e}", (a + b).to_f64(f));
    println!("  a * b     = {:.20e}", a.mul(b, f).to_f64(f));
    println!("  1 / a     = {:.20e}", a.recip(f).unwrap().to_f64(f));
    println!("  1/sqrt(a) = {:.20e}", a.rsqrt(f).unwrap().to_f64(f));
    println!("  raw a     = {a:?}");

    let f = 220;
    let a = Fixed256::from_f64(x, f).unwrap();
    let b = Fixed256::from_f64(y, f).unwrap();
    println!("256-bit, f = {f}");
    println!("  a * b     = {:.20e}", a.mul(b, f).to_f64(f));
    println!("  1/sqrt(a) = {:.20e}", a.rsqrt(f).unwrap().to_f64(f));

    // a tiny operand has a reciprocal that no longer fits the word
    let tiny = Fixed128::from_raw_i64(3);
    println!("recip of 3 ulp fits at f = 100: {}", tiny.recip_fits(100));
    println!("recip of 3 ulp fits at f = 60:  {}", tiny.recip_fits(60));
}
