//! How the word width and scaling factor are chosen as N grows.
//!
//!     cargo run --release --example precision

use torontonian::matrixio::{generate_instance, GenerateParams};
use torontonian::precision::{det_estimate, estimate_lower_bound_bits, lower_bound_estimate, select_precision, DEFAULT_SIG_DIGITS};

fn main() {
    println!(" N  width   f  lower upper  sgn accum  total  k");
    for n in [4, 10, 20, 30, 31, 40, 45, 50, 60] {
        let a = generate_instance(&GenerateParams::new(n, 1)).unwrap();
        let c = select_precision(&a, DEFAULT_SIG_DIGITS).unwrap();
        println!(
            "{n:>2}  {:>5} {:>3}  {:>5} {:>5} {:>4} {:>5}  {:>5}  {:.5}",
            c.width_bits,
            c.frac_bits,
            c.b_lower,
            c.b_upper,
            c.b_sgn,
            c.b_accum,
            c.total_bits(),
            c.k_corr
        );
    }

    println!();
    println!("closed forms at a = 0.16, N = 60");
    println!("  1 / det estimate, k = 0.002:      {:.4e}", 1.0 / det_estimate(60, 0.16, 0.002));
    for k in [0.0, 0.0009, 0.002, 0.0035] {
        let v = lower_bound_estimate(60, 0.16, k).unwrap();
        println!("  magnitude estimate, k = {k:<6}: {v:.4e} ({} bits)", estimate_lower_bound_bits(60, 0.16, k).unwrap());
    }
}
