//! Torontonian of a generated instance with the fixed-point engine, next to
//! the double-precision reference.
//!
//!     cargo run --release --example torontonian -- 12 4

use torontonian::matrixio::{generate_instance, GenerateParams};
use torontonian::precision::PrecisionMode;
use torontonian::torontonian::{torontonian, torontonian_reference};

fn main() {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(12);
    let workers: usize = args.next().map(|s| s.parse().unwrap()).unwrap_or(4);

    let a = generate_instance(&GenerateParams::new(n, 7)).unwrap();
    println!("N = {n}, mean occupation {:.4}", a.mean_diagonal());

    let r = torontonian(&a, PrecisionMode::Auto, workers).unwrap();
    let c = &r.config;
    println!("engine:    {:.12e}", r.value);
    println!("  {}-bit, f = {}, budget {} + {} + {} + {} bits", c.width_bits, c.frac_bits, c.b_lower, c.b_upper, c.b_sgn, c.b_accum);
    println!("  raw {}", r.raw.to_hex());
    println!("  {} terms in {:.3} s on {workers} workers", r.term_count, r.wall_time.as_secs_f64());

    if n <= 20 {
        let reference = torontonian_reference(&a.to_dense()).unwrap();
        println!("reference: {reference:.12e}");
        println!("relative difference {:.1e}", ((r.value - reference) / reference).abs());
    }
}
