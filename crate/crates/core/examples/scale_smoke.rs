//! Timing run: one full Torontonian at 128 bits, then strong scaling over
//! worker counts. Slow at the default N = 26; pass a smaller N to try it.
//!
//!     cargo run --release --example scale_smoke -- 26

use std::time::Instant;
use torontonian::cli::flops_formula;
use torontonian::matrixio::{generate_instance, GenerateParams};
use torontonian::precision::PrecisionMode;
use torontonian::torontonian::torontonian;

fn main() {
    let n: usize = std::env::args().nth(1).map(|s| s.parse().unwrap()).unwrap_or(26);
    let cores = std::thread::available_parallelism().map(|c| c.get()).unwrap_or(1);
    let a = generate_instance(&GenerateParams::new(n, 1015)).unwrap();
    let flops = flops_formula(n as u32).unwrap() as f64;
    println!("N = {n}, {} terms, {cores} cores", 1u64 << n);

    let mut base = None;
    let mut workers = 1;
    while workers <= cores {
        let t = Instant::now();
        let r = torontonian(&a, PrecisionMode::W128, workers).unwrap();
        let secs = t.elapsed().as_secs_f64();
        let t1 = *base.get_or_insert(secs);
        println!(
            "{workers:>3} workers: {secs:>9.2} s  speedup {:>5.2}  {:.3e} op/s  Tor = {:.6e}",
            t1 / secs,
            flops / secs,
            r.value
        );
        workers *= 2;
    }
}
