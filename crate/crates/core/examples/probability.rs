//! Click-pattern probabilities of a small Gaussian state. They sum to one.
//!
//!     cargo run --example probability

use torontonian::matrixio::{generate_instance, ClickPattern, GenerateParams};
use torontonian::torontonian::{probability, probability_reference};

fn main() {
    let m = 4;
    let a = generate_instance(&GenerateParams { n_modes: m, a_target: 0.2, spread: 0.05, seed: 3 }).unwrap();
    let (mut total, mut total_ref) = (0.0, 0.0);
    println!("pattern   engine          reference");
    for bits in 0..1u64 << m {
        let s = ClickPattern::new(m, bits);
        let p = probability(&a, &s).unwrap();
        let q = probability_reference(&a, &s).unwrap();
        total += p;
        total_ref += q;
        let pattern: String = (0..m).map(|k| if bits >> k & 1 == 1 { '1' } else { '0' }).collect();
        println!("{pattern}      {p:.9e}  {q:.9e}");
    }
    println!("sum       {total:.12}  {total_ref:.12}");
}
