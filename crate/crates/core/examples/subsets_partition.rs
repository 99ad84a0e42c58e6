//! Fixed-popcount subset enumeration and the static work split.
//!
//!     cargo run --example subsets_partition -- 10 7

use torontonian::subsets::{audit_partition, binom, get_kth_mask, get_next_mask, partition, SubsetMask};

fn main() {
    let mut args = std::env::args().skip(1).map(|s| s.parse::<u32>().expect("integer argument"));
    let n = args.next().unwrap_or(10);
    let nproc = args.next().unwrap_or(7);

    // the class of 4-bit masks with two bits set, largest first
    let mut m = get_kth_mask(4, 2, 0).unwrap();
    print!("4 choose 2: {:04b}", m.0);
    while let Ok(next) = get_next_mask(m) {
        print!(" {:04b}", next.0);
        m = next;
    }
    println!();
    println!("after 010011 comes {:06b}", get_next_mask(SubsetMask(0b010011)).unwrap().0);

    println!("N = {n}, {nproc} ranks");
    for rank in 0..nproc.min(4) {
        let w = partition(n, rank, nproc).unwrap();
        let sizes: Vec<u64> = w.ranges.iter().map(|r| r.len).collect();
        println!("  rank {rank}: {} masks, per popcount {sizes:?}{}", w.len(), if w.owns_empty_set() { ", plus the empty set" } else { "" });
    }
    if nproc > 4 {
        println!("  ...");
    }
    println!("  C({n}, {}) = {}", n / 2, binom(n, n / 2).unwrap());
    if n <= 20 {
        let audit = audit_partition(n, nproc).unwrap();
        println!("  audit: ok = {}, max imbalance {}", audit.ok(), audit.max_imbalance);
    }
}
