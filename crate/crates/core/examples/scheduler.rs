//! Optimal issue order for an instruction DAG on the two-pipeline model.
//!
//!     cargo run --example scheduler [-- path/to/file.dag]

use torontonian::scheduler::{astar_schedule, load_dag, report, simulate};

fn main() {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/reduction_synthetic.dag").to_string());
    let dag = load_dag(&std::fs::read_to_string(&path).unwrap()).unwrap();
    println!("{} nodes, {} instructions after expanding groups", dag.nodes().len(), dag.expanded_len());

    let natural = simulate(&dag, &dag.natural_order()).unwrap();
    println!("natural order: {} cycles", natural.makespan);
    let (best, stats) = astar_schedule(&dag).unwrap();
    println!("optimal:       {} cycles ({} states expanded, {} pruned)", best.makespan, stats.expanded, stats.pruned);
    print!("{}", report(&best));
}
