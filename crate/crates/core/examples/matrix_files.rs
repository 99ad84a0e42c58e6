//! Text and quantized binary matrix files, and the symmetry checks on a
//! generated instance.
//!
//!     cargo run --example matrix_files

use torontonian::matrixio::{
    check_symmetries, detect_format, generate_instance, load_matrix, save_matrix, Format, GenerateParams,
};

fn main() {
    let a = generate_instance(&GenerateParams::new(8, 11)).unwrap();
    println!("{}", check_symmetries(&a.to_dense()).summary());
    println!("{} stored reals for a {1}x{1} complex matrix", a.stored_reals(), a.dim());

    let text = save_matrix(&a, Format::Text, None).unwrap();
    println!("text:   {} bytes", text.len());
    for bits in [16, 32] {
        let bin = save_matrix(&a, Format::Binary, Some(bits)).unwrap();
        let back = load_matrix(&bin, detect_format(&bin).unwrap()).unwrap();
        let mut err = 0f64;
        for r in 0..a.dim() {
            for c in 0..a.dim() {
                err = err.max((a.element(r, c) - back.element(r, c)).norm());
            }
        }
        println!("binary: {} bytes at {bits} bits, max error {err:.2e}", bin.len());
    }
    let dense = a.dim() * a.dim() * 16;
    println!("dense complex128 would take {dense} bytes");

    let head: String = String::from_utf8_lossy(&text).lines().take(3).collect::<Vec<_>>().join("\n");
    println!("---\n{head}\n...");
}
