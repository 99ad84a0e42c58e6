//! Sampling-matrix storage, file formats, quantization and instance generation.
//!
//! A `2N x 2N` sampling matrix with blocks `[[A00, A01], [A10, A11]]` is kept
//! as the upper triangles of `A00` (Hermitian) and `A01` (symmetric); the
//! other two blocks follow from `A10 = conj(A01)` and `A11 = conj(A00)`.
//!
//! Two file formats are supported:
//!
//! * text: lossless decimal doubles,
//!   ```text
//!   GBSA-TEXT 1
//!   modes <N>
//!   A00
//!   <i> <j> <re> <im>      one line per i <= j, row-major
//!   A01
//!   <i> <j> <re> <im>
//!   ```
//!   Blank lines and lines starting with `#` are ignored.
//! * binary: magic `GBSA`, version `u16`, `N` as `u32`, `quant_bits` as `u8`,
//!   then the `A00` triangle and the `A01` triangle, each row-major with real
//!   and imaginary parts interleaved as signed little-endian integers of
//!   `quant_bits` bits. All header integers are little-endian.

use std::fmt::Write as _;

use num_complex::Complex64;
use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{packed_len, DenseMatrix};

pub const BINARY_MAGIC: &[u8; 4] = b"GBSA";
pub const BINARY_VERSION: u16 = 1;
pub const TEXT_MAGIC: &str = "GBSA-TEXT";
pub const TEXT_VERSION: u32 = 1;

/// Tolerance used by [`check_symmetries`].
pub const SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MatrixError {
    #[error("value {value} outside (-1, 1) cannot be quantized")]
    Range { value: f64 },
    #[error("unsupported quantization width {0} (expected 16 or 32)")]
    QuantBits(u32),
    #[error("parse error at byte offset {offset}: {msg}")]
    Binary { offset: usize, msg: String },
    #[error("parse error at line {line}: {msg}")]
    Text { line: usize, msg: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("symmetry violation: {0}")]
    Symmetry(String),
    #[error("click pattern selects no modes")]
    EmptyPattern,
    #[error("invalid generator parameters: {0}")]
    Generator(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Text,
    Binary,
}

fn check_bits(bits: u32) -> Result<(), MatrixError> {
    match bits {
        16 | 32 => Ok(()),
        other => Err(MatrixError::QuantBits(other)),
    }
}

/// `round_half_away_from_zero(x * 2^(bits-1))`, clamped to the symmetric range.
pub fn quantize(x: f64, bits: u32) -> Result<i32, MatrixError> {
    check_bits(bits)?;
    if !(x.abs() < 1.0) {
        return Err(MatrixError::Range { value: x });
    }
    let scale = (1u64 << (bits - 1)) as f64;
    let limit = ((1u64 << (bits - 1)) - 1) as f64;
    // f64::round is half-away-from-zero
    Ok((x * scale).round().clamp(-limit, limit) as i32)
}

pub fn dequantize(q: i32, bits: u32) -> f64 {
    q as f64 / (1u64 << (bits - 1)) as f64
}

/// Threshold-detector outcome over `M` modes: bit `k` set means detector `k`
/// clicked. (This is the natural low-to-high order, unlike [`crate::subsets`].)
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct ClickPattern {
    pub n_modes: usize,
    pub bits: u64,
}

impl ClickPattern {
    pub fn new(n_modes: usize, bits: u64) -> Self {
        assert!(n_modes <= 64 && (n_modes == 64 || bits >> n_modes == 0), "pattern wider than {n_modes} modes");
        Self { n_modes, bits }
    }

    pub fn from_clicks(clicks: &[bool]) -> Self {
        let bits = clicks.iter().enumerate().fold(0, |b, (k, &s)| b | ((s as u64) << k));
        Self::new(clicks.len(), bits)
    }

    pub fn clicks(&self) -> u32 {
        self.bits.count_ones()
    }

    pub fn clicked_modes(&self) -> Vec<usize> {
        (0..self.n_modes).filter(|k| self.bits >> k & 1 == 1).collect()
    }
}

/// Block-symmetric sampling matrix over `N` modes.
#[derive(Debug, Clone, PartialEq)]
pub struct InputMatrix {
    n_modes: usize,
    quant_bits: Option<u32>,
    a00: Vec<Complex64>,
    a01: Vec<Complex64>,
}

impl InputMatrix {
    /// Builds a matrix from the packed upper triangles of `A00` and `A01`.
    /// `A00` diagonal entries must be real and every entry must have modulus
    /// below one.
    pub fn from_triangles(n_modes: usize, a00: Vec<Complex64>, a01: Vec<Complex64>) -> Result<Self, MatrixError> {
        let len = packed_len(n_modes);
        if a00.len() != len || a01.len() != len {
            return Err(MatrixError::Dimension(format!(
                "expected {len} entries per triangle for {n_modes} modes, got {} and {}",
                a00.len(),
                a01.len()
            )));
        }
        let m = Self { n_modes, quant_bits: None, a00, a01 };
        m.validate(SYMMETRY_TOL)?;
        Ok(m)
    }

    fn validate(&self, diag_tol: f64) -> Result<(), MatrixError> {
        for i in 0..self.n_modes {
            let d = self.a00[tri(self.n_modes, i, i)];
            if d.im.abs() > diag_tol {
                return Err(MatrixError::Symmetry(format!("A00[{i}][{i}] has imaginary part {}", d.im)));
            }
        }
        if let Some(v) = self.a00.iter().chain(&self.a01).find(|v| !(v.norm() < 1.0) || !v.re.is_finite() || !v.im.is_finite()) {
            return Err(MatrixError::Range { value: v.norm() });
        }
        Ok(())
    }

    /// Takes the block triangles of a dense `2N x 2N` matrix after checking
    /// all three block symmetries.
    pub fn from_dense(a: &DenseMatrix) -> Result<Self, MatrixError> {
        if a.n() % 2 != 0 {
            return Err(MatrixError::Dimension(format!("dense matrix has odd size {}", a.n())));
        }
        let report = check_symmetries(a);
        if !report.all_pass() {
            return Err(MatrixError::Symmetry(report.summary()));
        }
        let n = a.n() / 2;
        let mut a00 = Vec::with_capacity(packed_len(n));
        let mut a01 = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in i..n {
                let mut d = a.get(i, j);
                if i == j {
                    d.im = 0.0;
                }
                a00.push(d);
                a01.push(a.get(i, n + j));
            }
        }
        Self::from_triangles(n, a00, a01)
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn dim(&self) -> usize {
        2 * self.n_modes
    }

    pub fn quant_bits(&self) -> Option<u32> {
        self.quant_bits
    }

    pub fn a00_upper(&self) -> &[Complex64] {
        &self.a00
    }

    pub fn a01_upper(&self) -> &[Complex64] {
        &self.a01
    }

    /// Number of stored real components: two triangles of complex numbers.
    pub fn stored_reals(&self) -> usize {
        2 * packed_len(self.n_modes) * 2
    }

    fn a00(&self, i: usize, j: usize) -> Complex64 {
        if i <= j {
            self.a00[tri(self.n_modes, i, j)]
        } else {
            self.a00[tri(self.n_modes, j, i)].conj()
        }
    }

    fn a01(&self, i: usize, j: usize) -> Complex64 {
        self.a01[tri(self.n_modes, i.min(j), i.max(j))]
    }

    /// Entry `(r, c)` of the full `2N x 2N` matrix.
    pub fn element(&self, r: usize, c: usize) -> Complex64 {
        let n = self.n_modes;
        match (r < n, c < n) {
            (true, true) => self.a00(r, c),
            (true, false) => self.a01(r, c - n),
            (false, true) => self.a01(r - n, c).conj(),
            (false, false) => self.a00(r - n, c - n).conj(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        DenseMatrix::from_fn(self.dim(), |r, c| self.element(r, c))
    }

    /// Mean of the real parts of the diagonal.
    pub fn mean_diagonal(&self) -> f64 {
        if self.n_modes == 0 {
            return 0.0;
        }
        (0..self.n_modes).map(|i| self.a00[tri(self.n_modes, i, i)].re).sum::<f64>() / self.n_modes as f64
    }

    /// Snaps every component onto the `quant_bits` grid.
    pub fn quantized(&self, bits: u32) -> Result<Self, MatrixError> {
        check_bits(bits)?;
        let snap = |v: &Complex64| -> Result<Complex64, MatrixError> {
            Ok(Complex64::new(dequantize(quantize(v.re, bits)?, bits), dequantize(quantize(v.im, bits)?, bits)))
        };
        Ok(Self {
            n_modes: self.n_modes,
            quant_bits: Some(bits),
            a00: self.a00.iter().map(snap).collect::<Result<_, _>>()?,
            a01: self.a01.iter().map(snap).collect::<Result<_, _>>()?,
        })
    }
}

#[inline]
fn tri(n: usize, i: usize, j: usize) -> usize {
    i * n - i * i.saturating_sub(1) / 2 + (j - i)
}

/// Restricts the matrix to the clicked modes, keeping rows/columns `k` and
/// `M + k` for every clicked `k`.
pub fn extract_submatrix(a: &InputMatrix, s: &ClickPattern) -> Result<InputMatrix, MatrixError> {
    if s.n_modes != a.n_modes {
        return Err(MatrixError::Dimension(format!("pattern over {} modes, matrix over {}", s.n_modes, a.n_modes)));
    }
    let modes = s.clicked_modes();
    if modes.is_empty() {
        return Err(MatrixError::EmptyPattern);
    }
    let mut a00 = Vec::with_capacity(packed_len(modes.len()));
    let mut a01 = Vec::with_capacity(packed_len(modes.len()));
    for (x, &i) in modes.iter().enumerate() {
        for &j in &modes[x..] {
            a00.push(a.a00(i, j));
            a01.push(a.a01(i, j));
        }
    }
    Ok(InputMatrix { n_modes: modes.len(), quant_bits: a.quant_bits, a00, a01 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryCheck {
    pub max_deviation: f64,
    pub pass: bool,
}

impl SymmetryCheck {
    fn new(max_deviation: f64, tol: f64) -> Self {
        Self { max_deviation, pass: max_deviation <= tol }
    }
}

/// Per-symmetry deviations of a dense `2N x 2N` matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SymmetryReport {
    pub tolerance: f64,
    /// `A = A^H`
    pub hermitian: SymmetryCheck,
    /// `A01 = A01^T` and `A10 = A10^T`
    pub off_diagonal_symmetric: SymmetryCheck,
    /// `A00 = conj(A11)`
    pub diagonal_conjugate: SymmetryCheck,
}

impl SymmetryReport {
    pub fn all_pass(&self) -> bool {
        self.hermitian.pass && self.off_diagonal_symmetric.pass && self.diagonal_conjugate.pass
    }

    pub fn summary(&self) -> String {
        format!(
            "hermitian {:.3e}, off-diagonal symmetric {:.3e}, diagonal conjugate {:.3e} (tolerance {:.0e})",
            self.hermitian.max_deviation,
            self.off_diagonal_symmetric.max_deviation,
            self.diagonal_conjugate.max_deviation,
            self.tolerance
        )
    }
}

pub fn check_symmetries(a: &DenseMatrix) -> SymmetryReport {
    check_symmetries_with_tol(a, SYMMETRY_TOL)
}

pub fn check_symmetries_with_tol(a: &DenseMatrix, tol: f64) -> SymmetryReport {
    let n = a.n() / 2;
    let mut sym = 0f64;
    let mut conj = 0f64;
    for i in 0..n {
        for j in 0..n {
            sym = sym.max((a.get(i, n + j) - a.get(j, n + i)).norm());
            sym = sym.max((a.get(n + i, j) - a.get(n + j, i)).norm());
            conj = conj.max((a.get(i, j) - a.get(n + i, n + j).conj()).norm());
        }
    }
    SymmetryReport {
        tolerance: tol,
        hermitian: SymmetryCheck::new(a.hermitian_deviation(), tol),
        off_diagonal_symmetric: SymmetryCheck::new(sym, tol),
        diagonal_conjugate: SymmetryCheck::new(conj, tol),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GenerateParams {
    pub n_modes: usize,
    pub a_target: f64,
    pub spread: f64,
    pub seed: u64,
}

impl GenerateParams {
    pub fn new(n_modes: usize, seed: u64) -> Self {
        Self { n_modes, a_target: 0.16, spread: 0.06, seed }
    }
}

/// Uniform double in `[0, 1)` from the top 53 bits of one generator output.
fn unit_f64(rng: &mut Xoshiro256PlusPlus) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

fn symmetric_unit(rng: &mut Xoshiro256PlusPlus) -> f64 {
    2.0 * unit_f64(rng) - 1.0
}

/// Pseudorandom block-symmetric sampling matrix `A = a_target * I + g * H`
/// whose spectrum lies strictly inside `(a_target - spread, a_target + spread)`.
///
/// `H` has the block structure `[[H00, H01], [conj(H01), conj(H00)]]` with
/// `H00` Hermitian and `H01` symmetric, all components uniform in `[-1, 1)`.
/// `g = 0.999 * spread / R` where `R` is the largest absolute row sum of `H`,
/// so Gershgorin's theorem confines the eigenvalues.
///
/// Draw order from `Xoshiro256PlusPlus::seed_from_u64(seed)`: the `H00` upper
/// triangle row-major (one draw for a diagonal entry, real then imaginary for
/// off-diagonal entries), then the `H01` upper triangle row-major (real then
/// imaginary). Each draw is `2 * (next_u64() >> 11) * 2^-53 - 1`.
pub fn generate_instance(p: &GenerateParams) -> Result<InputMatrix, MatrixError> {
    let n = p.n_modes;
    if n == 0 {
        return Err(MatrixError::Generator("at least one mode is required".into()));
    }
    if !(p.spread > 0.0 && p.a_target - p.spread > 0.0 && p.a_target + p.spread < 1.0) {
        return Err(MatrixError::Generator(format!(
            "a_target {} +/- spread {} must lie inside (0, 1)",
            p.a_target, p.spread
        )));
    }
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(p.seed);
    let mut h00 = Vec::with_capacity(packed_len(n));
    for i in 0..n {
        for j in i..n {
            if i == j {
                h00.push(Complex64::new(symmetric_unit(&mut rng), 0.0));
            } else {
                let re = symmetric_unit(&mut rng);
                h00.push(Complex64::new(re, symmetric_unit(&mut rng)));
            }
        }
    }
    let mut h01 = Vec::with_capacity(packed_len(n));
    for _ in 0..packed_len(n) {
        let re = symmetric_unit(&mut rng);
        h01.push(Complex64::new(re, symmetric_unit(&mut rng)));
    }
    let h = InputMatrix { n_modes: n, quant_bits: None, a00: h00, a01: h01 };
    // rows r and r + N have equal absolute sums, so the first N rows suffice
    let radius = (0..n).map(|r| (0..2 * n).map(|c| h.element(r, c).norm()).sum::<f64>()).fold(0f64, f64::max);
    let gain = if radius > 0.0 { 0.999 * p.spread / radius } else { 0.0 };
    let a00 = h
        .a00
        .iter()
        .enumerate()
        .map(|(k, v)| {
            let scaled = v * gain;
            if is_diag(n, k) {
                scaled + p.a_target
            } else {
                scaled
            }
        })
        .collect();
    let a01 = h.a01.iter().map(|v| v * gain).collect();
    InputMatrix::from_triangles(n, a00, a01)
}

fn is_diag(n: usize, k: usize) -> bool {
    (0..n).any(|i| tri(n, i, i) == k)
}

/// Serializes with the given format. Binary output requires `quant_bits`;
/// text output ignores it and writes the stored doubles losslessly.
pub fn save_matrix(a: &InputMatrix, format: Format, quant_bits: Option<u32>) -> Result<Vec<u8>, MatrixError> {
    match format {
        Format::Text => Ok(save_text(a).into_bytes()),
        Format::Binary => {
            let bits = quant_bits.or(a.quant_bits).ok_or(MatrixError::QuantBits(0))?;
            save_binary(a, bits)
        }
    }
}

pub fn load_matrix(bytes: &[u8], format: Format) -> Result<InputMatrix, MatrixError> {
    match format {
        Format::Text => {
            let text = std::str::from_utf8(bytes).map_err(|e| MatrixError::Text { line: 0, msg: e.to_string() })?;
            load_text(text)
        }
        Format::Binary => load_binary(bytes),
    }
}

/// Picks the format from the leading magic bytes.
pub fn detect_format(bytes: &[u8]) -> Option<Format> {
    if bytes.starts_with(BINARY_MAGIC) && !bytes.starts_with(TEXT_MAGIC.as_bytes()) {
        Some(Format::Binary)
    } else if std::str::from_utf8(bytes).ok()?.lines().map(str::trim).find(|l| !l.is_empty() && !l.starts_with('#'))?.starts_with(TEXT_MAGIC) {
        Some(Format::Text)
    } else {
        None
    }
}

pub fn save_text(a: &InputMatrix) -> String {
    let n = a.n_modes;
    let mut out = String::new();
    let _ = writeln!(out, "{TEXT_MAGIC} {TEXT_VERSION}");
    let _ = writeln!(out, "modes {n}");
    for (name, tri_vals) in [("A00", &a.a00), ("A01", &a.a01)] {
        let _ = writeln!(out, "{name}");
        let mut k = 0;
        for i in 0..n {
            for j in i..n {
                let v = tri_vals[k];
                // Display for f64 is the shortest string that round-trips
                let _ = writeln!(out, "{i} {j} {} {}", v.re, v.im);
                k += 1;
            }
        }
    }
    out
}

pub fn load_text(text: &str) -> Result<InputMatrix, MatrixError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
    let err = |line: usize, msg: &str| MatrixError::Text { line, msg: msg.to_string() };

    let (ln, header) = lines.next().ok_or_else(|| err(0, "empty input"))?;
    let mut parts = header.split_whitespace();
    if parts.next() != Some(TEXT_MAGIC) {
        return Err(err(ln, "missing GBSA-TEXT header"));
    }
    match parts.next().and_then(|v| v.parse::<u32>().ok()) {
        Some(TEXT_VERSION) => {}
        _ => return Err(err(ln, "unsupported version")),
    }
    let (ln, modes) = lines.next().ok_or_else(|| err(ln, "missing modes line"))?;
    let n: usize = match modes.split_whitespace().collect::<Vec<_>>().as_slice() {
        ["modes", v] => v.parse().map_err(|_| err(ln, "bad mode count"))?,
        _ => return Err(err(ln, "expected `modes <N>`")),
    };
    let mut read_block = |name: &str| -> Result<Vec<Complex64>, MatrixError> {
        let (ln, tag) = lines.next().ok_or_else(|| err(0, &format!("missing {name} section")))?;
        if tag != name {
            return Err(err(ln, &format!("expected section {name}")));
        }
        let mut vals = Vec::with_capacity(packed_len(n));
        for i in 0..n {
            for j in i..n {
                let (ln, line) = lines.next().ok_or_else(|| err(0, &format!("{name} ends early at ({i}, {j})")))?;
                let f: Vec<&str> = line.split_whitespace().collect();
                if f.len() != 4 {
                    return Err(err(ln, "expected `<i> <j> <re> <im>`"));
                }
                let (ri, rj): (usize, usize) = (
                    f[0].parse().map_err(|_| err(ln, "bad row index"))?,
                    f[1].parse().map_err(|_| err(ln, "bad column index"))?,
                );
                if (ri, rj) != (i, j) {
                    return Err(err(ln, &format!("expected entry ({i}, {j}), found ({ri}, {rj})")));
                }
                let re: f64 = f[2].parse().map_err(|_| err(ln, "bad real part"))?;
                let im: f64 = f[3].parse().map_err(|_| err(ln, "bad imaginary part"))?;
                vals.push(Complex64::new(re, im));
            }
        }
        Ok(vals)
    };
    let a00 = read_block("A00")?;
    let a01 = read_block("A01")?;
    if let Some((ln, _)) = lines.next() {
        return Err(err(ln, "trailing content"));
    }
    InputMatrix::from_triangles(n, a00, a01)
}

pub fn save_binary(a: &InputMatrix, bits: u32) -> Result<Vec<u8>, MatrixError> {
    check_bits(bits)?;
    let n = a.n_modes;
    let mut out = Vec::with_capacity(11 + a.stored_reals() * bits as usize / 8);
    out.extend_from_slice(BINARY_MAGIC);
    out.extend_from_slice(&BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&(n as u32).to_le_bytes());
    out.push(bits as u8);
    for v in a.a00.iter().chain(&a.a01) {
        for x in [v.re, v.im] {
            let q = quantize(x, bits)?;
            if bits == 16 {
                out.extend_from_slice(&(q as i16).to_le_bytes());
            } else {
                out.extend_from_slice(&q.to_le_bytes());
            }
        }
    }
    Ok(out)
}

pub fn load_binary(bytes: &[u8]) -> Result<InputMatrix, MatrixError> {
    let err = |offset: usize, msg: &str| MatrixError::Binary { offset, msg: msg.to_string() };
    let take = |offset: usize, len: usize| -> Result<&[u8], MatrixError> {
        bytes.get(offset..offset + len).ok_or_else(|| err(bytes.len(), &format!("truncated: need {len} bytes at offset {offset}")))
    };
    if take(0, 4)? != BINARY_MAGIC {
        return Err(err(0, "bad magic"));
    }
    let version = u16::from_le_bytes(take(4, 2)?.try_into().unwrap());
    if version != BINARY_VERSION {
        return Err(err(4, &format!("unsupported version {version}")));
    }
    let n = u32::from_le_bytes(take(6, 4)?.try_into().unwrap()) as usize;
    let bits = take(10, 1)?[0] as u32;
    if bits != 16 && bits != 32 {
        return Err(err(10, &format!("unsupported quantization width {bits}")));
    }
    let width = bits as usize / 8;
    let count = 2 * packed_len(n) * 2;
    let body = 11;
    let expected = body + count * width;
    if bytes.len() < expected {
        return Err(err(bytes.len(), &format!("truncated: {} bytes, expected {expected} for {n} modes", bytes.len())));
    }
    if bytes.len() > expected {
        return Err(err(expected, "trailing bytes"));
    }
    let read = |k: usize| -> f64 {
        let at = body + k * width;
        let q = if bits == 16 {
            i16::from_le_bytes(bytes[at..at + 2].try_into().unwrap()) as i32
        } else {
            i32::from_le_bytes(bytes[at..at + 4].try_into().unwrap())
        };
        dequantize(q, bits)
    };
    let tri_len = packed_len(n);
    let a00: Vec<Complex64> = (0..tri_len).map(|k| Complex64::new(read(2 * k), read(2 * k + 1))).collect();
    let a01: Vec<Complex64> = (0..tri_len).map(|k| Complex64::new(read(2 * (tri_len + k)), read(2 * (tri_len + k) + 1))).collect();
    let m = InputMatrix { n_modes: n, quant_bits: Some(bits), a00, a01 };
    // the diagonal of A00 must be real up to one quantization step
    m.validate(dequantize(1, bits)).map_err(|e| err(body, &e.to_string()))?;
    let mut m = m;
    for i in 0..n {
        m.a00[tri(n, i, i)].im = 0.0;
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn quantize_examples() {
        assert_eq!(quantize(0.5, 16).unwrap(), 16384);
        assert_eq!(dequantize(16384, 16), 0.5);
        assert_eq!(quantize(0.0, 32).unwrap(), 0);
        assert_eq!(quantize(-0.5, 16).unwrap(), -16384);
        // exact tie rounds away from zero
        assert_eq!(quantize(1.5 / 32768.0, 16).unwrap(), 2);
        assert_eq!(quantize(-1.5 / 32768.0, 16).unwrap(), -2);
        assert_eq!(quantize(0.99999999, 16).unwrap(), 32767);
        assert!(matches!(quantize(1.0, 16), Err(MatrixError::Range { .. })));
        assert!(matches!(quantize(0.1, 8), Err(MatrixError::QuantBits(8))));
        assert!(quantize(f64::NAN, 16).is_err());
    }

    #[test]
    fn sixteen_bit_error_bound() {
        assert!((2f64.powi(-16) - 1.525e-5).abs() < 1e-8);
    }

    #[test]
    fn block_reconstruction() {
        let a = InputMatrix::from_triangles(
            2,
            vec![c(0.1, 0.0), c(0.02, 0.03), c(0.2, 0.0)],
            vec![c(0.01, 0.0), c(0.04, -0.05), c(0.0, 0.02)],
        )
        .unwrap();
        let d = a.to_dense();
        assert_eq!(d.get(1, 0), c(0.02, -0.03));
        assert_eq!(d.get(0, 3), c(0.04, -0.05));
        assert_eq!(d.get(1, 2), c(0.04, -0.05));
        assert_eq!(d.get(3, 0), c(0.04, 0.05));
        assert_eq!(d.get(2, 3), c(0.02, -0.03));
        assert!(check_symmetries(&d).all_pass());
        assert_eq!(InputMatrix::from_dense(&d).unwrap(), a);
        assert_eq!(a.stored_reals(), 12);
    }

    #[test]
    fn rejects_complex_diagonal_and_large_entries() {
        assert!(matches!(
            InputMatrix::from_triangles(1, vec![c(0.1, 0.1)], vec![c(0.0, 0.0)]),
            Err(MatrixError::Symmetry(_))
        ));
        assert!(matches!(InputMatrix::from_triangles(1, vec![c(1.0, 0.0)], vec![c(0.0, 0.0)]), Err(MatrixError::Range { .. })));
        assert!(matches!(InputMatrix::from_triangles(2, vec![c(0.1, 0.0)], vec![c(0.0, 0.0)]), Err(MatrixError::Dimension(_))));
    }

    #[test]
    fn symmetry_fault_injection() {
        let a = generate_instance(&GenerateParams::new(3, 7)).unwrap();
        let mut d = a.to_dense();
        assert!(check_symmetries(&d).all_pass());
        let v = d.get(0, 1);
        d.set(0, 1, v + c(1e-6, 0.0));
        let r = check_symmetries(&d);
        assert!(!r.hermitian.pass);
        assert!((r.hermitian.max_deviation - 1e-6).abs() < 1e-9);
        assert!(InputMatrix::from_dense(&d).is_err());
        assert!(check_symmetries(&DenseMatrix::zeros(6)).all_pass());
    }

    #[test]
    fn generator_is_seeded_and_centered() {
        let p = GenerateParams::new(6, 42);
        let a = generate_instance(&p).unwrap();
        assert_eq!(a, generate_instance(&p).unwrap());
        assert_ne!(a, generate_instance(&GenerateParams::new(6, 43)).unwrap());
        let mean = a.mean_diagonal();
        assert!((mean - 0.16).abs() < 0.06);
        for i in 0..6 {
            let d = a.element(i, i).re;
            assert!(d > 0.10 && d < 0.22);
        }
        assert!(check_symmetries(&a.to_dense()).all_pass());
        assert!(generate_instance(&GenerateParams { a_target: 0.95, ..p }).is_err());
        assert!(generate_instance(&GenerateParams::new(0, 1)).is_err());
    }

    #[test]
    fn submatrix_selection() {
        let a = generate_instance(&GenerateParams::new(4, 5)).unwrap();
        let all = ClickPattern::new(4, 0b1111);
        assert_eq!(extract_submatrix(&a, &all).unwrap(), a);
        let one = extract_submatrix(&a, &ClickPattern::new(4, 0b0100)).unwrap();
        assert_eq!(one.n_modes(), 1);
        let d = one.to_dense();
        assert_eq!(d.get(0, 0), a.element(2, 2));
        assert_eq!(d.get(0, 1), a.element(2, 6));
        assert_eq!(d.get(1, 0), a.element(2, 6).conj());
        assert_eq!(d.get(1, 1), a.element(2, 2).conj());
        assert_eq!(extract_submatrix(&a, &ClickPattern::new(4, 0)), Err(MatrixError::EmptyPattern));
    }

    #[test]
    fn binary_round_trip_is_byte_identical() {
        let a = generate_instance(&GenerateParams::new(5, 9)).unwrap();
        for bits in [16, 32] {
            let bytes = save_matrix(&a, Format::Binary, Some(bits)).unwrap();
            assert_eq!(bytes.len(), 11 + a.stored_reals() * bits as usize / 8);
            let back = load_matrix(&bytes, Format::Binary).unwrap();
            assert_eq!(back, a.quantized(bits).unwrap());
            assert_eq!(save_matrix(&back, Format::Binary, None).unwrap(), bytes);
            assert_eq!(detect_format(&bytes), Some(Format::Binary));
        }
    }

    #[test]
    fn binary_errors_name_offsets() {
        let a = generate_instance(&GenerateParams::new(3, 1)).unwrap();
        let bytes = save_binary(&a, 16).unwrap();
        match load_binary(&bytes[..bytes.len() - 3]) {
            Err(MatrixError::Binary { offset, .. }) => assert_eq!(offset, bytes.len() - 3),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(load_binary(&bad), Err(MatrixError::Binary { offset: 0, .. })));
        let mut ver = bytes.clone();
        ver[4] = 9;
        assert!(matches!(load_binary(&ver), Err(MatrixError::Binary { offset: 4, .. })));
        let mut long = bytes;
        long.push(0);
        assert!(matches!(load_binary(&long), Err(MatrixError::Binary { .. })));
    }

    #[test]
    fn text_round_trip_is_lossless() {
        let a = generate_instance(&GenerateParams::new(4, 3)).unwrap();
        let text = save_text(&a);
        assert_eq!(detect_format(text.as_bytes()), Some(Format::Text));
        assert_eq!(load_text(&text).unwrap(), a);
    }

    #[test]
    fn text_errors_name_lines() {
        let a = generate_instance(&GenerateParams::new(2, 3)).unwrap();
        let text = save_text(&a);
        let broken = text.replacen("0 1 ", "1 0 ", 1);
        match load_text(&broken) {
            Err(MatrixError::Text { line, .. }) => assert_eq!(line, 5),
            other => panic!("{other:?}"),
        }
        assert!(matches!(load_text("GBSA-TEXT 2\n"), Err(MatrixError::Text { line: 1, .. })));
        let truncated: String = text.lines().take(6).map(|l| format!("{l}\n")).collect();
        assert!(load_text(&truncated).is_err());
    }
}
