//! Torontonian evaluation.
//!
//! `Tor(A) = sum over Z of (-1)^(N - |Z|) / sqrt(det(I - A_Z))`, where `A_Z`
//! keeps rows and columns `j` and `N + j` for every mode `j` in `Z`. The
//! fixed-point engine splits the subsets over workers with
//! [`crate::subsets::partition`]; each worker owns its buffers and partial
//! sum, and the partials are folded in rank order. Fixed-point addition is
//! exact, so the raw result does not depend on the worker count.

use std::time::{Duration, Instant};

use num_complex::Complex64;
use thiserror::Error;

use crate::fixedpt::{ComplexFixed, Fixed, FixedError, FixedPoint};
use crate::linalg::{
    hermitian_det_fixed_with, hermitian_det_float, DenseMatrix, HermitianFixed, HermitianFloat, LinalgError,
    OpCounters,
};
use crate::matrixio::{check_symmetries, extract_submatrix, ClickPattern, InputMatrix, MatrixError};
use crate::precision::{
    det_identity_minus, select_precision_with, PrecisionConfig, PrecisionError, PrecisionMode, PrecisionParams,
};
use crate::subsets::{binom, get_kth_mask, get_next_mask, partition, SubsetError, SubsetMask, WorkAssignment, MAX_MODES};

/// Largest mode count accepted by the double-precision reference.
pub const REFERENCE_MAX_MODES: usize = 20;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum TorontonianError {
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    #[error(transparent)]
    Precision(#[from] PrecisionError),
    #[error(transparent)]
    Subset(#[from] SubsetError),
    #[error("numerical breakdown at mask {mask:#b}: {source}")]
    Breakdown { mask: u64, source: LinalgError },
    #[error("reciprocal square root failed at mask {mask:#b}: {source}")]
    Rsqrt { mask: u64, source: FixedError },
    #[error("entry conversion failed: {0}")]
    Convert(FixedError),
    #[error("term at mask {mask:#b} exceeds the integer range of the word")]
    TermOverflow { mask: u64 },
    #[error("non-finite term at mask {mask:#b}")]
    NonFinite { mask: u64 },
    #[error("unsupported mode count {0}")]
    Modes(usize),
    #[error("det(I - A) = {0} is not positive; the state is not physical")]
    InvalidState(f64),
    #[error("worker count must be at least 1")]
    Workers,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TorontonianResult {
    pub value: f64,
    pub raw: FixedPoint,
    pub config: PrecisionConfig,
    pub term_count: u64,
    pub counters: OpCounters,
    pub wall_time: Duration,
}

/// `I - A` converted once to fixed point, full `2N x 2N` upper triangle.
#[derive(Debug, Clone)]
pub struct FixedInput<const L: usize> {
    n_modes: usize,
    frac_bits: u32,
    full: HermitianFixed<L>,
}

impl<const L: usize> FixedInput<L> {
    pub fn new(a: &InputMatrix, frac_bits: u32) -> Result<Self, TorontonianError> {
        let one = Fixed::<L>::one(frac_bits);
        let mut err = None;
        let full = HermitianFixed::<L>::from_upper_fn(a.dim(), |i, j| {
            let v = a.element(i, j);
            match ComplexFixed::<L>::from_f64(v.re, v.im, frac_bits) {
                Ok(x) if i == j => ComplexFixed::new(one - x.re, Fixed::ZERO),
                Ok(x) => ComplexFixed::new(-x.re, -x.im),
                Err(e) => {
                    err.get_or_insert(e);
                    ComplexFixed::ZERO
                }
            }
        });
        match err {
            Some(e) => Err(TorontonianError::Convert(e)),
            None => Ok(Self { n_modes: a.n_modes(), frac_bits, full }),
        }
    }

    pub fn n_modes(&self) -> usize {
        self.n_modes
    }

    pub fn frac_bits(&self) -> u32 {
        self.frac_bits
    }

    /// Gathers `I - A_Z` into `out`, modes in ascending order.
    pub fn extract_into(&self, mask: SubsetMask, idx: &mut Vec<usize>, out: &mut HermitianFixed<L>) {
        let n = self.n_modes;
        idx.clear();
        idx.extend(mask.modes(n as u32).map(|j| j as usize));
        let z = idx.len();
        for p in 0..z {
            idx.push(idx[p] + n);
        }
        out.reset(2 * z);
        for p in 0..2 * z {
            for q in p..2 * z {
                out.set_upper(p, q, self.full.upper(idx[p], idx[q]));
            }
        }
    }

    pub fn extract(&self, mask: SubsetMask) -> HermitianFixed<L> {
        let mut out = HermitianFixed::zeros(0);
        self.extract_into(mask, &mut Vec::new(), &mut out);
        out
    }
}

/// `I - A_Z` in fixed point at `frac_bits`, upper triangle only.
pub fn extract_identity_minus_az<const L: usize>(
    a: &InputMatrix,
    mask: SubsetMask,
    frac_bits: u32,
) -> Result<HermitianFixed<L>, TorontonianError> {
    Ok(FixedInput::<L>::new(a, frac_bits)?.extract(mask))
}

/// Sum of `(-1)^(N - |Z|) rsqrt(det(I - A_Z))` over the assigned masks,
/// plus `(-1)^N` on rank 0. Additions wrap modulo `2^W`; only the final sum
/// has to fit.
pub fn torontonian_partial<const L: usize>(
    input: &FixedInput<L>,
    work: &WorkAssignment,
    counters: &mut OpCounters,
) -> Result<Fixed<L>, TorontonianError> {
    let n = input.n_modes as u32;
    let f = input.frac_bits;
    let one = Fixed::<L>::one(f);
    let mut acc = Fixed::<L>::ZERO;
    if work.owns_empty_set() {
        acc = one.conditional_neg(n % 2 == 1);
        counters.accumulate += 1;
    }
    let mut idx = Vec::with_capacity(2 * n as usize);
    let mut sub = HermitianFixed::<L>::zeros(2 * n as usize);
    let mut scratch = Vec::with_capacity(2 * n as usize);
    for range in &work.ranges {
        let negate = (n - range.popcount) % 2 == 1;
        for mask in range.iter() {
            input.extract_into(mask, &mut idx, &mut sub);
            let det = hermitian_det_fixed_with(&mut sub, f, counters, &mut scratch)
                .map_err(|source| TorontonianError::Breakdown { mask: mask.0, source })?;
            if !det.rsqrt_fits(f) {
                return Err(TorontonianError::TermOverflow { mask: mask.0 });
            }
            let term = det.rsqrt(f).map_err(|source| TorontonianError::Rsqrt { mask: mask.0, source })?;
            counters.rsqrt += 1;
            debug_assert!(!(term - one).is_negative(), "term below one at mask {:#b}", mask.0);
            acc = acc.wrapping_add(term.conditional_neg(negate));
            counters.accumulate += 1;
        }
    }
    Ok(acc)
}

fn run_engine<const L: usize>(
    a: &InputMatrix,
    frac_bits: u32,
    workers: usize,
) -> Result<(Fixed<L>, OpCounters), TorontonianError> {
    let n = a.n_modes() as u32;
    let input = FixedInput::<L>::new(a, frac_bits)?;
    let assignments = (0..workers as u32)
        .map(|rank| partition(n, rank, workers as u32))
        .collect::<Result<Vec<_>, _>>()?;
    let partials: Vec<Result<(Fixed<L>, OpCounters), TorontonianError>> = if workers == 1 {
        let mut c = OpCounters::default();
        vec![torontonian_partial(&input, &assignments[0], &mut c).map(|v| (v, c))]
    } else {
        std::thread::scope(|s| {
            let handles: Vec<_> = assignments
                .iter()
                .map(|w| {
                    let input = &input;
                    s.spawn(move || {
                        let mut c = OpCounters::default();
                        torontonian_partial(input, w, &mut c).map(|v| (v, c))
                    })
                })
                .collect();
            handles.into_iter().map(|h| h.join().expect("worker panicked")).collect()
        })
    };
    let mut total = Fixed::<L>::ZERO;
    let mut counters = OpCounters::default();
    for p in partials {
        let (v, c) = p?;
        total = total.wrapping_add(v);
        counters.merge(&c);
    }
    Ok((total, counters))
}

fn check_input(a: &InputMatrix, workers: usize) -> Result<(), TorontonianError> {
    let n = a.n_modes();
    if n == 0 || n > MAX_MODES as usize {
        return Err(TorontonianError::Modes(n));
    }
    if workers == 0 {
        return Err(TorontonianError::Workers);
    }
    let report = check_symmetries(&a.to_dense());
    if !report.all_pass() {
        return Err(MatrixError::Symmetry(report.summary()).into());
    }
    Ok(())
}

/// Full Torontonian with automatic or forced width and the default budget.
pub fn torontonian(a: &InputMatrix, precision: PrecisionMode, workers: usize) -> Result<TorontonianResult, TorontonianError> {
    torontonian_with_params(a, precision, PrecisionParams::default(), workers)
}

pub fn torontonian_with_params(
    a: &InputMatrix,
    precision: PrecisionMode,
    params: PrecisionParams,
    workers: usize,
) -> Result<TorontonianResult, TorontonianError> {
    check_input(a, workers)?;
    let config = select_precision_with(a, precision, params)?;
    run(a, config, workers)
}

/// Runs the engine with a caller-supplied configuration and no budget check.
pub fn torontonian_with_config(
    a: &InputMatrix,
    config: PrecisionConfig,
    workers: usize,
) -> Result<TorontonianResult, TorontonianError> {
    check_input(a, workers)?;
    run(a, config, workers)
}

fn run(a: &InputMatrix, config: PrecisionConfig, workers: usize) -> Result<TorontonianResult, TorontonianError> {
    let start = Instant::now();
    let f = config.frac_bits;
    let (raw, counters) = match config.width_bits {
        128 => {
            let (v, c) = run_engine::<2>(a, f, workers)?;
            (FixedPoint::W128(v), c)
        }
        256 => {
            let (v, c) = run_engine::<4>(a, f, workers)?;
            (FixedPoint::W256(v), c)
        }
        w => return Err(PrecisionError::Invalid(format!("width {w}")).into()),
    };
    Ok(TorontonianResult {
        value: raw.to_f64(f),
        raw,
        config,
        term_count: 1u64 << a.n_modes(),
        counters,
        wall_time: start.elapsed(),
    })
}

/// Direct double-precision summation over all `2^N` subsets of a dense
/// `2N x 2N` matrix, including the empty set. Order: ascending `|Z|`, then
/// descending mask.
///
/// Terms of one popcount share a sign, so plain summation in this order
/// carries partial sums near the sum of absolute terms and loses about
/// `log10(sum |terms| / |Tor|)` digits. The sum is compensated (Neumaier);
/// what remains is the rounding of the individual terms.
pub fn torontonian_reference(a: &DenseMatrix) -> Result<f64, TorontonianError> {
    if a.n() % 2 != 0 {
        return Err(TorontonianError::Modes(a.n()));
    }
    let n = a.n() / 2;
    if n > REFERENCE_MAX_MODES {
        return Err(TorontonianError::Modes(n));
    }
    let ima = a.identity_minus();
    let mut total = Compensated::new(if n % 2 == 1 { -1.0 } else { 1.0 });
    let mut idx = Vec::with_capacity(2 * n);
    for z in 1..=n as u32 {
        let sign = if (n as u32 - z) % 2 == 1 { -1.0 } else { 1.0 };
        let mut mask = get_kth_mask(n as u32, z, 0)?;
        for r in 0..binom(n as u32, z)? {
            if r > 0 {
                mask = get_next_mask(mask)?;
            }
            idx.clear();
            idx.extend(mask.modes(n as u32).map(|j| j as usize));
            for p in 0..z as usize {
                idx.push(idx[p] + n);
            }
            let sub = HermitianFloat::from_dense(&ima.principal(&idx));
            let det = hermitian_det_float(&sub).map_err(|source| TorontonianError::Breakdown { mask: mask.0, source })?;
            let term = 1.0 / det.abs().sqrt();
            if !term.is_finite() {
                return Err(TorontonianError::NonFinite { mask: mask.0 });
            }
            total.add(sign * term);
        }
    }
    Ok(total.value())
}

/// Neumaier's compensated sum.
struct Compensated {
    sum: f64,
    carry: f64,
}

impl Compensated {
    fn new(x: f64) -> Self {
        Self { sum: x, carry: 0.0 }
    }

    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(&self) -> f64 {
        self.sum + self.carry
    }
}

fn vacuum_factor(a_full: &InputMatrix) -> Result<f64, TorontonianError> {
    match det_identity_minus(a_full) {
        Ok(d) => Ok(d.sqrt()),
        Err(PrecisionError::NonPositiveDeterminant(d)) => Err(TorontonianError::InvalidState(d)),
        Err(e) => Err(e.into()),
    }
}

/// Event probability `p(S) = Tor(A_S) sqrt(det(I - A))` with the Torontonian
/// from the fixed-point engine (single worker, automatic width).
pub fn probability(a_full: &InputMatrix, s: &ClickPattern) -> Result<f64, TorontonianError> {
    let vac = vacuum_factor(a_full)?;
    if s.clicks() == 0 {
        return Ok(vac);
    }
    let sub = extract_submatrix(a_full, s)?;
    Ok(torontonian(&sub, PrecisionMode::Auto, 1)?.value * vac)
}

/// [`probability`] with the double-precision reference Torontonian.
pub fn probability_reference(a_full: &InputMatrix, s: &ClickPattern) -> Result<f64, TorontonianError> {
    let vac = vacuum_factor(a_full)?;
    if s.clicks() == 0 {
        return Ok(vac);
    }
    let sub = extract_submatrix(a_full, s)?;
    Ok(torontonian_reference(&sub.to_dense())? * vac)
}

/// Dense `I - A_Z` in double precision, for inspection.
pub fn identity_minus_az_dense(a: &InputMatrix, mask: SubsetMask) -> DenseMatrix {
    let n = a.n_modes();
    let mut idx: Vec<usize> = mask.modes(n as u32).map(|j| j as usize).collect();
    let z = idx.len();
    for p in 0..z {
        idx.push(idx[p] + n);
    }
    DenseMatrix::from_fn(2 * z, |p, q| {
        let d = if p == q { 1.0 } else { 0.0 };
        Complex64::new(d, 0.0) - a.element(idx[p], idx[q])
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::packed_len;
    use crate::matrixio::{generate_instance, GenerateParams};

    fn diagonal(values: &[f64]) -> InputMatrix {
        let n = values.len();
        let mut a00 = vec![Complex64::new(0.0, 0.0); packed_len(n)];
        let mut k = 0;
        for (i, &v) in values.iter().enumerate() {
            a00[k] = Complex64::new(v, 0.0);
            k += n - i;
        }
        InputMatrix::from_triangles(n, a00, vec![Complex64::new(0.0, 0.0); packed_len(n)]).unwrap()
    }

    #[test]
    fn zero_matrix_is_exactly_zero() {
        for n in 1..=10 {
            let r = torontonian(&diagonal(&vec![0.0; n]), PrecisionMode::Auto, 1).unwrap();
            assert!(r.raw.limbs().iter().all(|&w| w == 0), "n={n}");
            assert_eq!(r.term_count, 1 << n);
        }
    }

    #[test]
    fn single_mode_half() {
        let r = torontonian(&diagonal(&[0.5]), PrecisionMode::Auto, 1).unwrap();
        assert!((r.value - 1.0).abs() < 1e-30);
    }

    #[test]
    fn diagonal_product() {
        let a = diagonal(&[0.1, 0.2, 0.3]);
        let expected = (0.1 / 0.9) * (0.2 / 0.8) * (0.3 / 0.7);
        let r = torontonian(&a, PrecisionMode::Auto, 1).unwrap();
        assert!((r.value / expected - 1.0).abs() < 1e-12, "{}", r.value);
        let reference = torontonian_reference(&a.to_dense()).unwrap();
        assert!((reference / expected - 1.0).abs() < 1e-9);
    }

    #[test]
    fn two_by_two_closed_form() {
        let a = InputMatrix::from_triangles(1, vec![Complex64::new(0.3, 0.0)], vec![Complex64::new(0.1, 0.0)]).unwrap();
        let expected = 1.0 / ((0.7f64).powi(2) - 0.01).sqrt() - 1.0;
        assert!((torontonian_reference(&a.to_dense()).unwrap() - expected).abs() < 1e-12);
        let r = torontonian(&a, PrecisionMode::Auto, 1).unwrap();
        assert!((r.value - expected).abs() < 1e-12);
    }

    #[test]
    fn extraction_full_mask_and_zero() {
        let a = generate_instance(&GenerateParams::new(4, 3)).unwrap();
        let f = 100;
        let full = extract_identity_minus_az::<2>(&a, SubsetMask(0b1111), f).unwrap();
        let dense = identity_minus_az_dense(&a, SubsetMask(0b1111));
        for i in 0..8 {
            for j in i..8 {
                let (re, im) = full.upper(i, j).to_f64(f);
                let e = dense.get(i, j);
                assert!((re - e.re).abs() < 1e-15 && (im - e.im).abs() < 1e-15);
            }
        }
        let z = extract_identity_minus_az::<2>(&diagonal(&[0.0; 4]), SubsetMask(0b0110), f).unwrap();
        assert_eq!(z.dim(), 4);
        for i in 0..4 {
            for j in i..4 {
                let want = if i == j { Fixed::one(f) } else { Fixed::ZERO };
                assert_eq!(z.upper(i, j), ComplexFixed::new(want, Fixed::ZERO));
            }
        }
    }

    #[test]
    fn workers_do_not_change_raw() {
        let a = generate_instance(&GenerateParams::new(8, 11)).unwrap();
        let one = torontonian(&a, PrecisionMode::Auto, 1).unwrap();
        for w in [2, 3, 5] {
            let r = torontonian(&a, PrecisionMode::Auto, w).unwrap();
            assert_eq!(r.raw, one.raw);
            assert_eq!(r.counters, one.counters);
        }
    }

    #[test]
    fn probability_single_mode() {
        let a = diagonal(&[0.25]);
        let det: f64 = 0.75 * 0.75;
        let p = probability(&a, &ClickPattern::new(1, 1)).unwrap();
        assert!((p - (1.0 - det.sqrt())).abs() < 1e-12);
        assert!((probability(&a, &ClickPattern::new(1, 0)).unwrap() - 0.75).abs() < 1e-15);
    }

    #[test]
    fn vacuum_never_clicks() {
        let a = diagonal(&[0.0; 3]);
        for bits in 1..8 {
            assert_eq!(probability(&a, &ClickPattern::new(3, bits)).unwrap(), 0.0);
        }
    }

    #[test]
    fn reference_rejects_large_n() {
        let a = DenseMatrix::zeros(2 * (REFERENCE_MAX_MODES + 1));
        assert!(matches!(torontonian_reference(&a), Err(TorontonianError::Modes(_))));
    }
}
