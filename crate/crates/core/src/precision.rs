//! Word width and scaling-factor selection.
//!
//! The bit budget has four parts: integer bits for the largest intermediate
//! (the reciprocal of `det(I - A)`), fractional bits down to the smallest
//! expected result, bits for the requested significant digits, and bits
//! absorbing the rounding error accumulated over `2^N` terms.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::Serialize;
use thiserror::Error;

use crate::linalg::{hermitian_det_float, HermitianFloat, LinalgError};
use crate::matrixio::InputMatrix;

pub const DEFAULT_SIG_DIGITS: u32 = 3;
pub const DEFAULT_ALPHA: f64 = 0.5;
/// Observed range of the correction factor `k`.
pub const K_MIN: f64 = 0.0009;
pub const K_MAX: f64 = 0.0035;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PrecisionError {
    #[error("det(I - A) = {0} is not positive")]
    NonPositiveDeterminant(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error("lower-bound model out of range: k*N/(1-a) = {lhs} is not below 1-a = {rhs}")]
    ModelOutOfRange { lhs: f64, rhs: f64 },
    #[error("{bits} bits required, more than the 256 supported")]
    Unsupported { bits: u32 },
    #[error("{required} bits required but the forced width is {width}")]
    InsufficientPrecision { required: u32, width: u32 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

/// Word width request.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PrecisionMode {
    #[default]
    Auto,
    #[serde(rename = "128")]
    W128,
    #[serde(rename = "256")]
    W256,
}

impl FromStr for PrecisionMode {
    type Err = PrecisionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "auto" => Ok(PrecisionMode::Auto),
            "128" => Ok(PrecisionMode::W128),
            "256" => Ok(PrecisionMode::W256),
            other => Err(PrecisionError::Invalid(format!("precision must be auto, 128 or 256, got {other:?}"))),
        }
    }
}

impl fmt::Display for PrecisionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PrecisionMode::Auto => "auto",
            PrecisionMode::W128 => "128",
            PrecisionMode::W256 => "256",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PrecisionParams {
    pub sig_digits: u32,
    pub alpha: f64,
}

impl Default for PrecisionParams {
    fn default() -> Self {
        Self { sig_digits: DEFAULT_SIG_DIGITS, alpha: DEFAULT_ALPHA }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PrecisionConfig {
    pub width_bits: u32,
    pub frac_bits: u32,
    pub b_lower: u32,
    pub b_upper: u32,
    pub b_sgn: u32,
    pub b_accum: u32,
    pub a_repr: f64,
    pub k_corr: f64,
    pub alpha: f64,
}

impl PrecisionConfig {
    /// `b_lower + b_upper + b_sgn + b_accum`.
    pub fn total_bits(&self) -> u32 {
        self.b_lower + self.b_upper + self.b_sgn + self.b_accum
    }

    /// A bare width and scaling factor with no budget attached, for callers
    /// that want to bypass selection entirely.
    pub fn manual(width_bits: u32, frac_bits: u32) -> Result<Self, PrecisionError> {
        if width_bits != 128 && width_bits != 256 {
            return Err(PrecisionError::Invalid(format!("width {width_bits}")));
        }
        if frac_bits + 2 > width_bits {
            return Err(PrecisionError::Invalid(format!("{frac_bits} fractional bits in {width_bits}")));
        }
        Ok(Self {
            width_bits,
            frac_bits,
            b_lower: 0,
            b_upper: width_bits - 1 - frac_bits,
            b_sgn: 0,
            b_accum: 0,
            a_repr: f64::NAN,
            k_corr: f64::NAN,
            alpha: f64::NAN,
        })
    }
}

/// Dense `I - A` in packed Hermitian form.
pub fn identity_minus_float(a: &InputMatrix) -> HermitianFloat {
    HermitianFloat::from_upper_fn(a.dim(), |i, j| {
        let d = if i == j { 1.0 } else { 0.0 };
        Complex64::new(d, 0.0) - a.element(i, j)
    })
}

pub fn det_identity_minus(a: &InputMatrix) -> Result<f64, PrecisionError> {
    let det = hermitian_det_float(&identity_minus_float(a))?;
    if !(det > 0.0) {
        return Err(PrecisionError::NonPositiveDeterminant(det));
    }
    Ok(det)
}

fn ceil_log2(x: f64) -> u32 {
    let l = x.log2().ceil();
    if l <= 0.0 {
        0
    } else {
        l as u32
    }
}

fn upper_bits_from_det(det: f64) -> u32 {
    ceil_log2(1.0 / det).max(1)
}

/// `max(1, ceil(log2(1 / det(I - A))))`.
pub fn estimate_upper_bound_bits(a: &InputMatrix) -> Result<u32, PrecisionError> {
    Ok(upper_bits_from_det(det_identity_minus(a)?))
}

/// Closed-form approximation of `det(I - A_Z)`:
/// `((1 - a) - k |Z| / (1 - a))^|Z| * (1 - a)^|Z|`.
pub fn det_estimate(z: u32, a_repr: f64, k_corr: f64) -> f64 {
    let one_a = 1.0 - a_repr;
    let z = z as f64;
    (one_a - k_corr * z / one_a).powf(z) * one_a.powf(z)
}

/// Approximation of the result magnitude:
/// `(((1 - a) - kN / (1 - a))^-1 - 1)^N`.
pub fn lower_bound_estimate(n: u32, a_repr: f64, k_corr: f64) -> Result<f64, PrecisionError> {
    let one_a = 1.0 - a_repr;
    let lhs = k_corr * n as f64 / one_a;
    if !(lhs < one_a) {
        return Err(PrecisionError::ModelOutOfRange { lhs, rhs: one_a });
    }
    Ok((1.0 / (one_a - lhs) - 1.0).powi(n as i32))
}

/// `ceil(-log2(estimate))`, at least 0.
pub fn estimate_lower_bound_bits(n: u32, a_repr: f64, k_corr: f64) -> Result<u32, PrecisionError> {
    let v = lower_bound_estimate(n, a_repr, k_corr)?;
    if !(v > 0.0) {
        return Err(PrecisionError::ModelOutOfRange { lhs: v, rhs: 0.0 });
    }
    Ok(ceil_log2(1.0 / v))
}

/// Solves the determinant estimate at `|Z| = N` for `k` and clamps the
/// result into `[K_MIN, K_MAX]`; a non-finite solution gives `K_MIN`.
pub fn fit_correction(n: u32, a_repr: f64, det: f64) -> f64 {
    let one_a = 1.0 - a_repr;
    let nf = n as f64;
    let k = (one_a - det.powf(1.0 / nf) / one_a) * one_a / nf;
    if k.is_finite() {
        k.clamp(K_MIN, K_MAX)
    } else {
        K_MIN
    }
}

pub fn sign_bits(sig_digits: u32) -> u32 {
    (sig_digits as f64 * 10f64.log2()).ceil() as u32
}

/// `ceil(log2(alpha * 2^N * N^2))`.
pub fn accum_bits(n: u32, alpha: f64) -> u32 {
    let l = alpha.log2() + n as f64 + 2.0 * (n as f64).log2();
    if l <= 0.0 {
        0
    } else {
        l.ceil() as u32
    }
}

/// Smallest supported width holding `bits`.
pub fn width_for(bits: u32) -> Result<u32, PrecisionError> {
    match bits {
        0..=128 => Ok(128),
        129..=256 => Ok(256),
        _ => Err(PrecisionError::Unsupported { bits }),
    }
}

/// Budget for `a` with width chosen from the total.
pub fn select_precision(a: &InputMatrix, sig_digits: u32) -> Result<PrecisionConfig, PrecisionError> {
    select_precision_with(a, PrecisionMode::Auto, PrecisionParams { sig_digits, ..Default::default() })
}

/// Budget for `a` under the requested mode. A forced width smaller than the
/// budget is an error.
pub fn select_precision_with(
    a: &InputMatrix,
    mode: PrecisionMode,
    params: PrecisionParams,
) -> Result<PrecisionConfig, PrecisionError> {
    if !(params.alpha > 0.0 && params.alpha.is_finite()) {
        return Err(PrecisionError::Invalid(format!("alpha {}", params.alpha)));
    }
    let n = a.n_modes() as u32;
    let det = det_identity_minus(a)?;
    let a_repr = a.mean_diagonal();
    let k_corr = fit_correction(n, a_repr, det);
    let b_upper = upper_bits_from_det(det);
    let b_lower = estimate_lower_bound_bits(n, a_repr, k_corr)?;
    let b_sgn = sign_bits(params.sig_digits);
    let b_accum = accum_bits(n, params.alpha);
    let total = b_lower + b_upper + b_sgn + b_accum;
    let width_bits = match mode {
        PrecisionMode::Auto => width_for(total)?,
        PrecisionMode::W128 | PrecisionMode::W256 => {
            let w = if mode == PrecisionMode::W128 { 128 } else { 256 };
            if total > w {
                return Err(PrecisionError::InsufficientPrecision { required: total, width: w });
            }
            w
        }
    };
    Ok(PrecisionConfig {
        width_bits,
        frac_bits: width_bits - 1 - b_upper,
        b_lower,
        b_upper,
        b_sgn,
        b_accum,
        a_repr,
        k_corr,
        alpha: params.alpha,
    })
}
