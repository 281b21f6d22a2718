//! Dense matrix exponential for complex matrices.
//!
//! Scaling-and-squaring with a degree-13 Pade approximant, following
//! N. J. Higham, "The scaling and squaring method for the matrix exponential
//! revisited", SIAM J. Matrix Anal. Appl. 26(4), 2005. The input is scaled
//! by `2^-s` until its 1-norm is below the degree-13 threshold, the Pade
//! numerator and denominator are assembled from even powers, the resulting
//! linear system is solved by LU with one factorization for all columns,
//! and the answer is squared `s` times.
//!
//! Used for time propagation of vectorized density matrices, where the
//! exponent is `L * dt` and one exponential is reused across many steps.

use ndarray::{Array1, Array2};
use ndarray_linalg::{Factorize, Solve};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// 1-norm threshold above which degree-13 Pade needs scaling.
const THETA_13: f64 = 5.371_920_351_148_152;

/// Pade-13 coefficients `b[0..=13]`.
const B: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

/// Maximum admissible squaring count; beyond this the input norm is
/// astronomically large and the result would be pure roundoff.
const MAX_SQUARINGS: u32 = 64;

fn one_norm(a: &Array2<Complex64>) -> f64 {
    let mut max = 0.0_f64;
    for col in a.columns() {
        let sum: f64 = col.iter().map(|z| z.norm()).sum();
        max = max.max(sum);
    }
    max
}

fn identity(dim: usize) -> Array2<Complex64> {
    Array2::from_diag(&Array1::from_elem(dim, Complex64::new(1.0, 0.0)))
}

/// `exp(a)` for a square complex matrix.
pub fn expm(a: &Array2<Complex64>) -> Result<Array2<Complex64>> {
    let (rows, cols) = a.dim();
    if rows != cols {
        return Err(Error::DimensionMismatch { expected: rows, got: cols });
    }
    let dim = rows;
    if dim == 0 {
        return Err(Error::DimensionMismatch { expected: 1, got: 0 });
    }

    if a.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::PropagationFailure(
            "matrix exponent has non-finite entries".into(),
        ));
    }
    let norm = one_norm(a);
    let squarings = if norm <= THETA_13 {
        0
    } else {
        (norm / THETA_13).log2().ceil() as u32
    };
    if squarings > MAX_SQUARINGS {
        return Err(Error::PropagationFailure(format!(
            "exponent norm {norm:.3e} requires {squarings} squarings; step is too large"
        )));
    }

    let scale = Complex64::new((0.5_f64).powi(squarings as i32), 0.0);
    let a_scaled = a.mapv(|z| z * scale);

    let a2 = a_scaled.dot(&a_scaled);
    let a4 = a2.dot(&a2);
    let a6 = a2.dot(&a4);
    let eye = identity(dim);

    // U = A (A6 (b13 A6 + b11 A4 + b9 A2) + b7 A6 + b5 A4 + b3 A2 + b1 I)
    let u_inner = &a6 * B[13] + &a4 * B[11] + &a2 * B[9];
    let u_poly = a6.dot(&u_inner) + &a6 * B[7] + &a4 * B[5] + &a2 * B[3] + &eye * B[1];
    let u = a_scaled.dot(&u_poly);
    // V = A6 (b12 A6 + b10 A4 + b8 A2) + b6 A6 + b4 A4 + b2 A2 + b0 I
    let v_inner = &a6 * B[12] + &a4 * B[10] + &a2 * B[8];
    let v = a6.dot(&v_inner) + &a6 * B[6] + &a4 * B[4] + &a2 * B[2] + &eye * B[0];

    // exp(A) ~= (V - U)^-1 (V + U), one LU shared by all columns
    let numer = &v + &u;
    let denom = &v - &u;
    let lu = denom.factorize()?;
    let mut result = Array2::<Complex64>::zeros((dim, dim));
    for j in 0..dim {
        let x = lu.solve(&numer.column(j).to_owned())?;
        result.column_mut(j).assign(&x);
    }

    for _ in 0..squarings {
        result = result.dot(&result);
    }
    Ok(result)
}
