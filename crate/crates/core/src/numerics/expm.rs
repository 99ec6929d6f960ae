//! Matrix exponential by scaling and squaring with a [13/13] Padé approximant.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Largest matrix dimension accepted by [`expm`].
pub const EXPM_MAX_DIM: usize = 4096;

/// Coefficients of the degree-13 Padé numerator (the denominator uses the
/// same coefficients with alternating signs).
const PADE13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

/// 1-norm bound below which the [13/13] approximant meets double precision.
const THETA13: f64 = 5.371920351148152;

pub fn expm(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("expm needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    let n = a.rows();
    if n > EXPM_MAX_DIM {
        return Err(Error::DimensionLimit { dim: n, limit: EXPM_MAX_DIM });
    }
    if n == 0 {
        return Ok(ComplexMatrix::zeros(0, 0));
    }

    let norm = a.norm_1();
    if !norm.is_finite() {
        return Err(Error::Numerical("expm input contains non-finite entries".into()));
    }
    let squarings = if norm > THETA13 { (norm / THETA13).log2().ceil() as u32 } else { 0 };
    let scaled = a.scale_real(0.5_f64.powi(squarings as i32)).to_nalgebra();

    let id = DMatrix::<C64>::identity(n, n);
    let a2 = &scaled * &scaled;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let b = |i: usize| C64::new(PADE13[i], 0.0);

    let u_inner = &a6 * (&a6 * b(13) + &a4 * b(11) + &a2 * b(9)) + &a6 * b(7) + &a4 * b(5) + &a2 * b(3) + &id * b(1);
    let u = &scaled * u_inner;
    let v = &a6 * (&a6 * b(12) + &a4 * b(10) + &a2 * b(8)) + &a6 * b(6) + &a4 * b(4) + &a2 * b(2) + &id * b(0);

    let p = &v + &u;
    let q = &v - &u;
    let mut r = q
        .lu()
        .solve(&p)
        .ok_or_else(|| Error::Numerical("singular Padé denominator in expm".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    Ok(ComplexMatrix::from_nalgebra(&r))
}
