//! Eigen-solvers and null-space extraction on top of nalgebra.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

/// Dimension limit shared by the dense decompositions below.
pub const DENSE_MAX_DIM: usize = 4096;

fn check_square(a: &ComplexMatrix, what: &str) -> Result<usize> {
    if !a.is_square() {
        return Err(Error::DimensionMismatch(format!("{what} needs a square matrix, got {}x{}", a.rows(), a.cols())));
    }
    if a.rows() > DENSE_MAX_DIM {
        return Err(Error::DimensionLimit { dim: a.rows(), limit: DENSE_MAX_DIM });
    }
    Ok(a.rows())
}

/// Eigenvalues (ascending) and eigenvectors (columns) of a Hermitian matrix.
/// Only the lower triangle is read.
pub fn eigh(a: &ComplexMatrix) -> Result<(Vec<f64>, ComplexMatrix)> {
    check_square(a, "eigh")?;
    let eig = a.to_nalgebra().symmetric_eigen();
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = a.rows();
    let vectors = ComplexMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok((values, vectors))
}

pub fn min_eigenvalue_hermitian(a: &ComplexMatrix) -> Result<f64> {
    Ok(eigh(a)?.0.first().copied().unwrap_or(0.0))
}

/// Principal square root of a positive semidefinite Hermitian matrix;
/// slightly negative eigenvalues from round-off are clipped to zero.
pub fn sqrtm_psd(a: &ComplexMatrix) -> Result<ComplexMatrix> {
    let (values, vectors) = eigh(a)?;
    let n = a.rows();
    let roots: Vec<f64> = values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    let scaled = ComplexMatrix::from_fn(n, n, |r, c| vectors[(r, c)] * roots[c]);
    Ok(scaled.matmul(&vectors.adjoint()))
}

/// Unit vector `v` spanning the (approximate) null space of `a`.
///
/// The eigenvalue of smallest magnitude is located by shifted inverse
/// iteration; `a` must have an eigenvalue with `|λ| < 1e−6 · ‖a‖₁`.
pub fn dominant_nullvector(a: &ComplexMatrix) -> Result<Vec<C64>> {
    let n = check_square(a, "dominant_nullvector")?;
    if n == 0 {
        return Err(Error::DimensionMismatch("empty matrix has no null vector".into()));
    }
    let norm = a.norm_1();
    if norm == 0.0 {
        let mut v = vec![C64::new(0.0, 0.0); n];
        v[0] = C64::new(1.0, 0.0);
        return Ok(v);
    }

    let m = a.to_nalgebra();
    let shift = 1e-10 * norm;
    let shifted = &m + DMatrix::<C64>::identity(n, n) * C64::new(shift, 0.0);
    let lu = shifted.lu();

    // Deterministic, generic start vector.
    let mut v = DVector::<C64>::from_fn(n, |i, _| C64::new(1.0 + (i as f64 * 0.618).sin() * 0.5, (i as f64 * 0.377).cos() * 0.1));
    let mut last = f64::INFINITY;
    for _ in 0..8 {
        let w = match lu.solve(&v) {
            Some(w) if w.iter().all(|z| z.re.is_finite() && z.im.is_finite()) => w,
            // Exactly singular after shifting: the shift itself is the eigenvalue; fall back to
            // the current iterate which is already the null direction.
            _ => break,
        };
        let wn = w.norm();
        if wn == 0.0 {
            break;
        }
        v = w / C64::new(wn, 0.0);
        let residual = (&m * &v).norm();
        if residual <= 1e-13 * norm || (last - residual).abs() <= 1e-3 * residual {
            break;
        }
        last = residual;
    }
    let rayleigh = v.dotc(&(&m * &v));
    if rayleigh.norm() >= 1e-6 * norm {
        return Err(Error::NoSteadyState { smallest_eigenvalue: rayleigh.norm() });
    }
    Ok(v.iter().copied().collect())
}
