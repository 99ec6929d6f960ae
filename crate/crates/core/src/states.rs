//! Initial states and density-matrix sanity checks.

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};
use crate::model::Bitstring;
use crate::numerics::{min_eigenvalue_hermitian, ComplexMatrix};

/// Largest dimension for which [`validate_density`] runs an eigendecomposition.
const PSD_CHECK_MAX_DIM: usize = 1024;

pub fn basis_vector(dim: usize, index: usize) -> Vec<C64> {
    let mut v = vec![C64::new(0.0, 0.0); dim];
    v[index] = C64::new(1.0, 0.0);
    v
}

/// `|b⟩⟨b|` for a computational-basis bitstring.
pub fn basis_density(bits: &Bitstring) -> ComplexMatrix {
    ComplexMatrix::basis_projector(1 << bits.len(), bits.to_index())
}

/// `|ψ⟩⟨ψ|`
pub fn pure_density(psi: &[C64]) -> ComplexMatrix {
    ComplexMatrix::outer(psi, psi)
}

/// `|0⟩^⊗m ⊗ (|0⟩+|1⟩)/√2 ⊗ |0⟩^⊗m` with `n = 2m + 1`.
pub fn central_superposition(n: usize) -> Result<Vec<C64>> {
    if n % 2 == 0 {
        return Err(Error::InvalidState(format!("central superposition needs an odd chain, got N = {n}")));
    }
    let dim = 1 << n;
    let center_bit = 1 << (n / 2);
    let amp = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[0] = amp;
    psi[center_bit] = amp;
    Ok(psi)
}

/// Checks Hermiticity, unit trace and (for moderate dimensions) positivity,
/// all within `tol`.
pub fn validate_density(rho: &ComplexMatrix, tol: f64) -> Result<()> {
    if !rho.is_square() || !rho.rows().is_power_of_two() {
        return Err(Error::InvalidState(format!("{}x{} is not a qubit-register density matrix", rho.rows(), rho.cols())));
    }
    check_density_common(rho, tol)
}

pub(crate) fn check_density_common(rho: &ComplexMatrix, tol: f64) -> Result<()> {
    let herm = rho.hermiticity_error();
    if herm > tol {
        return Err(Error::InvalidState(format!("not Hermitian (max |ρ − ρ†| = {herm:e})")));
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol {
        return Err(Error::InvalidState(format!("trace {tr} differs from 1")));
    }
    let diag_min = rho.diagonal().iter().map(|z| z.re).fold(f64::INFINITY, f64::min);
    if diag_min < -tol {
        return Err(Error::InvalidState(format!("negative population {diag_min:e}")));
    }
    let off_diagonal = (0..rho.rows()).any(|r| rho.row(r).iter().enumerate().any(|(c, z)| c != r && z.norm() != 0.0));
    if off_diagonal && rho.rows() <= PSD_CHECK_MAX_DIM {
        let min = min_eigenvalue_hermitian(rho)?;
        if min < -tol {
            return Err(Error::InvalidState(format!("not positive semidefinite (min eigenvalue {min:e})")));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn central_superposition_layout() {
        let psi = central_superposition(9).unwrap();
        let center = "000010000".parse::<Bitstring>().unwrap().to_index();
        assert!((psi[0].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        assert!((psi[center].re - std::f64::consts::FRAC_1_SQRT_2).abs() < 1e-16);
        assert!(central_superposition(4).is_err());
    }

    #[test]
    fn validation_catches_bad_states() {
        let good = pure_density(&central_superposition(3).unwrap());
        assert!(validate_density(&good, 1e-10).is_ok());
        assert!(validate_density(&good.scale_real(2.0), 1e-10).is_err());
        let mut neg = ComplexMatrix::identity(2).scale_real(0.5);
        neg[(0, 1)] = C64::new(0.9, 0.0);
        neg[(1, 0)] = C64::new(0.9, 0.0);
        assert!(validate_density(&neg, 1e-10).is_err());
        let mut skew = ComplexMatrix::identity(2).scale_real(0.5);
        skew[(0, 1)] = C64::new(0.1, 0.0);
        assert!(validate_density(&skew, 1e-10).is_err());
    }
}
