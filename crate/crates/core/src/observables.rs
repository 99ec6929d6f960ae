//! Measurements on effective-model density matrices: magnetization,
//! connected `Z` correlations, and fidelities against cat states.
//!
//! `Z` follows the crate convention `Z|1⟩ = +|1⟩`. Every observable here is
//! diagonal or touches only a couple of matrix elements, so none of these
//! functions needs more than `O(dim · N²)` work.

use std::f64::consts::{FRAC_1_SQRT_2, PI};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Bitstring, Boundary};
use crate::numerics::{sqrtm_psd, ComplexMatrix};

fn n_qubits(rho: &ComplexMatrix) -> usize {
    debug_assert!(rho.rows().is_power_of_two());
    rho.rows().trailing_zeros() as usize
}

fn z_value(state: usize, j: usize, n: usize) -> f64 {
    if state >> (n - 1 - j) & 1 == 1 {
        1.0
    } else {
        -1.0
    }
}

/// `⟨Z_j⟩` for every site.
pub fn magnetization(rho: &ComplexMatrix) -> Vec<f64> {
    let n = n_qubits(rho);
    let mut m = vec![0.0; n];
    for (s, p) in rho.diagonal().iter().enumerate() {
        for (j, mj) in m.iter_mut().enumerate() {
            *mj += p.re * z_value(s, j, n);
        }
    }
    m
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CovarianceReport {
    /// `C_{i,j} = ⟨Z_i Z_j⟩ − ⟨Z_i⟩⟨Z_j⟩`
    pub matrix: Vec<Vec<f64>>,
    /// Mean nearest-neighbor covariance `⟨C⟩`.
    pub mean_nn: f64,
    pub boundary: Boundary,
}

/// Connected `Z` correlations. Periodic chains average `C_{j,j+1}` over all
/// `N` bonds; open chains over the `N − 1` existing bonds.
pub fn covariance(rho: &ComplexMatrix, boundary: Boundary) -> CovarianceReport {
    let n = n_qubits(rho);
    let probs: Vec<f64> = rho.diagonal().iter().map(|z| z.re).collect();
    let mut zz = vec![vec![0.0; n]; n];
    let mut z = vec![0.0; n];
    for (s, &p) in probs.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let vals: Vec<f64> = (0..n).map(|j| z_value(s, j, n)).collect();
        for i in 0..n {
            z[i] += p * vals[i];
            for j in i..n {
                zz[i][j] += p * vals[i] * vals[j];
            }
        }
    }
    let mut matrix = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let c = zz[i][j] - z[i] * z[j];
            matrix[i][j] = c;
            matrix[j][i] = c;
        }
    }
    let bonds: Vec<(usize, usize)> = match boundary {
        Boundary::Periodic if n >= 2 => (0..n).map(|j| (j, (j + 1) % n)).collect(),
        _ => (0..n.saturating_sub(1)).map(|j| (j, j + 1)).collect(),
    };
    let mean_nn = if bonds.is_empty() {
        0.0
    } else {
        bonds.iter().map(|&(i, j)| matrix[i][j]).sum::<f64>() / bonds.len() as f64
    };
    CovarianceReport { matrix, mean_nn, boundary }
}

/// `(|a⟩ + e^{iφ}|b⟩)/√2` for basis indices `a ≠ b`.
pub fn cat_state(dim: usize, a: usize, b: usize, phase: f64) -> Vec<C64> {
    let mut psi = vec![C64::new(0.0, 0.0); dim];
    psi[a] = C64::new(FRAC_1_SQRT_2, 0.0);
    psi[b] += C64::from_polar(FRAC_1_SQRT_2, phase);
    psi
}

/// `(|0…0⟩ + e^{iφ}|1…1⟩)/√2`; `φ = π` gives the conventional target.
pub fn ghz_state(n: usize, phase: f64) -> Result<Vec<C64>> {
    if n == 0 {
        return Err(Error::InvalidState("GHZ state needs at least one qubit".into()));
    }
    let dim = 1 << n;
    Ok(cat_state(dim, 0, dim - 1, phase))
}

/// Basis indices of the two Néel configurations `0101…` and `1010…`.
pub fn neel_pair(n: usize) -> (usize, usize) {
    let even = Bitstring((0..n).map(|j| j % 2 == 1).collect()).to_index();
    let odd = Bitstring((0..n).map(|j| j % 2 == 0).collect()).to_index();
    (even, odd)
}

/// `(|0101…⟩ + e^{iφ}|1010…⟩)/√2`; `φ = π` gives the antiferromagnetic cat.
pub fn af_ghz_state(n: usize, phase: f64) -> Result<Vec<C64>> {
    if n < 2 {
        return Err(Error::InvalidState("antiferromagnetic cat needs at least two qubits".into()));
    }
    let (a, b) = neel_pair(n);
    Ok(cat_state(1 << n, a, b, phase))
}

/// `⟨ψ|ρ|ψ⟩`, equal to the Uhlmann fidelity when the target is pure.
pub fn fidelity_pure(rho: &ComplexMatrix, psi: &[C64]) -> f64 {
    let mut acc = C64::new(0.0, 0.0);
    for (r, pr) in psi.iter().enumerate() {
        if pr.norm_sqr() == 0.0 {
            continue;
        }
        let row = rho.row(r);
        let inner: C64 = row.iter().zip(psi).map(|(&a, &b)| a * b).sum();
        acc += pr.conj() * inner;
    }
    acc.re
}

/// `(Tr √(√ρ σ √ρ))²` for arbitrary density matrices.
pub fn uhlmann_fidelity(rho: &ComplexMatrix, sigma: &ComplexMatrix) -> Result<f64> {
    let sr = sqrtm_psd(rho)?;
    let inner = sr.matmul(sigma).matmul(&sr);
    // Symmetrize away round-off before the second root.
    let inner = (&inner + &inner.adjoint()).scale_real(0.5);
    let t = sqrtm_psd(&inner)?.trace().re;
    Ok(t * t)
}

/// Fidelity with `(|a⟩ + e^{iφ}|b⟩)/√2` maximized over `φ`. With
/// `p = ρ_aa`, `q = ρ_bb` and `c = ρ_ab` the optimum is
/// `(p + q)/2 + |c|` at `φ = −arg c`.
pub fn fidelity_cat_best(rho: &ComplexMatrix, a: usize, b: usize) -> (f64, f64) {
    let p = rho[(a, a)].re;
    let q = rho[(b, b)].re;
    let c = rho[(a, b)];
    let phase = if c.norm() == 0.0 { 0.0 } else { wrap_phase(-c.arg()) };
    (((p + q) / 2.0 + c.norm()).clamp(0.0, 1.0), phase)
}

/// Phase-optimized GHZ fidelity and the optimal relative phase.
pub fn fidelity_ghz_best(rho: &ComplexMatrix) -> (f64, f64) {
    let dim = rho.rows();
    fidelity_cat_best(rho, 0, dim - 1)
}

/// Phase-optimized antiferromagnetic-cat fidelity and the optimal phase.
pub fn fidelity_af_best(rho: &ComplexMatrix) -> (f64, f64) {
    let (a, b) = neel_pair(n_qubits(rho));
    fidelity_cat_best(rho, a, b)
}

/// Maps an angle into `(−π, π]`.
pub fn wrap_phase(phi: f64) -> f64 {
    let mut p = phi % (2.0 * PI);
    if p <= -PI {
        p += 2.0 * PI;
    } else if p > PI {
        p -= 2.0 * PI;
    }
    p
}

/// `Tr ρ²`
pub fn purity(rho: &ComplexMatrix) -> f64 {
    rho.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

pub fn trace_residual(rho: &ComplexMatrix) -> f64 {
    (rho.trace() - C64::new(1.0, 0.0)).norm()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::kron;
    use crate::states::{basis_density, pure_density};

    fn bits(s: &str) -> Bitstring {
        s.parse().unwrap()
    }

    #[test]
    fn magnetization_examples() {
        let m = magnetization(&basis_density(&bits("000010000")));
        assert_eq!(m, vec![-1.0, -1.0, -1.0, -1.0, 1.0, -1.0, -1.0, -1.0, -1.0]);
        let mixed = ComplexMatrix::identity(8).scale_real(1.0 / 8.0);
        assert!(magnetization(&mixed).iter().all(|&z| z.abs() < 1e-15));
        let ghz = pure_density(&ghz_state(5, PI).unwrap());
        assert!(magnetization(&ghz).iter().all(|&z| z.abs() < 1e-15));
    }

    #[test]
    fn covariance_examples() {
        let prod = covariance(&basis_density(&bits("000000")), Boundary::Periodic);
        assert_eq!(prod.mean_nn, 0.0);
        let ghz = covariance(&pure_density(&ghz_state(6, PI).unwrap()), Boundary::Periodic);
        assert!((ghz.mean_nn - 1.0).abs() < 1e-12);
        let af = covariance(&pure_density(&af_ghz_state(6, PI).unwrap()), Boundary::Periodic);
        assert!((af.mean_nn + 1.0).abs() < 1e-12);
        // Diagonal is 1 − ⟨Z⟩².
        for j in 0..6 {
            assert!((ghz.matrix[j][j] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn open_covariance_uses_existing_bonds() {
        // |00⟩+|11⟩ on sites 1-2, site 3 in |0⟩: one correlated bond out of two.
        let psi = kron(
            &ComplexMatrix::from_vec(4, 1, ghz_state(2, 0.0).unwrap()).unwrap(),
            &ComplexMatrix::from_vec(2, 1, vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]).unwrap(),
        );
        let rho = pure_density(psi.as_slice());
        assert!((covariance(&rho, Boundary::Open).mean_nn - 0.5).abs() < 1e-12);
        assert!((covariance(&rho, Boundary::Periodic).mean_nn - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn ghz_definitions() {
        let g = ghz_state(1, PI).unwrap();
        assert!((g[0].re - FRAC_1_SQRT_2).abs() < 1e-16 && (g[1].re + FRAC_1_SQRT_2).abs() < 1e-16);
        let (a, b) = (ghz_state(3, 0.4).unwrap(), ghz_state(3, 1.7).unwrap());
        let overlap: C64 = a.iter().zip(&b).map(|(x, y)| x.conj() * y).sum();
        let expected = (C64::new(1.0, 0.0) + C64::from_polar(1.0, 1.7 - 0.4)) / 2.0;
        assert!((overlap - expected).norm() < 1e-15);
        assert_eq!(neel_pair(6), (0b010101, 0b101010));
    }

    #[test]
    fn pure_fidelity_examples() {
        let psi = ghz_state(4, 0.3).unwrap();
        assert!((fidelity_pure(&pure_density(&psi), &psi) - 1.0).abs() < 1e-14);
        let zero = basis_density(&bits("0000"));
        assert!((fidelity_pure(&zero, &ghz_state(4, PI).unwrap()) - 0.5).abs() < 1e-14);
    }

    #[test]
    fn best_phase_fidelity() {
        let (f, phase) = fidelity_ghz_best(&pure_density(&ghz_state(4, 0.0).unwrap()));
        assert!((f - 1.0).abs() < 1e-14 && phase.abs() < 1e-14);
        let (f, phase) = fidelity_ghz_best(&pure_density(&ghz_state(4, PI).unwrap()));
        assert!((f - 1.0).abs() < 1e-14 && (phase.abs() - PI).abs() < 1e-12);
        let mut incoherent = ComplexMatrix::zeros(16, 16);
        incoherent[(0, 0)] = C64::new(0.5, 0.0);
        incoherent[(15, 15)] = C64::new(0.5, 0.0);
        assert!((fidelity_ghz_best(&incoherent).0 - 0.5).abs() < 1e-15);
        let (f, _) = fidelity_af_best(&pure_density(&af_ghz_state(6, -2.0).unwrap()));
        assert!((f - 1.0).abs() < 1e-14);
    }

    #[test]
    fn wrap_phase_range() {
        assert!((wrap_phase(3.0 * PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(-PI) - PI).abs() < 1e-12);
        assert!((wrap_phase(0.5) - 0.5).abs() < 1e-15);
    }
}
