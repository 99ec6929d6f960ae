//! Dense complex linear algebra, sparse operator application and ODE
//! integration shared by the simulation layers.

pub mod expm;
pub mod integrate;
pub mod linalg;
pub mod matrix;
pub mod sparse;

pub use expm::expm;
pub use integrate::{integrate, time_grid, Integrator, IntegratorOptions, Method, Trajectory};
pub use linalg::{dominant_nullvector, eigh, min_eigenvalue_hermitian, sqrtm_psd};
pub use matrix::{kron, kron_all, pauli, ComplexMatrix};
pub use sparse::SparseMatrix;
