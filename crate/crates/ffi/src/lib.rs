//! C ABI over `qca-core`.
//!
//! Every fallible call returns a [`QcaStatus`]; on failure a message is
//! available from [`qca_last_error`] on the same thread. Handles are opaque
//! and must be released with their `_free` function.

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;

use qca_core::evolve::{evolve_for, steady_state, BlockStepper, Lindbladian, SteadyStateOptions};
use qca_core::model::{Bitstring, Boundary, Lattice, RuleSet, Units};
use qca_core::numerics::{ComplexMatrix, IntegratorOptions};
use qca_core::observables::{covariance, fidelity_ghz_best, magnetization};
use qca_core::states::{basis_density, central_superposition, pure_density};
use qca_core::Error;

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcaStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Numerical = 3,
    Panic = 4,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcaUnits {
    Pi = 0,
    Raw = 1,
}

#[repr(C)]
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QcaBoundary {
    Open = 0,
    Periodic = 1,
}

/// Opaque rule set.
pub struct QcaRules {
    inner: RuleSet,
}

/// Opaque density matrix on a chain.
pub struct QcaState {
    lattice: Lattice,
    rho: ComplexMatrix,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(e: &Error) -> QcaStatus {
    set_error(e.to_string());
    if e.is_numerical() {
        QcaStatus::Numerical
    } else {
        QcaStatus::InvalidArgument
    }
}

fn guard(f: impl FnOnce() -> Result<(), QcaStatus>) -> QcaStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => QcaStatus::Ok,
        Ok(Err(s)) => s,
        Err(_) => {
            set_error("internal panic");
            QcaStatus::Panic
        }
    }
}

fn check<T>(r: qca_core::Result<T>) -> Result<T, QcaStatus> {
    r.map_err(|e| status_of(&e))
}

unsafe fn deref<'a, T>(p: *const T) -> Result<&'a T, QcaStatus> {
    p.as_ref().ok_or_else(|| {
        set_error("null pointer argument");
        QcaStatus::NullPointer
    })
}

unsafe fn deref_mut<'a, T>(p: *mut T) -> Result<&'a mut T, QcaStatus> {
    p.as_mut().ok_or_else(|| {
        set_error("null pointer argument");
        QcaStatus::NullPointer
    })
}

fn boundary(b: QcaBoundary) -> Boundary {
    match b {
        QcaBoundary::Open => Boundary::Open,
        QcaBoundary::Periodic => Boundary::Periodic,
    }
}

/// Message of the last failed call on this thread, or null. The pointer is
/// valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn qca_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Static, NUL-terminated library version.
#[no_mangle]
pub extern "C" fn qca_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// Builds a rule set from six values `θ⁰,θ¹,θ²,φ̃⁰,φ̃¹,φ̃²` and decay `gamma`.
///
/// # Safety
/// `values` must point to `len` readable doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qca_rules_new(values: *const f64, len: usize, units: QcaUnits, gamma: f64, out: *mut *mut QcaRules) -> QcaStatus {
    guard(|| {
        let out = deref_mut(out)?;
        *out = ptr::null_mut();
        if values.is_null() {
            set_error("null pointer argument");
            return Err(QcaStatus::NullPointer);
        }
        let v = std::slice::from_raw_parts(values, len);
        let units = match units {
            QcaUnits::Pi => Units::Pi,
            QcaUnits::Raw => Units::Raw,
        };
        let rules = check(RuleSet::from_vector(v, units).and_then(|r| r.with_gamma(gamma)))?;
        *out = Box::into_raw(Box::new(QcaRules { inner: rules }));
        Ok(())
    })
}

/// # Safety
/// `rules` must be null or a handle from [`qca_rules_new`] not yet freed.
#[no_mangle]
pub unsafe extern "C" fn qca_rules_free(rules: *mut QcaRules) {
    if !rules.is_null() {
        drop(Box::from_raw(rules));
    }
}

/// 1 if the rule set has no dissipative terms, 0 otherwise or on null.
///
/// # Safety
/// `rules` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qca_rules_is_unitary(rules: *const QcaRules) -> i32 {
    rules.as_ref().map_or(0, |r| i32::from(r.inner.is_unitary()))
}

/// Computational-basis state from a string of `0`/`1` characters.
///
/// # Safety
/// `bits` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qca_state_from_bitstring(bits: *const c_char, bc: QcaBoundary, out: *mut *mut QcaState) -> QcaStatus {
    guard(|| {
        let out = deref_mut(out)?;
        *out = ptr::null_mut();
        if bits.is_null() {
            set_error("null pointer argument");
            return Err(QcaStatus::NullPointer);
        }
        let text = CStr::from_ptr(bits).to_str().map_err(|_| {
            set_error("bitstring is not UTF-8");
            QcaStatus::InvalidArgument
        })?;
        let bits: Bitstring = check(text.parse())?;
        let lattice = check(Lattice::new(bits.len(), boundary(bc)))?;
        *out = Box::into_raw(Box::new(QcaState { lattice, rho: basis_density(&bits) }));
        Ok(())
    })
}

/// `|0…0⟩ ⊗ (|0⟩+|1⟩)/√2 ⊗ |0…0⟩` on an odd chain of `n` sites.
///
/// # Safety
/// `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn qca_state_central_superposition(n: usize, bc: QcaBoundary, out: *mut *mut QcaState) -> QcaStatus {
    guard(|| {
        let out = deref_mut(out)?;
        *out = ptr::null_mut();
        let lattice = check(Lattice::new(n, boundary(bc)))?;
        let psi = check(central_superposition(n))?;
        *out = Box::into_raw(Box::new(QcaState { lattice, rho: pure_density(&psi) }));
        Ok(())
    })
}

/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qca_state_free(state: *mut QcaState) {
    if !state.is_null() {
        drop(Box::from_raw(state));
    }
}

/// Number of sites, or 0 on null.
///
/// # Safety
/// `state` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn qca_state_n_sites(state: *const QcaState) -> usize {
    state.as_ref().map_or(0, |s| s.lattice.n_sites())
}

/// Writes `⟨Z_j⟩` for every site into `out[0..len]`; `len` must equal the
/// number of sites.
///
/// # Safety
/// `state` must be a live handle and `out` writable for `len` doubles.
#[no_mangle]
pub unsafe extern "C" fn qca_state_magnetization(state: *const QcaState, out: *mut f64, len: usize) -> QcaStatus {
    guard(|| {
        let s = deref(state)?;
        if out.is_null() {
            set_error("null pointer argument");
            return Err(QcaStatus::NullPointer);
        }
        let z = magnetization(&s.rho);
        if z.len() != len {
            set_error(format!("buffer holds {len} values, state has {} sites", z.len()));
            return Err(QcaStatus::InvalidArgument);
        }
        std::slice::from_raw_parts_mut(out, len).copy_from_slice(&z);
        Ok(())
    })
}

/// Continuous evolution for `duration` model time units, in place.
///
/// # Safety
/// `state` and `rules` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn qca_state_evolve(state: *mut QcaState, rules: *const QcaRules, duration: f64) -> QcaStatus {
    guard(|| {
        let s = deref_mut(state)?;
        let r = deref(rules)?;
        if !(duration >= 0.0) {
            set_error("duration must be non-negative");
            return Err(QcaStatus::InvalidArgument);
        }
        let gen = check(Lindbladian::from_rules(&r.inner, &s.lattice))?;
        s.rho = check(evolve_for(&gen, &s.rho, duration, &IntegratorOptions::default()))?;
        Ok(())
    })
}

/// `steps` block-partitioned updates (sublattice A then B), in place.
///
/// # Safety
/// `state`, `rules_a` and `rules_b` must be live handles.
#[no_mangle]
pub unsafe extern "C" fn qca_state_discrete_steps(
    state: *mut QcaState,
    rules_a: *const QcaRules,
    rules_b: *const QcaRules,
    steps: usize,
) -> QcaStatus {
    guard(|| {
        let s = deref_mut(state)?;
        let a = deref(rules_a)?;
        let b = deref(rules_b)?;
        let stepper = check(BlockStepper::new(&a.inner, &b.inner, &s.lattice, IntegratorOptions::default()))?;
        for _ in 0..steps {
            s.rho = check(stepper.step(&s.rho))?;
        }
        Ok(())
    })
}

/// Long-time evolution until `‖ℒ[ρ]‖_F < tol` or `t_max`, in place.
/// `converged` and `residual` may be null.
///
/// # Safety
/// `state` and `rules` must be live handles; non-null outputs writable.
#[no_mangle]
pub unsafe extern "C" fn qca_state_steady(
    state: *mut QcaState,
    rules: *const QcaRules,
    tol: f64,
    t_max: f64,
    converged: *mut i32,
    residual: *mut f64,
) -> QcaStatus {
    guard(|| {
        let s = deref_mut(state)?;
        let r = deref(rules)?;
        if !(tol > 0.0 && t_max >= 0.0) {
            set_error("tol must be positive and t_max non-negative");
            return Err(QcaStatus::InvalidArgument);
        }
        let gen = check(Lindbladian::from_rules(&r.inner, &s.lattice))?;
        let opts = SteadyStateOptions { tol, t_max, ..Default::default() };
        let ss = check(steady_state(&s.rho, &gen, &opts))?;
        if let Some(c) = converged.as_mut() {
            *c = i32::from(ss.converged);
        }
        if let Some(res) = residual.as_mut() {
            *res = ss.residual;
        }
        s.rho = ss.rho;
        Ok(())
    })
}

/// Mean nearest-neighbor `Z` covariance.
///
/// # Safety
/// `state` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn qca_state_mean_nn_covariance(state: *const QcaState, out: *mut f64) -> QcaStatus {
    guard(|| {
        let s = deref(state)?;
        let out = deref_mut(out)?;
        *out = covariance(&s.rho, s.lattice.boundary()).mean_nn;
        Ok(())
    })
}

/// Phase-optimized GHZ fidelity and the optimal phase.
///
/// # Safety
/// `state` must be a live handle; `fidelity` writable; `phase` may be null.
#[no_mangle]
pub unsafe extern "C" fn qca_state_ghz_fidelity(state: *const QcaState, fidelity: *mut f64, phase: *mut f64) -> QcaStatus {
    guard(|| {
        let s = deref(state)?;
        let f = deref_mut(fidelity)?;
        let (best, ph) = fidelity_ghz_best(&s.rho);
        *f = best;
        if let Some(p) = phase.as_mut() {
            *p = ph;
        }
        Ok(())
    })
}
