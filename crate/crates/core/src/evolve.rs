//! Lindblad propagation of the effective model: continuous time evolution,
//! block-partitioned discrete QCA steps, and long-time steady states.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{build_hamiltonian, build_jump_operators, Lattice, RuleSet, Sublattice};
use crate::numerics::{dominant_nullvector, time_grid, ComplexMatrix, Integrator, IntegratorOptions, Method, SparseMatrix};
use crate::observables::{magnetization, trace_residual};
use crate::states::validate_density;

/// Largest Hilbert-space dimension for which [`build_superoperator`] will
/// materialize the `dim² × dim²` generator.
pub const SUPEROPERATOR_MAX_DIM: usize = 64;

/// Tolerance used when checking user-supplied initial states.
const STATE_TOL: f64 = 1e-10;

/// Jump operator with its support precomputed for the sandwich `L ρ L†`.
#[derive(Clone, Debug)]
struct Channel {
    /// Nonzero rows of `L`, each with `(position in support, value)` entries.
    rows: Vec<(usize, Vec<(usize, C64)>)>,
    /// Columns of `L` holding any nonzero.
    support: Vec<usize>,
}

impl Channel {
    fn new(op: &SparseMatrix) -> Self {
        let mut support: Vec<usize> = op.triplets().map(|(_, c, _)| c).collect();
        support.sort_unstable();
        support.dedup();
        let pos = |c: usize| support.binary_search(&c).unwrap();
        let rows = op
            .nonzero_rows()
            .into_iter()
            .map(|r| (r, op.row_entries(r).map(|(c, v)| (pos(c), v)).collect()))
            .collect();
        Self { rows, support }
    }

    /// `out += L ρ L†`
    fn sandwich_acc(&self, rho: &ComplexMatrix, out: &mut ComplexMatrix, work: &mut Vec<C64>) {
        let m = self.support.len();
        for &(a, ref entries_a) in &self.rows {
            // w[p] = (L ρ)[a, support[p]]
            work.clear();
            work.resize(m, C64::new(0.0, 0.0));
            for &(pa, la) in entries_a {
                let row = rho.row(self.support[pa]);
                for (w, &c) in work.iter_mut().zip(&self.support) {
                    *w += la * row[c];
                }
            }
            let out_row = out.row_mut(a);
            for &(b, ref entries_b) in &self.rows {
                let mut acc = C64::new(0.0, 0.0);
                for &(pb, lb) in entries_b {
                    acc += work[pb] * lb.conj();
                }
                out_row[b] += acc;
            }
        }
    }
}

/// Matrix-free Lindblad generator `ℒ[ρ] = −i[H, ρ] + Σ_k (L_k ρ L_k† − ½{L_k†L_k, ρ})`.
///
/// Internally `−i[H,ρ] − ½{Λ,ρ} = −i(Kρ − ρK†)` with `K = H − (i/2)Λ` and
/// `Λ = Σ_k L_k†L_k`, so only one sparse operator is applied on each side.
#[derive(Clone, Debug)]
pub struct Lindbladian {
    dim: usize,
    k: SparseMatrix,
    channels: Vec<Channel>,
    is_zero: bool,
}

impl Lindbladian {
    pub fn new(h: &SparseMatrix, jumps: &[SparseMatrix]) -> Result<Self> {
        let dim = h.rows();
        if h.cols() != dim || jumps.iter().any(|l| l.rows() != dim || l.cols() != dim) {
            return Err(Error::DimensionMismatch("Hamiltonian and jump operators must share one square dimension".into()));
        }
        let mut lambda = SparseMatrix::zeros(dim, dim);
        for l in jumps {
            lambda = lambda.add(&l.adjoint().matmul(l));
        }
        let k = h.add(&lambda.scale(C64::new(0.0, -0.5)));
        let is_zero = k.nnz() == 0 && jumps.iter().all(|l| l.nnz() == 0);
        Ok(Self { dim, k, channels: jumps.iter().map(Channel::new).collect(), is_zero })
    }

    pub fn from_rules(rules: &RuleSet, lattice: &Lattice) -> Result<Self> {
        Self::new(&build_hamiltonian(rules, lattice)?, &build_jump_operators(rules, lattice)?)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// True when the generator vanishes identically.
    pub fn is_zero(&self) -> bool {
        self.is_zero
    }

    /// Writes `ℒ[ρ]` into `out`.
    pub fn apply_into(&self, rho: &ComplexMatrix, out: &mut ComplexMatrix) {
        debug_assert_eq!(rho.rows(), self.dim);
        out.fill_zero();
        self.k.left_mul_acc(rho, C64::new(0.0, -1.0), out);
        self.k.right_mul_adjoint_acc(rho, C64::new(0.0, 1.0), out);
        let mut work = Vec::new();
        for ch in &self.channels {
            ch.sandwich_acc(rho, out, &mut work);
        }
    }

    /// Writes `ℒ[ρ]` into `out` for Hermitian `ρ`, using
    /// `−i(Kρ − ρK†) = X + X†` with `X = −iKρ`. `extra` may accumulate
    /// further `−iH'ρ` terms into `X` for Hermitian `H'`.
    pub(crate) fn apply_hermitian_with(
        &self,
        rho: &ComplexMatrix,
        out: &mut ComplexMatrix,
        extra: impl FnOnce(&ComplexMatrix, &mut ComplexMatrix),
    ) {
        out.fill_zero();
        self.k.left_mul_acc(rho, C64::new(0.0, -1.0), out);
        extra(rho, out);
        add_adjoint_in_place(out);
        let mut work = Vec::new();
        for ch in &self.channels {
            ch.sandwich_acc(rho, out, &mut work);
        }
    }

    pub fn apply(&self, rho: &ComplexMatrix) -> ComplexMatrix {
        let mut out = ComplexMatrix::zeros(self.dim, self.dim);
        self.apply_into(rho, &mut out);
        out
    }

    /// `‖ℒ[ρ]‖_F`
    pub fn residual(&self, rho: &ComplexMatrix) -> f64 {
        self.apply(rho).frobenius_norm()
    }

    pub(crate) fn rhs(&self) -> impl FnMut(f64, &ComplexMatrix, &mut ComplexMatrix) + '_ {
        move |_t, y, dy| self.apply_hermitian_with(y, dy, |_, _| {})
    }
}

/// `x ← x + x†`
fn add_adjoint_in_place(x: &mut ComplexMatrix) {
    let n = x.rows();
    let data = x.as_mut_slice();
    for r in 0..n {
        data[r * n + r] = C64::new(2.0 * data[r * n + r].re, 0.0);
        for c in r + 1..n {
            let a = data[r * n + c];
            let b = data[c * n + r];
            data[r * n + c] = a + b.conj();
            data[c * n + r] = b + a.conj();
        }
    }
}

/// `ℒ[ρ]` for a Hamiltonian and list of jump operators.
pub fn lindblad_rhs(rho: &ComplexMatrix, h: &SparseMatrix, jumps: &[SparseMatrix]) -> Result<ComplexMatrix> {
    let l = Lindbladian::new(h, jumps)?;
    if rho.rows() != l.dim() || rho.cols() != l.dim() {
        return Err(Error::DimensionMismatch(format!("state is {}x{}, operators are {}", rho.rows(), rho.cols(), l.dim())));
    }
    Ok(l.apply(rho))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "lowercase")]
pub enum Mode {
    /// Continuous evolution under one rule set for `t_max` model time units,
    /// sampled every `sample_interval`.
    Continuous { rules: RuleSet, t_max: f64, sample_interval: f64 },
    /// `steps` block updates (A then B), sampled every `sample_every` steps.
    Discrete { rules_a: RuleSet, rules_b: RuleSet, steps: usize, sample_every: usize },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolutionSpec {
    pub mode: Mode,
    #[serde(default)]
    pub integrator: IntegratorOptions,
    /// Keep the density matrix at every sample.
    #[serde(default)]
    pub store_states: bool,
}

impl EvolutionSpec {
    pub fn continuous(rules: RuleSet, t_max: f64, sample_interval: f64) -> Self {
        Self { mode: Mode::Continuous { rules, t_max, sample_interval }, integrator: Default::default(), store_states: false }
    }

    pub fn discrete(rules_a: RuleSet, rules_b: RuleSet, steps: usize) -> Self {
        Self {
            mode: Mode::Discrete { rules_a, rules_b, steps, sample_every: 1 },
            integrator: Default::default(),
            store_states: false,
        }
    }

    pub fn storing_states(mut self) -> Self {
        self.store_states = true;
        self
    }
}

/// Sampled trajectory. Discrete runs use the step index as time.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct EvolutionRecord {
    pub times: Vec<f64>,
    /// `magnetization[i][j] = ⟨Z_j⟩` at `times[i]`.
    pub magnetization: Vec<Vec<f64>>,
    pub trace_residual: Vec<f64>,
    #[serde(skip)]
    pub states: Option<Vec<ComplexMatrix>>,
    /// Density matrix at the last sample.
    #[serde(skip)]
    pub final_state: Option<ComplexMatrix>,
}

impl EvolutionRecord {
    fn push(&mut self, t: f64, rho: &ComplexMatrix, store: bool) {
        self.times.push(t);
        self.magnetization.push(magnetization(rho));
        self.trace_residual.push(trace_residual(rho));
        if store {
            self.states.get_or_insert_with(Vec::new).push(rho.clone());
        }
        self.final_state = Some(rho.clone());
    }

    pub fn final_magnetization(&self) -> Option<&[f64]> {
        self.magnetization.last().map(Vec::as_slice)
    }
}

fn check_initial(rho0: &ComplexMatrix, lattice: &Lattice) -> Result<()> {
    if rho0.rows() != lattice.dim() {
        return Err(Error::DimensionMismatch(format!(
            "initial state has dimension {}, lattice needs {}",
            rho0.rows(),
            lattice.dim()
        )));
    }
    validate_density(rho0, STATE_TOL)
}

/// Evolves `rho0` according to `spec`, sampling magnetization and trace.
pub fn propagate(rho0: &ComplexMatrix, lattice: &Lattice, spec: &EvolutionSpec) -> Result<EvolutionRecord> {
    check_initial(rho0, lattice)?;
    let mut record = EvolutionRecord::default();
    match &spec.mode {
        Mode::Continuous { rules, t_max, sample_interval } => {
            if !(*t_max >= 0.0) || !(*sample_interval > 0.0) {
                return Err(Error::InvalidOptions(format!("bad time grid t_max = {t_max}, dt = {sample_interval}")));
            }
            let gen = Lindbladian::from_rules(rules, lattice)?;
            let grid = time_grid(0.0, *t_max, *sample_interval);
            if gen.is_zero() {
                for &t in &grid {
                    record.push(t, rho0, spec.store_states);
                }
                return Ok(record);
            }
            let mut integ = Integrator::new(gen.rhs(), 0.0, *t_max, rho0, spec.integrator)?;
            for &t in &grid {
                let rho = integ.advance_to(t)?;
                record.push(t, &rho, spec.store_states);
            }
        }
        Mode::Discrete { rules_a, rules_b, steps, sample_every } => {
            let stepper = BlockStepper::new(rules_a, rules_b, lattice, spec.integrator)?;
            let every = (*sample_every).max(1);
            let mut rho = rho0.clone();
            record.push(0.0, &rho, spec.store_states);
            for step in 1..=*steps {
                rho = stepper.step(&rho)?;
                if step % every == 0 || step == *steps {
                    record.push(step as f64, &rho, spec.store_states);
                }
            }
        }
    }
    Ok(record)
}

/// Evolves `rho` for `duration` under a fixed generator.
pub fn evolve_for(gen: &Lindbladian, rho: &ComplexMatrix, duration: f64, opts: &IntegratorOptions) -> Result<ComplexMatrix> {
    if gen.is_zero() || duration == 0.0 {
        return Ok(rho.clone());
    }
    let mut integ = Integrator::new(gen.rhs(), 0.0, duration, rho, *opts)?;
    while !integ.is_finished() {
        integ.step()?;
    }
    Ok(integ.into_state())
}

/// One block-partitioned update `exp(ℒ_B) exp(ℒ_A)`: unit time with only
/// sublattice-A drives active, then unit time with only B drives.
#[derive(Clone, Debug)]
pub struct BlockStepper {
    gen_a: Lindbladian,
    gen_b: Lindbladian,
    opts: IntegratorOptions,
}

impl BlockStepper {
    /// Rule sets without an explicit mask are restricted to their sublattice.
    pub fn new(rules_a: &RuleSet, rules_b: &RuleSet, lattice: &Lattice, opts: IntegratorOptions) -> Result<Self> {
        let masked = |r: &RuleSet, sub| {
            if r.site_mask.is_some() {
                r.clone()
            } else {
                r.clone().restricted_to(lattice, sub)
            }
        };
        Ok(Self {
            gen_a: Lindbladian::from_rules(&masked(rules_a, Sublattice::A), lattice)?,
            gen_b: Lindbladian::from_rules(&masked(rules_b, Sublattice::B), lattice)?,
            opts,
        })
    }

    pub fn step(&self, rho: &ComplexMatrix) -> Result<ComplexMatrix> {
        let half = evolve_for(&self.gen_a, rho, 1.0, &self.opts)?;
        evolve_for(&self.gen_b, &half, 1.0, &self.opts)
    }
}

/// Applies one full block update to `rho`.
pub fn discrete_step(
    rho: &ComplexMatrix,
    rules_a: &RuleSet,
    rules_b: &RuleSet,
    lattice: &Lattice,
    opts: &IntegratorOptions,
) -> Result<ComplexMatrix> {
    check_initial(rho, lattice)?;
    BlockStepper::new(rules_a, rules_b, lattice, *opts)?.step(rho)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateOptions {
    /// Stop once `‖ℒ[ρ]‖_F` drops below this.
    pub tol: f64,
    pub t_max: f64,
    pub integrator: IntegratorOptions,
}

impl Default for SteadyStateOptions {
    fn default() -> Self {
        Self { tol: 1e-8, t_max: 500.0, integrator: IntegratorOptions::default() }
    }
}

#[derive(Clone, Debug)]
pub struct SteadyState {
    pub rho: ComplexMatrix,
    pub residual: f64,
    /// Model time at which the run stopped.
    pub time: f64,
    pub converged: bool,
}

/// Long-time evolution from `rho0` until the generator residual drops below
/// `opts.tol` or `opts.t_max` is reached. Non-convergence is reported via
/// [`SteadyState::converged`], not as an error.
pub fn steady_state(rho0: &ComplexMatrix, gen: &Lindbladian, opts: &SteadyStateOptions) -> Result<SteadyState> {
    if rho0.rows() != gen.dim() {
        return Err(Error::DimensionMismatch(format!("state dimension {} vs generator {}", rho0.rows(), gen.dim())));
    }
    validate_density(rho0, STATE_TOL)?;
    steady_state_unchecked(rho0, gen, opts)
}

pub(crate) fn steady_state_unchecked(rho0: &ComplexMatrix, gen: &Lindbladian, opts: &SteadyStateOptions) -> Result<SteadyState> {
    if gen.is_zero() {
        return Ok(SteadyState { rho: rho0.clone(), residual: 0.0, time: 0.0, converged: true });
    }
    let initial = gen.residual(rho0);
    if initial < opts.tol {
        return Ok(SteadyState { rho: rho0.clone(), residual: initial, time: 0.0, converged: true });
    }
    let mut integ = Integrator::new(gen.rhs(), 0.0, opts.t_max, rho0, opts.integrator)?;
    let mut residual = initial;
    while !integ.is_finished() {
        integ.step()?;
        residual = match integ.derivative() {
            Some(d) => d.frobenius_norm(),
            None => gen.residual(integ.state()),
        };
        if residual < opts.tol {
            break;
        }
    }
    let time = integ.time();
    Ok(SteadyState { rho: integ.into_state(), residual, time, converged: residual < opts.tol })
}

/// Column-stacking superoperator
/// `−i(I⊗H − Hᵀ⊗I) + Σ (L̄⊗L − ½ I⊗L†L − ½ (L†L)ᵀ⊗I)`.
pub fn build_superoperator(h: &SparseMatrix, jumps: &[SparseMatrix]) -> Result<ComplexMatrix> {
    let dim = h.rows();
    if dim > SUPEROPERATOR_MAX_DIM {
        return Err(Error::DimensionLimit { dim, limit: SUPEROPERATOR_MAX_DIM });
    }
    let id = ComplexMatrix::identity(dim);
    let hd = h.to_dense();
    let mut sup = (&id.kron(&hd) - &hd.transpose().kron(&id)).scale(C64::new(0.0, -1.0));
    for l in jumps {
        let ld = l.to_dense();
        let ldl = ld.adjoint().matmul(&ld);
        sup = &sup + &ld.conj().kron(&ld);
        sup.axpy(C64::new(-0.5, 0.0), &id.kron(&ldl));
        sup.axpy(C64::new(-0.5, 0.0), &ldl.transpose().kron(&id));
    }
    Ok(sup)
}

/// Steady state from the null vector of the materialized superoperator,
/// trace-normalized. Only meaningful when the null space is one-dimensional.
pub fn nullspace_steady_state(h: &SparseMatrix, jumps: &[SparseMatrix]) -> Result<ComplexMatrix> {
    let dim = h.rows();
    let sup = build_superoperator(h, jumps)?;
    let v = dominant_nullvector(&sup)?;
    let rho = ComplexMatrix::unvectorize(&v, dim, dim)?;
    let tr = rho.trace();
    if tr.norm() < 1e-12 {
        return Err(Error::Numerical("null vector is traceless; no physical steady state extracted".into()));
    }
    let rho = rho.scale(tr.inv());
    // Remove round-off anti-Hermitian part.
    Ok((&rho + &rho.adjoint()).scale_real(0.5))
}

/// Default integrator for fixed-step cross-checks of unit-time updates.
pub fn rk4_options(step: f64) -> IntegratorOptions {
    IntegratorOptions { method: Method::FixedRk4, max_step: step, ..Default::default() }
}
