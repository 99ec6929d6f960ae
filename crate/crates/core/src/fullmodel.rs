//! Full three-level Rydberg chain `(g, r, e)` with detuned drives, van der
//! Waals blockade and intermediate-state decay, used to benchmark the
//! effective two-level model.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{propagate, EvolutionSpec, Lindbladian};
use crate::model::{Bitstring, Boundary, Lattice, RuleSet, DOMINANCE_RATIO};
use crate::numerics::{time_grid, ComplexMatrix, Integrator, IntegratorOptions, SparseMatrix};
use crate::states::{basis_density, check_density_common};

pub const MAX_FULL_SITES: usize = 5;

const G: usize = 0;
const R: usize = 1;
const E: usize = 2;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThreeLevelParams {
    pub n_sites: usize,
    pub v: f64,
    pub gamma_big: f64,
    pub theta: [f64; 3],
    pub phi: [f64; 3],
    pub boundary: Boundary,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Validity {
    /// `V ≥ DOMINANCE_RATIO · Γ`
    pub interaction_dominates: bool,
    /// `Γ > θᵏ, φᵏ` for every `k`
    pub decay_exceeds_drives: bool,
}

impl Validity {
    pub fn ok(&self) -> bool {
        self.interaction_dominates && self.decay_exceeds_drives
    }
}

impl ThreeLevelParams {
    /// Benchmark defaults: `V = 50π`, `Γ = 10π`, no drives.
    pub fn benchmark(n_sites: usize) -> Self {
        Self {
            n_sites,
            v: 50.0 * std::f64::consts::PI,
            gamma_big: 10.0 * std::f64::consts::PI,
            theta: [0.0; 3],
            phi: [0.0; 3],
            boundary: Boundary::Open,
        }
    }

    pub fn with_v(&self, v: f64) -> Self {
        Self { v, ..self.clone() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_sites == 0 || self.n_sites > MAX_FULL_SITES {
            return Err(Error::InvalidLattice(format!("three-level model supports 1..={MAX_FULL_SITES} sites, got {}", self.n_sites)));
        }
        let all = self.theta.iter().chain(&self.phi).chain([&self.v, &self.gamma_big]);
        if all.clone().any(|x| !x.is_finite()) || self.gamma_big < 0.0 {
            return Err(Error::InvalidRule("three-level parameters must be finite with Γ ≥ 0".into()));
        }
        Lattice::new(self.n_sites, self.boundary)?;
        Ok(())
    }

    pub fn validity(&self) -> Validity {
        let drive_max = self.theta.iter().chain(&self.phi).fold(0.0f64, |m, x| m.max(x.abs()));
        Validity {
            interaction_dominates: self.v.abs() >= DOMINANCE_RATIO * self.gamma_big * (1.0 - 1e-12),
            decay_exceeds_drives: self.gamma_big > drive_max,
        }
    }

    pub fn dim(&self) -> usize {
        3usize.pow(self.n_sites as u32)
    }

    /// Effective rule set: same `θᵏ`, `φ̃ᵏ = (φᵏ)²/Γ`.
    pub fn effective_rules(&self) -> Result<RuleSet> {
        let phi_tilde = if self.gamma_big > 0.0 {
            self.phi.map(|p| p * p / self.gamma_big)
        } else if self.phi.iter().all(|&p| p == 0.0) {
            [0.0; 3]
        } else {
            return Err(Error::InvalidRule("φ drives need Γ > 0 for an effective description".into()));
        };
        RuleSet::new(self.theta, phi_tilde)
    }
}

fn digit(state: usize, site: usize, n: usize) -> usize {
    (state / 3usize.pow((n - 1 - site) as u32)) % 3
}

fn with_digit(state: usize, site: usize, n: usize, d: usize) -> usize {
    let p = 3usize.pow((n - 1 - site) as u32);
    state - digit(state, site, n) * p + d * p
}

/// `H(t) = H₀ + Σ_{k=1,2} (e^{ikVt} A_k + e^{−ikVt} A_k†)`
struct Decomposed {
    h0: SparseMatrix,
    /// `(k, A_k, A_k†)`
    oscillating: Vec<(f64, SparseMatrix, SparseMatrix)>,
    jumps: Vec<SparseMatrix>,
}

fn decompose(p: &ThreeLevelParams) -> Result<Decomposed> {
    p.validate()?;
    let n = p.n_sites;
    let dim = p.dim();
    let mut lowering: [Vec<(usize, usize, C64)>; 3] = Default::default();
    let mut bonds: Vec<(usize, usize)> = (1..n).map(|j| (j - 1, j)).collect();
    if p.boundary == Boundary::Periodic {
        bonds.push((n - 1, 0));
    }
    let mut h0 = Vec::new();
    for s in 0..dim {
        let rr = bonds.iter().filter(|&&(a, b)| digit(s, a, n) == R && digit(s, b, n) == R).count();
        if rr > 0 && p.v != 0.0 {
            h0.push((s, s, C64::new(p.v * rr as f64, 0.0)));
        }
        // Every frequency component drives every site; the interaction
        // energy alone selects which one is resonant.
        for j in (0..n).filter(|&j| digit(s, j, n) == R) {
            for k in 0..3 {
                if p.theta[k] != 0.0 {
                    lowering[k].push((with_digit(s, j, n, G), s, C64::new(p.theta[k] / 2.0, 0.0)));
                }
                if p.phi[k] != 0.0 {
                    lowering[k].push((with_digit(s, j, n, E), s, C64::new(p.phi[k] / 2.0, 0.0)));
                }
            }
        }
    }
    let a0 = SparseMatrix::from_triplets(dim, dim, std::mem::take(&mut lowering[0]));
    let h0 = SparseMatrix::from_triplets(dim, dim, h0).add(&a0).add(&a0.adjoint());
    let oscillating = (1..3)
        .map(|k| {
            let a = SparseMatrix::from_triplets(dim, dim, std::mem::take(&mut lowering[k]));
            let ad = a.adjoint();
            (k as f64, a, ad)
        })
        .filter(|(_, a, _)| a.nnz() > 0)
        .collect();
    let jumps = if p.gamma_big > 0.0 {
        let amp = C64::new(p.gamma_big.sqrt(), 0.0);
        (0..n)
            .map(|j| {
                let t = (0..dim).filter(|&s| digit(s, j, n) == E).map(|s| (with_digit(s, j, n, G), s, amp)).collect();
                SparseMatrix::from_triplets(dim, dim, t)
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(Decomposed { h0, oscillating, jumps })
}

/// Rotating-frame Hamiltonian at time `t`, basis `(g, r, e)` per site with
/// site 1 the most significant base-3 digit.
pub fn hamiltonian_at(t: f64, p: &ThreeLevelParams) -> Result<ComplexMatrix> {
    let d = decompose(p)?;
    let mut h = d.h0.to_dense();
    for (k, a, ad) in &d.oscillating {
        let ph = C64::from_polar(1.0, k * p.v * t);
        h.axpy(ph, &a.to_dense());
        h.axpy(ph.conj(), &ad.to_dense());
    }
    Ok(h)
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FullRecord {
    pub times: Vec<f64>,
    /// `⟨σ^{rr}_j⟩`
    pub pop_r: Vec<Vec<f64>>,
    /// `⟨σ^{ee}_j⟩`
    pub pop_e: Vec<Vec<f64>>,
    pub trace_residual: Vec<f64>,
    #[serde(skip)]
    pub states: Option<Vec<ComplexMatrix>>,
}

fn level_populations(rho: &ComplexMatrix, n: usize, level: usize) -> Vec<f64> {
    let mut out = vec![0.0; n];
    for (s, z) in rho.diagonal().iter().enumerate() {
        for (j, o) in out.iter_mut().enumerate() {
            if digit(s, j, n) == level {
                *o += z.re;
            }
        }
    }
    out
}

/// Embeds a two-level bitstring as `g → 0`, `r → 1`.
pub fn embed_bitstring(bits: &Bitstring) -> ComplexMatrix {
    let n = bits.len();
    let idx = bits.0.iter().fold(0usize, |acc, &b| acc * 3 + if b { R } else { G });
    ComplexMatrix::basis_projector(3usize.pow(n as u32), idx)
}

/// Integrates the time-dependent three-level master equation over
/// `[0, t_max]`, sampling every `sample_interval`. The step size is capped
/// at `0.1/(2V)` to resolve the fastest rotating phase.
pub fn propagate_full(
    rho0: &ComplexMatrix,
    p: &ThreeLevelParams,
    t_max: f64,
    sample_interval: f64,
    opts: &IntegratorOptions,
    store_states: bool,
) -> Result<FullRecord> {
    let d = decompose(p)?;
    if rho0.rows() != p.dim() || !rho0.is_square() {
        return Err(Error::DimensionMismatch(format!("initial state {}x{}, model needs {}", rho0.rows(), rho0.cols(), p.dim())));
    }
    check_density_common(rho0, 1e-10)?;
    if !(t_max >= 0.0) || !(sample_interval > 0.0) {
        return Err(Error::InvalidOptions(format!("bad time grid t_max = {t_max}, dt = {sample_interval}")));
    }
    let static_part = Lindbladian::new(&d.h0, &d.jumps)?;
    let mut opts = *opts;
    if p.v != 0.0 {
        opts.max_step = opts.max_step.min(0.1 / (2.0 * p.v.abs()));
    }
    let v = p.v;
    let osc = &d.oscillating;
    let rhs = |t: f64, y: &ComplexMatrix, dy: &mut ComplexMatrix| {
        static_part.apply_hermitian_with(y, dy, |y, x| {
            for (k, a, ad) in osc {
                let c = C64::from_polar(1.0, k * v * t);
                let mi = C64::new(0.0, -1.0);
                // −i(cA + c̄A†)ρ
                a.left_mul_acc(y, mi * c, x);
                ad.left_mul_acc(y, mi * c.conj(), x);
            }
        });
    };
    let mut rec = FullRecord::default();
    let n = p.n_sites;
    let mut push = |t: f64, rho: &ComplexMatrix| {
        rec.times.push(t);
        rec.pop_r.push(level_populations(rho, n, R));
        rec.pop_e.push(level_populations(rho, n, E));
        rec.trace_residual.push((rho.trace().re - 1.0).abs());
        if store_states {
            rec.states.get_or_insert_with(Vec::new).push(rho.clone());
        }
    };
    let mut integ = Integrator::new(rhs, 0.0, t_max, rho0, opts)?;
    for t in time_grid(0.0, t_max, sample_interval) {
        let rho = integ.advance_to(t)?;
        push(t, &rho);
    }
    Ok(rec)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Deviation {
    pub v: f64,
    /// `max_{t,j} |⟨σ^{rr}_j⟩ − ⟨(1+Z_j)/2⟩|`
    pub max: f64,
    /// Root mean square over all times and sites.
    pub rms: f64,
    /// Largest deviation per site.
    pub per_site_max: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub params: ThreeLevelParams,
    pub initial: String,
    pub t_max: f64,
    pub validity: Validity,
    /// Deviations at `V`, `2V`, `4V`.
    pub deviations: Vec<Deviation>,
    /// Maximum deviation strictly decreases with `V`.
    pub improves_with_v: bool,
}

/// Deviation of the full model from its effective counterpart at one `V`.
pub fn deviation(p: &ThreeLevelParams, init: &Bitstring, t_max: f64, sample_interval: f64, opts: &IntegratorOptions) -> Result<Deviation> {
    if init.len() != p.n_sites {
        return Err(Error::InvalidState(format!("initial bitstring has {} sites, model has {}", init.len(), p.n_sites)));
    }
    let full = propagate_full(&embed_bitstring(init), p, t_max, sample_interval, opts, false)?;
    let lattice = Lattice::new(p.n_sites, p.boundary)?;
    let spec = EvolutionSpec { integrator: *opts, ..EvolutionSpec::continuous(p.effective_rules()?, t_max, sample_interval) };
    let eff = propagate(&basis_density(init), &lattice, &spec)?;
    let mut per_site_max = vec![0.0f64; p.n_sites];
    let mut sq = 0.0;
    let mut count = 0usize;
    for (rf, ze) in full.pop_r.iter().zip(&eff.magnetization) {
        for j in 0..p.n_sites {
            let d = (rf[j] - (1.0 + ze[j]) / 2.0).abs();
            per_site_max[j] = per_site_max[j].max(d);
            sq += d * d;
            count += 1;
        }
    }
    let max = per_site_max.iter().copied().fold(0.0, f64::max);
    Ok(Deviation { v: p.v, max, rms: (sq / count.max(1) as f64).sqrt(), per_site_max })
}

/// Runs [`deviation`] at `V`, `2V` and `4V` and reports the trend.
pub fn compare_effective(p: &ThreeLevelParams, init: &Bitstring, t_max: f64, sample_interval: f64, opts: &IntegratorOptions) -> Result<ComparisonReport> {
    let deviations = [1.0, 2.0, 4.0]
        .iter()
        .map(|f| deviation(&p.with_v(p.v * f), init, t_max, sample_interval, opts))
        .collect::<Result<Vec<_>>>()?;
    let improves_with_v = deviations.windows(2).all(|w| w[1].max < w[0].max);
    Ok(ComparisonReport {
        params: p.clone(),
        initial: init.to_string(),
        t_max,
        validity: p.validity(),
        deviations,
        improves_with_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evolve::build_superoperator;
    use crate::numerics::expm;
    use std::f64::consts::PI;

    fn params(n: usize, theta: [f64; 3], phi: [f64; 3], v: f64, gamma: f64) -> ThreeLevelParams {
        ThreeLevelParams { n_sites: n, v, gamma_big: gamma, theta, phi, boundary: Boundary::Open }
    }

    #[test]
    fn single_site_hamiltonian() {
        let p = params(1, [0.8, 0.0, 0.0], [0.0; 3], 10.0, 0.0);
        for t in [0.0, 0.37, 5.0] {
            let h = hamiltonian_at(t, &p).unwrap();
            let mut expected = ComplexMatrix::zeros(3, 3);
            expected[(G, R)] = C64::new(0.4, 0.0);
            expected[(R, G)] = C64::new(0.4, 0.0);
            assert!(h.max_abs_diff(&expected) < 1e-15);
        }
    }

    #[test]
    fn interaction_only() {
        let p = params(2, [0.0; 3], [0.0; 3], 3.0, 1.0);
        let h = hamiltonian_at(1.0, &p).unwrap();
        let rr = R * 3 + R;
        let mut expected = ComplexMatrix::zeros(9, 9);
        expected[(rr, rr)] = C64::new(3.0, 0.0);
        assert_eq!(h, expected);
    }

    #[test]
    fn periodic_ring_counts_each_bond_once() {
        let p = ThreeLevelParams { boundary: Boundary::Periodic, ..params(3, [0.0; 3], [0.0; 3], 1.0, 0.0) };
        let h = hamiltonian_at(0.0, &p).unwrap();
        let all_r = (R * 3 + R) * 3 + R;
        assert_eq!(h[(all_r, all_r)].re, 3.0);
        let rrg = (R * 3 + R) * 3 + G;
        assert_eq!(h[(rrg, rrg)].re, 1.0);
    }

    #[test]
    fn hermitian_at_random_times() {
        let p = params(3, [0.3, 1.1, 0.2], [0.5, 0.1, 0.9], 7.0, 2.0);
        let mut t = 0.1;
        for _ in 0..100 {
            t = (t * 7.3 + 0.91) % 13.0;
            assert!(hamiltonian_at(t, &p).unwrap().hermiticity_error() < 1e-14);
        }
    }

    #[test]
    fn rabi_oscillation() {
        let theta = 1.3;
        let p = params(1, [theta, 0.0, 0.0], [0.0; 3], 0.0, 0.0);
        let rec = propagate_full(&embed_bitstring(&"0".parse().unwrap()), &p, 4.0, 0.1, &Default::default(), false).unwrap();
        for (t, pr) in rec.times.iter().zip(&rec.pop_r) {
            assert!((pr[0] - (theta * t / 2.0).sin().powi(2)).abs() < 1e-6);
        }
    }

    #[test]
    fn adiabatic_depumping_rate() {
        let (phi, gamma) = (1.0, 20.0);
        let p = params(1, [0.0; 3], [phi, 0.0, 0.0], 0.0, gamma);
        let rec = propagate_full(&embed_bitstring(&"1".parse().unwrap()), &p, 20.0, 0.5, &Default::default(), false).unwrap();
        let rate = phi * phi / gamma;
        for (t, pr) in rec.times.iter().zip(&rec.pop_r).skip(1) {
            let expected = (-rate * t).exp();
            assert!((pr[0] / expected - 1.0).abs() < 0.1, "t = {t}: {} vs {expected}", pr[0]);
        }
    }

    #[test]
    fn blockade_suppresses_double_excitation() {
        let p = ThreeLevelParams { theta: [PI, 0.0, 0.0], ..ThreeLevelParams::benchmark(2) };
        let rec = propagate_full(&embed_bitstring(&"00".parse().unwrap()), &p, 2.0, 0.05, &Default::default(), true).unwrap();
        let rr = R * 3 + R;
        let bound = (PI / p.v).powi(2) * 10.0;
        for rho in rec.states.unwrap() {
            assert!(rho[(rr, rr)].re < bound);
        }
    }

    #[test]
    fn static_drives_match_superoperator_exponential() {
        let p = params(2, [0.7, 0.0, 0.0], [0.4, 0.0, 0.0], 2.5, 1.5);
        let d = decompose(&p).unwrap();
        assert!(d.oscillating.is_empty());
        let rho0 = embed_bitstring(&"01".parse().unwrap());
        let rec = propagate_full(&rho0, &p, 1.0, 1.0, &Default::default(), true).unwrap();
        let prop = expm(&build_superoperator(&d.h0, &d.jumps).unwrap()).unwrap();
        let exact = ComplexMatrix::unvectorize(&prop.matvec(&rho0.vectorize()), 9, 9).unwrap();
        assert!(rec.states.unwrap()[1].max_abs_diff(&exact) < 1e-7);
    }

    #[test]
    fn two_site_runs_preserve_trace() {
        let p = params(2, [0.9, 0.4, 0.3], [0.6, 0.2, 0.8], 20.0, 6.0);
        let rec = propagate_full(&embed_bitstring(&"10".parse().unwrap()), &p, 1.0, 0.1, &Default::default(), true).unwrap();
        assert!(rec.trace_residual.iter().all(|&r| r < 1e-8));
        for rho in rec.states.unwrap() {
            assert!(rho.hermiticity_error() < 1e-8);
        }
    }

    #[test]
    fn zero_drives_give_zero_deviation() {
        let p = ThreeLevelParams::benchmark(3);
        let d = deviation(&p, &"010".parse().unwrap(), 1.0, 0.1, &Default::default()).unwrap();
        assert!(d.max < 1e-12);
    }

    #[test]
    fn validity_flags() {
        let mut p = ThreeLevelParams::benchmark(3);
        p.theta[1] = PI;
        assert!(p.validity().ok());
        p.gamma_big = 1.0;
        assert!(!p.validity().decay_exceeds_drives);
        assert!(params(6, [0.0; 3], [0.0; 3], 1.0, 1.0).validate().is_err());
    }
}
