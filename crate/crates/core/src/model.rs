//! Effective two-level model: rule sets, lattices and the conditional
//! (PXP-type) Hamiltonian and jump operators built from them.
//!
//! Conventions used throughout the crate:
//!
//! * `|0⟩` is the ground state, `|1⟩` the Rydberg state, and the
//!   magnetization operator satisfies `Z|1⟩ = +|1⟩`, `Z|0⟩ = −|0⟩` (note the
//!   sign: excited sites are "bright").
//! * Site 1 is the most significant bit of a computational-basis index, and
//!   bitstrings read left to right as sites `1..N`.
//! * Sites are 1-based in user-facing text and 0-based in code. Sublattice
//!   `A` holds the odd 1-based positions, so a 9-site chain reads `ABABABABA`.

use std::f64::consts::PI;
use std::fmt;
use std::str::FromStr;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::SparseMatrix;

/// Largest chain supported by the dense effective-model evolution.
pub const MAX_SITES: usize = 12;

/// Ratio read as "much greater than" in the `V ≫ Γ` validity flag.
pub const DOMINANCE_RATIO: f64 = 5.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Boundary {
    /// Two fictitious neighbors frozen in `|0⟩` at the chain ends.
    Open,
    Periodic,
}

impl FromStr for Boundary {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "open" => Ok(Self::Open),
            "periodic" => Ok(Self::Periodic),
            other => Err(Error::Parse(format!("unknown boundary '{other}' (expected open|periodic)"))),
        }
    }
}

impl fmt::Display for Boundary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Open => "open",
            Self::Periodic => "periodic",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Sublattice {
    A,
    B,
}

impl Sublattice {
    pub fn other(self) -> Self {
        match self {
            Self::A => Self::B,
            Self::B => Self::A,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Lattice {
    n_sites: usize,
    boundary: Boundary,
}

impl Lattice {
    pub fn new(n_sites: usize, boundary: Boundary) -> Result<Self> {
        if n_sites == 0 {
            return Err(Error::InvalidLattice("chain needs at least one site".into()));
        }
        if n_sites > MAX_SITES {
            return Err(Error::InvalidLattice(format!("{n_sites} sites exceeds the limit of {MAX_SITES}")));
        }
        if boundary == Boundary::Periodic && n_sites < 3 {
            return Err(Error::InvalidLattice("periodic chains need at least 3 sites".into()));
        }
        Ok(Self { n_sites, boundary })
    }

    pub fn open(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Open)
    }

    pub fn periodic(n_sites: usize) -> Result<Self> {
        Self::new(n_sites, Boundary::Periodic)
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    /// Hilbert-space dimension `2^N`.
    pub fn dim(&self) -> usize {
        1 << self.n_sites
    }

    /// Bit of the basis index that stores site `j` (0-based).
    pub fn site_bit(&self, j: usize) -> usize {
        1 << (self.n_sites - 1 - j)
    }

    pub fn is_excited(&self, state: usize, j: usize) -> bool {
        state & self.site_bit(j) != 0
    }

    pub fn sublattice(&self, j: usize) -> Sublattice {
        if j % 2 == 0 {
            Sublattice::A
        } else {
            Sublattice::B
        }
    }

    /// Partition string such as `ABABABABA`.
    pub fn partition_string(&self) -> String {
        (0..self.n_sites)
            .map(|j| match self.sublattice(j) {
                Sublattice::A => 'A',
                Sublattice::B => 'B',
            })
            .collect()
    }

    /// Left and right neighbors of site `j`; `None` is a fictitious `|0⟩` site.
    pub fn neighbors(&self, j: usize) -> (Option<usize>, Option<usize>) {
        let n = self.n_sites;
        match self.boundary {
            Boundary::Periodic => (Some((j + n - 1) % n), Some((j + 1) % n)),
            Boundary::Open => ((j > 0).then(|| j - 1), (j + 1 < n).then_some(j + 1)),
        }
    }

    /// Number of excited neighbors `k = α + β` of site `j` in basis state `state`.
    pub fn excited_neighbors(&self, state: usize, j: usize) -> usize {
        let (l, r) = self.neighbors(j);
        [l, r].into_iter().flatten().filter(|&s| self.is_excited(state, s)).count()
    }

    /// Mask selecting one sublattice.
    pub fn sublattice_mask(&self, sub: Sublattice) -> Vec<bool> {
        (0..self.n_sites).map(|j| self.sublattice(j) == sub).collect()
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Units {
    /// Values are multiples of π.
    #[default]
    Pi,
    /// Values are radians (θ) and rates (φ̃) in model time units.
    Raw,
}

impl FromStr for Units {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pi" => Ok(Self::Pi),
            "raw" => Ok(Self::Raw),
            other => Err(Error::Parse(format!("unknown units '{other}' (expected pi|raw)"))),
        }
    }
}

impl Units {
    fn factor(self) -> f64 {
        match self {
            Self::Pi => PI,
            Self::Raw => 1.0,
        }
    }
}

/// Conditional couplings `[θ⁰, θ¹, θ², φ̃⁰, φ̃¹, φ̃²]`, Rydberg decay `γ` and an
/// optional mask of the sites the drives act on.
///
/// `θᵏ` rotates a site whose two neighbors hold exactly `k` excitations;
/// `φ̃ᵏ` is the rate of the matching conditional depumping `|1⟩ → |0⟩`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleSet {
    pub theta: [f64; 3],
    pub phi_tilde: [f64; 3],
    #[serde(default)]
    pub gamma: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_mask: Option<Vec<bool>>,
}

impl RuleSet {
    pub fn new(theta: [f64; 3], phi_tilde: [f64; 3]) -> Result<Self> {
        let r = Self { theta, phi_tilde, gamma: 0.0, site_mask: None };
        r.validate()?;
        Ok(r)
    }

    pub fn zero() -> Self {
        Self { theta: [0.0; 3], phi_tilde: [0.0; 3], gamma: 0.0, site_mask: None }
    }

    /// Builds from the six-entry rule vector `[θ⁰,θ¹,θ²,φ̃⁰,φ̃¹,φ̃²]`.
    pub fn from_vector(v: &[f64], units: Units) -> Result<Self> {
        if v.len() != 6 {
            return Err(Error::InvalidRule(format!("rule vector needs 6 entries, got {}", v.len())));
        }
        let f = units.factor();
        Self::new([v[0] * f, v[1] * f, v[2] * f], [v[3] * f, v[4] * f, v[5] * f])
    }

    pub fn to_vector(&self) -> [f64; 6] {
        let [a, b, c] = self.theta;
        let [d, e, f] = self.phi_tilde;
        [a, b, c, d, e, f]
    }

    pub fn with_gamma(mut self, gamma: f64) -> Result<Self> {
        self.gamma = gamma;
        self.validate()?;
        Ok(self)
    }

    pub fn with_mask(mut self, mask: Vec<bool>) -> Self {
        self.site_mask = Some(mask);
        self
    }

    pub fn restricted_to(self, lattice: &Lattice, sub: Sublattice) -> Self {
        self.with_mask(lattice.sublattice_mask(sub))
    }

    pub fn validate(&self) -> Result<()> {
        if self.theta.iter().chain(&self.phi_tilde).chain([&self.gamma]).any(|v| !v.is_finite()) {
            return Err(Error::InvalidRule("non-finite coupling".into()));
        }
        if self.phi_tilde.iter().any(|&p| p < 0.0) {
            return Err(Error::InvalidRule(format!("dissipative rates must be nonnegative: {:?}", self.phi_tilde)));
        }
        if self.gamma < 0.0 {
            return Err(Error::InvalidRule(format!("decay rate must be nonnegative: {}", self.gamma)));
        }
        Ok(())
    }

    fn validate_for(&self, lattice: &Lattice) -> Result<()> {
        self.validate()?;
        if let Some(mask) = &self.site_mask {
            if mask.len() != lattice.n_sites() {
                return Err(Error::InvalidRule(format!(
                    "site mask has {} entries for a {}-site chain",
                    mask.len(),
                    lattice.n_sites()
                )));
            }
        }
        Ok(())
    }

    pub fn is_active(&self, j: usize) -> bool {
        self.site_mask.as_ref().map_or(true, |m| m[j])
    }

    /// No dissipation at all (`φ̃ = 0`, `γ = 0`).
    pub fn is_unitary(&self) -> bool {
        self.phi_tilde.iter().all(|&p| p == 0.0) && self.gamma == 0.0
    }

    /// `θᵏ ∈ {0, π}` and `φ̃ᵏ ∈ {0, 2π}`.
    pub fn is_digital(&self) -> bool {
        const EPS: f64 = 1e-12;
        self.theta.iter().all(|&t| t.abs() < EPS || (t - PI).abs() < EPS)
            && self.phi_tilde.iter().all(|&p| p.abs() < EPS || (p - 2.0 * PI).abs() < EPS)
    }

    pub fn is_zero(&self) -> bool {
        self.to_vector().iter().all(|&v| v == 0.0) && self.gamma == 0.0
    }

    /// All 64 digital rule vectors in units of π, in binary order
    /// (`θ⁰` is the most significant entry).
    pub fn digital_catalog() -> Vec<[f64; 6]> {
        (0..64u32)
            .map(|code| {
                let bit = |i: u32| (code >> (5 - i)) & 1 == 1;
                let mut v = [0.0; 6];
                for i in 0..3 {
                    v[i as usize] = if bit(i) { 1.0 } else { 0.0 };
                    v[3 + i as usize] = if bit(3 + i) { 2.0 } else { 0.0 };
                }
                v
            })
            .collect()
    }
}

/// Rule manifest record: `{"theta":[…],"phi":[…],"units":"pi"|"raw","gamma":0.0}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RuleManifest {
    pub theta: Vec<f64>,
    pub phi: Vec<f64>,
    #[serde(default)]
    pub units: Units,
    #[serde(default)]
    pub gamma: f64,
}

impl RuleManifest {
    pub fn to_rules(&self) -> Result<RuleSet> {
        if self.theta.len() != 3 || self.phi.len() != 3 {
            return Err(Error::InvalidRule(format!(
                "manifest needs 3 theta and 3 phi entries, got {} and {}",
                self.theta.len(),
                self.phi.len()
            )));
        }
        let v: Vec<f64> = self.theta.iter().chain(&self.phi).copied().collect();
        RuleSet::from_vector(&v, self.units)?.with_gamma(self.gamma)
    }

    pub fn parse(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Parse(format!("rule manifest: {e}")))
    }
}

/// Computational-basis configuration, site 1 first.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Bitstring(pub Vec<bool>);

impl Bitstring {
    pub fn zeros(n: usize) -> Self {
        Self(vec![false; n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Basis index with site 1 as the most significant bit.
    pub fn to_index(&self) -> usize {
        self.0.iter().fold(0, |acc, &b| (acc << 1) | b as usize)
    }

    pub fn from_index(index: usize, n: usize) -> Self {
        Self((0..n).map(|j| index >> (n - 1 - j) & 1 == 1).collect())
    }

    pub fn count_ones(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl FromStr for Bitstring {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        s.chars()
            .map(|c| match c {
                '0' => Ok(false),
                '1' => Ok(true),
                other => Err(Error::Parse(format!("invalid character '{other}' in bitstring '{s}'"))),
            })
            .collect::<Result<Vec<_>>>()
            .map(Self)
    }
}

impl fmt::Display for Bitstring {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}

/// Effective Hamiltonian `½ Σ_j Σ_{α,β} θ^{α+β} P^α_{j−1} X_j P^β_{j+1}` over the
/// active sites.
pub fn build_hamiltonian(rules: &RuleSet, lattice: &Lattice) -> Result<SparseMatrix> {
    rules.validate_for(lattice)?;
    let dim = lattice.dim();
    let mut trip = Vec::new();
    for j in (0..lattice.n_sites()).filter(|&j| rules.is_active(j)) {
        let bit = lattice.site_bit(j);
        for s in 0..dim {
            let amp = 0.5 * rules.theta[lattice.excited_neighbors(s, j)];
            if amp != 0.0 {
                trip.push((s ^ bit, s, C64::new(amp, 0.0)));
            }
        }
    }
    Ok(SparseMatrix::from_triplets(dim, dim, trip))
}

/// One conditional depumping channel `√φ̃ᵏ P^α_{j−1} σ⁻_j P^β_{j+1}` or a plain
/// decay channel `√γ σ⁻_j`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ChannelKind {
    Conditional { site: usize, alpha: Option<bool>, beta: Option<bool> },
    Decay { site: usize },
}

/// Lindblad channels of the effective model, one operator per
/// `(site, α, β)` with nonzero rate, plus `√γ σ⁻_j` on every site when
/// `γ > 0`. Decay is not restricted by the site mask.
pub fn build_jump_operators(rules: &RuleSet, lattice: &Lattice) -> Result<Vec<SparseMatrix>> {
    Ok(build_labeled_jump_operators(rules, lattice)?.into_iter().map(|(_, op)| op).collect())
}

pub fn build_labeled_jump_operators(rules: &RuleSet, lattice: &Lattice) -> Result<Vec<(ChannelKind, SparseMatrix)>> {
    rules.validate_for(lattice)?;
    let dim = lattice.dim();
    let mut out = Vec::new();
    for j in 0..lattice.n_sites() {
        let bit = lattice.site_bit(j);
        let (left, right) = lattice.neighbors(j);
        if rules.is_active(j) {
            // A fictitious neighbor only takes the |0⟩ branch and carries no projector.
            let branches = |n: Option<usize>| -> Vec<Option<bool>> {
                match n {
                    Some(_) => vec![Some(false), Some(true)],
                    None => vec![None],
                }
            };
            for alpha in branches(left) {
                for beta in branches(right) {
                    let k = alpha.unwrap_or(false) as usize + beta.unwrap_or(false) as usize;
                    let rate = rules.phi_tilde[k];
                    if rate <= 0.0 {
                        continue;
                    }
                    let amp = C64::new(rate.sqrt(), 0.0);
                    let matches = |s: usize, n: Option<usize>, want: Option<bool>| match (n, want) {
                        (Some(site), Some(w)) => lattice.is_excited(s, site) == w,
                        _ => true,
                    };
                    let trip = (0..dim)
                        .filter(|&s| s & bit != 0 && matches(s, left, alpha) && matches(s, right, beta))
                        .map(|s| (s ^ bit, s, amp))
                        .collect();
                    out.push((
                        ChannelKind::Conditional { site: j, alpha, beta },
                        SparseMatrix::from_triplets(dim, dim, trip),
                    ));
                }
            }
        }
        if rules.gamma > 0.0 {
            let amp = C64::new(rules.gamma.sqrt(), 0.0);
            let trip = (0..dim).filter(|&s| s & bit != 0).map(|s| (s ^ bit, s, amp)).collect();
            out.push((ChannelKind::Decay { site: j }, SparseMatrix::from_triplets(dim, dim, trip)));
        }
    }
    Ok(out)
}

/// Classical image of one block update under a digital unitary rule: every
/// site of `sublattice` flips iff `θᵏ = π`, with `k` its excited-neighbor
/// count in the frozen complementary sublattice. Requires a bipartite chain,
/// so that no two sites of one sublattice are neighbors.
pub fn classical_rule_oracle(
    rules: &RuleSet,
    bits: &Bitstring,
    sublattice: Sublattice,
    lattice: &Lattice,
) -> Result<Bitstring> {
    if !rules.is_digital() || !rules.is_unitary() {
        return Err(Error::InvalidRule("classical oracle needs a digital unitary rule".into()));
    }
    if bits.len() != lattice.n_sites() {
        return Err(Error::InvalidState(format!(
            "bitstring of length {} on a {}-site chain",
            bits.len(),
            lattice.n_sites()
        )));
    }
    if lattice.boundary() == Boundary::Periodic && lattice.n_sites() % 2 == 1 {
        return Err(Error::InvalidLattice("classical oracle needs an even ring or an open chain".into()));
    }
    let state = bits.to_index();
    let mut next = bits.clone();
    for j in (0..lattice.n_sites()).filter(|&j| lattice.sublattice(j) == sublattice) {
        let k = lattice.excited_neighbors(state, j);
        if (rules.theta[k] - PI).abs() < 1e-12 {
            next.0[j] = !next.0[j];
        }
    }
    Ok(next)
}

/// Physical drive and decay parameters, all as angular frequencies (rad/s).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhysicalParams {
    pub v: f64,
    pub gamma_big: f64,
    pub theta_phys: f64,
    pub phi_phys: f64,
    pub gamma_phys: f64,
    /// Informational; enters only through `v`.
    pub lattice_spacing: Option<f64>,
}

impl PhysicalParams {
    /// Convenience constructor from ordinary frequencies `x/2π` in Hz.
    pub fn from_hz(v: f64, gamma_big: f64, theta: f64, phi: f64, gamma: f64) -> Self {
        let w = 2.0 * PI;
        Self {
            v: w * v,
            gamma_big: w * gamma_big,
            theta_phys: w * theta,
            phi_phys: w * phi,
            gamma_phys: w * gamma,
            lattice_spacing: None,
        }
    }
}

/// Dimensionless counterparts of [`PhysicalParams`] in units of the
/// characteristic time `τ = π/θ`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelScaling {
    /// Seconds per model time unit.
    pub tau: f64,
    pub v: f64,
    pub gamma_big: f64,
    pub theta: f64,
    pub phi: f64,
    pub gamma: f64,
    /// `V ≥ DOMINANCE_RATIO · Γ`
    pub interaction_dominates: bool,
    /// `Γ > θ` and `Γ > φ`
    pub decay_exceeds_drives: bool,
}

impl ModelScaling {
    pub fn regime_valid(&self) -> bool {
        self.interaction_dominates && self.decay_exceeds_drives
    }
}

pub fn physical_to_model(p: &PhysicalParams) -> Result<ModelScaling> {
    if !(p.theta_phys > 0.0) {
        return Err(Error::InvalidRule(format!("theta_phys must be positive, got {}", p.theta_phys)));
    }
    let tau = PI / p.theta_phys;
    Ok(ModelScaling {
        tau,
        v: p.v * tau,
        gamma_big: p.gamma_big * tau,
        theta: p.theta_phys * tau,
        phi: p.phi_phys * tau,
        gamma: p.gamma_phys * tau,
        interaction_dominates: p.v >= DOMINANCE_RATIO * p.gamma_big * (1.0 - 1e-12),
        decay_exceeds_drives: p.gamma_big > p.theta_phys && p.gamma_big > p.phi_phys,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{kron_all, pauli, ComplexMatrix};

    fn c(v: f64) -> C64 {
        C64::new(v, 0.0)
    }

    /// Independent route: expand every projector product as explicit
    /// Kronecker products over the chain.
    fn hamiltonian_by_projectors(rules: &RuleSet, lattice: &Lattice) -> ComplexMatrix {
        let n = lattice.n_sites();
        let dim = lattice.dim();
        let mut h = ComplexMatrix::zeros(dim, dim);
        for j in 0..n {
            let (l, r) = lattice.neighbors(j);
            for alpha in 0..2usize {
                for beta in 0..2usize {
                    if (l.is_none() && alpha == 1) || (r.is_none() && beta == 1) {
                        continue;
                    }
                    let theta = rules.theta[alpha + beta];
                    if theta == 0.0 {
                        continue;
                    }
                    let mut factors: Vec<ComplexMatrix> = vec![pauli::identity(); n];
                    let proj = |a: usize| if a == 1 { pauli::p1() } else { pauli::p0() };
                    if let Some(l) = l {
                        factors[l] = proj(alpha);
                    }
                    if let Some(r) = r {
                        factors[r] = proj(beta).matmul(&factors[r]);
                    }
                    factors[j] = pauli::x();
                    h.axpy(c(theta / 2.0), &kron_all(&factors));
                }
            }
        }
        h
    }

    #[test]
    fn single_site_is_plain_rabi_drive() {
        let l = Lattice::open(1).unwrap();
        let h = build_hamiltonian(&RuleSet::new([0.7, 0.3, 0.2], [0.0; 3]).unwrap(), &l).unwrap();
        assert!(h.to_dense().max_abs_diff(&pauli::x().scale_real(0.35)) < 1e-15);
    }

    #[test]
    fn two_site_blockade_by_hand() {
        let l = Lattice::open(2).unwrap();
        let h = build_hamiltonian(&RuleSet::new([PI, 0.0, 0.0], [0.0; 3]).unwrap(), &l).unwrap();
        let expected = (&pauli::x().kron(&pauli::p0()) + &pauli::p0().kron(&pauli::x())).scale_real(PI / 2.0);
        assert!(h.to_dense().max_abs_diff(&expected) < 1e-15);
    }

    #[test]
    fn three_site_facilitation_elements() {
        let l = Lattice::open(3).unwrap();
        let h = build_hamiltonian(&RuleSet::new([0.0, PI, 0.0], [0.0; 3]).unwrap(), &l).unwrap().to_dense();
        let idx = |s: &str| s.parse::<Bitstring>().unwrap().to_index();
        assert!((h[(idx("110"), idx("010"))] - c(PI / 2.0)).norm() < 1e-15);
        assert!((h[(idx("011"), idx("010"))] - c(PI / 2.0)).norm() < 1e-15);
        // |000⟩ is not coupled to anything.
        assert!((0..8).all(|r| h[(r, idx("000"))] == c(0.0)));
    }

    #[test]
    fn hamiltonian_matches_projector_expansion() {
        let rules = RuleSet::new([0.4, -1.3, 2.1], [0.0; 3]).unwrap();
        for lattice in [Lattice::open(4).unwrap(), Lattice::periodic(4).unwrap(), Lattice::open(5).unwrap()] {
            let h = build_hamiltonian(&rules, &lattice).unwrap().to_dense();
            assert!(h.max_abs_diff(&hamiltonian_by_projectors(&rules, &lattice)) < 1e-14);
            assert!(h.hermiticity_error() < 1e-14);
        }
    }

    #[test]
    fn uniform_theta_is_unconditional_drive() {
        for lattice in [Lattice::open(4).unwrap(), Lattice::periodic(5).unwrap()] {
            let theta = 0.9;
            let h = build_hamiltonian(&RuleSet::new([theta; 3], [0.0; 3]).unwrap(), &lattice).unwrap().to_dense();
            let n = lattice.n_sites();
            let mut expected = ComplexMatrix::zeros(lattice.dim(), lattice.dim());
            for j in 0..n {
                let mut f = vec![pauli::identity(); n];
                f[j] = pauli::x();
                expected.axpy(c(theta / 2.0), &kron_all(&f));
            }
            assert!(h.max_abs_diff(&expected) < 1e-14);
        }
    }

    #[test]
    fn blockade_annihilates_fully_surrounded_states() {
        let lattice = Lattice::periodic(5).unwrap();
        let h = build_hamiltonian(&RuleSet::new([1.1, 0.0, 0.0], [0.0; 3]).unwrap(), &lattice).unwrap();
        for s in 0..lattice.dim() {
            if (0..5).all(|j| lattice.excited_neighbors(s, j) >= 1) {
                assert!(h.triplets().all(|(_, col, _)| col != s), "state {s:05b}");
            }
        }
    }

    #[test]
    fn site_mask_restricts_drive() {
        let lattice = Lattice::open(3).unwrap();
        let rules = RuleSet::new([1.0, 0.0, 0.0], [1.0, 0.0, 0.0]).unwrap().restricted_to(&lattice, Sublattice::B);
        let h = build_hamiltonian(&rules, &lattice).unwrap();
        // Only the middle site flips.
        assert!(h.triplets().all(|(r, c, _)| r ^ c == lattice.site_bit(1)));
        let jumps = build_jump_operators(&rules, &lattice).unwrap();
        assert!(jumps.iter().flat_map(|j| j.triplets().collect::<Vec<_>>()).all(|(r, c, _)| r ^ c == 2));
        let bad = RuleSet::zero().with_mask(vec![true; 2]);
        assert!(build_hamiltonian(&bad, &lattice).is_err());
    }

    #[test]
    fn single_site_jump() {
        let l = Lattice::open(1).unwrap();
        let jumps = build_jump_operators(&RuleSet::new([0.0; 3], [0.5, 0.0, 0.0]).unwrap(), &l).unwrap();
        assert_eq!(jumps.len(), 1);
        assert!(jumps[0].to_dense().max_abs_diff(&pauli::lower().scale_real(0.5f64.sqrt())) < 1e-15);
    }

    #[test]
    fn two_site_conditional_jumps() {
        let l = Lattice::open(2).unwrap();
        let jumps = build_jump_operators(&RuleSet::new([0.0; 3], [0.0, 2.0 * PI, 0.0]).unwrap(), &l).unwrap();
        assert_eq!(jumps.len(), 2);
        let s = (2.0 * PI).sqrt();
        let e11 = [c(0.0), c(0.0), c(0.0), c(1.0)];
        let images: Vec<Vec<C64>> = jumps.iter().map(|j| j.matvec(&e11)).collect();
        assert!(images.contains(&vec![c(0.0), c(s), c(0.0), c(0.0)])); // √2π |01⟩
        assert!(images.contains(&vec![c(0.0), c(0.0), c(s), c(0.0)])); // √2π |10⟩
    }

    #[test]
    fn decay_channels_ignore_mask() {
        let l = Lattice::open(3).unwrap();
        let rules = RuleSet::zero().with_gamma(0.01).unwrap().restricted_to(&l, Sublattice::A);
        let labeled = build_labeled_jump_operators(&rules, &l).unwrap();
        assert_eq!(labeled.len(), 3);
        assert!(labeled.iter().all(|(k, _)| matches!(k, ChannelKind::Decay { .. })));
    }

    #[test]
    fn antiferromagnet_is_dark_for_showcase_rule() {
        let lattice = Lattice::open(9).unwrap();
        let rules = RuleSet::from_vector(&[0.0, 1.0, 0.0, 0.0, 0.0, 2.0], Units::Pi).unwrap();
        let af = "101010101".parse::<Bitstring>().unwrap().to_index();
        let mut psi = vec![c(0.0); lattice.dim()];
        psi[af] = c(1.0);
        let h = build_hamiltonian(&rules, &lattice).unwrap();
        assert!(h.matvec(&psi).iter().all(|z| z.norm() == 0.0));
        for l in build_jump_operators(&rules, &lattice).unwrap() {
            assert!(l.matvec(&psi).iter().all(|z| z.norm() == 0.0));
        }
    }

    #[test]
    fn jumps_lower_excitation_count() {
        let lattice = Lattice::periodic(4).unwrap();
        let rules = RuleSet::new([0.0; 3], [0.3, 0.7, 1.1]).unwrap().with_gamma(0.05).unwrap();
        for l in build_jump_operators(&rules, &lattice).unwrap() {
            for (r, col, _) in l.triplets() {
                assert_eq!((r as u32).count_ones() + 1, (col as u32).count_ones());
            }
        }
    }

    #[test]
    fn oracle_examples() {
        let l3 = Lattice::open(3).unwrap();
        let blockade = RuleSet::from_vector(&[1.0, 0.0, 0.0, 0.0, 0.0, 0.0], Units::Pi).unwrap();
        let facil = RuleSet::from_vector(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0], Units::Pi).unwrap();
        let b = |s: &str| s.parse::<Bitstring>().unwrap();
        assert_eq!(classical_rule_oracle(&blockade, &b("000"), Sublattice::A, &l3).unwrap(), b("101"));
        assert_eq!(classical_rule_oracle(&facil, &b("010"), Sublattice::B, &l3).unwrap(), b("010"));
        let l5 = Lattice::open(5).unwrap();
        assert_eq!(classical_rule_oracle(&facil, &b("01000"), Sublattice::A, &l5).unwrap(), b("11100"));

        let dissipative = RuleSet::from_vector(&[0.0, 1.0, 0.0, 0.0, 0.0, 2.0], Units::Pi).unwrap();
        assert!(classical_rule_oracle(&dissipative, &b("000"), Sublattice::A, &l3).is_err());
        let analog = RuleSet::new([0.5, 0.0, 0.0], [0.0; 3]).unwrap();
        assert!(classical_rule_oracle(&analog, &b("000"), Sublattice::A, &l3).is_err());
        let ring3 = Lattice::new(3, Boundary::Periodic).unwrap();
        assert!(classical_rule_oracle(&blockade, &b("000"), Sublattice::A, &ring3).is_err());
    }

    #[test]
    fn partition_reads_abab() {
        assert_eq!(Lattice::open(9).unwrap().partition_string(), "ABABABABA");
    }

    #[test]
    fn unit_conversion() {
        let p = PhysicalParams::from_hz(50e6, 5e6, 1e6, 2e6, 800.0);
        let s = physical_to_model(&p).unwrap();
        assert!((s.tau - 500e-9).abs() < 1e-20);
        assert!((s.gamma - 2.0 * PI * 800.0 * 5e-7).abs() < 1e-15);
        assert!((s.gamma - 2.513e-3).abs() < 1e-6);
        assert!((s.v - 50.0 * PI).abs() < 1e-9);
        assert!((s.theta - PI).abs() < 1e-15);
        assert!(s.regime_valid());

        // Γ below the drives: flagged, not rejected.
        let weak = PhysicalParams::from_hz(50e6, 0.5e6, 1e6, 2e6, 0.0);
        assert!(!physical_to_model(&weak).unwrap().decay_exceeds_drives);
        let none = PhysicalParams::from_hz(50e6, 5e6, 0.0, 0.0, 0.0);
        assert!(physical_to_model(&none).is_err());
    }

    #[test]
    fn manifest_parsing() {
        let m = RuleManifest::parse(r#"{"theta":[0,1,0],"phi":[0,0,2],"units":"pi","gamma":0.0}"#).unwrap();
        let r = m.to_rules().unwrap();
        assert_eq!(r.to_vector(), [0.0, PI, 0.0, 0.0, 0.0, 2.0 * PI]);
        assert!(r.is_digital() && !r.is_unitary());
        let raw = RuleManifest::parse(r#"{"theta":[0.5,0,0],"phi":[0,0,0],"units":"raw"}"#).unwrap();
        assert_eq!(raw.to_rules().unwrap().theta[0], 0.5);
        assert!(RuleManifest::parse(r#"{"theta":[0,1],"phi":[0,0,2]}"#).unwrap().to_rules().is_err());
        assert!(RuleSet::from_vector(&[0.0, 0.0, 0.0, -1.0, 0.0, 0.0], Units::Raw).is_err());
    }

    #[test]
    fn catalog_is_all_digital() {
        let cat = RuleSet::digital_catalog();
        assert_eq!(cat.len(), 64);
        assert!(cat.iter().all(|v| RuleSet::from_vector(v, Units::Pi).unwrap().is_digital()));
        assert_eq!(cat.iter().filter(|v| v[3..].iter().all(|&p| p == 0.0)).count(), 8);
    }

    #[test]
    fn lattice_validation() {
        assert!(Lattice::open(0).is_err());
        assert!(Lattice::periodic(2).is_err());
        assert!(Lattice::open(MAX_SITES + 1).is_err());
        assert_eq!(Bitstring::from_index(5, 4).to_string(), "0101");
        assert!("01a".parse::<Bitstring>().is_err());
    }
}
