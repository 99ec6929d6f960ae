//! Variational steering of the steady state: a global-best particle swarm
//! over the six rule parameters, scored by steady-state covariance.

use std::f64::consts::PI;
use std::fmt::Write as _;

use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evolve::{propagate, steady_state, EvolutionSpec, Lindbladian, SteadyStateOptions};
use crate::model::{Bitstring, Lattice, RuleSet, Units};
use crate::numerics::{ComplexMatrix, IntegratorOptions};
use crate::observables::{af_ghz_state, covariance, fidelity_af_best, fidelity_ghz_best, fidelity_pure, ghz_state};
use crate::states::basis_density;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Objective {
    Maximize,
    Minimize,
}

impl Objective {
    /// True if `a` is strictly better than `b`.
    pub fn better(self, a: f64, b: f64) -> bool {
        match self {
            Objective::Maximize => a > b,
            Objective::Minimize => a < b,
        }
    }

    fn worst(self) -> f64 {
        match self {
            Objective::Maximize => f64::NEG_INFINITY,
            Objective::Minimize => f64::INFINITY,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmConfig {
    pub population: usize,
    pub iterations: usize,
    pub inertia: f64,
    pub cognitive: f64,
    pub social: f64,
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// Velocity components are clamped to this fraction of the box width.
    pub velocity_clamp: f64,
    pub seed: u64,
    pub objective: Objective,
    pub cost_tag: String,
}

impl SwarmConfig {
    /// Population 10, 100 iterations, `w = 0.7`, `c₁ = c₂ = 1.5`, rule
    /// parameters bounded to `[0, 2π]⁶`.
    pub fn rules_default(seed: u64, objective: Objective) -> Self {
        let cost_tag = match objective {
            Objective::Maximize => "max-nn-cov",
            Objective::Minimize => "min-nn-cov",
        };
        Self {
            population: 10,
            iterations: 100,
            inertia: 0.7,
            cognitive: 1.5,
            social: 1.5,
            lower: vec![0.0; 6],
            upper: vec![2.0 * PI; 6],
            velocity_clamp: 0.5,
            seed,
            objective,
            cost_tag: cost_tag.into(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.population < 2 {
            return Err(Error::InvalidOptions(format!("population must be at least 2, got {}", self.population)));
        }
        if self.iterations == 0 {
            return Err(Error::InvalidOptions("iteration budget must be positive".into()));
        }
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidOptions("bounds must be non-empty and of equal length".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(l, u)| !(l.is_finite() && u.is_finite() && l < u)) {
            return Err(Error::InvalidOptions("every bound needs finite lower < upper".into()));
        }
        let coeffs = [self.inertia, self.cognitive, self.social, self.velocity_clamp];
        if coeffs.iter().any(|c| !c.is_finite() || *c < 0.0) || self.velocity_clamp == 0.0 {
            return Err(Error::InvalidOptions("swarm coefficients must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn dims(&self) -> usize {
        self.lower.len()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SwarmTrace {
    /// `evaluated[i][p]`: cost of particle `p` at iteration `i`.
    pub evaluated: Vec<Vec<f64>>,
    /// `personal_best[i][p]`: best cost seen by particle `p` up to iteration `i`.
    pub personal_best: Vec<Vec<f64>>,
    /// Global best after each iteration.
    pub global_best: Vec<f64>,
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub seed: u64,
    /// ChaCha stream index of each particle under `seed`.
    pub streams: Vec<u64>,
}

impl SwarmTrace {
    /// CSV with header `iteration,individual,cost`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iteration,individual,cost\n");
        for (i, row) in self.evaluated.iter().enumerate() {
            for (p, c) in row.iter().enumerate() {
                let _ = writeln!(out, "{i},{p},{}", fmt_f64(*c));
            }
        }
        out
    }
}

/// Fixed 17-significant-digit rendering.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

struct Particle {
    x: Vec<f64>,
    v: Vec<f64>,
    best_x: Vec<f64>,
    best: f64,
    rng: ChaCha8Rng,
}

fn sanitize(c: f64, objective: Objective) -> f64 {
    if c.is_nan() {
        objective.worst()
    } else {
        c
    }
}

/// Global-best particle swarm. Fitness evaluations of one iteration run in
/// parallel; all random draws happen sequentially per particle, so the
/// trace depends only on `cfg` and `cost`.
pub fn pso_optimize<F>(cost: F, cfg: &SwarmConfig) -> Result<SwarmTrace>
where
    F: Fn(&[f64]) -> f64 + Sync,
{
    cfg.validate()?;
    let d = cfg.dims();
    let vmax: Vec<f64> = cfg.lower.iter().zip(&cfg.upper).map(|(l, u)| cfg.velocity_clamp * (u - l)).collect();
    let streams: Vec<u64> = (0..cfg.population as u64).collect();
    let mut swarm: Vec<Particle> = streams
        .iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            rng.set_stream(s);
            let x: Vec<f64> = (0..d).map(|k| rng.gen_range(cfg.lower[k]..=cfg.upper[k])).collect();
            let v: Vec<f64> = (0..d).map(|k| rng.gen_range(-vmax[k]..=vmax[k])).collect();
            Particle { best_x: x.clone(), x, v, best: cfg.objective.worst(), rng }
        })
        .collect();

    let mut trace = SwarmTrace {
        evaluated: Vec::with_capacity(cfg.iterations),
        personal_best: Vec::with_capacity(cfg.iterations),
        global_best: Vec::with_capacity(cfg.iterations),
        best_params: swarm[0].x.clone(),
        best_cost: cfg.objective.worst(),
        seed: cfg.seed,
        streams,
    };

    for iter in 0..cfg.iterations {
        if iter > 0 {
            for p in &mut swarm {
                for k in 0..d {
                    let r1: f64 = p.rng.gen();
                    let r2: f64 = p.rng.gen();
                    let v = cfg.inertia * p.v[k]
                        + cfg.cognitive * r1 * (p.best_x[k] - p.x[k])
                        + cfg.social * r2 * (trace.best_params[k] - p.x[k]);
                    p.v[k] = v.clamp(-vmax[k], vmax[k]);
                    p.x[k] = (p.x[k] + p.v[k]).clamp(cfg.lower[k], cfg.upper[k]);
                }
            }
        }
        let costs: Vec<f64> = swarm.par_iter().map(|p| sanitize(cost(&p.x), cfg.objective)).collect();
        for (p, &c) in swarm.iter_mut().zip(&costs) {
            if cfg.objective.better(c, p.best) {
                p.best = c;
                p.best_x.clone_from(&p.x);
            }
            if cfg.objective.better(p.best, trace.best_cost) {
                trace.best_cost = p.best;
                trace.best_params.clone_from(&p.best_x);
            }
        }
        trace.evaluated.push(costs);
        trace.personal_best.push(swarm.iter().map(|p| p.best).collect());
        trace.global_best.push(trace.best_cost);
    }
    Ok(trace)
}

/// Fixed inputs of the covariance cost.
#[derive(Clone, Debug)]
pub struct CostContext {
    pub lattice: Lattice,
    pub rho0: ComplexMatrix,
    pub steady: SteadyStateOptions,
    /// Rydberg decay added to every candidate rule set.
    pub gamma: f64,
    pub objective: Objective,
}

impl CostContext {
    /// `N`-site ring from `|0…0⟩` with the optimization budget
    /// (`t_max = 300`, residual `1e−6`).
    pub fn ring(n: usize, objective: Objective) -> Result<Self> {
        let lattice = Lattice::periodic(n)?;
        Ok(Self {
            lattice,
            rho0: basis_density(&Bitstring::zeros(n)),
            steady: SteadyStateOptions { tol: 1e-6, t_max: 300.0, integrator: IntegratorOptions::default() },
            gamma: 0.0,
            objective,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CostEval {
    /// Mean nearest-neighbor covariance `⟨C⟩`.
    pub value: f64,
    pub converged: bool,
    pub residual: f64,
    /// The steady-state run failed; `value` is the worst cost.
    pub failed: bool,
}

fn rules_from_params(params: &[f64], gamma: f64) -> Result<RuleSet> {
    RuleSet::from_vector(params, Units::Raw)?.with_gamma(gamma)
}

/// Mean nearest-neighbor covariance of the state reached by long-time
/// evolution under the rule `params = [θ⁰, θ¹, θ², φ̃⁰, φ̃¹, φ̃²]`.
pub fn cost_steady_nn_covariance(params: &[f64], ctx: &CostContext) -> CostEval {
    let run = || -> Result<_> {
        let rules = rules_from_params(params, ctx.gamma)?;
        let gen = Lindbladian::from_rules(&rules, &ctx.lattice)?;
        steady_state(&ctx.rho0, &gen, &ctx.steady)
    };
    match run() {
        Ok(ss) => CostEval {
            value: covariance(&ss.rho, ctx.lattice.boundary()).mean_nn,
            converged: ss.converged,
            residual: ss.residual,
            failed: false,
        },
        Err(_) => CostEval {
            value: match ctx.objective {
                Objective::Maximize => -1.0,
                Objective::Minimize => 1.0,
            },
            converged: false,
            residual: f64::INFINITY,
            failed: true,
        },
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FidelityCurve {
    pub gamma: f64,
    pub times: Vec<f64>,
    /// Phase-optimized fidelity with the target cat state.
    pub fidelity: Vec<f64>,
    /// Fidelity at the fixed phase `π`.
    pub fidelity_fixed: Vec<f64>,
    pub peak: f64,
    /// First sample time with phase-optimized fidelity `≥ 0.99`.
    pub first_above_099: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CatFidelity {
    pub fixed_phase: f64,
    pub fixed: f64,
    pub best_phase: f64,
    pub best: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct OptimizeReport {
    pub config: SwarmConfig,
    pub n_sites: usize,
    pub best_params: Vec<f64>,
    pub best_cost: f64,
    pub global_best: Vec<f64>,
    pub steady_converged: bool,
    pub steady_residual: f64,
    pub steady_time: f64,
    pub mean_nn_covariance: f64,
    pub covariance: Vec<Vec<f64>>,
    pub ghz: CatFidelity,
    pub af_ghz: CatFidelity,
    pub curves: Vec<FidelityCurve>,
}

#[derive(Clone, Debug)]
pub struct ReportOptions {
    /// Steady-state settings of the final rerun.
    pub steady: SteadyStateOptions,
    pub curve_t_max: f64,
    pub curve_dt: f64,
    pub gammas: Vec<f64>,
}

impl Default for ReportOptions {
    fn default() -> Self {
        Self {
            steady: SteadyStateOptions::default(),
            curve_t_max: 100.0,
            curve_dt: 1.0,
            gammas: vec![0.0, 2.513e-3, 7.54e-3],
        }
    }
}

fn cat_fidelity(rho: &ComplexMatrix, psi_fixed: &[C64], best: (f64, f64)) -> CatFidelity {
    CatFidelity { fixed_phase: PI, fixed: fidelity_pure(rho, psi_fixed), best_phase: best.1, best: best.0 }
}

/// Runs the swarm on the covariance cost.
pub fn optimize(cfg: &SwarmConfig, ctx: &CostContext) -> Result<SwarmTrace> {
    pso_optimize(|x| cost_steady_nn_covariance(x, ctx).value, cfg)
}

/// Reruns the best parameters of `trace` with the reporting budget and
/// records fidelities with the ferromagnetic and antiferromagnetic cat
/// states, plus fidelity-versus-time curves for each decay rate.
pub fn report(cfg: &SwarmConfig, trace: &SwarmTrace, ctx: &CostContext, opts: &ReportOptions) -> Result<OptimizeReport> {
    let n = ctx.lattice.n_sites();
    let rules = rules_from_params(&trace.best_params, ctx.gamma)?;
    let gen = Lindbladian::from_rules(&rules, &ctx.lattice)?;
    let ss = steady_state(&ctx.rho0, &gen, &opts.steady)?;
    let cov = covariance(&ss.rho, ctx.lattice.boundary());
    let ghz_pi = ghz_state(n, PI)?;
    let af_pi = af_ghz_state(n, PI)?;
    let ghz = cat_fidelity(&ss.rho, &ghz_pi, fidelity_ghz_best(&ss.rho));
    let af_ghz = cat_fidelity(&ss.rho, &af_pi, fidelity_af_best(&ss.rho));

    let target_af = cfg.objective == Objective::Minimize;
    let curves = opts
        .gammas
        .iter()
        .map(|&gamma| {
            let rules = rules_from_params(&trace.best_params, gamma)?;
            let spec = EvolutionSpec::continuous(rules, opts.curve_t_max, opts.curve_dt).storing_states();
            let rec = propagate(&ctx.rho0, &ctx.lattice, &spec)?;
            let states = rec.states.unwrap_or_default();
            let (fidelity, fidelity_fixed): (Vec<f64>, Vec<f64>) = states
                .iter()
                .map(|rho| {
                    if target_af {
                        (fidelity_af_best(rho).0, fidelity_pure(rho, &af_pi))
                    } else {
                        (fidelity_ghz_best(rho).0, fidelity_pure(rho, &ghz_pi))
                    }
                })
                .unzip();
            let peak = fidelity.iter().copied().fold(0.0, f64::max);
            let first_above_099 = rec.times.iter().zip(&fidelity).find(|(_, &f)| f >= 0.99).map(|(&t, _)| t);
            Ok(FidelityCurve { gamma, times: rec.times, fidelity, fidelity_fixed, peak, first_above_099 })
        })
        .collect::<Result<Vec<_>>>()?;

    Ok(OptimizeReport {
        config: cfg.clone(),
        n_sites: n,
        best_params: trace.best_params.clone(),
        best_cost: trace.best_cost,
        global_best: trace.global_best.clone(),
        steady_converged: ss.converged,
        steady_residual: ss.residual,
        steady_time: ss.time,
        mean_nn_covariance: cov.mean_nn,
        covariance: cov.matrix,
        ghz,
        af_ghz,
        curves,
    })
}

/// Swarm search followed by [`report`].
pub fn optimize_and_report(cfg: &SwarmConfig, ctx: &CostContext, opts: &ReportOptions) -> Result<(SwarmTrace, OptimizeReport)> {
    let trace = optimize(cfg, ctx)?;
    let rep = report(cfg, &trace, ctx, opts)?;
    Ok((trace, rep))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Boundary;

    fn sphere(x: &[f64]) -> f64 {
        -x.iter().map(|v| (v - 0.3).powi(2)).sum::<f64>()
    }

    fn unit_box(seed: u64) -> SwarmConfig {
        SwarmConfig { lower: vec![0.0; 6], upper: vec![1.0; 6], ..SwarmConfig::rules_default(seed, Objective::Maximize) }
    }

    #[test]
    fn finds_sphere_optimum() {
        let trace = pso_optimize(sphere, &unit_box(42)).unwrap();
        for x in &trace.best_params {
            assert!((x - 0.3).abs() < 1e-2, "{:?}", trace.best_params);
        }
    }

    #[test]
    fn identical_seed_gives_identical_trace() {
        let a = pso_optimize(sphere, &unit_box(9)).unwrap();
        let b = pso_optimize(sphere, &unit_box(9)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_csv(), b.to_csv());
        assert_ne!(a, pso_optimize(sphere, &unit_box(10)).unwrap());
    }

    #[test]
    fn global_best_never_worsens() {
        for objective in [Objective::Maximize, Objective::Minimize] {
            let cfg = SwarmConfig { objective, iterations: 30, ..unit_box(3) };
            let trace = pso_optimize(|x| x.iter().map(|v| (v * 9.0).sin()).sum(), &cfg).unwrap();
            for w in trace.global_best.windows(2) {
                assert!(!objective.better(w[0], w[1]));
            }
        }
    }

    #[test]
    fn positions_respect_bounds() {
        let cfg = SwarmConfig { iterations: 40, ..unit_box(5) };
        let seen = std::sync::Mutex::new(Vec::new());
        pso_optimize(
            |x| {
                seen.lock().unwrap().push(x.to_vec());
                x.iter().sum::<f64>() * 100.0
            },
            &cfg,
        )
        .unwrap();
        assert!(seen.into_inner().unwrap().iter().flatten().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn nan_costs_are_worst() {
        let cfg = SwarmConfig { iterations: 5, ..unit_box(1) };
        let trace = pso_optimize(|x| if x[0] < 0.5 { f64::NAN } else { x[0] }, &cfg).unwrap();
        assert!(trace.best_cost >= 0.5);
    }

    #[test]
    fn config_validation() {
        assert!(SwarmConfig { population: 1, ..unit_box(0) }.validate().is_err());
        assert!(SwarmConfig { upper: vec![0.0; 6], ..unit_box(0) }.validate().is_err());
        assert!(unit_box(0).validate().is_ok());
    }

    #[test]
    fn trivial_rules_have_zero_cost() {
        let ctx = CostContext::ring(6, Objective::Maximize).unwrap();
        assert_eq!(ctx.lattice.boundary(), Boundary::Periodic);
        let zero = cost_steady_nn_covariance(&[0.0; 6], &ctx);
        assert_eq!(zero.value, 0.0);
        assert!(zero.converged);
        let depump = cost_steady_nn_covariance(&[0.0, 0.0, 0.0, 2.0 * PI, 0.0, 0.0], &ctx);
        assert!(depump.value.abs() < 1e-12);
    }

    #[test]
    fn csv_has_one_row_per_evaluation() {
        let trace = pso_optimize(sphere, &SwarmConfig { iterations: 3, population: 4, ..unit_box(2) }).unwrap();
        let csv = trace.to_csv();
        assert_eq!(csv.lines().count(), 1 + 12);
        assert!(csv.lines().nth(1).unwrap().starts_with("0,0,"));
    }
}
