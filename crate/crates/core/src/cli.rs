//! Command-line front end: `evolve`, `atlas`, `optimize` and `validate`.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::{Basis, Checkpoint};
use crate::error::{Error, Result};
use crate::evolve::{propagate, EvolutionRecord, EvolutionSpec, Lindbladian, Mode};
use crate::fullmodel::{compare_effective, ThreeLevelParams};
use crate::model::{Bitstring, Boundary, Lattice, RuleManifest, RuleSet, Units};
use crate::numerics::{ComplexMatrix, IntegratorOptions};
use crate::observables::covariance;
use crate::states::{basis_density, central_superposition, pure_density};
use crate::vqo::{fmt_f64, optimize_and_report, CostContext, Objective, ReportOptions, SwarmConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_NUMERICAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "qca", version, about = "Rydberg quantum cellular automata: evolution, rule atlas, steady-state optimization")]
pub struct Cli {
    /// Worker threads for atlas and optimize (default: available cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evolve one rule set and write a magnetization CSV and heatmap.
    Evolve(EvolveArgs),
    /// Run a list of rule sets in both discrete and continuous mode.
    Atlas(AtlasArgs),
    /// Particle-swarm search for rules whose steady state is a cat state.
    Optimize(OptimizeArgs),
    /// Compare the three-level model against the effective model.
    Validate(ValidateArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Continuous,
    Discrete,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ObjectiveArg {
    MaxNnCov,
    MinNnCov,
}

#[derive(Debug, Args)]
pub struct LatticeArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value = "open")]
    pub boundary: Boundary,
}

#[derive(Debug, Args)]
pub struct ToleranceArgs {
    #[arg(long, default_value_t = 1e-8)]
    pub rtol: f64,
    #[arg(long, default_value_t = 1e-10)]
    pub atol: f64,
}

impl ToleranceArgs {
    fn options(&self) -> Result<IntegratorOptions> {
        let o = IntegratorOptions::with_tolerances(self.rtol, self.atol);
        o.validate()?;
        Ok(o)
    }
}

#[derive(Debug, Args)]
pub struct EvolveArgs {
    /// Six comma-separated entries `θ⁰,θ¹,θ²,φ̃⁰,φ̃¹,φ̃²`.
    #[arg(long, allow_hyphen_values = true)]
    pub rules: String,
    /// Rule set for sublattice B in discrete mode (default: same as --rules).
    #[arg(long, allow_hyphen_values = true)]
    pub rules_b: Option<String>,
    #[arg(long, default_value = "pi")]
    pub units: Units,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Bitstring such as 000010000, or `central-superposition`.
    #[arg(long)]
    pub init: String,
    #[arg(long, value_enum, default_value = "continuous")]
    pub mode: ModeArg,
    #[arg(long, default_value_t = 20.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    /// Sample interval in continuous mode.
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    /// Rydberg decay rate γ in model units.
    #[arg(long, default_value_t = 0.0)]
    pub gamma: f64,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[arg(long, default_value = "trajectory.csv")]
    pub csv: PathBuf,
    #[arg(long)]
    pub pgm: Option<PathBuf>,
    /// Write the final density matrix here.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AtlasArgs {
    /// One rule per line: six comma-separated numbers or a JSON manifest.
    #[arg(long, required_unless_present = "all_64")]
    pub rules_file: Option<PathBuf>,
    /// Use every digital rule instead of a rules file.
    #[arg(long)]
    pub all_64: bool,
    #[arg(long, default_value = "pi")]
    pub units: Units,
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, default_value = "000010000")]
    pub init: String,
    #[arg(long, default_value_t = 20.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 20)]
    pub steps: usize,
    #[arg(long, default_value_t = 0.1)]
    pub dt: f64,
    #[command(flatten)]
    pub tol: ToleranceArgs,
    #[arg(long, default_value = "atlas")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct OptimizeArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    #[arg(long, value_enum, default_value = "max-nn-cov")]
    pub objective: ObjectiveArg,
    #[arg(long, default_value_t = 10)]
    pub pop: usize,
    #[arg(long, default_value_t = 100)]
    pub iters: usize,
    #[arg(long, env = "QCA_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Additional decay rate included in the reported fidelity curves.
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long, default_value_t = 100.0)]
    pub curve_tmax: f64,
    #[arg(long, default_value = "optimize")]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[command(flatten)]
    pub lattice: LatticeArgs,
    /// Three comma-separated θᵏ.
    #[arg(long, default_value = "0,1,0")]
    pub theta: String,
    /// Three comma-separated φᵏ.
    #[arg(long, default_value = "0,0,0")]
    pub phi: String,
    #[arg(long, default_value = "pi")]
    pub units: Units,
    /// Interaction V₀; also run at 2V₀ and 4V₀.
    #[arg(long, default_value_t = 50.0 * std::f64::consts::PI)]
    pub v: f64,
    /// Intermediate-state decay Γ.
    #[arg(long, default_value_t = 10.0 * std::f64::consts::PI)]
    pub gamma_big: f64,
    #[arg(long)]
    pub init: String,
    #[arg(long, default_value_t = 5.0)]
    pub tmax: f64,
    #[arg(long, default_value_t = 0.05)]
    pub dt: f64,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Parses arguments, runs the command and returns the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

pub fn exit_code(e: &Error) -> i32 {
    if e.is_numerical() {
        EXIT_NUMERICAL
    } else {
        EXIT_USAGE
    }
}

pub fn execute(cli: &Cli) -> Result<()> {
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = cli.workers {
        if w == 0 {
            return Err(Error::InvalidOptions("--workers must be positive".into()));
        }
        pool = pool.num_threads(w);
    }
    let pool = pool.build().map_err(|e| Error::InvalidOptions(format!("thread pool: {e}")))?;
    pool.install(|| match &cli.command {
        Command::Evolve(a) => cmd_evolve(a),
        Command::Atlas(a) => cmd_atlas(a),
        Command::Optimize(a) => cmd_optimize(a),
        Command::Validate(a) => cmd_validate(a),
    })
}

fn parse_list(text: &str, len: usize, what: &str) -> Result<Vec<f64>> {
    let v = text
        .split(',')
        .map(|s| s.trim().parse::<f64>().map_err(|_| Error::Parse(format!("{what}: '{s}' is not a number"))))
        .collect::<Result<Vec<_>>>()?;
    if v.len() != len {
        return Err(Error::Parse(format!("{what} needs exactly {len} entries, got {}", v.len())));
    }
    Ok(v)
}

pub fn parse_rules(text: &str, units: Units) -> Result<RuleSet> {
    RuleSet::from_vector(&parse_list(text, 6, "rule vector")?, units)
}

/// Initial density matrix from a bitstring or the name `central-superposition`.
pub fn initial_state(spec: &str, n: usize) -> Result<ComplexMatrix> {
    if spec == "central-superposition" {
        return Ok(pure_density(&central_superposition(n)?));
    }
    let bits: Bitstring = spec.parse()?;
    if bits.len() != n {
        return Err(Error::InvalidState(format!("initial bitstring has {} sites, expected {n}", bits.len())));
    }
    Ok(basis_density(&bits))
}

/// CSV with columns `t, Z_1..Z_N, trace_residual`.
pub fn trajectory_csv(rec: &EvolutionRecord, n: usize) -> String {
    let mut out = String::from("t");
    for j in 1..=n {
        let _ = write!(out, ",Z_{j}");
    }
    out.push_str(",trace_residual\n");
    for ((t, z), r) in rec.times.iter().zip(&rec.magnetization).zip(&rec.trace_residual) {
        out.push_str(&fmt_f64(*t));
        for v in z {
            out.push(',');
            out.push_str(&fmt_f64(*v));
        }
        out.push(',');
        out.push_str(&fmt_f64(*r));
        out.push('\n');
    }
    out
}

/// Binary PGM with one row per sample and one column per site;
/// pixel `round(255 (⟨Z⟩ + 1) / 2)`.
pub fn heatmap_pgm(rec: &EvolutionRecord, n: usize) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", n, rec.magnetization.len()).into_bytes();
    for row in &rec.magnetization {
        out.extend(row.iter().map(|z| (255.0 * (z + 1.0) / 2.0).round().clamp(0.0, 255.0) as u8));
    }
    out
}

fn write_file(path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn to_json<T: Serialize>(value: &T) -> Result<String> {
    serde_json::to_string_pretty(value).map(|mut s| {
        s.push('\n');
        s
    })
    .map_err(|e| Error::Parse(format!("serialization: {e}")))
}

fn cmd_evolve(a: &EvolveArgs) -> Result<()> {
    let lattice = Lattice::new(a.lattice.n, a.lattice.boundary)?;
    let rho0 = initial_state(&a.init, lattice.n_sites())?;
    let rules = parse_rules(&a.rules, a.units)?.with_gamma(a.gamma)?;
    let mode = match a.mode {
        ModeArg::Continuous => Mode::Continuous { rules, t_max: a.tmax, sample_interval: a.dt },
        ModeArg::Discrete => {
            let rules_b = match &a.rules_b {
                Some(text) => parse_rules(text, a.units)?.with_gamma(a.gamma)?,
                None => rules.clone(),
            };
            Mode::Discrete { rules_a: rules, rules_b, steps: a.steps, sample_every: 1 }
        }
    };
    let spec = EvolutionSpec { mode, integrator: a.tol.options()?, store_states: false };
    let rec = propagate(&rho0, &lattice, &spec)?;
    let n = lattice.n_sites();
    write_file(&a.csv, trajectory_csv(&rec, n))?;
    if let Some(pgm) = &a.pgm {
        write_file(pgm, heatmap_pgm(&rec, n))?;
    }
    if let (Some(path), Some(rho)) = (&a.checkpoint, rec.final_state) {
        Checkpoint::new(rho, n, Basis::QubitMsbFirst)?.save(path)?;
    }
    Ok(())
}

/// Rule lines: six numbers or a JSON manifest; `#` starts a comment.
pub fn parse_rules_file(text: &str, units: Units) -> Result<Vec<RuleSet>> {
    text.lines()
        .map(|l| l.split('#').next().unwrap_or("").trim())
        .filter(|l| !l.is_empty())
        .map(|l| if l.starts_with('{') { RuleManifest::parse(l)?.to_rules() } else { parse_rules(l, units) })
        .collect()
}

#[derive(Debug, Serialize)]
struct AtlasEntry {
    index: usize,
    rule: [f64; 6],
    unitary: bool,
    discrete_pgm: Option<String>,
    continuous_pgm: Option<String>,
    final_nn_covariance: Option<f64>,
    mean_abs_z: Option<f64>,
    steady_residual: Option<f64>,
    error: Option<String>,
}

struct AtlasRun {
    discrete: Vec<u8>,
    continuous: Vec<u8>,
    cov: f64,
    mean_abs_z: f64,
    residual: f64,
}

fn atlas_one(rules: &RuleSet, lattice: &Lattice, rho0: &ComplexMatrix, a: &AtlasArgs) -> Result<AtlasRun> {
    let opts = a.tol.options()?;
    let n = lattice.n_sites();
    let discrete = EvolutionSpec {
        mode: Mode::Discrete { rules_a: rules.clone(), rules_b: rules.clone(), steps: a.steps, sample_every: 1 },
        integrator: opts,
        store_states: false,
    };
    let d = propagate(rho0, lattice, &discrete)?;
    let continuous = EvolutionSpec { integrator: opts, ..EvolutionSpec::continuous(rules.clone(), a.tmax, a.dt) };
    let c = propagate(rho0, lattice, &continuous)?;
    let rho = c.final_state.as_ref().ok_or_else(|| Error::Numerical("empty trajectory".into()))?;
    let z = c.final_magnetization().unwrap_or(&[]);
    Ok(AtlasRun {
        discrete: heatmap_pgm(&d, n),
        continuous: heatmap_pgm(&c, n),
        cov: covariance(rho, lattice.boundary()).mean_nn,
        mean_abs_z: z.iter().map(|v| v.abs()).sum::<f64>() / n as f64,
        residual: Lindbladian::from_rules(rules, lattice)?.residual(rho),
    })
}

fn cmd_atlas(a: &AtlasArgs) -> Result<()> {
    let lattice = Lattice::new(a.lattice.n, a.lattice.boundary)?;
    let rho0 = initial_state(&a.init, lattice.n_sites())?;
    let rules: Vec<RuleSet> = if a.all_64 {
        RuleSet::digital_catalog().iter().map(|v| RuleSet::from_vector(v, Units::Pi)).collect::<Result<_>>()?
    } else {
        let path = a.rules_file.as_ref().expect("clap enforces --rules-file");
        parse_rules_file(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?, a.units)?
    };
    let results: Vec<Result<AtlasRun>> = rules.par_iter().map(|r| atlas_one(r, &lattice, &rho0, a)).collect();

    fs::create_dir_all(&a.out_dir).map_err(|e| Error::io(&a.out_dir, e))?;
    let mut index = Vec::with_capacity(rules.len());
    for (i, (rule, res)) in rules.iter().zip(results).enumerate() {
        let mut entry = AtlasEntry {
            index: i,
            rule: rule.to_vector(),
            unitary: rule.is_unitary(),
            discrete_pgm: None,
            continuous_pgm: None,
            final_nn_covariance: None,
            mean_abs_z: None,
            steady_residual: None,
            error: None,
        };
        match res {
            Ok(run) => {
                let dname = format!("rule_{i:02}_discrete.pgm");
                let cname = format!("rule_{i:02}_continuous.pgm");
                write_file(&a.out_dir.join(&dname), run.discrete)?;
                write_file(&a.out_dir.join(&cname), run.continuous)?;
                entry.discrete_pgm = Some(dname);
                entry.continuous_pgm = Some(cname);
                entry.final_nn_covariance = Some(run.cov);
                entry.mean_abs_z = Some(run.mean_abs_z);
                entry.steady_residual = Some(run.residual);
            }
            Err(e) => {
                eprintln!("rule {i}: {e}");
                entry.error = Some(e.to_string());
            }
        }
        index.push(entry);
    }
    write_file(&a.out_dir.join("index.json"), to_json(&index)?)
}

fn cmd_optimize(a: &OptimizeArgs) -> Result<()> {
    let objective = match a.objective {
        ObjectiveArg::MaxNnCov => Objective::Maximize,
        ObjectiveArg::MinNnCov => Objective::Minimize,
    };
    let mut ctx = CostContext::ring(a.lattice.n, objective)?;
    if a.lattice.boundary == Boundary::Open {
        ctx.lattice = Lattice::open(a.lattice.n)?;
    }
    let cfg = SwarmConfig { population: a.pop, iterations: a.iters, ..SwarmConfig::rules_default(a.seed, objective) };
    let mut opts = ReportOptions { curve_t_max: a.curve_tmax, ..Default::default() };
    if let Some(g) = a.gamma {
        if !opts.gammas.contains(&g) {
            opts.gammas.push(g);
        }
    }
    let (trace, report) = optimize_and_report(&cfg, &ctx, &opts)?;
    write_file(&a.out_dir.join("trace.csv"), trace.to_csv())?;
    write_file(&a.out_dir.join("report.json"), to_json(&report)?)?;
    let mut curves = String::from("gamma,t,fidelity,fidelity_fixed\n");
    for c in &report.curves {
        for ((t, f), ff) in c.times.iter().zip(&c.fidelity).zip(&c.fidelity_fixed) {
            let _ = writeln!(curves, "{},{},{},{}", fmt_f64(c.gamma), fmt_f64(*t), fmt_f64(*f), fmt_f64(*ff));
        }
    }
    write_file(&a.out_dir.join("fidelity.csv"), curves)?;
    println!(
        "best <C> = {:.6} | GHZ F = {:.6} (phase {:.4}) | AF-GHZ F = {:.6} (phase {:.4})",
        report.mean_nn_covariance, report.ghz.best, report.ghz.best_phase, report.af_ghz.best, report.af_ghz.best_phase
    );
    Ok(())
}

fn cmd_validate(a: &ValidateArgs) -> Result<()> {
    let scale = match a.units {
        Units::Pi => std::f64::consts::PI,
        Units::Raw => 1.0,
    };
    let to3 = |text: &str, what: &str| -> Result<[f64; 3]> {
        let v = parse_list(text, 3, what)?;
        Ok([v[0] * scale, v[1] * scale, v[2] * scale])
    };
    let p = ThreeLevelParams {
        n_sites: a.lattice.n,
        v: a.v,
        gamma_big: a.gamma_big,
        theta: to3(&a.theta, "theta")?,
        phi: to3(&a.phi, "phi")?,
        boundary: a.lattice.boundary,
    };
    p.validate()?;
    let init: Bitstring = a.init.parse()?;
    let report = compare_effective(&p, &init, a.tmax, a.dt, &IntegratorOptions::default())?;
    if !report.validity.ok() {
        eprintln!("warning: parameters outside V ≫ Γ > θ, φ ({:?})", report.validity);
    }
    let text = to_json(&report)?;
    match &a.out {
        Some(path) => write_file(path, text),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}
