//! Time integration of matrix-valued ODEs `dY/dt = f(t, Y)`.
//!
//! The default path is an embedded Dormand–Prince 5(4) pair with step-size
//! control and a fourth-order continuous extension used for sampling between
//! steps. A classical fixed-step RK4 is kept as an independent cross-check.

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use super::matrix::ComplexMatrix;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    /// Adaptive embedded Runge–Kutta with local error control.
    Adaptive,
    /// Classical RK4 with constant step `max_step`.
    FixedRk4,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IntegratorOptions {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the step; also the step length of [`Method::FixedRk4`].
    pub max_step: f64,
    pub method: Method,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { rtol: 1e-8, atol: 1e-10, max_step: f64::INFINITY, method: Method::Adaptive }
    }
}

impl IntegratorOptions {
    pub fn with_tolerances(rtol: f64, atol: f64) -> Self {
        Self { rtol, atol, ..Self::default() }
    }

    pub fn fixed_rk4(step: f64) -> Self {
        Self { max_step: step, method: Method::FixedRk4, ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rtol > 0.0 && self.atol > 0.0) {
            return Err(Error::InvalidOptions(format!(
                "tolerances must be strictly positive (rtol = {}, atol = {})",
                self.rtol, self.atol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::InvalidOptions(format!("max_step must be positive, got {}", self.max_step)));
        }
        if self.method == Method::FixedRk4 && !self.max_step.is_finite() {
            return Err(Error::InvalidOptions("fixed-step RK4 needs a finite max_step".into()));
        }
        Ok(())
    }
}

/// Sampled solution.
#[derive(Clone, Debug)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<ComplexMatrix>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct IntegratorStats {
    pub rhs_evals: usize,
    pub accepted: usize,
    pub rejected: usize,
}

// Dormand–Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
// Continuous extension.
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

/// `out = y + h · Σ coeff_i · k_i`
fn combine(out: &mut ComplexMatrix, y: &ComplexMatrix, h: f64, terms: &[(f64, &ComplexMatrix)]) {
    let out = out.as_mut_slice();
    out.copy_from_slice(y.as_slice());
    for &(coeff, k) in terms {
        if coeff == 0.0 {
            continue;
        }
        let s = h * coeff;
        for (o, &v) in out.iter_mut().zip(k.as_slice()) {
            *o += v * s;
        }
    }
}

/// Stepwise integrator over `[t0, t_stop]`.
pub struct Integrator<F> {
    rhs: F,
    opts: IntegratorOptions,
    t: f64,
    t_stop: f64,
    h: f64,
    y: ComplexMatrix,
    y_old: ComplexMatrix,
    t_old: f64,
    // Stages k1..k7; k[6] is the derivative at the current point after a step.
    k: Vec<ComplexMatrix>,
    scratch: ComplexMatrix,
    have_step: bool,
    fresh_derivative: bool,
    stats: IntegratorStats,
}

impl<F> Integrator<F>
where
    F: FnMut(f64, &ComplexMatrix, &mut ComplexMatrix),
{
    pub fn new(mut rhs: F, t0: f64, t_stop: f64, y0: &ComplexMatrix, opts: IntegratorOptions) -> Result<Self> {
        opts.validate()?;
        if !(t_stop >= t0) {
            return Err(Error::InvalidOptions(format!("empty time span [{t0}, {t_stop}]")));
        }
        let zero = ComplexMatrix::zeros(y0.rows(), y0.cols());
        let mut k = vec![zero.clone(); 7];
        let mut stats = IntegratorStats::default();
        let mut h = opts.max_step;
        if opts.method == Method::Adaptive {
            rhs(t0, y0, &mut k[0]);
            stats.rhs_evals += 1;
            h = initial_step(&mut rhs, t0, y0, &k[0], &opts, &mut zero.clone(), &mut stats);
        }
        Ok(Self {
            rhs,
            opts,
            t: t0,
            t_stop,
            h,
            y: y0.clone(),
            y_old: y0.clone(),
            t_old: t0,
            k,
            scratch: zero,
            have_step: false,
            fresh_derivative: opts.method == Method::Adaptive,
            stats,
        })
    }

    pub fn time(&self) -> f64 {
        self.t
    }

    pub fn state(&self) -> &ComplexMatrix {
        &self.y
    }

    pub fn into_state(self) -> ComplexMatrix {
        self.y
    }

    pub fn stats(&self) -> IntegratorStats {
        self.stats
    }

    pub fn t_stop(&self) -> f64 {
        self.t_stop
    }

    /// `f(t, y)` at the current point, when available without extra work
    /// (adaptive mode reuses the last stage).
    pub fn derivative(&self) -> Option<&ComplexMatrix> {
        if !self.fresh_derivative {
            return None;
        }
        Some(if self.have_step { &self.k[6] } else { &self.k[0] })
    }

    pub fn is_finished(&self) -> bool {
        self.t >= self.t_stop
    }

    fn failure(&self, reason: String) -> Error {
        Error::IntegrationFailure { t: self.t, reason, last_state: Some(Box::new(self.y.clone())) }
    }

    /// Takes one accepted step, never passing `t_stop`.
    pub fn step(&mut self) -> Result<()> {
        if self.is_finished() {
            return Ok(());
        }
        match self.opts.method {
            Method::Adaptive => self.step_dopri(),
            Method::FixedRk4 => {
                let target = (self.t + self.opts.max_step).min(self.t_stop);
                self.step_rk4(target - self.t);
                Ok(())
            }
        }
    }

    fn step_rk4(&mut self, h: f64) {
        let t = self.t;
        let (k1, rest) = self.k.split_at_mut(1);
        let (k2, rest) = rest.split_at_mut(1);
        let (k3, rest) = rest.split_at_mut(1);
        let k4 = &mut rest[0];
        let (k1, k2, k3) = (&mut k1[0], &mut k2[0], &mut k3[0]);
        (self.rhs)(t, &self.y, k1);
        combine(&mut self.scratch, &self.y, h, &[(0.5, k1)]);
        (self.rhs)(t + 0.5 * h, &self.scratch, k2);
        combine(&mut self.scratch, &self.y, h, &[(0.5, k2)]);
        (self.rhs)(t + 0.5 * h, &self.scratch, k3);
        combine(&mut self.scratch, &self.y, h, &[(1.0, k3)]);
        (self.rhs)(t + h, &self.scratch, k4);
        self.stats.rhs_evals += 4;
        std::mem::swap(&mut self.y_old, &mut self.y);
        combine(&mut self.y, &self.y_old, h, &[(1.0 / 6.0, k1), (1.0 / 3.0, k2), (1.0 / 3.0, k3), (1.0 / 6.0, k4)]);
        self.t_old = t;
        self.t = if t + h >= self.t_stop - 1e-14 * self.t_stop.abs().max(1.0) { self.t_stop } else { t + h };
        self.have_step = true;
        self.stats.accepted += 1;
    }

    fn step_dopri(&mut self) -> Result<()> {
        if self.have_step {
            // First-same-as-last: the previous k7 is f at the current point.
            self.k.swap(0, 6);
            self.have_step = false;
        }
        let mut reject_streak = false;
        loop {
            let remaining = self.t_stop - self.t;
            let mut h = self.h.min(self.opts.max_step);
            let mut lands_on_stop = false;
            if h >= remaining * (1.0 - 1e-12) {
                h = remaining;
                lands_on_stop = true;
            }
            let min_h = 1e-14 * self.t.abs().max(1.0);
            if h < min_h && !lands_on_stop {
                return Err(self.failure(format!("step size underflow (h = {h:e})")));
            }

            let t = self.t;
            let y = &self.y;
            let [k1, k2, k3, k4, k5, k6, k7] = &mut self.k[..] else { unreachable!() };
            let tmp = &mut self.scratch;
            let rhs = &mut self.rhs;
            combine(tmp, y, h, &[(A21, k1)]);
            rhs(t + C2 * h, tmp, k2);
            combine(tmp, y, h, &[(A31, k1), (A32, k2)]);
            rhs(t + C3 * h, tmp, k3);
            combine(tmp, y, h, &[(A41, k1), (A42, k2), (A43, k3)]);
            rhs(t + C4 * h, tmp, k4);
            combine(tmp, y, h, &[(A51, k1), (A52, k2), (A53, k3), (A54, k4)]);
            rhs(t + C5 * h, tmp, k5);
            combine(tmp, y, h, &[(A61, k1), (A62, k2), (A63, k3), (A64, k4), (A65, k5)]);
            rhs(t + h, tmp, k6);
            combine(&mut self.y_old, y, h, &[(A71, k1), (A73, k3), (A74, k4), (A75, k5), (A76, k6)]);
            let y_new = &self.y_old;
            rhs(t + h, y_new, k7);
            self.stats.rhs_evals += 6;

            let (rtol, atol) = (self.opts.rtol, self.opts.atol);
            let mut acc = 0.0;
            let n = y.as_slice().len().max(1);
            let err_terms = [(E1, &*k1), (E3, &*k3), (E4, &*k4), (E5, &*k5), (E6, &*k6), (E7, &*k7)];
            for i in 0..y.as_slice().len() {
                let mut e = C64::new(0.0, 0.0);
                for (coeff, k) in &err_terms {
                    e += k.as_slice()[i] * *coeff;
                }
                let sc = atol + rtol * y.as_slice()[i].norm().max(y_new.as_slice()[i].norm());
                acc += (e * h).norm_sqr() / (sc * sc);
            }
            let err = (acc / n as f64).sqrt();

            if err.is_finite() && err <= 1.0 {
                let fac = if err == 0.0 { 10.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 10.0) };
                let fac = if reject_streak { fac.min(1.0) } else { fac };
                // `y_old` currently holds y_new; swap so it holds the step start.
                std::mem::swap(&mut self.y, &mut self.y_old);
                self.t_old = t;
                self.t = if lands_on_stop { self.t_stop } else { t + h };
                if !lands_on_stop {
                    self.h = h * fac;
                } else {
                    self.h = self.h.max(h);
                }
                self.have_step = true;
                self.stats.accepted += 1;
                return Ok(());
            }
            self.stats.rejected += 1;
            reject_streak = true;
            let fac = if err.is_finite() { (0.9 * err.powf(-0.2)).clamp(0.1, 0.9) } else { 0.1 };
            self.h = h * fac;
        }
    }

    /// Value at `t` inside the most recent step (or the current point).
    pub fn state_at(&self, t: f64) -> ComplexMatrix {
        if t == self.t || !self.have_step {
            return self.y.clone();
        }
        let h = self.t - self.t_old;
        let theta = ((t - self.t_old) / h).clamp(0.0, 1.0);
        if self.opts.method == Method::FixedRk4 {
            // Linear fallback; RK4 runs land on requested times exactly.
            let mut out = self.y_old.clone();
            out.axpy(C64::new(theta, 0.0), &(&self.y - &self.y_old));
            return out;
        }
        let theta1 = 1.0 - theta;
        let k = &self.k;
        let mut out = ComplexMatrix::zeros(self.y.rows(), self.y.cols());
        let (y0, y1) = (self.y_old.as_slice(), self.y.as_slice());
        for (i, o) in out.as_mut_slice().iter_mut().enumerate() {
            let r2 = y1[i] - y0[i];
            let r3 = k[0].as_slice()[i] * h - r2;
            let r4 = r2 - k[6].as_slice()[i] * h - r3;
            let r5 = (k[0].as_slice()[i] * D1
                + k[2].as_slice()[i] * D3
                + k[3].as_slice()[i] * D4
                + k[4].as_slice()[i] * D5
                + k[5].as_slice()[i] * D6
                + k[6].as_slice()[i] * D7)
                * h;
            *o = y0[i] + (r2 + (r3 + (r4 + r5 * theta1) * theta) * theta1) * theta;
        }
        out
    }

    /// Integrates up to `target` (≤ `t_stop`) and returns the state there.
    pub fn advance_to(&mut self, target: f64) -> Result<ComplexMatrix> {
        if target > self.t_stop {
            return Err(Error::InvalidOptions(format!("sample time {target} beyond end {}", self.t_stop)));
        }
        if self.have_step && target >= self.t_old && target <= self.t {
            return Ok(self.state_at(target));
        }
        if target < self.t {
            return Err(Error::InvalidOptions(format!("sample time {target} already passed (t = {})", self.t)));
        }
        match self.opts.method {
            Method::FixedRk4 => {
                while self.t < target {
                    let h = self.opts.max_step.min(target - self.t);
                    self.step_rk4(h);
                    if target - self.t < 1e-14 * target.abs().max(1.0) {
                        self.t = target;
                    }
                }
                Ok(self.y.clone())
            }
            Method::Adaptive => {
                while self.t < target {
                    self.step_dopri()?;
                }
                Ok(self.state_at(target))
            }
        }
    }
}

fn weighted_rms(v: &ComplexMatrix, y: &ComplexMatrix, opts: &IntegratorOptions) -> f64 {
    let n = v.as_slice().len().max(1) as f64;
    let s: f64 = v
        .as_slice()
        .iter()
        .zip(y.as_slice())
        .map(|(a, b)| {
            let sc = opts.atol + opts.rtol * b.norm();
            a.norm_sqr() / (sc * sc)
        })
        .sum();
    (s / n).sqrt()
}

fn initial_step<F>(
    rhs: &mut F,
    t0: f64,
    y0: &ComplexMatrix,
    f0: &ComplexMatrix,
    opts: &IntegratorOptions,
    scratch: &mut ComplexMatrix,
    stats: &mut IntegratorStats,
) -> f64
where
    F: FnMut(f64, &ComplexMatrix, &mut ComplexMatrix),
{
    let d0 = weighted_rms(y0, y0, opts);
    let d1 = weighted_rms(f0, y0, opts);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
    let h0 = h0.min(opts.max_step);
    let mut y1 = ComplexMatrix::zeros(y0.rows(), y0.cols());
    combine(&mut y1, y0, h0, &[(1.0, f0)]);
    rhs(t0 + h0, &y1, scratch);
    stats.rhs_evals += 1;
    let diff = &*scratch - f0;
    let d2 = weighted_rms(&diff, y0, opts) / h0;
    let h1 = if d1.max(d2) <= 1e-15 { (h0 * 1e-3).max(1e-6) } else { (0.01 / d1.max(d2)).powf(0.2) };
    (100.0 * h0).min(h1).min(opts.max_step)
}

/// Integrates `dy/dt = rhs(t, y)` over `t_span`, returning the solution at
/// each of `sample_times` (sorted, inside the span).
pub fn integrate<F>(
    rhs: F,
    y0: &ComplexMatrix,
    t_span: (f64, f64),
    sample_times: &[f64],
    opts: &IntegratorOptions,
) -> Result<Trajectory>
where
    F: FnMut(f64, &ComplexMatrix, &mut ComplexMatrix),
{
    if sample_times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::InvalidOptions("sample times must be sorted".into()));
    }
    if let Some(&t) = sample_times.iter().find(|&&t| t < t_span.0 || t > t_span.1) {
        return Err(Error::InvalidOptions(format!("sample time {t} outside [{}, {}]", t_span.0, t_span.1)));
    }
    let mut integ = Integrator::new(rhs, t_span.0, t_span.1, y0, *opts)?;
    let mut states = Vec::with_capacity(sample_times.len());
    for &t in sample_times {
        states.push(integ.advance_to(t)?);
    }
    Ok(Trajectory { times: sample_times.to_vec(), states })
}

/// Evenly spaced grid `t0, t0 + dt, …` ending exactly at `t1`.
pub fn time_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    if t1 <= t0 || dt <= 0.0 {
        return vec![t0];
    }
    let n = ((t1 - t0) / dt - 1e-9).ceil() as usize;
    let mut g: Vec<f64> = (0..n).map(|i| t0 + i as f64 * dt).collect();
    g.push(t1);
    g
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::expm::expm;

    fn scalar(v: f64) -> ComplexMatrix {
        ComplexMatrix::from_vec(1, 1, vec![C64::new(v, 0.0)]).unwrap()
    }

    #[test]
    fn zero_rhs_is_constant() {
        let y0 = ComplexMatrix::from_fn(3, 3, |r, c| C64::new(r as f64, c as f64));
        let traj = integrate(|_, _, dy: &mut ComplexMatrix| dy.fill_zero(), &y0, (0.0, 5.0), &[0.0, 2.5, 5.0], &Default::default())
            .unwrap();
        for s in &traj.states {
            assert_eq!(s, &y0);
        }
    }

    #[test]
    fn scalar_decay() {
        let rhs = |_: f64, y: &ComplexMatrix, dy: &mut ComplexMatrix| {
            dy.as_mut_slice()[0] = -y.as_slice()[0];
        };
        let traj = integrate(rhs, &scalar(1.0), (0.0, 1.0), &[1.0], &Default::default()).unwrap();
        let got = traj.states[0].as_slice()[0].re;
        assert!((got - (-1.0f64).exp()).abs() < 1e-8 * (-1.0f64).exp());
    }

    #[test]
    fn dense_output_matches_closed_form() {
        let rhs = |_: f64, y: &ComplexMatrix, dy: &mut ComplexMatrix| {
            dy.as_mut_slice()[0] = y.as_slice()[0] * C64::new(-0.3, 2.0);
        };
        let times = time_grid(0.0, 3.0, 0.0137);
        let traj = integrate(rhs, &scalar(1.0), (0.0, 3.0), &times, &Default::default()).unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let exact = (C64::new(-0.3, 2.0) * t).exp();
            assert!((s.as_slice()[0] - exact).norm() < 1e-7, "t = {t}");
        }
    }

    #[test]
    fn rk4_cross_check() {
        let rhs = |_: f64, y: &ComplexMatrix, dy: &mut ComplexMatrix| {
            dy.as_mut_slice()[0] = -y.as_slice()[0];
        };
        let traj = integrate(rhs, &scalar(1.0), (0.0, 1.0), &[0.5, 1.0], &IntegratorOptions::fixed_rk4(1e-3)).unwrap();
        assert!((traj.states[1].as_slice()[0].re - (-1.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn constant_linear_rhs_matches_expm() {
        let m = ComplexMatrix::from_fn(4, 4, |r, c| C64::new(((r + 2 * c) % 3) as f64 - 1.0, 0.5 * (r as f64 - c as f64)));
        let y0 = ComplexMatrix::from_fn(4, 2, |r, c| C64::new(1.0 + r as f64, c as f64));
        let mm = m.clone();
        let rhs = move |_: f64, y: &ComplexMatrix, dy: &mut ComplexMatrix| {
            *dy = mm.matmul(y);
        };
        let traj = integrate(rhs, &y0, (0.0, 1.0), &[1.0], &Default::default()).unwrap();
        let exact = expm(&m).unwrap().matmul(&y0);
        assert!(traj.states[0].max_abs_diff(&exact) < 1e-7);
    }

    #[test]
    fn underflow_reports_last_good_time() {
        // Finite-time blow-up of y' = y², y(0) = 1 at t = 1.
        let rhs = |_: f64, y: &ComplexMatrix, dy: &mut ComplexMatrix| {
            let v = y.as_slice()[0];
            dy.as_mut_slice()[0] = v * v;
        };
        match integrate(rhs, &scalar(1.0), (0.0, 2.0), &[2.0], &Default::default()) {
            Err(Error::IntegrationFailure { t, last_state, .. }) => {
                assert!(t > 0.9 && t < 1.0 + 1e-6, "failed at {t}");
                assert!(last_state.is_some());
            }
            other => panic!("expected failure, got {:?}", other.map(|t| t.times)),
        }
    }

    #[test]
    fn rejects_bad_options() {
        let rhs = |_: f64, _: &ComplexMatrix, dy: &mut ComplexMatrix| dy.fill_zero();
        let bad = IntegratorOptions { rtol: 0.0, ..Default::default() };
        assert!(integrate(rhs, &scalar(1.0), (0.0, 1.0), &[1.0], &bad).is_err());
    }

    #[test]
    fn grid_hits_endpoint() {
        assert_eq!(time_grid(0.0, 1.0, 0.25), vec![0.0, 0.25, 0.5, 0.75, 1.0]);
        let g = time_grid(0.0, 1.0, 0.3);
        assert_eq!(*g.last().unwrap(), 1.0);
        assert_eq!(g.len(), 5);
    }
}
