//! Reference integrators on the full stiff Hamiltonians: velocity Verlet,
//! and the Impulse and Mollify multiple-time-stepping schemes.
//!
//! All three work on flat positions `q` and momenta `p` with unit mass and
//! a potential split into a slow part (whose gradient is the counted,
//! expensive force) and a stiff fast part.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hj_matrix::{matrix_observable_names, matrix_observables};
use crate::hj_pendulum::{to_cartesian, to_internal, PendulumCartesianState, PendulumInternalState, PENDULUM_OBSERVABLES};
use crate::hj_scalar::{scalar_observable_names, scalar_observables};
use crate::phase::{dot, SlowFastState};
use crate::record::{drive, step_count, FinalState, IterationStats, RunOptions, RunRecord};
use crate::systems::{
    energy_pendulum, pendulum_invariant, Counting, MatrixFreqSystem, PendulumSystem, ScalarFreqSystem,
};
use crate::verify::DenseMatrix;

/// Potential `slow(q) + fast(q)` on a flat configuration space.
pub trait SplitPotential {
    fn dim(&self) -> usize;
    fn slow_value(&self, q: &[f64]) -> f64;
    /// Gradient of the slow part; one slow-force evaluation.
    fn slow_grad(&self, q: &[f64], out: &mut [f64]);
    fn fast_value(&self, q: &[f64]) -> f64;
    fn fast_grad(&self, q: &[f64], out: &mut [f64]);
    /// Row-major `dim x dim` Hessian of the fast part.
    fn fast_hess(&self, q: &[f64], out: &mut [f64]);
}

/// `q = (q1, q2)`, fast part `Omega(q1)^2 |q2|^2 / (2 eps^2)`.
#[derive(Debug, Clone, Copy)]
pub struct ScalarSplit<'a, S: ?Sized> {
    pub sys: &'a S,
    pub eps: f64,
}

impl<S: ScalarFreqSystem + ?Sized> SplitPotential for ScalarSplit<'_, S> {
    fn dim(&self) -> usize {
        self.sys.slow_dim() + self.sys.fast_dim()
    }

    fn slow_value(&self, q: &[f64]) -> f64 {
        let s = self.sys.slow_dim();
        self.sys.potential(&q[..s], &q[s..])
    }

    fn slow_grad(&self, q: &[f64], out: &mut [f64]) {
        let s = self.sys.slow_dim();
        let (g1, g2) = out.split_at_mut(s);
        self.sys.potential_grad(&q[..s], &q[s..], g1, g2);
    }

    fn fast_value(&self, q: &[f64]) -> f64 {
        let s = self.sys.slow_dim();
        let om = self.sys.omega(&q[..s]);
        om * om * dot(&q[s..], &q[s..]) / (2.0 * self.eps * self.eps)
    }

    fn fast_grad(&self, q: &[f64], out: &mut [f64]) {
        let s = self.sys.slow_dim();
        let (q1, q2) = q.split_at(s);
        let om = self.sys.omega(q1);
        let e2 = self.eps * self.eps;
        let norm2 = dot(q2, q2);
        let (g1, g2) = out.split_at_mut(s);
        self.sys.omega_grad(q1, g1);
        g1.iter_mut().for_each(|g| *g *= om * norm2 / e2);
        for (g, x) in g2.iter_mut().zip(q2) {
            *g = om * om * x / e2;
        }
    }

    fn fast_hess(&self, q: &[f64], out: &mut [f64]) {
        let s = self.sys.slow_dim();
        let n = q.len();
        let (q1, q2) = q.split_at(s);
        let om = self.sys.omega(q1);
        let e2 = self.eps * self.eps;
        let norm2 = dot(q2, q2);
        let mut dom = vec![0.0; s];
        let mut d2om = vec![0.0; s * s];
        self.sys.omega_grad(q1, &mut dom);
        self.sys.omega_hess(q1, &mut d2om);
        out.fill(0.0);
        for i in 0..s {
            for j in 0..s {
                out[i * n + j] = (dom[i] * dom[j] + om * d2om[i * s + j]) * norm2 / e2;
            }
            for (k, x) in q2.iter().enumerate() {
                let v = 2.0 * om * dom[i] * x / e2;
                out[i * n + s + k] = v;
                out[(s + k) * n + i] = v;
            }
        }
        for k in s..n {
            out[k * n + k] = om * om / e2;
        }
    }
}

/// `q = (q1, q2)`, fast part `sum_j omega_j^2 q2_j^2 / (2 eps^2)`.
#[derive(Debug, Clone)]
pub struct MatrixSplit<'a, S: ?Sized> {
    sys: &'a S,
    eps: f64,
    freqs: Vec<f64>,
}

impl<'a, S: MatrixFreqSystem + ?Sized> MatrixSplit<'a, S> {
    pub fn new(sys: &'a S, eps: f64) -> Self {
        Self { sys, eps, freqs: sys.coordinate_frequencies() }
    }
}

impl<S: MatrixFreqSystem + ?Sized> SplitPotential for MatrixSplit<'_, S> {
    fn dim(&self) -> usize {
        self.sys.slow_dim() + self.freqs.len()
    }

    fn slow_value(&self, q: &[f64]) -> f64 {
        let s = self.sys.slow_dim();
        self.sys.potential(&q[..s], &q[s..])
    }

    fn slow_grad(&self, q: &[f64], out: &mut [f64]) {
        let s = self.sys.slow_dim();
        let (g1, g2) = out.split_at_mut(s);
        self.sys.potential_grad(&q[..s], &q[s..], g1, g2);
    }

    fn fast_value(&self, q: &[f64]) -> f64 {
        let s = self.sys.slow_dim();
        let e2 = self.eps * self.eps;
        self.freqs.iter().zip(&q[s..]).map(|(w, x)| w * w * x * x).sum::<f64>() / (2.0 * e2)
    }

    fn fast_grad(&self, q: &[f64], out: &mut [f64]) {
        let s = self.sys.slow_dim();
        let e2 = self.eps * self.eps;
        out[..s].fill(0.0);
        for ((g, w), x) in out[s..].iter_mut().zip(&self.freqs).zip(&q[s..]) {
            *g = w * w * x / e2;
        }
    }

    fn fast_hess(&self, q: &[f64], out: &mut [f64]) {
        let s = self.sys.slow_dim();
        let n = q.len();
        let e2 = self.eps * self.eps;
        out.fill(0.0);
        for (k, w) in self.freqs.iter().enumerate() {
            out[(s + k) * n + s + k] = w * w / e2;
        }
    }
}

/// Cartesian pendulum `q = (qx, qy)`: slow part `W(angle)`, fast part
/// `(|q| - 1)^2 / (2 eps^2)`.
#[derive(Debug, Clone, Copy)]
pub struct PendulumSplit<'a, S: ?Sized> {
    pub sys: &'a S,
    pub eps: f64,
}

impl<S: PendulumSystem + ?Sized> SplitPotential for PendulumSplit<'_, S> {
    fn dim(&self) -> usize {
        2
    }

    fn slow_value(&self, q: &[f64]) -> f64 {
        self.sys.w(q[1].atan2(q[0]))
    }

    fn slow_grad(&self, q: &[f64], out: &mut [f64]) {
        let rho2 = q[0] * q[0] + q[1] * q[1];
        let wp = self.sys.wp(q[1].atan2(q[0]));
        out[0] = -wp * q[1] / rho2;
        out[1] = wp * q[0] / rho2;
    }

    fn fast_value(&self, q: &[f64]) -> f64 {
        let d = q[0].hypot(q[1]) - 1.0;
        d * d / (2.0 * self.eps * self.eps)
    }

    fn fast_grad(&self, q: &[f64], out: &mut [f64]) {
        let rho = q[0].hypot(q[1]);
        let c = (rho - 1.0) / (rho * self.eps * self.eps);
        out[0] = c * q[0];
        out[1] = c * q[1];
    }

    fn fast_hess(&self, q: &[f64], out: &mut [f64]) {
        let rho = q[0].hypot(q[1]);
        let e2 = self.eps * self.eps;
        let radial = 1.0 / e2;
        let tangential = (rho - 1.0) / (rho * e2);
        let u = [q[0] / rho, q[1] / rho];
        for i in 0..2 {
            for j in 0..2 {
                let uu = u[i] * u[j];
                let id = if i == j { 1.0 } else { 0.0 };
                out[i * 2 + j] = radial * uu + tangential * (id - uu);
            }
        }
    }
}

/// `-(grad slow + grad fast)`; one slow-force evaluation.
pub fn total_force<P: SplitPotential + ?Sized>(pot: &P, q: &[f64], out: &mut [f64]) {
    let mut fast = vec![0.0; q.len()];
    pot.slow_grad(q, out);
    pot.fast_grad(q, &mut fast);
    for (o, f) in out.iter_mut().zip(&fast) {
        *o = -(*o + f);
    }
}

/// Kick-drift-kick step. `force` must hold the force at `q` on entry and
/// holds the force at the new `q` on exit.
pub fn verlet_step<F>(q: &mut [f64], p: &mut [f64], force: &mut [f64], dt: f64, mut eval: F)
where
    F: FnMut(&[f64], &mut [f64]),
{
    for (pi, fi) in p.iter_mut().zip(force.iter()) {
        *pi += 0.5 * dt * fi;
    }
    for (qi, pi) in q.iter_mut().zip(p.iter()) {
        *qi += dt * pi;
    }
    eval(q, force);
    for (pi, fi) in p.iter_mut().zip(force.iter()) {
        *pi += 0.5 * dt * fi;
    }
}

/// Macro step and inner step of the multiple-time-stepping schemes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MtsConfig {
    pub macro_h: f64,
    pub inner_dt: f64,
    pub mollify: bool,
}

impl MtsConfig {
    /// Inner step `eps / 100`.
    pub fn new(macro_h: f64, eps: f64, mollify: bool) -> Self {
        Self { macro_h, inner_dt: eps / 100.0, mollify }
    }

    pub fn with_inner_dt(self, inner_dt: f64) -> Self {
        Self { inner_dt, ..self }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.inner_dt > 0.0 && self.macro_h.abs() > 0.0 && self.macro_h.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "invalid multiple-time-stepping config: macro step {}, inner step {}",
                self.macro_h, self.inner_dt
            )));
        }
        Ok(())
    }

    /// Number of uniform inner steps covering one macro step.
    pub fn substeps(&self) -> usize {
        let ratio = self.macro_h.abs() / self.inner_dt;
        ((ratio * (1.0 - 1e-12)).ceil() as usize).max(1)
    }
}

/// Verlet on `|p|^2/2 + fast(q)` over `duration` with `n` uniform steps.
fn oscillate<P: SplitPotential + ?Sized>(pot: &P, q: &mut [f64], p: &mut [f64], duration: f64, n: usize) {
    let dt = duration / n as f64;
    let mut force = vec![0.0; q.len()];
    let fast_force = |q: &[f64], out: &mut [f64]| {
        pot.fast_grad(q, out);
        out.iter_mut().for_each(|x| *x = -*x);
    };
    fast_force(q, &mut force);
    for _ in 0..n {
        verlet_step(q, p, &mut force, dt, fast_force);
    }
}

/// Time average `a(q)` of the fast flow started at `(q, 0)` over one
/// macro step, and its Jacobian `A(q)`, both by the trapezoid rule on the
/// inner Verlet trajectory. `A` is the exact derivative of the discrete
/// average: the Verlet map is linearized alongside, with tangent
/// positions `T = dQ/dq` and momenta `Pi = dP/dq`.
pub fn averaging_map<P: SplitPotential + ?Sized>(pot: &P, q: &[f64], mts: &MtsConfig) -> (Vec<f64>, DenseMatrix) {
    let n = q.len();
    let steps = mts.substeps();
    let dt = mts.macro_h / steps as f64;
    let mut qq = q.to_vec();
    let mut pp = vec![0.0; n];
    let mut t = vec![0.0; n * n];
    for i in 0..n {
        t[i * n + i] = 1.0;
    }
    let mut pi = vec![0.0; n * n];
    let mut force = vec![0.0; n];
    let mut hess = vec![0.0; n * n];
    // pi -= c * hess * t
    let kick_tangent = |pi: &mut [f64], hess: &[f64], t: &[f64], c: f64| {
        for i in 0..n {
            for j in 0..n {
                let mut acc = 0.0;
                for k in 0..n {
                    acc += hess[i * n + k] * t[k * n + j];
                }
                pi[i * n + j] -= c * acc;
            }
        }
    };
    pot.fast_grad(&qq, &mut force);
    pot.fast_hess(&qq, &mut hess);

    let w = 1.0 / steps as f64;
    let mut avg: Vec<f64> = qq.iter().map(|x| 0.5 * w * x).collect();
    let mut avg_jac: Vec<f64> = t.iter().map(|x| 0.5 * w * x).collect();
    for k in 1..=steps {
        kick_tangent(&mut pi, &hess, &t, 0.5 * dt);
        for (pj, fj) in pp.iter_mut().zip(&force) {
            *pj -= 0.5 * dt * fj;
        }
        for (tj, pj) in t.iter_mut().zip(&pi) {
            *tj += dt * pj;
        }
        for (qj, pj) in qq.iter_mut().zip(&pp) {
            *qj += dt * pj;
        }
        pot.fast_grad(&qq, &mut force);
        pot.fast_hess(&qq, &mut hess);
        for (pj, fj) in pp.iter_mut().zip(&force) {
            *pj -= 0.5 * dt * fj;
        }
        kick_tangent(&mut pi, &hess, &t, 0.5 * dt);

        let wk = if k == steps { 0.5 * w } else { w };
        for (a, x) in avg.iter_mut().zip(&qq) {
            *a += wk * x;
        }
        for (a, x) in avg_jac.iter_mut().zip(&t) {
            *a += wk * x;
        }
    }
    let rows: Vec<Vec<f64>> = avg_jac.chunks(n).map(|r| r.to_vec()).collect();
    (avg, DenseMatrix::from_rows(&rows))
}

/// `A(q)^T (-grad slow)(a(q))`; one slow-force evaluation.
pub fn mollified_force<P: SplitPotential + ?Sized>(pot: &P, q: &[f64], mts: &MtsConfig, out: &mut [f64]) {
    let (avg, jac) = averaging_map(pot, q, mts);
    let mut g = vec![0.0; q.len()];
    pot.slow_grad(&avg, &mut g);
    let pulled = jac.transpose().mul_vec(&g);
    for (o, x) in out.iter_mut().zip(pulled) {
        *o = -x;
    }
}

/// Slow force used at the kicks: plain or mollified.
pub fn kick_force<P: SplitPotential + ?Sized>(pot: &P, q: &[f64], mts: &MtsConfig, out: &mut [f64]) {
    if mts.mollify {
        mollified_force(pot, q, mts, out);
    } else {
        pot.slow_grad(q, out);
        out.iter_mut().for_each(|x| *x = -*x);
    }
}

/// Kick / oscillate / kick. `kick` holds the kick force at `q` on entry
/// and at the new `q` on exit, so consecutive steps share one evaluation.
pub fn mts_step<P: SplitPotential + ?Sized>(pot: &P, q: &mut [f64], p: &mut [f64], kick: &mut [f64], mts: &MtsConfig) {
    let h = mts.macro_h;
    for (pi, fi) in p.iter_mut().zip(kick.iter()) {
        *pi += 0.5 * h * fi;
    }
    oscillate(pot, q, p, h, mts.substeps());
    kick_force(pot, q, mts, kick);
    for (pi, fi) in p.iter_mut().zip(kick.iter()) {
        *pi += 0.5 * h * fi;
    }
}

pub fn impulse_step<P: SplitPotential + ?Sized>(pot: &P, q: &mut [f64], p: &mut [f64], kick: &mut [f64], mts: &MtsConfig) {
    debug_assert!(!mts.mollify);
    mts_step(pot, q, p, kick, mts)
}

pub fn mollify_step<P: SplitPotential + ?Sized>(pot: &P, q: &mut [f64], p: &mut [f64], kick: &mut [f64], mts: &MtsConfig) {
    debug_assert!(mts.mollify);
    mts_step(pot, q, p, kick, mts)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Baseline {
    Verlet,
    Impulse,
    Mollify,
}

/// Step sizes of a baseline run. For Verlet only `h` matters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BaselineConfig {
    pub scheme: Baseline,
    pub eps: f64,
    pub h: f64,
    pub inner_dt: f64,
}

impl BaselineConfig {
    pub fn new(scheme: Baseline, eps: f64, h: f64) -> Self {
        Self { scheme, eps, h, inner_dt: eps / 100.0 }
    }

    pub fn with_inner_dt(self, inner_dt: f64) -> Self {
        Self { inner_dt, ..self }
    }

    pub fn mts(&self) -> MtsConfig {
        MtsConfig { macro_h: self.h, inner_dt: self.inner_dt, mollify: self.scheme == Baseline::Mollify }
    }
}

struct Flat {
    q: Vec<f64>,
    p: Vec<f64>,
    kick: Vec<f64>,
}

/// Generic baseline loop on flat coordinates; `observe` sees `(q, p)`.
fn run_flat<P: SplitPotential + ?Sized>(
    pot: &P,
    q0: Vec<f64>,
    p0: Vec<f64>,
    cfg: &BaselineConfig,
    opts: &RunOptions,
    n_obs: usize,
    mut observe: impl FnMut(&[f64], &[f64]) -> Result<Vec<f64>>,
) -> Result<(Vec<f64>, Vec<Vec<f64>>, Flat, u64)> {
    if !(cfg.eps > 0.0) {
        return Err(Error::InvalidArgument(format!("eps must be positive, got {}", cfg.eps)));
    }
    let mts = cfg.mts();
    mts.validate()?;
    let n_steps = step_count(opts.t_max, cfg.h)?;
    let mut kick = vec![0.0; q0.len()];
    if n_steps > 0 {
        match cfg.scheme {
            Baseline::Verlet => total_force(pot, &q0, &mut kick),
            _ => kick_force(pot, &q0, &mts, &mut kick),
        }
    }
    let d = drive(
        Flat { q: q0, p: p0, kick },
        n_steps,
        opts.sample_every,
        cfg.h,
        n_obs,
        |s| observe(&s.q, &s.p),
        |s| {
            match cfg.scheme {
                Baseline::Verlet => verlet_step(&mut s.q, &mut s.p, &mut s.kick, cfg.h, |q, f| total_force(pot, q, f)),
                _ => mts_step(pot, &mut s.q, &mut s.p, &mut s.kick, &mts),
            }
            if s.q.iter().chain(&s.p).all(|x| x.is_finite()) {
                Ok(())
            } else {
                Err(Error::NonFinite("baseline step"))
            }
        },
    )?;
    Ok((d.times, d.series, d.state, d.steps))
}

fn split_state(s: usize, q: &[f64], p: &[f64]) -> SlowFastState {
    SlowFastState::new(q[..s].to_vec(), q[s..].to_vec(), p[..s].to_vec(), p[s..].to_vec())
}

fn join_state(st: &SlowFastState) -> (Vec<f64>, Vec<f64>) {
    ([st.q1.as_slice(), &st.q2].concat(), [st.p1.as_slice(), &st.p2].concat())
}

/// Baseline run on a scalar-frequency system; same observables as the
/// preconditioned scheme.
pub fn run_scalar<S: ScalarFreqSystem + ?Sized>(
    state0: &SlowFastState,
    sys: &S,
    cfg: &BaselineConfig,
    opts: &RunOptions,
) -> Result<RunRecord> {
    let counted = Counting::new(sys);
    let pot = ScalarSplit { sys: &counted, eps: cfg.eps };
    let s = state0.slow_dim();
    let names = scalar_observable_names(state0.fast_dim());
    let (q0, p0) = join_state(state0);
    let (times, series, last, steps) = run_flat(&pot, q0, p0, cfg, opts, names.len(), |q, p| {
        Ok(scalar_observables(&counted, &split_state(s, q, p), cfg.eps))
    })?;
    Ok(RunRecord {
        times,
        names,
        series,
        final_state: FinalState::SlowFast(split_state(s, &last.q, &last.p)),
        steps,
        slow_gradient_calls: counted.calls(),
        iterations: IterationStats::default(),
    })
}

pub fn run_matrix<S: MatrixFreqSystem + ?Sized>(
    state0: &SlowFastState,
    sys: &S,
    cfg: &BaselineConfig,
    opts: &RunOptions,
) -> Result<RunRecord> {
    let counted = Counting::new(sys);
    let pot = MatrixSplit::new(&counted, cfg.eps);
    let s = state0.slow_dim();
    let names = matrix_observable_names(sys, cfg.eps);
    let (q0, p0) = join_state(state0);
    let (times, series, last, steps) = run_flat(&pot, q0, p0, cfg, opts, names.len(), |q, p| {
        Ok(matrix_observables(&counted, &split_state(s, q, p), cfg.eps))
    })?;
    Ok(RunRecord {
        times,
        names,
        series,
        final_state: FinalState::SlowFast(split_state(s, &last.q, &last.p)),
        steps,
        slow_gradient_calls: counted.calls(),
        iterations: IterationStats::default(),
    })
}

/// Baseline run on the Cartesian pendulum, observed in polar coordinates.
pub fn run_pendulum<S: PendulumSystem + ?Sized>(
    state0: &PendulumInternalState,
    sys: &S,
    cfg: &BaselineConfig,
    opts: &RunOptions,
) -> Result<RunRecord> {
    let counted = Counting::new(sys);
    let pot = PendulumSplit { sys: &counted, eps: cfg.eps };
    let c0 = to_cartesian(state0)?;
    let polar = |q: &[f64], p: &[f64]| to_internal(&PendulumCartesianState { qx: q[0], qy: q[1], px: p[0], py: p[1] });
    let (times, series, last, steps) =
        run_flat(&pot, vec![c0.qx, c0.qy], vec![c0.px, c0.py], cfg, opts, PENDULUM_OBSERVABLES.len(), |q, p| {
            let st = polar(q, p)?;
            Ok(vec![energy_pendulum(&counted, &st, cfg.eps)?, pendulum_invariant(&st, cfg.eps)])
        })?;
    // Keep the angle continuous with the initial one.
    let mut fin = polar(&last.q, &last.p)?;
    let turns = ((state0.a - fin.a) / std::f64::consts::TAU).round();
    fin.a += turns * std::f64::consts::TAU;
    Ok(RunRecord {
        times,
        names: PENDULUM_OBSERVABLES.iter().map(|s| s.to_string()).collect(),
        series,
        final_state: FinalState::Pendulum(fin),
        steps,
        slow_gradient_calls: counted.calls(),
        iterations: IterationStats::default(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hj_pendulum::PendulumInternalState;
    use crate::systems::{elastic_pendulum, fpu_modified, quartic_multi};
    use crate::verify::gradient_check;

    /// One slow coordinate coupled to one fast oscillator of constant frequency.
    struct Harmonic {
        omega: f64,
        eps: f64,
    }

    impl SplitPotential for Harmonic {
        fn dim(&self) -> usize {
            2
        }
        fn slow_value(&self, q: &[f64]) -> f64 {
            q[0].powi(4) / 4.0 + q[0] * q[1]
        }
        fn slow_grad(&self, q: &[f64], out: &mut [f64]) {
            out[0] = q[0].powi(3) + q[1];
            out[1] = q[0];
        }
        fn fast_value(&self, q: &[f64]) -> f64 {
            0.5 * (self.omega / self.eps).powi(2) * q[1] * q[1]
        }
        fn fast_grad(&self, q: &[f64], out: &mut [f64]) {
            out[0] = 0.0;
            out[1] = (self.omega / self.eps).powi(2) * q[1];
        }
        fn fast_hess(&self, _: &[f64], out: &mut [f64]) {
            out.fill(0.0);
            out[3] = (self.omega / self.eps).powi(2);
        }
    }

    fn check_split<P: SplitPotential>(pot: &P, q: &[f64]) {
        let err = gradient_check(|x| pot.slow_value(x), |x| {
            let mut g = vec![0.0; x.len()];
            pot.slow_grad(x, &mut g);
            g
        }, q, 1e-6);
        assert!(err < 1e-6, "slow gradient {err}");
        let err = gradient_check(|x| pot.fast_value(x), |x| {
            let mut g = vec![0.0; x.len()];
            pot.fast_grad(x, &mut g);
            g
        }, q, 1e-6);
        assert!(err < 1e-6, "fast gradient {err}");
        let n = q.len();
        let mut hess = vec![0.0; n * n];
        pot.fast_hess(q, &mut hess);
        for j in 0..n {
            let err = gradient_check(|x| {
                let mut g = vec![0.0; n];
                pot.fast_grad(x, &mut g);
                g[j]
            }, |_| hess[j * n..(j + 1) * n].to_vec(), q, 1e-6);
            assert!(err < 1e-6, "fast hessian row {j}: {err}");
        }
    }

    #[test]
    fn split_adapters_are_consistent() {
        let fpu = fpu_modified();
        check_split(&ScalarSplit { sys: &fpu, eps: 0.3 }, &[0.4, -0.7, 1.1, 0.2, -0.1, 0.05]);
        let q4 = quartic_multi(4).unwrap();
        check_split(&MatrixSplit::new(&q4, 0.5), &[0.8, 0.1, -0.2, 0.15, 0.05]);
        let pend = elastic_pendulum();
        check_split(&PendulumSplit { sys: &pend, eps: 0.2 }, &[0.7, -0.9]);
    }

    #[test]
    fn verlet_is_time_reversible() {
        let fpu = fpu_modified();
        let pot = ScalarSplit { sys: &fpu, eps: 0.1 };
        let (mut q, mut p) = (vec![0.3, -0.2, 0.9, 0.01, 0.02, -0.01], vec![0.5, 0.1, -0.4, 0.3, -0.2, 0.1]);
        let (q0, p0) = (q.clone(), p.clone());
        let mut f = vec![0.0; 6];
        total_force(&pot, &q, &mut f);
        for dt in [1e-3, -1e-3] {
            for _ in 0..200 {
                verlet_step(&mut q, &mut p, &mut f, dt, |x, out| total_force(&pot, x, out));
            }
        }
        assert!(crate::phase::max_abs_diff(&q, &q0) < 1e-12);
        assert!(crate::phase::max_abs_diff(&p, &p0) < 1e-12);
    }

    #[test]
    fn averaging_of_harmonic_motion() {
        let (omega, eps, h) = (1.3, 0.01, 0.05);
        let pot = Harmonic { omega, eps };
        let mts = MtsConfig::new(h, eps, true).with_inner_dt(1e-5);
        let q = [0.7, 0.02];
        let (avg, jac) = averaging_map(&pot, &q, &mts);
        let theta = omega * h / eps;
        let sinc = theta.sin() / theta;
        assert!((avg[0] - q[0]).abs() < 1e-12);
        assert!((avg[1] - q[1] * sinc).abs() < 1e-6 * q[1].abs());
        assert!((jac[(1, 1)] - sinc).abs() < 1e-6);
        assert!((jac[(0, 0)] - 1.0).abs() < 1e-12);
        assert_eq!(jac[(0, 1)], 0.0);
    }

    #[test]
    fn averaging_jacobian_matches_differences() {
        let fpu = fpu_modified();
        let pot = ScalarSplit { sys: &fpu, eps: 0.05 };
        let mts = MtsConfig::new(0.02, 0.05, true);
        let q = [0.4, -0.3, 0.8, 0.01, -0.02, 0.015];
        let (_, jac) = averaging_map(&pot, &q, &mts);
        let fd = crate::verify::jacobian_fd(|x| Ok(averaging_map(&pot, x, &mts).0), &q, 1e-7).unwrap();
        assert!(jac.max_abs_diff(&fd) < 1e-6, "{}", jac.max_abs_diff(&fd));
    }

    #[test]
    fn substeps_tolerate_rounding() {
        assert_eq!(MtsConfig::new(0.01, 1.0, false).substeps(), 1);
        assert_eq!(MtsConfig { macro_h: 0.01, inner_dt: 0.001, mollify: false }.substeps(), 10);
        assert_eq!(MtsConfig { macro_h: 0.0105, inner_dt: 0.001, mollify: false }.substeps(), 11);
        assert!(MtsConfig { macro_h: 0.01, inner_dt: 0.0, mollify: false }.validate().is_err());
    }

    #[test]
    fn pendulum_baseline_keeps_angle_continuous() {
        let pend = elastic_pendulum();
        let st = PendulumInternalState { a: 7.0, r: 0.0, p_a: 0.0, p_r: 0.0 };
        let cfg = BaselineConfig::new(Baseline::Verlet, 0.05, 1e-3);
        let rec = run_pendulum(&st, &pend, &cfg, &RunOptions::new(0.01, 1)).unwrap();
        let fin = rec.final_pendulum().unwrap();
        assert!((fin.a - 7.0).abs() < 1e-3, "{}", fin.a);
    }
}
