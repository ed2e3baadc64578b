//! Schemes for the extensible pendulum with a stiff radial spring: the
//! one-step map, its explicit adjoint and their symmetric composition.

use serde::{Deserialize, Serialize};

use crate::config::IntegratorConfig;
use crate::error::{Error, Result};
use crate::fixedpoint::solve_fixed_point;
use crate::record::{drive, step_count, FinalState, IterationStats, RunOptions, RunRecord};
use crate::systems::{energy_pendulum, pendulum_invariant, Counting, PendulumSystem};

/// Smallest admissible `1 + r` during a run.
pub const MIN_RADIUS: f64 = 0.1;

/// Polar coordinates: angle `a`, radial displacement `r = |q| - 1` and
/// their conjugate momenta.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumInternalState {
    pub a: f64,
    pub r: f64,
    pub p_a: f64,
    pub p_r: f64,
}

impl PendulumInternalState {
    /// `(a, r, p_a, p_r)`: positions then momenta.
    pub fn to_array(&self) -> [f64; 4] {
        [self.a, self.r, self.p_a, self.p_r]
    }

    pub fn from_slice(z: &[f64]) -> Self {
        Self { a: z[0], r: z[1], p_a: z[2], p_r: z[3] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|x| x.is_finite())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PendulumCartesianState {
    pub qx: f64,
    pub qy: f64,
    pub px: f64,
    pub py: f64,
}

impl PendulumCartesianState {
    pub fn to_array(&self) -> [f64; 4] {
        [self.qx, self.qy, self.px, self.py]
    }

    pub fn from_slice(z: &[f64]) -> Self {
        Self { qx: z[0], qy: z[1], px: z[2], py: z[3] }
    }
}

pub fn to_internal(c: &PendulumCartesianState) -> Result<PendulumInternalState> {
    let rbar = c.qx.hypot(c.qy);
    if !(rbar > 0.0) {
        return Err(Error::Domain("pendulum bob at the pivot".into()));
    }
    let a = c.qy.atan2(c.qx);
    let (sa, ca) = a.sin_cos();
    Ok(PendulumInternalState {
        a,
        r: rbar - 1.0,
        p_a: rbar * (-c.px * sa + c.py * ca),
        p_r: c.px * ca + c.py * sa,
    })
}

pub fn to_cartesian(s: &PendulumInternalState) -> Result<PendulumCartesianState> {
    let rbar = 1.0 + s.r;
    if !(rbar > 0.0) {
        return Err(Error::Domain(format!("radius 1 + r = {rbar} is not positive")));
    }
    let (sa, ca) = s.a.sin_cos();
    Ok(PendulumCartesianState {
        qx: rbar * ca,
        qy: rbar * sa,
        px: s.p_r * ca - s.p_a / rbar * sa,
        py: s.p_r * sa + s.p_a / rbar * ca,
    })
}

/// One step of the first-order scheme. Returns the new state and the
/// number of fixed-point iterations on `P_a`.
pub fn step_pendulum<S: PendulumSystem + ?Sized>(
    st: &PendulumInternalState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(PendulumInternalState, usize)> {
    let (pre, it) = step_unrotated(st, sys, cfg)?;
    finite(rotate_radial(&pre, cfg.eps, cfg.h), it)
}

/// Rotates `(r/eps, p_r)` by the angle `t/eps`, as the free radial flow
/// over time `t` does.
fn rotate_radial(st: &PendulumInternalState, eps: f64, t: f64) -> PendulumInternalState {
    let (s, c) = (t / eps).sin_cos();
    let b = st.r / eps;
    PendulumInternalState { a: st.a, r: eps * (b * c + st.p_r * s), p_a: st.p_a, p_r: -b * s + st.p_r * c }
}

/// Steps 1-4 of the scheme: `(A, eps B, P_a, P_b)` before the final rotation.
fn step_unrotated<S: PendulumSystem + ?Sized>(
    st: &PendulumInternalState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(PendulumInternalState, usize)> {
    let (h, eps) = (cfg.h, cfg.eps);
    let tau = h / eps;
    let (st_, ct) = tau.sin_cos();
    let b = st.r / eps;
    let p_b = st.p_r;
    let wp = sys.wp(st.a);
    let wpp = sys.wpp(st.a);
    let eps2 = eps * eps;

    let momentum_b = |pa: f64| {
        let u = pa + h * wp;
        p_b + eps * pa * pa * st_ - 1.5 * h * eps * b * u * u
    };
    let bracket = |u: f64, pb: f64| 1.5 * (b * b + pb * pb) * u - 2.0 * u * u * u;

    let fp = solve_fixed_point(
        &[st.p_a],
        |z, out| {
            let pa = z[0];
            let u = pa + h * wp;
            let pb = momentum_b(pa);
            out[0] = -h * wp + 2.0 * h * eps2 * pb * u * wpp - h * h * eps2 * bracket(u, pb) * wpp;
            Ok(())
        },
        cfg.fp_rel_tol,
        cfg.fp_max_iter,
    )?
    .into_converged()?;

    let pa = fp.solution[0];
    let u = pa + h * wp;
    let pb = momentum_b(pa);
    let a_new = st.a + h * pa + 2.0 * eps2 * pa * (pb * ct - b * st_) - 2.0 * eps2 * pb * u
        + h * eps2 * bracket(u, pb);
    let b_new = b + eps * pa * pa * ct - eps * u * u + 1.5 * h * eps * pb * u * u;
    Ok((PendulumInternalState { a: a_new, r: eps * b_new, p_a: pa, p_r: pb }, fp.iterations))
}

/// The adjoint of [`step_pendulum`], `(Psi_{-h})^{-1}`, in explicit form.
/// The implicit part is a joint fixed point on `(A, B)`.
pub fn step_pendulum_adjoint<S: PendulumSystem + ?Sized>(
    st: &PendulumInternalState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(PendulumInternalState, usize)> {
    let (h, eps) = (cfg.h, cfg.eps);
    let tau = h / eps;
    let (st_, ct) = tau.sin_cos();
    let eps2 = eps * eps;
    let (a, pa) = (st.a, st.p_a);
    let b = st.r / eps * ct + st.p_r * st_;
    let pb = -st.r / eps * st_ + st.p_r * ct;
    let bracket = |v: f64, bb: f64| 1.5 * (bb * bb + pb * pb) * v - 2.0 * v * v * v;

    // Z = (A, B) = (a, b) + rhs(Z)
    let fp = solve_fixed_point(
        &[a, b],
        |z, out| {
            let (aa, bb) = (z[0], z[1]);
            let v = pa - h * sys.wp(aa);
            out[0] = h * pa - 2.0 * eps2 * pa * (pb * ct + bb * st_) + 2.0 * eps2 * pb * v
                + h * eps2 * bracket(v, bb);
            out[1] = -eps * pa * pa * ct + eps * v * v + 1.5 * h * eps * pb * v * v;
            Ok(())
        },
        cfg.fp_rel_tol,
        cfg.fp_max_iter,
    )?
    .into_converged()?;

    let (aa, bb) = (fp.solution[0], fp.solution[1]);
    let wp = sys.wp(aa);
    let wpp = sys.wpp(aa);
    let v = pa - h * wp;
    let pb_new = pb + eps * pa * pa * st_ - 1.5 * h * eps * bb * v * v;
    let pa_new = pa - h * wp + 2.0 * h * eps2 * pb * v * wpp + h * h * eps2 * bracket(v, bb) * wpp;
    let out = PendulumInternalState { a: aa, r: eps * bb, p_a: pa_new, p_r: pb_new };
    finite(out, fp.iterations)
}

/// Half a step of [`step_pendulum`] followed by half a step of its adjoint.
pub fn step_pendulum_symmetric<S: PendulumSystem + ?Sized>(
    st: &PendulumInternalState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(PendulumInternalState, usize)> {
    let half = cfg.with_h(cfg.h / 2.0);
    let (mid, it1) = step_pendulum(st, sys, &half)?;
    let (end, it2) = step_pendulum_adjoint(&mid, sys, &half)?;
    Ok((end, it1 + it2))
}

/// Numerical inverse of `step_pendulum` at `-h`, used to cross-check the
/// explicit adjoint. With `Psi_{-h} = R_{-h} o phi_{-h}`, solves
/// `phi_{-h}(Z) = R_h(st)` by fixed-point iteration on the whole state.
pub fn inverse_of_reversed_step<S: PendulumSystem + ?Sized>(
    st: &PendulumInternalState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<PendulumInternalState> {
    let back = cfg.with_h(-cfg.h);
    let target = rotate_radial(st, cfg.eps, cfg.h).to_array();
    let fp = solve_fixed_point(
        &target,
        |z, out| {
            let (img, _) = step_unrotated(&PendulumInternalState::from_slice(z), sys, &back)?;
            for (o, (i, zi)) in out.iter_mut().zip(img.to_array().iter().zip(z)) {
                *o = zi - i;
            }
            Ok(())
        },
        cfg.fp_rel_tol,
        cfg.fp_max_iter,
    )?
    .into_converged()?;
    Ok(PendulumInternalState::from_slice(&fp.solution))
}

fn finite(st: PendulumInternalState, iterations: usize) -> Result<(PendulumInternalState, usize)> {
    if st.is_finite() {
        Ok((st, iterations))
    } else {
        Err(Error::NonFinite("pendulum step"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PendulumScheme {
    Forward,
    Symmetric,
}

pub const PENDULUM_OBSERVABLES: [&str; 2] = ["H", "I"];

/// Integrates from `st0` and records the energy and the radial action.
pub fn run<S: PendulumSystem + ?Sized>(
    st0: &PendulumInternalState,
    sys: &S,
    cfg: &IntegratorConfig,
    opts: &RunOptions,
    scheme: PendulumScheme,
) -> Result<RunRecord> {
    cfg.validate()?;
    let n_steps = step_count(opts.t_max, cfg.h)?;
    let counted = Counting::new(sys);
    let mut stats = IterationStats::default();
    let eps = cfg.eps;
    let d = drive(
        *st0,
        n_steps,
        opts.sample_every,
        cfg.h,
        PENDULUM_OBSERVABLES.len(),
        |s| Ok(vec![energy_pendulum(&counted, s, eps)?, pendulum_invariant(s, eps)]),
        |s| {
            let (next, it) = match scheme {
                PendulumScheme::Forward => step_pendulum(s, &counted, cfg)?,
                PendulumScheme::Symmetric => step_pendulum_symmetric(s, &counted, cfg)?,
            };
            if !(1.0 + next.r > MIN_RADIUS) {
                return Err(Error::Domain(format!("pendulum radius 1 + r = {} collapsed", 1.0 + next.r)));
            }
            stats.record(it);
            *s = next;
            Ok(())
        },
    )?;
    Ok(RunRecord {
        times: d.times,
        names: PENDULUM_OBSERVABLES.iter().map(|s| s.to_string()).collect(),
        series: d.series,
        final_state: FinalState::Pendulum(d.state),
        steps: d.steps,
        slow_gradient_calls: counted.calls(),
        iterations: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::systems::{elastic_pendulum, energy_pendulum_cartesian};

    #[test]
    fn unit_circle_tangential_momentum() {
        let c = PendulumCartesianState { qx: 1.0, qy: 0.0, px: 0.0, py: 1.0 };
        let s = to_internal(&c).unwrap();
        assert_eq!(s, PendulumInternalState { a: 0.0, r: 0.0, p_a: 1.0, p_r: 0.0 });
    }

    #[test]
    fn pivot_is_rejected() {
        let c = PendulumCartesianState { qx: 0.0, qy: 0.0, px: 1.0, py: 0.0 };
        assert!(matches!(to_internal(&c), Err(Error::Domain(_))));
    }

    #[test]
    fn coordinate_round_trip_and_energy_agree() {
        let sys = elastic_pendulum();
        let eps = 0.05;
        for k in 0..20 {
            let t = k as f64;
            let s = PendulumInternalState {
                a: (0.37 * t).sin() * 3.0,
                r: 0.02 * (1.3 * t).cos(),
                p_a: (0.71 * t).cos(),
                p_r: (0.29 * t).sin(),
            };
            let c = to_cartesian(&s).unwrap();
            let back = to_internal(&c).unwrap();
            assert!((back.r - s.r).abs() < 1e-14);
            assert!((back.p_a - s.p_a).abs() < 1e-14);
            assert!((back.p_r - s.p_r).abs() < 1e-14);
            assert!(((back.a - s.a).sin()).abs() < 1e-14);
            let hi = energy_pendulum(&sys, &s, eps).unwrap();
            let hc = energy_pendulum_cartesian(&sys, &c, eps).unwrap();
            assert!((hi - hc).abs() < 1e-13 * hi.abs().max(1.0));
        }
    }

    #[test]
    fn symmetric_step_is_time_reversible() {
        let sys = elastic_pendulum();
        let cfg = IntegratorConfig::new(2e-3, 0.02).with_tol(1e-14);
        let s0 = PendulumInternalState { a: 1.0, r: 2e-3, p_a: 0.5, p_r: 1.0 };
        let (s1, _) = step_pendulum_symmetric(&s0, &sys, &cfg).unwrap();
        let (s2, _) = step_pendulum_symmetric(&s1, &sys, &cfg.with_h(-cfg.h)).unwrap();
        for (x, y) in s2.to_array().iter().zip(s0.to_array()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_horizon_run_records_initial_values() {
        let sys = elastic_pendulum();
        let cfg = IntegratorConfig::new(2e-3, 0.02);
        let s0 = crate::systems::pendulum_initial_state(2e-3);
        let rec = run(&s0, &sys, &cfg, &RunOptions::new(0.0, 1), PendulumScheme::Symmetric).unwrap();
        assert_eq!(rec.times, vec![0.0]);
        assert_eq!(rec.series("I").unwrap(), &[1.0]);
        assert_eq!(rec.slow_gradient_calls, 0);
    }
}
