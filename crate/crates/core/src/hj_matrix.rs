//! Preconditioned symplectic schemes for a constant block-diagonal
//! frequency matrix `Omega = diag(omega_i Id_{m_i})`, resonant or not: the
//! first-order step, its adjoint and the symmetric second-order
//! composition.

use serde::{Deserialize, Serialize};
use smallvec::SmallVec;

use crate::config::IntegratorConfig;
use crate::error::{Error, Result};
use crate::fixedpoint::solve_fixed_point;
use crate::phase::SlowFastState;
use crate::record::{drive, step_count, FinalState, IterationStats, RunOptions, RunRecord};
use crate::systems::{actions_multi, energy_multi, invariants_multi, Counting, MatrixFreqSystem};

type Buf = SmallVec<[f64; 8]>;

/// Fast variables in the frame rotating with the free fast flow:
/// `q2 = cos(tau) x2 + (eps/omega) sin(tau) y2`,
/// `p2 = -(omega/eps) sin(tau) x2 + cos(tau) y2`, `tau = omega t_phase / eps`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RotatingMatrixState {
    pub q1: Vec<f64>,
    pub x2: Vec<f64>,
    pub p1: Vec<f64>,
    pub y2: Vec<f64>,
    pub t_phase: f64,
}

/// Applies the free fast flow over time `t` to `(q2, p2)` in place.
fn rotate(freqs: &[f64], eps: f64, t: f64, q2: &mut [f64], p2: &mut [f64]) {
    for ((w, q), p) in freqs.iter().zip(q2.iter_mut()).zip(p2.iter_mut()) {
        let (s, c) = (w * t / eps).sin_cos();
        let (x, y) = (*q, *p);
        *q = c * x + eps / w * s * y;
        *p = -w / eps * s * x + c * y;
    }
}

pub fn from_rotating<S: MatrixFreqSystem + ?Sized>(rs: &RotatingMatrixState, sys: &S, eps: f64) -> SlowFastState {
    let mut q2 = rs.x2.clone();
    let mut p2 = rs.y2.clone();
    rotate(&sys.coordinate_frequencies(), eps, rs.t_phase, &mut q2, &mut p2);
    SlowFastState::new(rs.q1.clone(), q2, rs.p1.clone(), p2)
}

pub fn to_rotating<S: MatrixFreqSystem + ?Sized>(
    st: &SlowFastState,
    sys: &S,
    eps: f64,
    t_phase: f64,
) -> RotatingMatrixState {
    let mut x2 = st.q2.clone();
    let mut y2 = st.p2.clone();
    rotate(&sys.coordinate_frequencies(), eps, -t_phase, &mut x2, &mut y2);
    RotatingMatrixState { q1: st.q1.clone(), x2, p1: st.p1.clone(), y2, t_phase }
}

/// Per-group data that stays fixed during one step.
struct GroupFrame {
    offset: usize,
    m: usize,
    omega: f64,
    sin_t: f64,
    cos_t: f64,
    /// `r_i = omega_i x2_i / eps`.
    r: Buf,
    /// `Hess2_i(q1) x2_i`.
    hess_x: Buf,
    hess: Buf,
    /// Row-major `s x m` mixed derivative at `q1`.
    mix0: Buf,
    third_r: Buf,
}

/// `out += scale * M v` for a row-major `s x m` block.
fn add_mat_vec(out: &mut [f64], mat: &[f64], v: &[f64], scale: f64) {
    let m = v.len();
    for (a, o) in out.iter_mut().enumerate() {
        let row = &mat[a * m..(a + 1) * m];
        *o += scale * row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
    }
}

/// Steps 1-4 of the scheme, without the final rotation. Returns
/// `(Q1, X2, P1, Y2)` and the number of fixed-point iterations.
fn preconditioned_map<S: MatrixFreqSystem + ?Sized>(
    st: &SlowFastState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(SlowFastState, usize)> {
    let (h, eps) = (cfg.h, cfg.eps);
    let eps2 = eps * eps;
    let (s, f) = (st.slow_dim(), st.fast_dim());
    let (q1, x2, p1, y2) = (&st.q1, &st.q2, &st.p1, &st.p2);

    let mut g1: Buf = SmallVec::from_elem(0.0, s);
    let mut g2: Buf = SmallVec::from_elem(0.0, f);
    sys.grad_at_zero(q1, &mut g1, &mut g2);

    let offsets = sys.group_offsets();
    let groups: Vec<GroupFrame> = sys
        .groups()
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let (off, m, w) = (offsets[i], g.multiplicity, g.omega);
            let (sin_t, cos_t) = (w * h / eps).sin_cos();
            let r: Buf = x2[off..off + m].iter().map(|x| w * x / eps).collect();
            let mut hess: Buf = SmallVec::from_elem(0.0, m * m);
            sys.hess2_block(i, q1, &mut hess);
            let mut hess_x: Buf = SmallVec::from_elem(0.0, m);
            add_mat_vec(&mut hess_x, &hess, &x2[off..off + m], 1.0);
            let mut mix0: Buf = SmallVec::from_elem(0.0, s * m);
            sys.mix12_block(i, q1, &mut mix0);
            let mut third_r: Buf = SmallVec::from_elem(0.0, s);
            sys.third_block(i, q1, &r, &mut third_r);
            GroupFrame { offset: off, m, omega: w, sin_t, cos_t, r, hess_x, hess, mix0, third_r }
        })
        .collect();

    // Terms of the P1 equation that depend on neither unknown.
    let mut p_const: Buf = p1.iter().zip(&g1).map(|(p, g)| p - h * g).collect();
    for gf in &groups {
        let scale = h * eps2 / (gf.omega * gf.omega);
        add_mat_vec(&mut p_const, &gf.mix0, &g2[gf.offset..gf.offset + gf.m], scale);
        for (o, t) in p_const.iter_mut().zip(&gf.third_r) {
            *o -= scale / 4.0 * t;
        }
    }

    // Quantities evaluated at q1 + h P1; one slow-gradient call.
    let at_end = |p1_new: &[f64]| -> (Buf, Buf, Vec<Buf>) {
        let qe: Buf = q1.iter().zip(p1_new).map(|(q, p)| q + h * p).collect();
        let mut g1e: Buf = SmallVec::from_elem(0.0, s);
        let mut g2e: Buf = SmallVec::from_elem(0.0, f);
        sys.grad_at_zero(&qe, &mut g1e, &mut g2e);
        let mixe = groups
            .iter()
            .enumerate()
            .map(|(i, gf)| {
                let mut m: Buf = SmallVec::from_elem(0.0, s * gf.m);
                sys.mix12_block(i, &qe, &mut m);
                m
            })
            .collect();
        (qe, g2e, mixe)
    };
    // sin(tau_i) r_i - cos(tau_i) Y2_i
    let phase_mix = |gf: &GroupFrame, y: &[f64]| -> Buf {
        gf.r.iter().zip(y).map(|(r, y)| gf.sin_t * r - gf.cos_t * y).collect()
    };

    let mut z = Vec::with_capacity(s + f);
    z.extend_from_slice(p1);
    z.extend_from_slice(y2);
    let fp = solve_fixed_point(
        &z,
        |zz, out| {
            let (pp, yy) = zz.split_at(s);
            let (_, g2e, mixe) = at_end(pp);
            let (out_p, out_y) = out.split_at_mut(s);
            for (o, (c, p)) in out_p.iter_mut().zip(p_const.iter().zip(p1)) {
                *o = c - p;
            }
            for (i, (gf, mix_e)) in groups.iter().zip(&mixe).enumerate() {
                let blk = gf.offset..gf.offset + gf.m;
                let yi = &yy[blk.clone()];
                let scale = eps2 / (gf.omega * gf.omega);
                add_mat_vec(out_p, &gf.mix0, yi, -scale);
                add_mat_vec(out_p, mix_e, &phase_mix(gf, yi), -scale);
                let mut third_y: Buf = SmallVec::from_elem(0.0, s);
                sys.third_block(i, q1, yi, &mut third_y);
                for (o, t) in out_p.iter_mut().zip(&third_y) {
                    *o -= h * scale / 4.0 * t;
                }
                for (k, j) in blk.enumerate() {
                    out_y[j] = -0.5 * h * gf.hess_x[k] - eps * gf.sin_t / gf.omega * g2e[j];
                }
            }
            Ok(())
        },
        cfg.fp_rel_tol,
        cfg.fp_max_iter,
    )?
    .into_converged()?;

    let (p1_new, y2_new) = fp.solution.split_at(s);
    let (_, g2e, mixe) = at_end(p1_new);
    let mut q1_new: Buf = q1.iter().zip(p1_new).map(|(q, p)| q + h * p).collect();
    let mut x2_new = x2.clone();
    for (gf, mix_e) in groups.iter().zip(&mixe) {
        let blk = gf.offset..gf.offset + gf.m;
        let yi = &y2_new[blk.clone()];
        let scale = eps2 / (gf.omega * gf.omega);
        add_mat_vec(&mut q1_new, mix_e, &phase_mix(gf, yi), h * scale);
        let mut hess_y: Buf = SmallVec::from_elem(0.0, gf.m);
        add_mat_vec(&mut hess_y, &gf.hess, yi, 1.0);
        for (k, j) in blk.enumerate() {
            x2_new[j] += scale * (g2[j] + 0.5 * h * hess_y[k] - gf.cos_t * g2e[j]);
        }
    }
    let out = SlowFastState::new(q1_new.to_vec(), x2_new, p1_new.to_vec(), y2_new.to_vec());
    if !out.is_finite() {
        return Err(Error::NonFinite("matrix-frequency step"));
    }
    Ok((out, fp.iterations))
}

/// One first-order step. Slow-gradient evaluations: `iterations + 2`.
pub fn step_forward<S: MatrixFreqSystem + ?Sized>(
    st: &SlowFastState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(SlowFastState, usize)> {
    let (phi, it) = preconditioned_map(st, sys, cfg)?;
    let rs = RotatingMatrixState { q1: phi.q1, x2: phi.q2, p1: phi.p1, y2: phi.p2, t_phase: cfg.h };
    Ok((from_rotating(&rs, sys, cfg.eps), it))
}

/// Adjoint step `(Psi_{-h})^{-1}`.
///
/// Writing `Psi_{-h} = R_{-h} o phi_{-h}` with `R` the free rotation,
/// the result `Z` solves `phi_{-h}(Z) = R_h(st)`, iterated as
/// `Z <- w - (phi_{-h}(Z) - Z)`. Returns the number of outer iterations.
pub fn step_adjoint<S: MatrixFreqSystem + ?Sized>(
    st: &SlowFastState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(SlowFastState, usize)> {
    let (s, f) = (st.slow_dim(), st.fast_dim());
    let freqs = sys.coordinate_frequencies();
    let mut w = st.clone();
    rotate(&freqs, cfg.eps, cfg.h, &mut w.q2, &mut w.p2);
    let w_flat = w.to_flat();
    let back = cfg.with_h(-cfg.h);
    let fp = solve_fixed_point(
        &w_flat,
        |z, out| {
            let (img, _) = preconditioned_map(&SlowFastState::from_flat(s, f, z), sys, &back)?;
            for (o, (i, zi)) in out.iter_mut().zip(img.to_flat().iter().zip(z)) {
                *o = zi - i;
            }
            Ok(())
        },
        cfg.fp_rel_tol,
        cfg.fp_max_iter,
    )?
    .into_converged()?;
    Ok((SlowFastState::from_flat(s, f, &fp.solution), fp.iterations))
}

/// Forward half step followed by an adjoint half step.
pub fn step_symmetric<S: MatrixFreqSystem + ?Sized>(
    st: &SlowFastState,
    sys: &S,
    cfg: &IntegratorConfig,
) -> Result<(SlowFastState, usize)> {
    let half = cfg.with_h(cfg.h / 2.0);
    let (mid, it1) = step_forward(st, sys, &half)?;
    let (end, it2) = step_adjoint(&mid, sys, &half)?;
    Ok((end, it1 + it2))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum MatrixScheme {
    Forward,
    Symmetric,
}

/// Observable names: energy, invariants present for this system, then the
/// per-coordinate actions. The frequency-2 block is a single coordinate,
/// so its invariant is the action column `I4` rather than a separate one.
pub fn matrix_observable_names<S: MatrixFreqSystem + ?Sized>(sys: &S, eps: f64) -> Vec<String> {
    let probe = SlowFastState::zeros(sys.slow_dim(), sys.fast_dim());
    let inv = invariants_multi(sys, &probe, eps);
    let mut names = vec!["H".to_string(), "I".to_string(), "I_sqrt2".to_string()];
    if inv.resonant_sum.is_some() {
        names.push("I124".into());
    }
    names.extend((1..=sys.fast_dim()).map(|j| format!("I{j}")));
    names
}

pub(crate) fn matrix_observables<S: MatrixFreqSystem + ?Sized>(sys: &S, st: &SlowFastState, eps: f64) -> Vec<f64> {
    let inv = invariants_multi(sys, st, eps);
    let mut v = vec![energy_multi(sys, st, eps), inv.total, inv.sqrt2];
    v.extend(inv.resonant_sum);
    v.extend(actions_multi(sys, st, eps));
    v
}

pub fn run<S: MatrixFreqSystem + ?Sized>(
    state0: &SlowFastState,
    sys: &S,
    cfg: &IntegratorConfig,
    opts: &RunOptions,
    scheme: MatrixScheme,
) -> Result<RunRecord> {
    cfg.validate()?;
    let n_steps = step_count(opts.t_max, cfg.h)?;
    let counted = Counting::new(sys);
    let eps = cfg.eps;
    let names = matrix_observable_names(sys, eps);
    let mut stats = IterationStats::default();
    let d = drive(
        state0.clone(),
        n_steps,
        opts.sample_every,
        cfg.h,
        names.len(),
        |st| Ok(matrix_observables(&counted, st, eps)),
        |st| {
            let (next, it) = match scheme {
                MatrixScheme::Forward => step_forward(st, &counted, cfg)?,
                MatrixScheme::Symmetric => step_symmetric(st, &counted, cfg)?,
            };
            stats.record(it);
            *st = next;
            Ok(())
        },
    )?;
    Ok(RunRecord {
        times: d.times,
        names,
        series: d.series,
        final_state: FinalState::SlowFast(d.state),
        steps: d.steps,
        slow_gradient_calls: counted.calls(),
        iterations: stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::phase::max_abs_diff;
    use crate::systems::{quartic_initial_state, quartic_multi, Counting};

    fn setup(n: usize) -> (crate::systems::QuarticMulti, SlowFastState, IntegratorConfig) {
        let sys = quartic_multi(n).unwrap();
        let eps = 1.0 / 70.0;
        let st = quartic_initial_state(&sys, eps);
        (sys, st, IntegratorConfig::new(eps, 10.0 * eps).with_tol(1e-14))
    }

    #[test]
    fn rotating_frame_round_trip() {
        let (sys, st, cfg) = setup(4);
        let rs = to_rotating(&st, &sys, cfg.eps, 0.3);
        assert_eq!(rs.t_phase, 0.3);
        let back = from_rotating(&rs, &sys, cfg.eps);
        assert!(max_abs_diff(&back.to_flat(), &st.to_flat()) < 1e-14);
    }

    #[test]
    fn forward_call_count() {
        let (sys, st, cfg) = setup(3);
        let counted = Counting::new(&sys);
        let (_, it) = step_forward(&st, &counted, &cfg).unwrap();
        assert_eq!(counted.calls(), it as u64 + 2);
    }

    #[test]
    fn adjoint_inverts_the_reversed_step() {
        for n in [3, 4] {
            let (sys, st, cfg) = setup(n);
            let (adj, _) = step_adjoint(&st, &sys, &cfg).unwrap();
            let (back, _) = step_forward(&adj, &sys, &cfg.with_h(-cfg.h)).unwrap();
            assert!(max_abs_diff(&back.to_flat(), &st.to_flat()) < 1e-11);
        }
    }

    #[test]
    fn symmetric_step_is_time_reversible() {
        let (sys, st, cfg) = setup(3);
        let (mid, _) = step_symmetric(&st, &sys, &cfg).unwrap();
        let (back, _) = step_symmetric(&mid, &sys, &cfg.with_h(-cfg.h)).unwrap();
        assert!(max_abs_diff(&back.to_flat(), &st.to_flat()) < 1e-10);
    }

    #[test]
    fn observable_names_follow_the_system() {
        let (q3, _, cfg) = setup(3);
        assert_eq!(matrix_observable_names(&q3, cfg.eps), ["H", "I", "I_sqrt2", "I1", "I2", "I3"]);
        let (q4, st, cfg) = setup(4);
        let names = matrix_observable_names(&q4, cfg.eps);
        assert_eq!(names, ["H", "I", "I_sqrt2", "I124", "I1", "I2", "I3", "I4"]);
        let inv = invariants_multi(&q4, &st, cfg.eps);
        let values = matrix_observables(&q4, &st, cfg.eps);
        assert_eq!(inv.i4, Some(values[7]));
        assert_eq!(matrix_observables(&q4, &st, cfg.eps).len(), names.len());
    }
}
