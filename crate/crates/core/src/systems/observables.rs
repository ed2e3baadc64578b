//! Energies, fast actions and adiabatic invariants.

use serde::Serialize;

use super::{MatrixFreqSystem, PendulumSystem, ScalarFreqSystem};
use crate::error::{Error, Result};
use crate::hj_pendulum::{PendulumCartesianState, PendulumInternalState};
use crate::phase::{dot, SlowFastState};

pub fn energy_scalar<S: ScalarFreqSystem + ?Sized>(sys: &S, st: &SlowFastState, eps: f64) -> f64 {
    let om = sys.omega(&st.q1);
    0.5 * dot(&st.p1, &st.p1)
        + 0.5 * dot(&st.p2, &st.p2)
        + sys.potential(&st.q1, &st.q2)
        + om * om * dot(&st.q2, &st.q2) / (2.0 * eps * eps)
}

/// `I_j = (p2_j^2 + Omega^2 q2_j^2 / eps^2) / (2 Omega)`.
pub fn fast_actions<S: ScalarFreqSystem + ?Sized>(sys: &S, st: &SlowFastState, eps: f64) -> Vec<f64> {
    let om = sys.omega(&st.q1);
    st.q2
        .iter()
        .zip(&st.p2)
        .map(|(q, p)| (p * p + om * om * q * q / (eps * eps)) / (2.0 * om))
        .collect()
}

pub fn adiabatic_sum<S: ScalarFreqSystem + ?Sized>(sys: &S, st: &SlowFastState, eps: f64) -> f64 {
    fast_actions(sys, st, eps).iter().sum()
}

pub fn energy_multi<S: MatrixFreqSystem + ?Sized>(sys: &S, st: &SlowFastState, eps: f64) -> f64 {
    let stiff: f64 = sys
        .coordinate_frequencies()
        .iter()
        .zip(&st.q2)
        .map(|(w, q)| w * w * q * q)
        .sum();
    0.5 * dot(&st.p1, &st.p1) + 0.5 * dot(&st.p2, &st.p2) + sys.potential(&st.q1, &st.q2) + stiff / (2.0 * eps * eps)
}

/// Oscillator energy of each fast coordinate, `p_j^2/2 + w_j^2 q_j^2 / (2 eps^2)`.
pub fn actions_multi<S: MatrixFreqSystem + ?Sized>(sys: &S, st: &SlowFastState, eps: f64) -> Vec<f64> {
    sys.coordinate_frequencies()
        .iter()
        .zip(st.q2.iter().zip(&st.p2))
        .map(|(w, (q, p))| 0.5 * p * p + w * w * q * q / (2.0 * eps * eps))
        .collect()
}

/// Adiabatic invariants of a constant-frequency system.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MultiInvariants {
    /// Sum of all fast actions.
    pub total: f64,
    /// Action carried by the frequency-`sqrt 2` block (0 if there is none).
    pub sqrt2: f64,
    /// Action of the frequency-2 block, when present.
    pub i4: Option<f64>,
    /// Frequency-1 plus frequency-2 actions, when both blocks are present.
    pub resonant_sum: Option<f64>,
}

pub fn invariants_multi<S: MatrixFreqSystem + ?Sized>(sys: &S, st: &SlowFastState, eps: f64) -> MultiInvariants {
    let actions = actions_multi(sys, st, eps);
    let total = actions.iter().sum();
    let block = |omega: f64| -> Option<f64> {
        let mut start = 0;
        for g in sys.groups() {
            if (g.omega - omega).abs() < 1e-12 {
                return Some(actions[start..start + g.multiplicity].iter().sum());
            }
            start += g.multiplicity;
        }
        None
    };
    let sqrt2 = block(std::f64::consts::SQRT_2).unwrap_or(0.0);
    let i4 = block(2.0);
    let resonant_sum = i4.and_then(|x| block(1.0).map(|y| x + y));
    MultiInvariants { total, sqrt2, i4, resonant_sum }
}

/// `p_r^2/2 + p_a^2 / (2 (1+r)^2) + r^2 / (2 eps^2) + W(a)`.
pub fn energy_pendulum<S: PendulumSystem + ?Sized>(sys: &S, st: &PendulumInternalState, eps: f64) -> Result<f64> {
    let rbar = 1.0 + st.r;
    if !(rbar > 0.0) {
        return Err(Error::Domain(format!("pendulum radius 1 + r = {rbar} is not positive")));
    }
    Ok(0.5 * st.p_r * st.p_r
        + st.p_a * st.p_a / (2.0 * rbar * rbar)
        + st.r * st.r / (2.0 * eps * eps)
        + sys.w(st.a))
}

/// Radial action `p_r^2/2 + r^2/(2 eps^2)`.
pub fn pendulum_invariant(st: &PendulumInternalState, eps: f64) -> f64 {
    0.5 * st.p_r * st.p_r + st.r * st.r / (2.0 * eps * eps)
}

/// `|p|^2/2 + (|q| - 1)^2 / (2 eps^2) + W(angle of q)`.
pub fn energy_pendulum_cartesian<S: PendulumSystem + ?Sized>(
    sys: &S,
    c: &PendulumCartesianState,
    eps: f64,
) -> Result<f64> {
    let rbar = c.qx.hypot(c.qy);
    if !(rbar > 0.0) {
        return Err(Error::Domain("pendulum bob at the pivot".into()));
    }
    let stretch = rbar - 1.0;
    Ok(0.5 * (c.px * c.px + c.py * c.py) + stretch * stretch / (2.0 * eps * eps) + sys.w(c.qy.atan2(c.qx)))
}
