use super::ScalarFreqSystem;
use crate::phase::SlowFastState;

/// Fermi-Pasta-Ulam chain with three stiff and four soft springs, modified
/// so that the stiff frequency `Omega(q1) = sqrt(1 + q1_1^2)` varies with
/// the slow positions.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ModifiedFpu;

pub fn fpu_modified() -> ModifiedFpu {
    ModifiedFpu
}

/// Soft-spring elongations `d_k`; `V = sum d_k^4 / 4`.
#[inline]
fn elongations(q1: &[f64], q2: &[f64]) -> [f64; 4] {
    [
        q1[0] - q2[0],
        q1[1] - q2[1] - q1[0] - q2[0],
        q1[2] - q2[2] - q1[1] - q2[1],
        q1[2] + q2[2],
    ]
}

impl ScalarFreqSystem for ModifiedFpu {
    fn slow_dim(&self) -> usize {
        3
    }

    fn fast_dim(&self) -> usize {
        3
    }

    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64 {
        elongations(q1, q2).iter().map(|d| d.powi(4)).sum::<f64>() / 4.0
    }

    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        let [d0, d1, d2, d3] = elongations(q1, q2).map(|d| d * d * d);
        g1[0] = d0 - d1;
        g1[1] = d1 - d2;
        g1[2] = d2 + d3;
        g2[0] = -d0 - d1;
        g2[1] = -d1 - d2;
        g2[2] = -d2 + d3;
    }

    fn omega(&self, q1: &[f64]) -> f64 {
        (1.0 + q1[0] * q1[0]).sqrt()
    }

    fn omega_grad(&self, q1: &[f64], out: &mut [f64]) {
        out[0] = q1[0] / self.omega(q1);
        out[1] = 0.0;
        out[2] = 0.0;
    }

    fn omega_hess(&self, q1: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        out[0] = self.omega(q1).powi(-3);
    }
}

/// `q1 = (1,0,0)`, `p1 = (1,0,0)`, `q2 = (eps,0,0)`, `p2 = (1,0,0)`.
pub fn fpu_initial_state(eps: f64) -> SlowFastState {
    SlowFastState::new(
        vec![1.0, 0.0, 0.0],
        vec![eps, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
        vec![1.0, 0.0, 0.0],
    )
}
