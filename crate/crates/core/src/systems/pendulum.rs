use super::PendulumSystem;
use crate::hj_pendulum::PendulumInternalState;

/// Angle potential `W(a) = cos^2 a`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct ElasticPendulum;

pub fn elastic_pendulum() -> ElasticPendulum {
    ElasticPendulum
}

impl PendulumSystem for ElasticPendulum {
    fn w(&self, a: f64) -> f64 {
        let c = a.cos();
        c * c
    }

    fn wp(&self, a: f64) -> f64 {
        -(2.0 * a).sin()
    }

    fn wpp(&self, a: f64) -> f64 {
        -2.0 * (2.0 * a).cos()
    }
}

/// `a = 1`, `p_a = 0.5`, `r = eps`, `p_r = 1`, so that the radial action is 1.
pub fn pendulum_initial_state(eps: f64) -> PendulumInternalState {
    PendulumInternalState { a: 1.0, r: eps, p_a: 0.5, p_r: 1.0 }
}
