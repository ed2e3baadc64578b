use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Step-size regime bound `h^2 / eps` above which the fixed-point
/// iteration is no longer expected to contract quickly.
pub const REGIME_BOUND: f64 = 0.4;

/// Parameters shared by every integrator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntegratorConfig {
    /// Stiffness parameter.
    pub eps: f64,
    /// Macro time step.
    pub h: f64,
    /// Relative termination threshold of the fixed-point solves.
    pub fp_rel_tol: f64,
    pub fp_max_iter: usize,
    /// Probe size for finite-difference verification.
    pub fd_delta: f64,
}

impl IntegratorConfig {
    pub fn new(eps: f64, h: f64) -> Self {
        Self {
            eps,
            h,
            fp_rel_tol: 1e-10,
            fp_max_iter: 100,
            fd_delta: 1e-6,
        }
    }

    pub fn with_h(self, h: f64) -> Self {
        Self { h, ..self }
    }

    pub fn with_tol(self, fp_rel_tol: f64) -> Self {
        Self { fp_rel_tol, ..self }
    }

    /// Checks the hard invariants. The sign of `h` is free so that
    /// adjoint and time-reversed steps can reuse the same config.
    pub fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0 && self.eps.is_finite()) {
            return Err(Error::InvalidArgument(format!("eps must be positive, got {}", self.eps)));
        }
        if !(self.h != 0.0 && self.h.is_finite()) {
            return Err(Error::InvalidArgument(format!("h must be non-zero, got {}", self.h)));
        }
        if !(self.fp_rel_tol > 0.0 && self.fp_rel_tol < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "fp_rel_tol must lie in (0, 1), got {}",
                self.fp_rel_tol
            )));
        }
        if self.fp_max_iter == 0 {
            return Err(Error::InvalidArgument("fp_max_iter must be at least 1".into()));
        }
        Ok(())
    }

    /// Warn-only check of the working regime `h^2/eps < 0.4`.
    pub fn regime_warning(&self) -> Option<String> {
        let ratio = self.h * self.h / self.eps;
        (ratio >= REGIME_BOUND).then(|| {
            format!("h^2/eps = {ratio:.3} is outside the regime h^2/eps < {REGIME_BOUND}; fixed-point convergence may degrade")
        })
    }
}
