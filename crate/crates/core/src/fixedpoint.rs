//! Plain fixed-point iteration for implicit step equations `Z = z + A(Z)`.

use crate::error::{Error, Result};
use crate::phase::max_norm;

#[derive(Debug, Clone, PartialEq)]
pub struct FixedPointResult {
    pub solution: Vec<f64>,
    /// Number of evaluations of the map `A`.
    pub iterations: usize,
    pub converged: bool,
    pub last_relative_change: f64,
}

impl FixedPointResult {
    /// Turns a non-converged result into [`Error::NoConvergence`].
    pub fn into_converged(self) -> Result<Self> {
        if self.converged {
            Ok(self)
        } else {
            Err(Error::NoConvergence {
                iterations: self.iterations,
                last_change: self.last_relative_change,
            })
        }
    }
}

/// Iterates `Z_{k+1} = z + A(Z_k)` from `Z_0 = z` until
/// `|Z_{k+1} - Z_k| <= tol * max(1, |Z_{k+1}|)` in the max-norm.
///
/// `a` writes `A(Z)` into its second argument.
pub fn solve_fixed_point<F>(z: &[f64], a: F, tol: f64, max_iter: usize) -> Result<FixedPointResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    solve_fixed_point_from(z, z, a, tol, max_iter)
}

/// Same as [`solve_fixed_point`] but starting from `guess`.
pub fn solve_fixed_point_from<F>(
    z: &[f64],
    guess: &[f64],
    mut a: F,
    tol: f64,
    max_iter: usize,
) -> Result<FixedPointResult>
where
    F: FnMut(&[f64], &mut [f64]) -> Result<()>,
{
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance must be positive, got {tol}")));
    }
    if guess.len() != z.len() {
        return Err(Error::InvalidArgument("initial guess has wrong length".into()));
    }
    let n = z.len();
    let mut current = guess.to_vec();
    let mut next = vec![0.0; n];
    let mut change = f64::INFINITY;
    for k in 1..=max_iter {
        a(&current, &mut next)?;
        let mut diff = 0.0f64;
        for i in 0..n {
            next[i] += z[i];
            if !next[i].is_finite() {
                return Err(Error::NonFinite("fixed-point iterate"));
            }
            diff = diff.max((next[i] - current[i]).abs());
        }
        change = diff / max_norm(&next).max(1.0);
        std::mem::swap(&mut current, &mut next);
        if change <= tol {
            return Ok(FixedPointResult {
                solution: current,
                iterations: k,
                converged: true,
                last_relative_change: change,
            });
        }
    }
    Ok(FixedPointResult {
        solution: current,
        iterations: max_iter,
        converged: false,
        last_relative_change: change,
    })
}
