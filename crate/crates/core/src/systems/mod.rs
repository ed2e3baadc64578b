//! Benchmark Hamiltonians and the observables monitored along trajectories.
//!
//! Every system exposes its analytic derivatives through a trait; the
//! integrators are generic over these traits. [`Counting`] wraps a system
//! and counts slow-gradient evaluations, which is the cost measure used by
//! the efficiency experiments.

mod fpu;
mod observables;
mod pendulum;
mod quartic;

use std::cell::Cell;

pub use fpu::{fpu_initial_state, fpu_modified, ModifiedFpu};
pub use observables::*;
pub use pendulum::{elastic_pendulum, pendulum_initial_state, ElasticPendulum};
pub use quartic::{quartic_initial_state, quartic_multi, QuarticMulti};

use crate::error::{Error, Result};

/// Runtime floor on the scalar fast frequency.
pub const OMEGA_MIN: f64 = 1e-6;

/// `H = p1^2/2 + p2^2/2 + V(q1, q2) + Omega(q1)^2 q2^2 / (2 eps^2)`
/// with a scalar, slowly varying fast frequency.
pub trait ScalarFreqSystem {
    fn slow_dim(&self) -> usize;
    fn fast_dim(&self) -> usize;
    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64;
    /// Writes both partial gradients of the slow potential. One call is one
    /// slow-force evaluation.
    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]);
    fn omega(&self, q1: &[f64]) -> f64;
    fn omega_grad(&self, q1: &[f64], out: &mut [f64]);
    /// Row-major `s x s` Hessian of `Omega`.
    fn omega_hess(&self, q1: &[f64], out: &mut [f64]);
}

/// One diagonal block `omega * Id_m` of a constant fast-frequency matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FreqGroup {
    pub omega: f64,
    pub multiplicity: usize,
}

/// `H = p1^2/2 + p2^2/2 + V(q1, q2) + q2^T Omega^2 q2 / (2 eps^2)` with a
/// constant block-diagonal `Omega`, blocks ordered by increasing frequency.
///
/// The `*_at_zero` / `*_block` callbacks are the `q2 = 0` derivatives the
/// preconditioned scheme needs; block-local arrays are indexed by position
/// within the group.
pub trait MatrixFreqSystem {
    fn slow_dim(&self) -> usize;
    fn groups(&self) -> &[FreqGroup];
    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64;
    /// Full slow gradient at `(q1, q2)`; one slow-force evaluation.
    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]);
    /// `V(q1, 0)`.
    fn potential_at_zero(&self, q1: &[f64]) -> f64;
    /// `grad_1 V(q1, 0)` and `grad_2 V(q1, 0)` (all groups); one slow-force evaluation.
    fn grad_at_zero(&self, q1: &[f64], g1: &mut [f64], g2: &mut [f64]);
    /// `m x m` Hessian of `V` in the group's fast coordinates at `(q1, 0)`.
    fn hess2_block(&self, group: usize, q1: &[f64], out: &mut [f64]);
    /// Row-major `s x m` mixed derivative `d^2 V / dq1 dq2_group` at `(q1, 0)`.
    fn mix12_block(&self, group: usize, q1: &[f64], out: &mut [f64]);
    /// `r^T (d/dq1 Hess2_group) r`, a length-`s` vector quadratic in `r`.
    fn third_block(&self, group: usize, q1: &[f64], r: &[f64], out: &mut [f64]);

    fn fast_dim(&self) -> usize {
        self.groups().iter().map(|g| g.multiplicity).sum()
    }

    /// Offset of each group's first coordinate in `q2`.
    fn group_offsets(&self) -> Vec<usize> {
        self.groups()
            .iter()
            .scan(0, |acc, g| {
                let start = *acc;
                *acc += g.multiplicity;
                Some(start)
            })
            .collect()
    }

    /// Frequency of each fast coordinate.
    fn coordinate_frequencies(&self) -> Vec<f64> {
        self.groups()
            .iter()
            .flat_map(|g| std::iter::repeat(g.omega).take(g.multiplicity))
            .collect()
    }
}

/// Extensible pendulum with angle potential `W(a)`, 2pi-periodic.
pub trait PendulumSystem {
    fn w(&self, a: f64) -> f64;
    /// `W'(a)`; one slow-force evaluation.
    fn wp(&self, a: f64) -> f64;
    fn wpp(&self, a: f64) -> f64;
}

/// `Omega(q1)`, failing below [`OMEGA_MIN`].
pub fn checked_omega<S: ScalarFreqSystem + ?Sized>(sys: &S, q1: &[f64]) -> Result<f64> {
    let value = sys.omega(q1);
    if value >= OMEGA_MIN {
        Ok(value)
    } else {
        Err(Error::FrequencyFloor { value, floor: OMEGA_MIN })
    }
}

impl<T: ScalarFreqSystem + ?Sized> ScalarFreqSystem for &T {
    fn slow_dim(&self) -> usize {
        (**self).slow_dim()
    }
    fn fast_dim(&self) -> usize {
        (**self).fast_dim()
    }
    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64 {
        (**self).potential(q1, q2)
    }
    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        (**self).potential_grad(q1, q2, g1, g2)
    }
    fn omega(&self, q1: &[f64]) -> f64 {
        (**self).omega(q1)
    }
    fn omega_grad(&self, q1: &[f64], out: &mut [f64]) {
        (**self).omega_grad(q1, out)
    }
    fn omega_hess(&self, q1: &[f64], out: &mut [f64]) {
        (**self).omega_hess(q1, out)
    }
}

impl<T: MatrixFreqSystem + ?Sized> MatrixFreqSystem for &T {
    fn slow_dim(&self) -> usize {
        (**self).slow_dim()
    }
    fn groups(&self) -> &[FreqGroup] {
        (**self).groups()
    }
    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64 {
        (**self).potential(q1, q2)
    }
    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        (**self).potential_grad(q1, q2, g1, g2)
    }
    fn potential_at_zero(&self, q1: &[f64]) -> f64 {
        (**self).potential_at_zero(q1)
    }
    fn grad_at_zero(&self, q1: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        (**self).grad_at_zero(q1, g1, g2)
    }
    fn hess2_block(&self, group: usize, q1: &[f64], out: &mut [f64]) {
        (**self).hess2_block(group, q1, out)
    }
    fn mix12_block(&self, group: usize, q1: &[f64], out: &mut [f64]) {
        (**self).mix12_block(group, q1, out)
    }
    fn third_block(&self, group: usize, q1: &[f64], r: &[f64], out: &mut [f64]) {
        (**self).third_block(group, q1, r, out)
    }
}

impl<T: PendulumSystem + ?Sized> PendulumSystem for &T {
    fn w(&self, a: f64) -> f64 {
        (**self).w(a)
    }
    fn wp(&self, a: f64) -> f64 {
        (**self).wp(a)
    }
    fn wpp(&self, a: f64) -> f64 {
        (**self).wpp(a)
    }
}

/// Counts slow-force evaluations of the wrapped system.
#[derive(Debug)]
pub struct Counting<S> {
    inner: S,
    calls: Cell<u64>,
}

impl<S> Counting<S> {
    pub fn new(inner: S) -> Self {
        Self { inner, calls: Cell::new(0) }
    }

    pub fn calls(&self) -> u64 {
        self.calls.get()
    }

    pub fn inner(&self) -> &S {
        &self.inner
    }

    fn bump(&self) {
        self.calls.set(self.calls.get() + 1);
    }
}

impl<S: ScalarFreqSystem> ScalarFreqSystem for Counting<S> {
    fn slow_dim(&self) -> usize {
        self.inner.slow_dim()
    }
    fn fast_dim(&self) -> usize {
        self.inner.fast_dim()
    }
    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64 {
        self.inner.potential(q1, q2)
    }
    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        self.bump();
        self.inner.potential_grad(q1, q2, g1, g2)
    }
    fn omega(&self, q1: &[f64]) -> f64 {
        self.inner.omega(q1)
    }
    fn omega_grad(&self, q1: &[f64], out: &mut [f64]) {
        self.inner.omega_grad(q1, out)
    }
    fn omega_hess(&self, q1: &[f64], out: &mut [f64]) {
        self.inner.omega_hess(q1, out)
    }
}

impl<S: MatrixFreqSystem> MatrixFreqSystem for Counting<S> {
    fn slow_dim(&self) -> usize {
        self.inner.slow_dim()
    }
    fn groups(&self) -> &[FreqGroup] {
        self.inner.groups()
    }
    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64 {
        self.inner.potential(q1, q2)
    }
    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        self.bump();
        self.inner.potential_grad(q1, q2, g1, g2)
    }
    fn potential_at_zero(&self, q1: &[f64]) -> f64 {
        self.inner.potential_at_zero(q1)
    }
    fn grad_at_zero(&self, q1: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        self.bump();
        self.inner.grad_at_zero(q1, g1, g2)
    }
    fn hess2_block(&self, group: usize, q1: &[f64], out: &mut [f64]) {
        self.inner.hess2_block(group, q1, out)
    }
    fn mix12_block(&self, group: usize, q1: &[f64], out: &mut [f64]) {
        self.inner.mix12_block(group, q1, out)
    }
    fn third_block(&self, group: usize, q1: &[f64], r: &[f64], out: &mut [f64]) {
        self.inner.third_block(group, q1, r, out)
    }
}

impl<S: PendulumSystem> PendulumSystem for Counting<S> {
    fn w(&self, a: f64) -> f64 {
        self.inner.w(a)
    }
    fn wp(&self, a: f64) -> f64 {
        self.bump();
        self.inner.wp(a)
    }
    fn wpp(&self, a: f64) -> f64 {
        self.inner.wpp(a)
    }
}
