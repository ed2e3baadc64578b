use super::{FreqGroup, MatrixFreqSystem};
use crate::error::{Error, Result};
use crate::phase::SlowFastState;

/// `V(q1, q2) = (c + w . q2)^4 + q1^2 q2_1^2 / 8 + q1^2 / 2` with one slow
/// degree of freedom, `c = 1`, and fast weights `w = (1, 1, gamma)` (three
/// frequencies `1, 1, sqrt 2`) or `w = (1, 1, 1, gamma)` (four frequencies
/// `1, 1, sqrt 2, 2`), `gamma = 2.5`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuarticMulti {
    c: f64,
    weights: Vec<f64>,
    groups: Vec<FreqGroup>,
}

pub fn quartic_multi(n_freq: usize) -> Result<QuarticMulti> {
    let gamma = 2.5;
    let sqrt2 = std::f64::consts::SQRT_2;
    let (weights, groups) = match n_freq {
        3 => (
            vec![1.0, 1.0, gamma],
            vec![FreqGroup { omega: 1.0, multiplicity: 2 }, FreqGroup { omega: sqrt2, multiplicity: 1 }],
        ),
        4 => (
            vec![1.0, 1.0, 1.0, gamma],
            vec![
                FreqGroup { omega: 1.0, multiplicity: 2 },
                FreqGroup { omega: sqrt2, multiplicity: 1 },
                FreqGroup { omega: 2.0, multiplicity: 1 },
            ],
        ),
        n => {
            return Err(Error::InvalidArgument(format!(
                "quartic test system has 3 or 4 fast frequencies, got {n}"
            )))
        }
    };
    Ok(QuarticMulti { c: 1.0, weights, groups })
}

impl QuarticMulti {
    pub fn n_freq(&self) -> usize {
        self.weights.len()
    }

    fn offset(&self, group: usize) -> usize {
        self.groups[..group].iter().map(|g| g.multiplicity).sum()
    }
}

impl MatrixFreqSystem for QuarticMulti {
    fn slow_dim(&self) -> usize {
        1
    }

    fn groups(&self) -> &[FreqGroup] {
        &self.groups
    }

    fn potential(&self, q1: &[f64], q2: &[f64]) -> f64 {
        let u = self.c + self.weights.iter().zip(q2).map(|(w, x)| w * x).sum::<f64>();
        let x = q1[0];
        u.powi(4) + x * x * q2[0] * q2[0] / 8.0 + x * x / 2.0
    }

    fn potential_grad(&self, q1: &[f64], q2: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        let u = self.c + self.weights.iter().zip(q2).map(|(w, x)| w * x).sum::<f64>();
        let u3 = 4.0 * u * u * u;
        let x = q1[0];
        g1[0] = x * q2[0] * q2[0] / 4.0 + x;
        for (g, w) in g2.iter_mut().zip(&self.weights) {
            *g = u3 * w;
        }
        g2[0] += x * x * q2[0] / 4.0;
    }

    fn potential_at_zero(&self, q1: &[f64]) -> f64 {
        self.c.powi(4) + q1[0] * q1[0] / 2.0
    }

    fn grad_at_zero(&self, q1: &[f64], g1: &mut [f64], g2: &mut [f64]) {
        let c3 = 4.0 * self.c.powi(3);
        g1[0] = q1[0];
        for (g, w) in g2.iter_mut().zip(&self.weights) {
            *g = c3 * w;
        }
    }

    fn hess2_block(&self, group: usize, q1: &[f64], out: &mut [f64]) {
        let off = self.offset(group);
        let m = self.groups[group].multiplicity;
        let c2 = 12.0 * self.c * self.c;
        for k in 0..m {
            for l in 0..m {
                out[k * m + l] = c2 * self.weights[off + k] * self.weights[off + l];
            }
        }
        if off == 0 {
            out[0] += q1[0] * q1[0] / 4.0;
        }
    }

    fn mix12_block(&self, group: usize, _q1: &[f64], out: &mut [f64]) {
        // d^2/dq1 dq2_1 of q1^2 q2_1^2 / 8 vanishes at q2 = 0.
        let m = self.groups[group].multiplicity;
        out[..m].fill(0.0);
    }

    fn third_block(&self, group: usize, q1: &[f64], r: &[f64], out: &mut [f64]) {
        out[0] = if self.offset(group) == 0 { q1[0] * r[0] * r[0] / 2.0 } else { 0.0 };
    }
}

/// `q1 = 0.9`, `p1 = 0.6`, `p2 = 0` and fast positions chosen so that the
/// fast energies are `(1, 0.5, 0.25[, 0.25])`.
pub fn quartic_initial_state(sys: &QuarticMulti, eps: f64) -> SlowFastState {
    let energies = [1.0, 0.5, 0.25, 0.25];
    let q2 = sys
        .coordinate_frequencies()
        .iter()
        .zip(energies)
        .map(|(w, e)| eps * (2.0f64 * e).sqrt() / w)
        .collect::<Vec<_>>();
    let f = q2.len();
    SlowFastState::new(vec![0.9], q2, vec![0.6], vec![0.0; f])
}
