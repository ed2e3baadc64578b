use serde::{Deserialize, Serialize};

/// Phase point `(q1, q2, p1, p2)` of a slow/fast Hamiltonian.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlowFastState {
    pub q1: Vec<f64>,
    pub q2: Vec<f64>,
    pub p1: Vec<f64>,
    pub p2: Vec<f64>,
}

impl SlowFastState {
    pub fn new(q1: Vec<f64>, q2: Vec<f64>, p1: Vec<f64>, p2: Vec<f64>) -> Self {
        debug_assert_eq!(q1.len(), p1.len());
        debug_assert_eq!(q2.len(), p2.len());
        Self { q1, q2, p1, p2 }
    }

    pub fn zeros(s: usize, f: usize) -> Self {
        Self::new(vec![0.0; s], vec![0.0; f], vec![0.0; s], vec![0.0; f])
    }

    pub fn slow_dim(&self) -> usize {
        self.q1.len()
    }

    pub fn fast_dim(&self) -> usize {
        self.q2.len()
    }

    /// Canonical ordering: all positions, then all momenta.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 * (self.q1.len() + self.q2.len()));
        v.extend_from_slice(&self.q1);
        v.extend_from_slice(&self.q2);
        v.extend_from_slice(&self.p1);
        v.extend_from_slice(&self.p2);
        v
    }

    pub fn from_flat(s: usize, f: usize, z: &[f64]) -> Self {
        assert_eq!(z.len(), 2 * (s + f), "flat state has wrong length");
        Self::new(
            z[..s].to_vec(),
            z[s..s + f].to_vec(),
            z[s + f..2 * s + f].to_vec(),
            z[2 * s + f..].to_vec(),
        )
    }

    pub fn is_finite(&self) -> bool {
        [&self.q1, &self.q2, &self.p1, &self.p2]
            .iter()
            .all(|v| v.iter().all(|x| x.is_finite()))
    }
}

/// Max-norm of `a - b`.
pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn max_norm(a: &[f64]) -> f64 {
    a.iter().map(|x| x.abs()).fold(0.0, f64::max)
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
