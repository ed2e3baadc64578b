//! Finite-difference probes used to check symplecticity and analytic
//! derivatives.

use crate::error::{Error, Result};

/// Small dense row-major matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|row| row.len() == c), "ragged rows");
        Self { rows: r, cols: c, data: rows.concat() }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "inner dimensions differ");
        let mut out = Self::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn mul_vec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len());
        (0..self.rows)
            .map(|i| self.data[i * self.cols..(i + 1) * self.cols].iter().zip(v).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        crate::phase::max_abs_diff(&self.data, &other.data)
    }
}

impl std::ops::Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for DenseMatrix {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

/// Central-difference Jacobian of `step_map` at `z`:
/// column `j` is `(step(z + delta e_j) - step(z - delta e_j)) / (2 delta)`.
pub fn jacobian_fd<F>(mut step_map: F, z: &[f64], delta: f64) -> Result<DenseMatrix>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    if !(delta > 0.0) {
        return Err(Error::InvalidArgument(format!("probe size must be positive, got {delta}")));
    }
    let n = z.len();
    let mut probe = z.to_vec();
    let mut jac: Option<DenseMatrix> = None;
    for j in 0..n {
        probe[j] = z[j] + delta;
        let plus = step_map(&probe)?;
        probe[j] = z[j] - delta;
        let minus = step_map(&probe)?;
        probe[j] = z[j];
        let m = plus.len();
        if minus.len() != m {
            return Err(Error::InvalidArgument("step map changed output dimension".into()));
        }
        let jac = jac.get_or_insert_with(|| DenseMatrix::zeros(m, n));
        for i in 0..m {
            let d = (plus[i] - minus[i]) / (2.0 * delta);
            if !d.is_finite() {
                return Err(Error::NonFinite("finite-difference Jacobian"));
            }
            jac[(i, j)] = d;
        }
    }
    Ok(jac.unwrap_or_else(|| DenseMatrix::zeros(0, 0)))
}

/// Canonical skew matrix `[[0, I], [-I, 0]]` of size `2n`.
pub fn canonical_skew(n: usize) -> DenseMatrix {
    let mut s = DenseMatrix::zeros(2 * n, 2 * n);
    for i in 0..n {
        s[(i, n + i)] = 1.0;
        s[(n + i, i)] = -1.0;
    }
    s
}

/// Max-norm of `J^T S J - S` for the canonical skew matrix `S`
/// in (positions..., momenta...) ordering.
pub fn symplectic_defect(jac: &DenseMatrix) -> Result<f64> {
    if jac.rows() != jac.cols() || jac.rows() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "symplectic defect needs a square matrix of even size, got {}x{}",
            jac.rows(),
            jac.cols()
        )));
    }
    let s = canonical_skew(jac.rows() / 2);
    let jtsj = jac.transpose().matmul(&s).matmul(jac);
    Ok(jtsj.max_abs_diff(&s))
}

/// Max discrepancy between `grad_fn(z)` and central differences of
/// `value_fn`, relative to `max(1, |fd|_inf)`.
pub fn gradient_check<V, G>(value_fn: V, grad_fn: G, z: &[f64], delta: f64) -> f64
where
    V: Fn(&[f64]) -> f64,
    G: Fn(&[f64]) -> Vec<f64>,
{
    let analytic = grad_fn(z);
    assert_eq!(analytic.len(), z.len(), "gradient has wrong length");
    let mut probe = z.to_vec();
    let fd: Vec<f64> = (0..z.len())
        .map(|j| {
            probe[j] = z[j] + delta;
            let plus = value_fn(&probe);
            probe[j] = z[j] - delta;
            let minus = value_fn(&probe);
            probe[j] = z[j];
            (plus - minus) / (2.0 * delta)
        })
        .collect();
    let scale = crate::phase::max_norm(&fd).max(1.0);
    crate::phase::max_abs_diff(&analytic, &fd) / scale
}
