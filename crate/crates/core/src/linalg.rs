//! Dense row-major matrices and the LU solve behind every exact value oracle.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Square or rectangular dense matrix stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Builds a matrix from a list of equally long rows.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::DimensionMismatch(alloc::format!(
                    "row {i} has {} entries, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(alloc::format!(
                "{} values for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, value: f64) {
        self.data[i * self.cols + j] = value;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        (0..self.rows).map(|i| self.row(i).to_vec()).collect()
    }

    /// `self * x`.
    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| self.row(i).iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }
}

/// LU factorization with partial pivoting, `P A = L U`.
#[derive(Debug, Clone)]
pub struct LuFactors {
    n: usize,
    lu: Vec<f64>,
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn factor(a: &DenseMatrix) -> Result<Self> {
        if a.rows != a.cols {
            return Err(Error::DimensionMismatch(alloc::format!(
                "LU needs a square matrix, got {}x{}",
                a.rows,
                a.cols
            )));
        }
        let n = a.rows;
        let mut lu = a.data.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            let mut pivot = k;
            let mut best = libm::fabs(lu[k * n + k]);
            for i in k + 1..n {
                let v = libm::fabs(lu[i * n + k]);
                if v > best {
                    best = v;
                    pivot = i;
                }
            }
            if best == 0.0 || !best.is_finite() {
                return Err(Error::Singular);
            }
            if pivot != k {
                for j in 0..n {
                    lu.swap(k * n + j, pivot * n + j);
                }
                perm.swap(k, pivot);
            }
            let diag = lu[k * n + k];
            for i in k + 1..n {
                let factor = lu[i * n + k] / diag;
                lu[i * n + k] = factor;
                if factor != 0.0 {
                    let (upper, lower) = lu.split_at_mut(i * n);
                    let pivot_row = &upper[k * n + k + 1..k * n + n];
                    for (dst, src) in lower[k + 1..n].iter_mut().zip(pivot_row) {
                        *dst -= factor * src;
                    }
                }
            }
        }
        Ok(Self { n, lu, perm })
    }

    /// Solves `A x = b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        debug_assert_eq!(b.len(), n);
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let row = &self.lu[i * n..i * n + i];
            let s: f64 = row.iter().zip(&x[..i]).map(|(l, y)| l * y).sum();
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let row = &self.lu[i * n + i + 1..(i + 1) * n];
            let s: f64 = row.iter().zip(&x[i + 1..]).map(|(u, y)| u * y).sum();
            x[i] = (x[i] - s) / self.lu[i * n + i];
        }
        x
    }
}

/// Factored `I - αP`, reused to evaluate `(1-α)(I-αP)⁻¹ y` for many `y`.
///
/// Row `s` of `(1-α)(I-αP)⁻¹` is the discounted occupation measure of `s`,
/// so `solver.apply(y)[s]` is that measure integrated against `y`.
#[derive(Debug, Clone)]
pub struct ValueSolver {
    alpha: f64,
    lu: LuFactors,
}

impl ValueSolver {
    pub fn new(p: &DenseMatrix, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(crate::error::invalid("alpha must lie in (0,1)"));
        }
        let n = p.rows();
        let mut a = DenseMatrix::identity(n);
        for i in 0..n {
            for j in 0..p.cols() {
                let v = a.get(i, j) - alpha * p.get(i, j);
                a.set(i, j, v);
            }
        }
        Ok(Self {
            alpha,
            lu: LuFactors::factor(&a)?,
        })
    }

    pub fn apply(&self, y: &[f64]) -> Vec<f64> {
        let scaled: Vec<f64> = y.iter().map(|v| (1.0 - self.alpha) * v).collect();
        self.lu.solve(&scaled)
    }
}

/// Value function `(1-α)(I-αP)⁻¹c` of an arbitrary row-stochastic `P`.
pub fn value_function(p: &DenseMatrix, cost: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if p.rows() != cost.len() || p.cols() != cost.len() {
        return Err(Error::DimensionMismatch(alloc::format!(
            "{}x{} matrix against cost of length {}",
            p.rows(),
            p.cols(),
            cost.len()
        )));
    }
    Ok(ValueSolver::new(p, alpha)?.apply(cost))
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(libm::fabs(*v)))
}

pub fn norm_1(x: &[f64]) -> f64 {
    x.iter().map(|v| libm::fabs(*v)).sum()
}
