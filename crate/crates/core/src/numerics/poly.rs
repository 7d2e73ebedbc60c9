//! Real polynomials in `(q, p, y)` obtained from a series at a numeric `eps`.

use std::collections::HashMap;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::TruncatedSeries;

/// `sum c * x^a` over the state layout `[q, p, y1_1..y1_n, y2_1..y2_n]`.
#[derive(Clone, Debug, PartialEq)]
pub struct PhasePolynomial {
    dim: usize,
    terms: Vec<(Vec<u32>, f64)>,
}

fn binomial(n: u32, k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (n - j) as f64 / (j + 1) as f64)
}

impl PhasePolynomial {
    pub fn zero(dim: usize) -> Self {
        Self {
            dim,
            terms: Vec::new(),
        }
    }

    /// Expands `u^k v^l = 2^{-(k+l)/2} (-i)^l (q - ip)^k (q + ip)^l`.
    ///
    /// Fails with [`Error::NotReal`] if the imaginary parts do not cancel.
    pub fn from_series(s: &TruncatedSeries, eps: f64) -> Result<Self> {
        let n_slow = s.policy().slow_count();
        let dim = 2 + n_slow;
        let i = Complex64::new(0.0, 1.0);
        let mut acc: HashMap<Vec<u32>, Complex64> = HashMap::new();
        for (idx, c) in s.iter() {
            let scale = c
                * eps.powi(idx.e as i32)
                * 2f64.powf(-0.5 * (idx.k + idx.l) as f64)
                * (-i).powu(idx.l);
            for a in 0..=idx.k {
                let ca = binomial(idx.k, a) * (-i).powu(a);
                for b in 0..=idx.l {
                    let cb = binomial(idx.l, b) * i.powu(b);
                    let mut key = Vec::with_capacity(dim);
                    key.push(idx.k + idx.l - a - b);
                    key.push(a + b);
                    key.extend_from_slice(&idx.slow);
                    *acc.entry(key).or_default() += scale * ca * cb;
                }
            }
        }
        let size = acc.values().map(|c| c.norm()).fold(0.0, f64::max);
        let residue = acc.values().map(|c| c.im.abs()).fold(0.0, f64::max);
        if residue > 1e-10 * size.max(1.0) {
            return Err(Error::NotReal { residue });
        }
        let mut terms: Vec<(Vec<u32>, f64)> = acc
            .into_iter()
            .filter(|(_, c)| c.re != 0.0)
            .map(|(k, c)| (k, c.re))
            .collect();
        terms.sort_by(|a, b| a.0.cmp(&b.0));
        Ok(Self { dim, terms })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.terms.iter().map(|(_, c)| c.abs()).fold(0.0, f64::max)
    }

    fn max_degree(&self, var: usize) -> u32 {
        self.terms.iter().map(|(a, _)| a[var]).max().unwrap_or(0)
    }

    pub fn diff(&self, var: usize) -> Self {
        let terms = self
            .terms
            .iter()
            .filter(|(a, _)| a[var] > 0)
            .map(|(a, c)| {
                let mut a = a.clone();
                let k = a[var];
                a[var] -= 1;
                (a, c * k as f64)
            })
            .collect();
        Self {
            dim: self.dim,
            terms,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        debug_assert_eq!(x.len(), self.dim);
        self.eval_with(&PowerTable::new(x, self.total_max_degree()))
    }

    fn eval_with(&self, table: &PowerTable) -> f64 {
        self.terms
            .iter()
            .map(|(a, c)| {
                a.iter()
                    .enumerate()
                    .fold(*c, |acc, (j, &e)| acc * table.get(j, e))
            })
            .sum()
    }

    fn total_max_degree(&self) -> u32 {
        (0..self.dim).map(|j| self.max_degree(j)).max().unwrap_or(0)
    }
}

/// `x_j^d` for every coordinate up to a common degree.
struct PowerTable {
    stride: usize,
    values: Vec<f64>,
}

impl PowerTable {
    fn new(x: &[f64], max: u32) -> Self {
        let stride = max as usize + 1;
        let mut values = Vec::with_capacity(stride * x.len());
        for &xj in x {
            let mut acc = 1.0;
            for _ in 0..stride {
                values.push(acc);
                acc *= xj;
            }
        }
        Self { stride, values }
    }

    #[inline]
    fn get(&self, j: usize, e: u32) -> f64 {
        self.values[j * self.stride + e as usize]
    }
}

/// A polynomial with its gradient and Hessian kept alongside.
#[derive(Clone, Debug)]
pub struct PhaseFunction {
    pub value: PhasePolynomial,
    grad: Vec<PhasePolynomial>,
    hess: Vec<Vec<PhasePolynomial>>,
    max_degree: u32,
}

impl PhaseFunction {
    pub fn new(value: PhasePolynomial) -> Self {
        let dim = value.dim();
        let grad: Vec<_> = (0..dim).map(|j| value.diff(j)).collect();
        let hess = grad
            .iter()
            .map(|g| (0..dim).map(|j| g.diff(j)).collect())
            .collect();
        let max_degree = value.total_max_degree();
        Self {
            value,
            grad,
            hess,
            max_degree,
        }
    }

    pub fn from_series(s: &TruncatedSeries, eps: f64) -> Result<Self> {
        Ok(Self::new(PhasePolynomial::from_series(s, eps)?))
    }

    pub fn dim(&self) -> usize {
        self.value.dim()
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    pub fn gradient(&self, x: &[f64]) -> DVector<f64> {
        let table = PowerTable::new(x, self.max_degree);
        DVector::from_iterator(self.dim(), self.grad.iter().map(|g| g.eval_with(&table)))
    }

    pub fn partial(&self, var: usize, x: &[f64]) -> f64 {
        self.grad[var].eval(x)
    }

    pub fn hessian(&self, x: &[f64]) -> DMatrix<f64> {
        let n = self.dim();
        let table = PowerTable::new(x, self.max_degree);
        DMatrix::from_fn(n, n, |i, j| self.hess[i][j].eval_with(&table))
    }
}
