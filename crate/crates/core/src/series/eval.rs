use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::TruncatedSeries;
use crate::error::{Error, Result};

/// A real point `(q, p, y, eps)`; `y` is ordered `y1_1..y1_n, y2_1..y2_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalPoint {
    pub q: f64,
    pub p: f64,
    pub y: Vec<f64>,
    pub eps: f64,
}

impl EvalPoint {
    pub fn new(q: f64, p: f64, y: Vec<f64>, eps: f64) -> Self {
        Self { q, p, y, eps }
    }

    /// `u = (q - i p)/sqrt2`, `v = (p - i q)/sqrt2`.
    pub fn uv(&self) -> (Complex64, Complex64) {
        let u = Complex64::new(self.q, -self.p) * FRAC_1_SQRT_2;
        let v = Complex64::new(self.p, -self.q) * FRAC_1_SQRT_2;
        (u, v)
    }
}

fn powers(x: Complex64, max: u32) -> Vec<Complex64> {
    let mut out = Vec::with_capacity(max as usize + 1);
    let mut acc = Complex64::new(1.0, 0.0);
    for _ in 0..=max {
        out.push(acc);
        acc *= x;
    }
    out
}

impl TruncatedSeries {
    /// Sums the series at a real point. The result is complex in general;
    /// for real-flagged series the imaginary part is rounding noise.
    pub fn eval(&self, point: &EvalPoint) -> Result<Complex64> {
        let n = self.policy.slow_count();
        if point.y.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: point.y.len(),
            });
        }
        let (u, v) = point.uv();
        let pu = powers(u, self.policy.max_uv_degree);
        let pv = powers(v, self.policy.max_uv_degree);
        let py: Vec<Vec<Complex64>> = point
            .y
            .iter()
            .map(|&y| powers(Complex64::new(y, 0.0), self.policy.max_slow_degree))
            .collect();
        let pe = powers(Complex64::new(point.eps, 0.0), self.policy.max_eps_order);
        let mut sum = Complex64::new(0.0, 0.0);
        for (idx, c) in self.iter() {
            let mut term = c * pu[idx.k as usize] * pv[idx.l as usize] * pe[idx.e as usize];
            for (j, &s) in idx.slow.iter().enumerate() {
                if s > 0 {
                    term *= py[j][s as usize];
                }
            }
            sum += term;
        }
        Ok(sum)
    }

    /// Real part of [`eval`](Self::eval).
    pub fn eval_real(&self, point: &EvalPoint) -> Result<f64> {
        self.eval(point).map(|z| z.re)
    }
}
