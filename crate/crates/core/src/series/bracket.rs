//! Formal derivatives and the two Poisson brackets.

use std::collections::BTreeMap;
use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::{TruncatedSeries, Var};
use crate::error::{Error, Result};

impl TruncatedSeries {
    /// Formal partial derivative with respect to `var`.
    pub fn diff(&self, var: Var) -> Result<Self> {
        let n_pairs = self.policy.n_slow_pairs as usize;
        if let Var::Y1(j) | Var::Y2(j) = var {
            if j >= n_pairs {
                return Err(Error::UnknownVariable(format!("{var:?}")));
            }
        }
        let layout = self.policy.layout();
        let stride = layout.var_stride(var);
        let terms: BTreeMap<u64, Complex64> = self
            .terms
            .iter()
            .filter_map(|(&code, &c)| {
                let a = layout.exponent(code, var);
                (a > 0).then(|| (code - stride, c * a as f64))
            })
            .collect();
        let real = self.real && !matches!(var, Var::U | Var::V);
        Ok(self.with_terms(terms, real))
    }

    /// `d/dq = (d/du - i d/dv)/sqrt2`.
    pub fn diff_q(&self) -> Self {
        let du = self.diff(Var::U).expect("fast variable");
        let dv = self.diff(Var::V).expect("fast variable");
        let out = du
            .sub(&dv.scale(Complex64::new(0.0, 1.0)))
            .expect("same policy")
            .scale_real(FRAC_1_SQRT_2);
        out.with_real_flag(self.real)
    }

    /// `d/dp = (-i d/du + d/dv)/sqrt2`.
    pub fn diff_p(&self) -> Self {
        let du = self.diff(Var::U).expect("fast variable");
        let dv = self.diff(Var::V).expect("fast variable");
        let out = dv
            .sub(&du.scale(Complex64::new(0.0, 1.0)))
            .expect("same policy")
            .scale_real(FRAC_1_SQRT_2);
        out.with_real_flag(self.real)
    }

    /// Fast bracket in the orientation of the homological equation:
    /// `da/dp db/dq - da/dq db/dp`, computed in the `(u, v)` basis as
    /// `da/dv db/du - da/du db/dv` (the change to `(u, v)` has unit Jacobian).
    ///
    /// With this orientation `poisson_fast(p, q) = 1` and
    /// `poisson_fast(I, q) = p`.
    pub fn poisson_fast(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let lhs = self.diff(Var::V)?.mul(&other.diff(Var::U)?)?;
        let rhs = self.diff(Var::U)?.mul(&other.diff(Var::V)?)?;
        Ok(lhs.sub(&rhs)?.with_real_flag(self.real && other.real))
    }

    /// Slow bracket `sum_j (da/dy1_j db/dy2_j - da/dy2_j db/dy1_j)`.
    pub fn poisson_slow(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let mut acc = Self::zero(self.policy);
        for j in 0..self.policy.n_slow_pairs as usize {
            let lhs = self.diff(Var::Y1(j))?.mul(&other.diff(Var::Y2(j))?)?;
            let rhs = self.diff(Var::Y2(j))?.mul(&other.diff(Var::Y1(j))?)?;
            acc = acc.add(&lhs)?.sub(&rhs)?;
        }
        Ok(acc.with_real_flag(self.real && other.real))
    }
}
