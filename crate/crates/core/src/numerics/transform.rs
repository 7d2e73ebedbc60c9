//! Point-wise evaluation of the composed generating-function maps.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::flow::{symplectic_matrix, State};
use super::poly::PhaseFunction;
use crate::error::{Error, Result};
use crate::normalform::GeneratingFunction;

/// Contraction factor at which the implicit equations are declared unsolvable.
pub const CONTRACTION_LIMIT: f64 = 0.5;

const MAX_NEWTON: usize = 50;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Direction {
    /// New variables to old ones; the last step is undone first.
    Forward,
    /// Old variables to new ones; the first step is applied first.
    Inverse,
}

/// One step: `eps * S1` at numeric `eps` over mixed variables `[q, P, y1, z2]`.
struct StepMap {
    s: PhaseFunction,
}

/// The composition of all steps at a fixed `eps`.
pub struct PointTransform {
    eps: f64,
    n: usize,
    steps: Vec<StepMap>,
}

impl PointTransform {
    pub fn new(gens: &[GeneratingFunction], eps: f64, n_slow_pairs: usize) -> Result<Self> {
        let mut steps = Vec::with_capacity(gens.len());
        for g in gens {
            let n = g.s1.policy().n_slow_pairs as usize;
            if n != n_slow_pairs {
                return Err(Error::DimensionMismatch {
                    expected: n_slow_pairs,
                    got: n,
                });
            }
            if g.s1.is_empty() || eps == 0.0 {
                continue;
            }
            let s = PhaseFunction::from_series(&g.s1.mul_eps_power(1), eps)?;
            if !s.value.is_zero() {
                steps.push(StepMap { s });
            }
        }
        Ok(Self {
            eps,
            n: n_slow_pairs,
            steps,
        })
    }

    pub fn is_identity(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn apply(&self, x: &State, direction: Direction) -> Result<State> {
        if x.y1.len() != self.n || x.y2.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.y1.len().max(x.y2.len()),
            });
        }
        let mut v = x.to_vec();
        match direction {
            Direction::Inverse => {
                for step in &self.steps {
                    v = self.old_to_new(step, &v)?;
                }
            }
            Direction::Forward => {
                for step in self.steps.iter().rev() {
                    v = self.new_to_old(step, &v)?;
                }
            }
        }
        Ok(State::from_slice(&v))
    }

    pub fn apply_slice(&self, x: &[f64], direction: Direction) -> Result<Vec<f64>> {
        self.apply(&State::from_slice(x), direction)
            .map(|s| s.to_vec())
    }

    /// Mixed-variable positions: `(unknowns, equations)` where equation `r`
    /// reads `mixed[unknown_r] + dS/d(mixed[eq_r]) = given`.
    fn layout(&self, direction: Direction) -> (Vec<usize>, Vec<usize>) {
        let n = self.n;
        let ys = |off: usize| (0..n).map(move |j| off + j);
        match direction {
            // unknowns (P, z2), equations from p and y2: derivatives in q and y1
            Direction::Inverse => (
                std::iter::once(1).chain(ys(2 + n)).collect(),
                std::iter::once(0).chain(ys(2)).collect(),
            ),
            // unknowns (q, y1), equations from Q and z1: derivatives in P and z2
            Direction::Forward => (
                std::iter::once(0).chain(ys(2)).collect(),
                std::iter::once(1).chain(ys(2 + n)).collect(),
            ),
        }
    }

    /// Solves `mixed[u_r] + S_{e_r}(mixed) = given_r` for the unknowns by Newton.
    fn solve_mixed(&self, step: &StepMap, x: &[f64], direction: Direction) -> Result<Vec<f64>> {
        let (unknowns, eqs) = self.layout(direction);
        let m = unknowns.len();
        let given: Vec<f64> = unknowns.iter().map(|&u| x[u]).collect();
        let mut mixed = x.to_vec();

        let jacobian = |mixed: &[f64]| -> DMatrix<f64> {
            let h = step.s.hessian(mixed);
            DMatrix::from_fn(m, m, |r, c| h[(eqs[r], unknowns[c])])
        };
        let kappa = (self.n as f64 + 1.0) * jacobian(&mixed).amax();
        if kappa >= CONTRACTION_LIMIT {
            return Err(Error::EpsTooLarge {
                eps: self.eps,
                contraction: kappa,
            });
        }
        for _ in 0..MAX_NEWTON {
            let grad = step.s.gradient(&mixed);
            let residual = DVector::from_fn(m, |r, _| mixed[unknowns[r]] + grad[eqs[r]] - given[r]);
            let jac = DMatrix::identity(m, m) + jacobian(&mixed);
            let delta = jac.lu().solve(&residual).ok_or(Error::EpsTooLarge {
                eps: self.eps,
                contraction: kappa,
            })?;
            for (r, &u) in unknowns.iter().enumerate() {
                mixed[u] -= delta[r];
            }
            let scale = 1.0 + unknowns.iter().map(|&u| mixed[u].abs()).fold(0.0, f64::max);
            if !delta.iter().all(|d| d.is_finite()) {
                break;
            }
            if delta.amax() <= 1e-15 * scale {
                return Ok(mixed);
            }
        }
        Err(Error::EpsTooLarge {
            eps: self.eps,
            contraction: kappa,
        })
    }

    /// Given old `(q, p, y1, y2)`, returns new `(Q, P, z1, z2)`.
    fn old_to_new(&self, step: &StepMap, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mixed = self.solve_mixed(step, x, Direction::Inverse)?;
        let grad = step.s.gradient(&mixed);
        let mut out = mixed.clone();
        out[0] = mixed[0] + grad[1];
        for j in 0..n {
            out[2 + j] = mixed[2 + j] + grad[2 + n + j];
        }
        Ok(out)
    }

    /// Given new `(Q, P, z1, z2)`, returns old `(q, p, y1, y2)`.
    fn new_to_old(&self, step: &StepMap, x: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        let mixed = self.solve_mixed(step, x, Direction::Forward)?;
        let grad = step.s.gradient(&mixed);
        let mut out = mixed.clone();
        out[1] = mixed[1] + grad[0];
        for j in 0..n {
            out[2 + n + j] = mixed[2 + n + j] + grad[2 + j];
        }
        Ok(out)
    }
}

/// Composed point transformation of all generators at `eps`.
pub fn transform_point(
    gens: &[GeneratingFunction],
    x: &State,
    eps: f64,
    direction: Direction,
) -> Result<State> {
    PointTransform::new(gens, eps, x.n_slow_pairs())?.apply(x, direction)
}

/// `max |forward(inverse(x)) - x|`.
pub fn roundtrip_error(gens: &[GeneratingFunction], x: &State, eps: f64) -> Result<f64> {
    let t = PointTransform::new(gens, eps, x.n_slow_pairs())?;
    let back = t.apply(&t.apply(x, Direction::Inverse)?, Direction::Forward)?;
    Ok(back.max_abs_diff(x))
}

/// `max |M^T J M - J|` for the central-difference Jacobian `M` (step `1e-5`)
/// of the old-to-new map at `x`.
pub fn symplecticity_check(gens: &[GeneratingFunction], x: &State, eps: f64) -> Result<f64> {
    let n = x.n_slow_pairs();
    let t = PointTransform::new(gens, eps, n)?;
    let x0 = x.to_vec();
    let dim = x0.len();
    let h = 1e-5;
    let mut m = DMatrix::zeros(dim, dim);
    for c in 0..dim {
        let mut plus = x0.clone();
        let mut minus = x0.clone();
        plus[c] += h;
        minus[c] -= h;
        let fp = t.apply_slice(&plus, Direction::Inverse)?;
        let fm = t.apply_slice(&minus, Direction::Inverse)?;
        for r in 0..dim {
            m[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    let j = symplectic_matrix(n);
    Ok((m.transpose() * &j * &m - j).amax())
}
