//! Substitution `x -> x + delta(x)` for increments of positive `eps` order.

use std::f64::consts::FRAC_1_SQRT_2;

use num_complex::Complex64;

use super::{TruncatedSeries, TruncationPolicy, Var};
use crate::error::{Error, Result};

/// Increments of the canonical variables, given in real coordinates.
///
/// `dy` is ordered like the slow variables. Every nonzero increment must be
/// of `eps` order at least one, which makes the Taylor expansion finite.
#[derive(Clone, Debug)]
pub struct Shift {
    pub dq: TruncatedSeries,
    pub dp: TruncatedSeries,
    pub dy: Vec<TruncatedSeries>,
}

impl Shift {
    pub fn zero(policy: TruncationPolicy) -> Self {
        Self {
            dq: TruncatedSeries::zero(policy),
            dp: TruncatedSeries::zero(policy),
            dy: vec![TruncatedSeries::zero(policy); policy.slow_count()],
        }
    }

    fn is_real(&self) -> bool {
        self.dq.is_real() && self.dp.is_real() && self.dy.iter().all(|d| d.is_real())
    }
}

impl TruncatedSeries {
    /// `f(x + delta)`, expanded as `sum_alpha d^alpha f / alpha! * delta^alpha`.
    pub fn shift(&self, shift: &Shift) -> Result<Self> {
        let policy = self.policy;
        let n_pairs = policy.n_slow_pairs as usize;
        if shift.dy.len() != policy.slow_count() {
            return Err(Error::DimensionMismatch {
                expected: policy.slow_count(),
                got: shift.dy.len(),
            });
        }
        let i = Complex64::new(0.0, 1.0);
        let du = shift.dq.sub(&shift.dp.scale(i))?.scale_real(FRAC_1_SQRT_2);
        let dv = shift.dp.sub(&shift.dq.scale(i))?.scale_real(FRAC_1_SQRT_2);

        let mut vars = vec![(Var::U, du), (Var::V, dv)];
        for (slot, d) in shift.dy.iter().enumerate() {
            d.check(self)?;
            let var = if slot < n_pairs {
                Var::Y1(slot)
            } else {
                Var::Y2(slot - n_pairs)
            };
            vars.push((var, d.clone()));
        }
        vars.retain(|(_, d)| !d.is_empty());
        for (_, d) in &vars {
            if let Some(order) = d.lowest_eps_order() {
                if order == 0 {
                    return Err(Error::NonNilpotentShift { order });
                }
            }
        }

        let mut acc = self.clone();
        let mut alpha = vec![0u32; vars.len()];
        expand(
            &vars,
            0,
            self,
            &TruncatedSeries::one(policy),
            &mut alpha,
            &mut acc,
        )?;
        Ok(acc.with_real_flag(self.real && shift.is_real()))
    }
}

/// Depth-first walk over multi-indices `alpha` in nondecreasing variable
/// order, so each `alpha` is visited once. `deriv` holds
/// `d^alpha f / alpha!` and `power` holds `delta^alpha`.
fn expand(
    vars: &[(Var, TruncatedSeries)],
    start: usize,
    deriv: &TruncatedSeries,
    power: &TruncatedSeries,
    alpha: &mut [u32],
    acc: &mut TruncatedSeries,
) -> Result<()> {
    for j in start..vars.len() {
        let (var, delta) = &vars[j];
        let next_deriv = deriv.diff(*var)?.scale_real(1.0 / (alpha[j] + 1) as f64);
        if next_deriv.is_empty() {
            continue;
        }
        let next_power = power.mul(delta)?;
        if next_power.is_empty() {
            continue;
        }
        *acc = acc.add(&next_deriv.mul(&next_power)?)?;
        alpha[j] += 1;
        expand(vars, j, &next_deriv, &next_power, alpha, acc)?;
        alpha[j] -= 1;
    }
    Ok(())
}
