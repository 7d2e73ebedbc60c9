//! Phase averaging and the homological equation
//! `{w, W} + g = <g>` with `{a, b} = da/dp db/dq - da/dq db/dp`.
//!
//! In the canonical angle chart `q = sqrt(2I) sin(phi)`, `p = sqrt(2I) cos(phi)`
//! the monomial `u^k v^l` carries the harmonic `exp(i(k - l) phi)`, so the
//! phase average is the projection onto `k == l` and `{w(I), .}` acts on
//! `u^k v^l` as multiplication by `i (k - l) w'(I)`.

mod quadrature;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::series::{MultiIndex, TruncatedSeries};

pub use quadrature::{integral_formula_eval, quadrature_average, AdaptiveGauss};

const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// Threshold below which a constant term counts as zero.
pub const DEGENERACY_THRESHOLD: f64 = 1e-12;

/// Mean over the fast phase: the `k == l` part of `g`.
pub fn phase_average(g: &TruncatedSeries) -> TruncatedSeries {
    g.diagonal_part()
}

/// `<g> - g`.
pub fn oscillating_part(g: &TruncatedSeries) -> TruncatedSeries {
    g.off_diagonal_part().neg()
}

/// Multiplicative inverse by the geometric series in `r`, where `s = c0 (1 + r)`.
pub fn series_inverse(s: &TruncatedSeries) -> Result<TruncatedSeries> {
    let policy = *s.policy();
    let c0 = s.coeff(&MultiIndex::fast(0, 0, policy.slow_count()));
    if c0.norm() < DEGENERACY_THRESHOLD {
        return Err(Error::NotInvertible {
            constant: c0.norm(),
        });
    }
    let inv_c0 = c0.inv();
    let r = s.scale(inv_c0).sub(&TruncatedSeries::one(policy))?;
    let minus_r = r.neg();
    let mut term = TruncatedSeries::one(policy);
    let mut acc = term.clone();
    // r has no constant term, so its powers eventually vanish under truncation
    loop {
        term = term.mul(&minus_r)?;
        if term.is_empty() {
            break;
        }
        acc = acc.add(&term)?;
    }
    Ok(acc.scale(inv_c0).with_real_flag(s.is_real()))
}

/// `dw/dI` of a `uv`-diagonal `w` and its inverse.
#[derive(Clone, Debug)]
pub struct FrequencySeries {
    pub wprime: TruncatedSeries,
    pub wprime_inv: TruncatedSeries,
}

impl FrequencySeries {
    pub fn new(w: &TruncatedSeries) -> Result<Self> {
        let wprime = action_derivative(w)?;
        let c0 = wprime.coeff(&MultiIndex::fast(0, 0, w.policy().slow_count()));
        if c0.norm() < DEGENERACY_THRESHOLD {
            return Err(Error::DegenerateFrequency {
                constant: c0.norm(),
            });
        }
        let wprime_inv = series_inverse(&wprime)?;
        Ok(Self { wprime, wprime_inv })
    }
}

/// `dw/dI` for `uv`-diagonal `w`: `(uv)^j = (-i I)^j` gives
/// `d/dI (uv)^j = -i j (uv)^(j-1)`.
pub fn action_derivative(w: &TruncatedSeries) -> Result<TruncatedSeries> {
    let off = w.off_diagonal_norm();
    if off > 0.0 {
        return Err(Error::NotDiagonal { magnitude: off });
    }
    let terms = w.iter().filter(|(idx, _)| idx.k > 0).map(|(idx, c)| {
        let j = idx.k;
        let lowered = MultiIndex::new(j - 1, j - 1, idx.slow.clone(), idx.e);
        (lowered, c * (-I) * j as f64)
    });
    TruncatedSeries::from_terms(*w.policy(), terms, w.is_real())
}

/// Choice of the `phi`-independent part of the solution.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum IntegrationConstant {
    /// Diagonal part of `W` is zero.
    #[default]
    ZeroMean,
    /// The constant produced by averaging the antiderivatives started at
    /// `phi = 0` and at `phi = pi`. Differs from [`ZeroMean`](Self::ZeroMean)
    /// by an analytic function of `I` when `g` has even harmonics.
    HalfPeriod,
}

/// Solves `{w, W} + g - <g> = 0` with the zero-mean constant.
pub fn solve_homological(w: &TruncatedSeries, g: &TruncatedSeries) -> Result<TruncatedSeries> {
    solve_homological_with(w, g, IntegrationConstant::ZeroMean)
}

pub fn solve_homological_with(
    w: &TruncatedSeries,
    g: &TruncatedSeries,
    constant: IntegrationConstant,
) -> Result<TruncatedSeries> {
    if w.policy() != g.policy() {
        return Err(Error::PolicyMismatch {
            left: *w.policy(),
            right: *g.policy(),
        });
    }
    let freq = FrequencySeries::new(w)?;
    solve_with_frequency(&freq, g, constant)
}

/// As [`solve_homological_with`] for a precomputed frequency.
pub fn solve_with_frequency(
    freq: &FrequencySeries,
    g: &TruncatedSeries,
    constant: IntegrationConstant,
) -> Result<TruncatedSeries> {
    let policy = *g.policy();
    let tilde = oscillating_part(g);
    debug_assert!(tilde.diagonal_part().is_empty());
    let mut terms: Vec<(MultiIndex, Complex64)> = Vec::with_capacity(tilde.len());
    for (idx, c) in tilde.iter() {
        let d = idx.k as i64 - idx.l as i64;
        let denom = I * d as f64;
        terms.push((idx.clone(), c / denom));
        if constant == IntegrationConstant::HalfPeriod && d % 2 == 0 {
            // u^k v^l = (-i)^k I^((k+l)/2) e^{i d phi} and I = i uv
            let half = (idx.k + idx.l) / 2;
            let amp = c * (-I).powu(idx.k) * I.powu(half);
            let diag = MultiIndex::new(half, half, idx.slow.clone(), idx.e);
            terms.push((diag, -amp / denom));
        }
    }
    let x = TruncatedSeries::from_terms(policy, terms, g.is_real())?;
    let out = freq.wprime_inv.mul(&x)?;
    Ok(out.with_real_flag(g.is_real() && freq.wprime_inv.is_real()))
}

/// `{w, W} + g - <g>`.
pub fn homological_residual(
    w: &TruncatedSeries,
    g: &TruncatedSeries,
    big_w: &TruncatedSeries,
) -> Result<TruncatedSeries> {
    w.poisson_fast(big_w)?.add(g)?.sub(&phase_average(g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::{TruncationPolicy, Var};

    fn policy() -> TruncationPolicy {
        TruncationPolicy::new(8, 2, 2, 1).unwrap()
    }

    fn close(a: &TruncatedSeries, b: &TruncatedSeries) -> bool {
        a.max_abs_diff(b).unwrap() < 1e-14
    }

    #[test]
    fn averages_of_simple_monomials() {
        let p = policy();
        let q = TruncatedSeries::q(p);
        let action = TruncatedSeries::action(p);
        assert!(phase_average(&q).is_empty());
        assert!(close(&phase_average(&q.pow(2).unwrap()), &action));
        let three_halves_i2 = action.pow(2).unwrap().scale_real(1.5);
        assert!(close(&phase_average(&q.pow(4).unwrap()), &three_halves_i2));
    }

    #[test]
    fn oscillating_parts() {
        let p = policy();
        let q = TruncatedSeries::q(p);
        let gbar = TruncatedSeries::from_action_polynomial(&[1.0, 2.0, -0.5], p).unwrap();
        assert!(oscillating_part(&gbar).is_empty());
        assert_eq!(oscillating_part(&q), q.neg());
        let q2 = q.pow(2).unwrap();
        let expected = TruncatedSeries::action(p).sub(&q2).unwrap();
        assert!(close(&oscillating_part(&q2), &expected));
        assert!(phase_average(&oscillating_part(&q2)).is_empty());
    }

    #[test]
    fn inverse_examples() {
        let p = policy();
        let one = TruncatedSeries::one(p);
        assert_eq!(series_inverse(&one).unwrap(), one);
        let half = series_inverse(&TruncatedSeries::real_constant(p, 2.0)).unwrap();
        assert_eq!(half, TruncatedSeries::real_constant(p, 0.5));
        let s = TruncatedSeries::from_action_polynomial(&[1.0, 1.0], p).unwrap();
        let inv = series_inverse(&s).unwrap();
        let expected =
            TruncatedSeries::from_action_polynomial(&[1.0, -1.0, 1.0, -1.0, 1.0], p).unwrap();
        assert!(close(&inv, &expected));
        assert!(close(&s.mul(&inv).unwrap(), &one));
        assert!(matches!(
            series_inverse(&TruncatedSeries::action(p)),
            Err(Error::NotInvertible { .. })
        ));
    }

    #[test]
    fn inverse_with_slow_and_eps_dependence() {
        let p = policy();
        let y1 = TruncatedSeries::variable(p, Var::Y1(0)).unwrap();
        let s = TruncatedSeries::real_constant(p, 3.0)
            .add(&y1.mul_eps_power(1))
            .unwrap()
            .add(&TruncatedSeries::action(p))
            .unwrap();
        let inv = series_inverse(&s).unwrap();
        assert!(close(&s.mul(&inv).unwrap(), &TruncatedSeries::one(p)));
    }

    #[test]
    fn frequency_of_action_polynomials() {
        let p = policy();
        let w = TruncatedSeries::from_action_polynomial(&[0.3, 2.0, 0.5], p).unwrap();
        let f = FrequencySeries::new(&w).unwrap();
        let expected = TruncatedSeries::from_action_polynomial(&[2.0, 1.0], p).unwrap();
        assert!(close(&f.wprime, &expected));
        let degenerate = TruncatedSeries::from_action_polynomial(&[0.0, 0.0, 1.0], p).unwrap();
        assert!(matches!(
            FrequencySeries::new(&degenerate),
            Err(Error::DegenerateFrequency { .. })
        ));
        assert!(matches!(
            FrequencySeries::new(&TruncatedSeries::q(p)),
            Err(Error::NotDiagonal { .. })
        ));
    }

    #[test]
    fn solve_examples() {
        let p = policy();
        let w = TruncatedSeries::action(p);
        let q = TruncatedSeries::q(p);
        let pp = TruncatedSeries::p(p);
        let gbar = TruncatedSeries::from_action_polynomial(&[1.0, 4.0], p).unwrap();
        assert!(solve_homological(&w, &gbar).unwrap().is_empty());

        let big_w = solve_homological(&w, &q).unwrap();
        assert!(close(&big_w, &pp));
        assert!(
            homological_residual(&w, &q, &big_w)
                .unwrap()
                .max_abs_coeff()
                < 1e-15
        );

        let w2 = w.scale_real(2.0);
        let big_w2 = solve_homological(&w2, &q).unwrap();
        assert!(close(&big_w2, &pp.scale_real(0.5)));
        assert!(
            homological_residual(&w2, &q, &big_w2)
                .unwrap()
                .max_abs_coeff()
                < 1e-15
        );
    }

    #[test]
    fn solution_has_zero_mean_and_is_real() {
        let p = policy();
        let g = TruncatedSeries::phase_monomial(p, 3, 1, &[1], &[0], 0.7).unwrap();
        let w = TruncatedSeries::from_action_polynomial(&[0.0, 1.0, 0.25], p).unwrap();
        let big_w = solve_homological(&w, &g).unwrap();
        assert!(big_w.is_real());
        assert!(phase_average(&big_w).is_empty());
        assert!(
            homological_residual(&w, &g, &big_w)
                .unwrap()
                .max_abs_coeff()
                < 1e-13
        );
    }

    #[test]
    fn half_period_constant_only_touches_even_harmonics() {
        let p = policy();
        let w = TruncatedSeries::action(p);
        let q = TruncatedSeries::q(p);
        let odd = q.pow(3).unwrap();
        let a = solve_homological_with(&w, &odd, IntegrationConstant::ZeroMean).unwrap();
        let b = solve_homological_with(&w, &odd, IntegrationConstant::HalfPeriod).unwrap();
        assert_eq!(a, b);

        let even = q.mul(&TruncatedSeries::p(p)).unwrap();
        let b = solve_homological_with(&w, &even, IntegrationConstant::HalfPeriod).unwrap();
        assert!(!phase_average(&b).is_empty());
        assert!(homological_residual(&w, &even, &b).unwrap().max_abs_coeff() < 1e-15);
    }
}
