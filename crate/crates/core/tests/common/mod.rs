#![allow(dead_code)]

use num_complex::Complex64;
use onephase::{MultiIndex, TruncatedSeries, TruncationPolicy};
use rand::Rng;

/// Sparse series with Gaussian-integer coefficients in `[-3, 3] + i[-3, 3]`.
pub fn gaussian_series(
    rng: &mut impl Rng,
    policy: TruncationPolicy,
    max_uv: u32,
    max_slow: u32,
    max_e: u32,
    n_terms: usize,
) -> TruncatedSeries {
    let n = policy.slow_count();
    let mut terms = Vec::with_capacity(n_terms);
    while terms.len() < n_terms {
        let k = rng.gen_range(0..=max_uv);
        let l = rng.gen_range(0..=max_uv - k);
        let mut slow = vec![0u32; n];
        for _ in 0..rng.gen_range(0..=max_slow) {
            slow[rng.gen_range(0..n)] += 1;
        }
        let e = rng.gen_range(0..=max_e);
        let c = Complex64::new(rng.gen_range(-3..=3) as f64, rng.gen_range(-3..=3) as f64);
        terms.push((MultiIndex::new(k, l, slow, e), c));
    }
    TruncatedSeries::from_terms(policy, terms, false).unwrap()
}

/// Real polynomial in `(q, p, y)` with coefficients in `[-1, 1]`, optionally
/// times powers of `eps`.
pub fn real_polynomial(
    rng: &mut impl Rng,
    policy: TruncationPolicy,
    max_uv: u32,
    max_slow: u32,
    max_e: u32,
    n_terms: usize,
) -> TruncatedSeries {
    let n = policy.n_slow_pairs as usize;
    let mut acc = TruncatedSeries::zero(policy);
    for _ in 0..n_terms {
        let a = rng.gen_range(0..=max_uv);
        let b = rng.gen_range(0..=max_uv - a);
        let mut y1 = vec![0u32; n];
        let mut y2 = vec![0u32; n];
        for _ in 0..rng.gen_range(0..=max_slow) {
            let j = rng.gen_range(0..n);
            if rng.gen_bool(0.5) {
                y1[j] += 1;
            } else {
                y2[j] += 1;
            }
        }
        let e = rng.gen_range(0..=max_e);
        let c = rng.gen_range(-1.0..1.0);
        let m = TruncatedSeries::phase_monomial(policy, a, b, &y1, &y2, c)
            .unwrap()
            .mul_eps_power(e);
        acc = acc.add(&m).unwrap();
    }
    acc
}

/// Random `w(I) = sum c_j I^j` with `c_1` bounded away from zero.
pub fn random_frequency(
    rng: &mut impl Rng,
    policy: TruncationPolicy,
    degree: usize,
) -> TruncatedSeries {
    let mut coeffs = vec![0.0; degree + 1];
    coeffs[1] = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    for c in coeffs.iter_mut().skip(2) {
        *c = rng.gen_range(-0.5..0.5);
    }
    TruncatedSeries::from_action_polynomial(&coeffs, policy).unwrap()
}

pub fn exact_zero(s: &TruncatedSeries) -> bool {
    s.iter().all(|(_, c)| c.re == 0.0 && c.im == 0.0)
}

/// Bracket laws on one triple; returns the first failing law.
pub fn bracket_laws(
    a: &TruncatedSeries,
    b: &TruncatedSeries,
    c: &TruncatedSeries,
) -> Result<(), String> {
    type Bracket = fn(&TruncatedSeries, &TruncatedSeries) -> onephase::Result<TruncatedSeries>;
    let brackets: [(&str, Bracket); 2] = [
        ("fast", TruncatedSeries::poisson_fast),
        ("slow", TruncatedSeries::poisson_slow),
    ];
    for (name, br) in brackets {
        let anti = br(a, b).unwrap().add(&br(b, a).unwrap()).unwrap();
        if !exact_zero(&anti) {
            return Err(format!("{name}: antisymmetry"));
        }
        let lhs = br(a, &b.mul(c).unwrap()).unwrap();
        let rhs = br(a, b)
            .unwrap()
            .mul(c)
            .unwrap()
            .add(&b.mul(&br(a, c).unwrap()).unwrap())
            .unwrap();
        if !exact_zero(&lhs.sub(&rhs).unwrap()) {
            return Err(format!("{name}: Leibniz"));
        }
        let jac = br(a, &br(b, c).unwrap())
            .unwrap()
            .add(&br(b, &br(c, a).unwrap()).unwrap())
            .unwrap()
            .add(&br(c, &br(a, b).unwrap()).unwrap())
            .unwrap();
        if !exact_zero(&jac) {
            return Err(format!("{name}: Jacobi"));
        }
    }
    Ok(())
}

/// Fourier coefficients `a_n`, `|n| < samples/2`, of `psi -> g` on the circle
/// `q = r sin(psi)`, `p = r cos(psi)`; exact for trigonometric polynomials of
/// lower degree.
pub fn circle_spectrum(
    g: &TruncatedSeries,
    radius: f64,
    y: &[f64],
    samples: usize,
) -> Vec<(i64, Complex64)> {
    let values: Vec<f64> = (0..samples)
        .map(|j| {
            let psi = 2.0 * std::f64::consts::PI * j as f64 / samples as f64;
            g.eval_real(&onephase::EvalPoint::new(
                radius * psi.sin(),
                radius * psi.cos(),
                y.to_vec(),
                0.0,
            ))
            .unwrap()
        })
        .collect();
    let half = (samples / 2) as i64 - 1;
    (-half..=half)
        .map(|n| {
            let sum: Complex64 = values
                .iter()
                .enumerate()
                .map(|(j, &x)| {
                    let psi = 2.0 * std::f64::consts::PI * j as f64 / samples as f64;
                    x * Complex64::from_polar(1.0, -(n as f64) * psi)
                })
                .sum();
            (n, sum / samples as f64)
        })
        .collect()
}

pub fn spectral_mean(g: &TruncatedSeries, q: f64, p: f64, y: &[f64]) -> f64 {
    let r = q.hypot(p);
    circle_spectrum(g, r, y, 64)
        .into_iter()
        .find(|(n, _)| *n == 0)
        .unwrap()
        .1
        .re
}

/// `(1/w'(I)) (1/2)(int_0^phi + int_pi^phi)(<g> - g) dpsi` with the integrals
/// taken harmonic by harmonic and `w' = sum_j j c_j I^(j-1)`.
pub fn spectral_solution(w_coeffs: &[f64], g: &TruncatedSeries, q: f64, p: f64, y: &[f64]) -> f64 {
    let r = q.hypot(p);
    let action = 0.5 * r * r;
    let phi = q.atan2(p);
    let i = Complex64::new(0.0, 1.0);
    let mut integral = Complex64::new(0.0, 0.0);
    for (n, a) in circle_spectrum(g, r, y, 64) {
        if n == 0 {
            continue;
        }
        let nf = n as f64;
        let end = Complex64::from_polar(1.0, nf * phi);
        let from_zero = (end - 1.0) / (i * nf);
        let from_pi = (end - Complex64::from_polar(1.0, nf * std::f64::consts::PI)) / (i * nf);
        integral -= a * 0.5 * (from_zero + from_pi);
    }
    let wprime: f64 = w_coeffs
        .iter()
        .enumerate()
        .skip(1)
        .map(|(j, c)| j as f64 * c * action.powi(j as i32 - 1))
        .sum();
    integral.re / wprime
}
