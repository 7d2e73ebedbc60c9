mod common;

use common::{real_polynomial, spectral_mean};
use num_complex::Complex64;
use onephase::harness::builtin;
use onephase::normalform::{normal_form, normalization_step, HamiltonianSpec};
use onephase::{Error, EvalPoint, MultiIndex, TruncatedSeries, TruncationPolicy};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn landau() -> HamiltonianSpec {
    builtin("landau").unwrap().to_spec().unwrap()
}

/// Coefficient of `I * eps^e` or `y^slow * eps^e` in a real function of `I`
/// stored through `uv = -i I`.
fn action_coeff(h: &TruncatedSeries, k: u32, slow: [u32; 2], e: u32) -> f64 {
    let c = h.coeff(&MultiIndex::new(k, k, slow.to_vec(), e)) * Complex64::new(0.0, -1.0).powu(k);
    assert!(c.im.abs() < 1e-12);
    c.re
}

fn binomial_half(k: u32) -> f64 {
    (0..k).fold(1.0, |acc, j| acc * (0.5 - j as f64) / (j + 1) as f64)
}

/// Taylor coefficients of `((1 + 2e) +/- sqrt(1 + 4e^2))/2`, the two
/// frequencies of the quadratic Hamiltonian.
fn frequency_taylor(order: u32, sign: f64) -> Vec<f64> {
    let mut c = vec![0.0; order as usize + 1];
    c[0] += 0.5;
    if order >= 1 {
        c[1] += 1.0;
    }
    for k in 0..=order / 2 {
        c[2 * k as usize] += sign * 0.5 * binomial_half(k) * 4f64.powi(k as i32);
    }
    c
}

#[test]
fn remainder_order_rises_with_each_step() {
    let spec = landau();
    for m in 1..=5 {
        let nf = normal_form(&spec, m).unwrap();
        assert!(nf
            .remainder
            .lowest_eps_order()
            .is_none_or(|o| o as usize > m));
        assert!(nf.h_final.is_uv_diagonal());
    }
}

#[test]
fn first_order_is_the_phase_average() {
    let spec = landau();
    let nf = normal_form(&spec, 1).unwrap();
    let first = nf.h_final.eps_part(1);
    for &(q, p, y1, y2) in &[
        (0.1, 0.2, 0.3, -0.4),
        (0.0, 0.0, 0.5, 0.1),
        (0.7, -0.3, -0.2, 0.0),
    ] {
        let want = spectral_mean(&spec.g0, q, p, &[y1, y2]);
        let got = first
            .eval_real(&EvalPoint::new(q, p, vec![y1, y2], 1.0))
            .unwrap();
        assert!((got - want).abs() < 1e-13);
    }
}

#[test]
fn landau_frequencies_match_the_exact_linear_system() {
    let spec = landau();
    let m = 5;
    let nf = normal_form(&spec, m).unwrap();
    let fast = frequency_taylor(m as u32, 1.0);
    let slow = frequency_taylor(m as u32, -1.0);
    for e in 0..=m as u32 {
        let a = action_coeff(&nf.h_final, 1, [0, 0], e);
        assert!(
            (a - fast[e as usize]).abs() < 1e-12,
            "fast eps^{e}: {a} vs {}",
            fast[e as usize]
        );
    }
    // slow part b1 y1^2/2 + b12 y1 y2 + b2 y2^2/2 as a power series in eps
    let coeffs = |slow_idx: [u32; 2], scale: f64| -> Vec<f64> {
        (0..=m as u32)
            .map(|e| scale * action_coeff(&nf.h_final, 0, slow_idx, e))
            .collect()
    };
    let b1 = coeffs([2, 0], 2.0);
    let b2 = coeffs([0, 2], 2.0);
    let b12 = coeffs([1, 1], 1.0);
    let eps = 1e-2;
    let at = |c: &[f64]| c.iter().rev().fold(0.0, |acc, x| acc * eps + x);
    let omega = (at(&b1) * at(&b2) - at(&b12).powi(2)).sqrt();
    let exact = 0.5 * ((1.0 + 2.0 * eps) - (1.0 + 4.0 * eps * eps).sqrt());
    // agreement through eps^m, so the gap is of order eps^(m+1)
    let gap = (omega - exact).abs();
    assert!(gap < 10.0 * eps.powi(m as i32 + 1), "{omega} vs {exact}");
    let taylor = at(&slow);
    assert!((taylor - exact).abs() < 10.0 * eps.powi(m as i32 + 1));
}

#[test]
fn each_step_leaves_a_diagonal_hamiltonian() {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let p = TruncationPolicy::new(6, 4, 4, 1).unwrap();
    for _ in 0..5 {
        let h0 = TruncatedSeries::from_action_polynomial(&[0.0, 1.0, 0.3], p).unwrap();
        // no linear terms in the fast pair keeps the substitutions exact
        let g0 = real_polynomial(&mut rng, p, 4, 3, 0, 8)
            .filter(|idx| idx.k + idx.l != 1 || idx.slow.iter().sum::<u32>() > 0);
        let step = normalization_step(&h0, &g0, 0).unwrap();
        assert!(step.h_next.is_uv_diagonal());
        assert!(step.remainder.lowest_eps_order().is_none_or(|o| o >= 2));
        assert!(step.cancellation_residue < 1e-12);
    }
}

#[test]
fn anharmonic_example_normalizes() {
    let spec = builtin("anharmonic").unwrap().to_spec().unwrap();
    for m in 1..=3 {
        let nf = normal_form(&spec, m).unwrap();
        assert!(nf.h_final.is_uv_diagonal());
        assert!(nf
            .remainder
            .lowest_eps_order()
            .is_none_or(|o| o as usize > m));
    }
}

#[test]
fn angle_independent_perturbation_needs_no_generator() {
    let spec = builtin("flat").unwrap().to_spec().unwrap();
    let nf = normal_form(&spec, 3).unwrap();
    assert!(nf.generators.iter().all(|g| g.s1.is_empty()));
    assert!(nf.remainder.is_empty());
    assert_eq!(nf.transformed_hamiltonian(), spec.hamiltonian());
}

#[test]
fn rejects_bad_inputs() {
    let spec = landau();
    assert!(matches!(
        normal_form(&spec, 7),
        Err(Error::InvalidPolicy(_))
    ));
    let p = spec.policy;
    let q = TruncatedSeries::q(p);
    assert!(HamiltonianSpec::new(q.clone(), q.clone(), "x").is_err());
    let degenerate = TruncatedSeries::action(p).pow(2).unwrap();
    assert!(matches!(
        HamiltonianSpec::new(degenerate, q, "x"),
        Err(Error::DegenerateFrequency { .. })
    ));
}
