mod common;

use common::{random_frequency, real_polynomial, spectral_mean, spectral_solution};
use onephase::homological::{
    homological_residual, integral_formula_eval, oscillating_part, phase_average,
    quadrature_average, solve_homological, solve_homological_with, IntegrationConstant,
};
use onephase::{Error, EvalPoint, TruncatedSeries, TruncationPolicy};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn point_on(rng: &mut impl Rng, r_min: f64, r_max: f64) -> (f64, f64, Vec<f64>) {
    let r = rng.gen_range(r_min..r_max);
    let phi = rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI);
    let y = vec![rng.gen_range(-0.5..0.5), rng.gen_range(-0.5..0.5)];
    (r * phi.sin(), r * phi.cos(), y)
}

#[test]
fn residual_vanishes_for_random_pairs() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let p = TruncationPolicy::new(8, 4, 4, 1).unwrap();
    for _ in 0..40 {
        let w = random_frequency(&mut rng, p, 4);
        let g = real_polynomial(&mut rng, p, 8, 4, 4, 12);
        let big_w = solve_homological(&w, &g).unwrap();
        assert!(
            homological_residual(&w, &g, &big_w)
                .unwrap()
                .max_abs_coeff()
                < 1e-12
        );
        assert!(phase_average(&big_w).is_empty());
        assert!(big_w.iter().all(|(idx, _)| p.admits(&idx)));
    }
}

#[test]
fn average_matches_spectral_mean() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let p = TruncationPolicy::new(8, 3, 1, 1).unwrap();
    for _ in 0..30 {
        let g = real_polynomial(&mut rng, p, 8, 3, 0, 10);
        let avg = phase_average(&g);
        for _ in 0..5 {
            let (q, pp, y) = point_on(&mut rng, 0.0, 1.5);
            let want = spectral_mean(&g, q, pp, &y);
            let got = avg
                .eval_real(&EvalPoint::new(q, pp, y.clone(), 0.0))
                .unwrap();
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
            let quad = quadrature_average(&g, &EvalPoint::new(q, pp, y, 0.0)).unwrap();
            assert!((quad - want).abs() < 1e-12);
        }
    }
}

#[test]
fn projections_are_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let p = TruncationPolicy::new(8, 3, 2, 1).unwrap();
    for _ in 0..20 {
        let g = real_polynomial(&mut rng, p, 8, 3, 2, 10);
        assert_eq!(phase_average(&phase_average(&g)), phase_average(&g));
        assert!(phase_average(&oscillating_part(&g)).is_empty());
    }
}

/// Linear-plus-quadratic frequency with a roomy uv bound, so the truncated
/// `1/w'` is accurate far below the comparison tolerance.
fn oracle_setup(
    rng: &mut impl Rng,
) -> (TruncationPolicy, Vec<f64>, TruncatedSeries, TruncatedSeries) {
    let p = TruncationPolicy::new(32, 2, 1, 1).unwrap();
    let c1 = rng.gen_range(0.5..2.0) * if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
    let coeffs = vec![0.0, c1, rng.gen_range(-0.1..0.1)];
    let w = TruncatedSeries::from_action_polynomial(&coeffs, p).unwrap();
    let g = real_polynomial(rng, p, 6, 2, 0, 8);
    (p, coeffs, w, g)
}

#[test]
fn half_period_series_matches_the_integral_formula() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..10 {
        let (_, coeffs, w, g) = oracle_setup(&mut rng);
        let big_w = solve_homological_with(&w, &g, IntegrationConstant::HalfPeriod).unwrap();
        for _ in 0..5 {
            let (q, pp, y) = point_on(&mut rng, 0.05, 1.0);
            let want = spectral_solution(&coeffs, &g, q, pp, &y);
            let x = EvalPoint::new(q, pp, y, 0.0);
            let series = big_w.eval_real(&x).unwrap();
            let quad = integral_formula_eval(&w, &g, &x).unwrap();
            assert!((series - want).abs() < 1e-8, "series {series} vs {want}");
            assert!((quad - want).abs() < 1e-8, "quadrature {quad} vs {want}");
        }
    }
}

#[test]
fn zero_mean_solution_differs_by_a_function_of_the_action() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10 {
        let (_, coeffs, w, g) = oracle_setup(&mut rng);
        let big_w = solve_homological(&w, &g).unwrap();
        let (q, pp, y) = point_on(&mut rng, 0.05, 1.0);
        let r = q.hypot(pp);
        let diff = |phi: f64| {
            let (qq, pq) = (r * phi.sin(), r * phi.cos());
            big_w
                .eval_real(&EvalPoint::new(qq, pq, y.clone(), 0.0))
                .unwrap()
                - spectral_solution(&coeffs, &g, qq, pq, &y)
        };
        let d0 = diff(0.3);
        for phi in [1.1, 2.5, -2.0] {
            assert!((diff(phi) - d0).abs() < 1e-8);
        }
    }
}

#[test]
fn series_stays_bounded_near_the_origin() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..10 {
        let (_, coeffs, w, g) = oracle_setup(&mut rng);
        let big_w = solve_homological_with(&w, &g, IntegrationConstant::HalfPeriod).unwrap();
        let y = vec![0.2, -0.1];
        let at_zero = big_w
            .eval_real(&EvalPoint::new(0.0, 0.0, y.clone(), 0.0))
            .unwrap();
        let mut prev: Option<f64> = None;
        for k in 0..=40 {
            let r = 1e-4 * (500.0f64).powf(k as f64 / 40.0);
            let (q, pp) = (r * 0.4f64.sin(), r * 0.4f64.cos());
            let v = big_w
                .eval_real(&EvalPoint::new(q, pp, y.clone(), 0.0))
                .unwrap();
            assert!(v.is_finite());
            assert!(
                (v - at_zero).abs() < 50.0 * r,
                "not Lipschitz at the origin: r = {r}"
            );
            if let Some(prev) = prev {
                assert!((v - prev).abs() < 50.0 * r);
            }
            prev = Some(v);
            if r >= 0.01 {
                let want = spectral_solution(&coeffs, &g, q, pp, &y);
                assert!((v - want).abs() < 1e-8);
            }
        }
    }
}

#[test]
fn errors() {
    let p = TruncationPolicy::new(6, 2, 1, 1).unwrap();
    let w = TruncatedSeries::action(p).pow(2).unwrap();
    let q = TruncatedSeries::q(p);
    assert!(matches!(
        solve_homological(&w, &q),
        Err(Error::DegenerateFrequency { .. })
    ));
    let x = EvalPoint::new(0.0, 0.0, vec![0.0, 0.0], 0.0);
    assert!(matches!(
        integral_formula_eval(&TruncatedSeries::action(p), &q, &x),
        Err(Error::ChartDegenerate { .. })
    ));
    assert!(matches!(
        solve_homological(&q, &q),
        Err(Error::NotDiagonal { .. })
    ));
}
