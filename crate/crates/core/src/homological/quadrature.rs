//! Quadrature along the circle of constant action, used as an independent
//! check on the series solutions.

use std::f64::consts::PI;

use gauss_quad::GaussLegendre;

use crate::error::{Error, Result};
use crate::series::{EvalPoint, TruncatedSeries};

/// Composite Gauss-Legendre rule whose panel count doubles until two
/// successive estimates agree to `tol`.
pub struct AdaptiveGauss {
    rule: GaussLegendre,
    tol: f64,
    max_panels: usize,
}

impl AdaptiveGauss {
    pub fn new(nodes: usize, tol: f64) -> Self {
        Self {
            rule: GaussLegendre::new(nodes).expect("node count at least 2"),
            tol,
            max_panels: 1 << 12,
        }
    }

    fn composite(&self, a: f64, b: f64, panels: usize, f: &mut impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|j| {
                let lo = a + h * j as f64;
                self.rule.integrate(lo, lo + h, &mut *f)
            })
            .sum()
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        if a == b {
            return 0.0;
        }
        let mut panels = 1;
        let mut prev = self.composite(a, b, panels, &mut f);
        while panels < self.max_panels {
            panels *= 2;
            let next = self.composite(a, b, panels, &mut f);
            if (next - prev).abs() < self.tol {
                return next;
            }
            prev = next;
        }
        prev
    }
}

impl Default for AdaptiveGauss {
    fn default() -> Self {
        Self::new(64, 1e-10)
    }
}

fn circle(point: &EvalPoint) -> (f64, impl Fn(f64) -> EvalPoint + '_) {
    let action = 0.5 * (point.q * point.q + point.p * point.p);
    let radius = (2.0 * action).sqrt();
    let at = move |psi: f64| {
        EvalPoint::new(
            radius * psi.sin(),
            radius * psi.cos(),
            point.y.clone(),
            point.eps,
        )
    };
    (action, at)
}

/// `(1/2pi) * integral of g over the circle of constant action through `point``.
pub fn quadrature_average(g: &TruncatedSeries, point: &EvalPoint) -> Result<f64> {
    let quad = AdaptiveGauss::default();
    let (_, at) = circle(point);
    let mut err = None;
    let total = quad.integrate(0.0, 2.0 * PI, |psi| match g.eval_real(&at(psi)) {
        Ok(x) => x,
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(total / (2.0 * PI)),
    }
}

/// The closed-form solution of the homological equation,
/// `(1/w'(I)) * (1/2) * (int_0^phi gt + int_pi^phi gt)` with `gt = <g> - g`,
/// evaluated by quadrature at a real point.
///
/// `phi = atan2(q, p)`. `w'` is taken by a five-point stencil in `I`.
pub fn integral_formula_eval(
    w: &TruncatedSeries,
    g: &TruncatedSeries,
    point: &EvalPoint,
) -> Result<f64> {
    let (action, at) = circle(point);
    let rho = (2.0 * action).sqrt();
    if rho < 1e-8 {
        return Err(Error::ChartDegenerate { rho });
    }
    // fail early on dimension errors so the integrands below cannot
    g.eval(point)?;
    w.eval(point)?;

    let quad = AdaptiveGauss::default();
    let g_at = |psi: f64| g.eval_real(&at(psi)).expect("dimension checked");
    let mean = quad.integrate(0.0, 2.0 * PI, g_at) / (2.0 * PI);
    let tilde = |psi: f64| mean - g_at(psi);
    let phi = point.q.atan2(point.p);
    let integral = 0.5 * (quad.integrate(0.0, phi, tilde) + quad.integrate(PI, phi, tilde));

    let w_of = |s: f64| {
        w.eval_real(&EvalPoint::new(
            0.0,
            (2.0 * s).sqrt(),
            point.y.clone(),
            point.eps,
        ))
        .expect("dimension checked")
    };
    let h = (action / 4.0).min(1e-3);
    let wprime = (-w_of(action + 2.0 * h) + 8.0 * w_of(action + h) - 8.0 * w_of(action - h)
        + w_of(action - 2.0 * h))
        / (12.0 * h);
    if wprime.abs() < super::DEGENERACY_THRESHOLD {
        return Err(Error::DegenerateFrequency {
            constant: wprime.abs(),
        });
    }
    Ok(integral / wprime)
}
