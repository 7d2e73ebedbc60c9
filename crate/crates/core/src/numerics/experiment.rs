//! Drift of the transformed action along trajectories of the original flow.

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::flow::{FlowConfig, HamiltonianField, Method, State};
use super::transform::{Direction, PointTransform};
use crate::error::{Error, Result};
use crate::normalform::{normal_form, GeneratingFunction, HamiltonianSpec};

pub const DEFAULT_SEED: u64 = 20240917;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    /// `T = horizon_factor / eps`.
    pub horizon_factor: f64,
    /// Initial step; halved until the drift settles.
    pub dt: f64,
    pub method: Method,
    pub tol: f64,
    /// Initial actions `I(0)`, one trajectory each.
    pub initial_actions: Vec<f64>,
    /// Slow initial values are drawn uniformly from `[-slow_range, slow_range]`.
    pub slow_range: f64,
    pub seed: u64,
    /// Time between samples of `J`.
    pub sample_interval: f64,
    pub max_halvings: usize,
    /// Relative change of the drift below which `dt` counts as converged.
    pub settle_tol: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            horizon_factor: 1.0,
            dt: 0.02,
            method: Method::ImplicitMidpoint,
            tol: 1e-14,
            initial_actions: vec![0.0, 1e-4, 0.1, 0.5],
            slow_range: 0.5,
            seed: DEFAULT_SEED,
            sample_interval: 0.05,
            max_halvings: 3,
            settle_tol: 0.01,
        }
    }
}

/// One sampled initial condition, echoed into reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InitialCondition {
    pub action: f64,
    pub phase: f64,
    pub state: State,
}

/// `q = sqrt(2I) sin(phase)`, `p = sqrt(2I) cos(phase)`, slow values uniform.
pub fn sample_initial_conditions(
    cfg: &ExperimentConfig,
    n_slow_pairs: usize,
) -> Vec<InitialCondition> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    cfg.initial_actions
        .iter()
        .map(|&action| {
            let phase = rng.gen_range(0.0..2.0 * PI);
            let mut slow = || rng.gen_range(-cfg.slow_range..=cfg.slow_range);
            let y1: Vec<f64> = (0..n_slow_pairs).map(|_| slow()).collect();
            let y2: Vec<f64> = (0..n_slow_pairs).map(|_| slow()).collect();
            let r = (2.0 * action).sqrt();
            InitialCondition {
                action,
                phase,
                state: State::new(r * phase.sin(), r * phase.cos(), y1, y2),
            }
        })
        .collect()
}

/// Drift of one trajectory at the settled step.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TrajectoryDrift {
    pub drift: f64,
    pub j0: f64,
    pub energy_drift: f64,
    pub dt: f64,
    pub settled: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftRow {
    pub eps: f64,
    /// Largest drift over the initial conditions.
    pub drift: f64,
    pub per_ic: Vec<TrajectoryDrift>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DriftTable {
    pub order: usize,
    /// Number of generators actually built (smaller if the remainder vanished).
    pub generators: usize,
    pub rows: Vec<DriftRow>,
    /// Least-squares slope of `log drift` against `log eps`.
    pub slope: Option<f64>,
    /// Slopes between consecutive `eps` values.
    pub local_slopes: Vec<f64>,
    pub initial_conditions: Vec<InitialCondition>,
}

impl DriftTable {
    /// Least-squares slope restricted to one initial condition.
    pub fn slope_for_ic(&self, ic: usize) -> Option<f64> {
        let pts: Vec<(f64, f64)> = self
            .rows
            .iter()
            .map(|r| (r.eps, r.per_ic[ic].drift))
            .collect();
        loglog_slope(&pts)
    }
}

/// Non-empty, positive and strictly decreasing.
pub fn validate_eps_list(eps_list: &[f64]) -> Result<()> {
    if eps_list.is_empty() {
        return Err(Error::InvalidExperiment("eps list is empty".into()));
    }
    if eps_list.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
        return Err(Error::InvalidExperiment(
            "eps values must be positive".into(),
        ));
    }
    if eps_list.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::InvalidExperiment(
            "eps list must be strictly decreasing".into(),
        ));
    }
    Ok(())
}

/// Least-squares slope of `log y` against `log x` over the positive samples.
pub fn loglog_slope(points: &[(f64, f64)]) -> Option<f64> {
    let logs: Vec<(f64, f64)> = points
        .iter()
        .filter(|(x, y)| *x > 0.0 && *y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    linear_fit(&logs).map(|f| f.slope)
}

/// Slopes of `log y` against `log x` between consecutive samples.
pub fn local_loglog_slopes(points: &[(f64, f64)]) -> Vec<f64> {
    points
        .windows(2)
        .map(|w| (w[1].1.ln() - w[0].1.ln()) / (w[1].0.ln() - w[0].0.ln()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
}

pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some(LinearFit {
        slope,
        intercept: my - slope * mx,
    })
}

/// `max_t |J(t) - J(0)|` along the flow of `field` with `J = (Q^2 + P^2)/2`.
fn single_drift(
    field: &HamiltonianField,
    transform: &PointTransform,
    x0: &State,
    cfg: &FlowConfig,
) -> Result<(f64, f64, f64)> {
    let e0 = field.energy(&x0.to_vec());
    let j_of = |x: &[f64]| -> Result<f64> {
        let y = transform.apply_slice(x, Direction::Inverse)?;
        Ok(0.5 * (y[0] * y[0] + y[1] * y[1]))
    };
    let j0 = j_of(&x0.to_vec())?;
    let mut drift: f64 = 0.0;
    let mut energy_drift: f64 = 0.0;
    field.integrate(&x0.to_vec(), cfg, |_, x| {
        drift = drift.max((j_of(x)? - j0).abs());
        energy_drift = energy_drift.max((field.energy(x) - e0).abs());
        Ok(())
    })?;
    Ok((drift, j0, energy_drift))
}

/// Runs one trajectory, halving `dt` until the drift changes by less than
/// `settle_tol` (relative) or `max_halvings` is reached.
pub fn trajectory_drift(
    field: &HamiltonianField,
    transform: &PointTransform,
    x0: &State,
    eps: f64,
    cfg: &ExperimentConfig,
) -> Result<TrajectoryDrift> {
    let t_final = cfg.horizon_factor / eps;
    let flow_cfg = |dt: f64| {
        let mut f = FlowConfig::new(cfg.method, dt, t_final);
        f.tol = cfg.tol;
        f.sample_every = ((cfg.sample_interval / dt).round() as usize).max(1);
        f
    };
    let mut dt = cfg.dt.min(0.5 * t_final);
    let (mut drift, mut j0, mut energy_drift) = single_drift(field, transform, x0, &flow_cfg(dt))?;
    let mut settled = false;
    for _ in 0..cfg.max_halvings {
        let next_dt = 0.5 * dt;
        let (d, j, e) = single_drift(field, transform, x0, &flow_cfg(next_dt))?;
        let change = (d - drift).abs();
        dt = next_dt;
        drift = d;
        j0 = j;
        energy_drift = e;
        if change <= cfg.settle_tol * d.abs() {
            settled = true;
            break;
        }
    }
    Ok(TrajectoryDrift {
        drift,
        j0,
        energy_drift,
        dt,
        settled,
    })
}

/// Drift rows for fixed generators over an `eps` list.
pub fn drift_rows(
    spec: &HamiltonianSpec,
    gens: &[GeneratingFunction],
    eps_list: &[f64],
    ics: &[InitialCondition],
    cfg: &ExperimentConfig,
) -> Result<Vec<DriftRow>> {
    validate_eps_list(eps_list)?;
    let n = spec.policy.n_slow_pairs as usize;
    let h = spec.hamiltonian();
    let jobs: Vec<(usize, usize)> = (0..eps_list.len())
        .flat_map(|e| (0..ics.len()).map(move |i| (e, i)))
        .collect();
    let results: Vec<Result<TrajectoryDrift>> = jobs
        .par_iter()
        .map(|&(e, i)| {
            let eps = eps_list[e];
            let field = HamiltonianField::new(&h, eps)?;
            let transform = PointTransform::new(gens, eps, n)?;
            trajectory_drift(&field, &transform, &ics[i].state, eps, cfg)
        })
        .collect();
    let mut rows: Vec<DriftRow> = eps_list
        .iter()
        .map(|&eps| DriftRow {
            eps,
            drift: 0.0,
            per_ic: Vec::with_capacity(ics.len()),
        })
        .collect();
    for (&(e, _), r) in jobs.iter().zip(results) {
        let r = r?;
        rows[e].drift = rows[e].drift.max(r.drift);
        rows[e].per_ic.push(r);
    }
    Ok(rows)
}

/// Normalizes to order `m`, then measures the drift of `J` over `T = c/eps`.
pub fn drift_experiment(
    spec: &HamiltonianSpec,
    m: usize,
    eps_list: &[f64],
    cfg: &ExperimentConfig,
) -> Result<DriftTable> {
    validate_eps_list(eps_list)?;
    let nf = normal_form(spec, m)?;
    let ics = sample_initial_conditions(cfg, spec.policy.n_slow_pairs as usize);
    let rows = drift_rows(spec, &nf.generators, eps_list, &ics, cfg)?;
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.drift)).collect();
    Ok(DriftTable {
        order: m,
        generators: nf.generators.len(),
        slope: loglog_slope(&pts),
        local_slopes: local_loglog_slopes(&pts),
        rows,
        initial_conditions: ics,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeRow {
    pub eps: f64,
    pub best_m: usize,
    pub min_drift: f64,
    /// Drift for `m = 1..=m_max`.
    pub drift_by_order: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ProbeTable {
    pub m_max: usize,
    pub rows: Vec<ProbeRow>,
    /// Fit of `log(min_drift)` against `1/eps`.
    pub fit: Option<LinearFit>,
    pub local_slopes: Vec<f64>,
    pub best_m_nondecreasing: bool,
    pub min_drift_nonincreasing: bool,
    /// Magnitudes of the local slopes strictly increase as `eps` decreases.
    pub slopes_steepen: bool,
    pub warnings: Vec<String>,
    pub initial_conditions: Vec<InitialCondition>,
}

/// For each `eps`, the order `m <= m_max` with the smallest drift.
pub fn optimal_order_probe(
    spec: &HamiltonianSpec,
    eps_list: &[f64],
    m_max: usize,
    cfg: &ExperimentConfig,
) -> Result<ProbeTable> {
    validate_eps_list(eps_list)?;
    if m_max == 0 {
        return Err(Error::InvalidExperiment("m_max must be at least 1".into()));
    }
    let ics = sample_initial_conditions(cfg, spec.policy.n_slow_pairs as usize);
    let nf = normal_form(spec, m_max)?;
    let mut by_order: Vec<Vec<DriftRow>> = Vec::with_capacity(m_max);
    for m in 1..=m_max {
        let gens = &nf.generators[..m.min(nf.generators.len())];
        by_order.push(drift_rows(spec, gens, eps_list, &ics, cfg)?);
    }
    let rows: Vec<ProbeRow> = eps_list
        .iter()
        .enumerate()
        .map(|(e, &eps)| {
            let drift_by_order: Vec<f64> = by_order.iter().map(|rows| rows[e].drift).collect();
            let (best, min) =
                drift_by_order
                    .iter()
                    .enumerate()
                    .fold(
                        (0, f64::INFINITY),
                        |acc, (i, &d)| if d < acc.1 { (i, d) } else { acc },
                    );
            ProbeRow {
                eps,
                best_m: best + 1,
                min_drift: min,
                drift_by_order,
            }
        })
        .collect();

    let mut warnings = Vec::new();
    if rows.len() < 2 {
        warnings.push("a single eps value admits no fit".to_string());
    }
    let inv: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.min_drift > 0.0)
        .map(|r| (1.0 / r.eps, r.min_drift.ln()))
        .collect();
    let pts: Vec<(f64, f64)> = rows.iter().map(|r| (r.eps, r.min_drift)).collect();
    let local_slopes = local_loglog_slopes(&pts);
    Ok(ProbeTable {
        m_max,
        best_m_nondecreasing: rows.windows(2).all(|w| w[1].best_m >= w[0].best_m),
        min_drift_nonincreasing: rows.windows(2).all(|w| w[1].min_drift <= w[0].min_drift),
        slopes_steepen: local_slopes.windows(2).all(|w| w[1].abs() > w[0].abs()),
        fit: linear_fit(&inv),
        local_slopes,
        rows,
        warnings,
        initial_conditions: ics,
    })
}
