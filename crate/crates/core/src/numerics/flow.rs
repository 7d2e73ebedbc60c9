use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::poly::PhaseFunction;
use crate::error::{Error, Result};
use crate::series::TruncatedSeries;

/// A phase-space point `(q, p, y1, y2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub q: f64,
    pub p: f64,
    pub y1: Vec<f64>,
    pub y2: Vec<f64>,
}

impl State {
    pub fn new(q: f64, p: f64, y1: Vec<f64>, y2: Vec<f64>) -> Self {
        Self { q, p, y1, y2 }
    }

    pub fn n_slow_pairs(&self) -> usize {
        self.y1.len()
    }

    /// `[q, p, y1.., y2..]`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(2 + 2 * self.y1.len());
        v.push(self.q);
        v.push(self.p);
        v.extend_from_slice(&self.y1);
        v.extend_from_slice(&self.y2);
        v
    }

    pub fn from_slice(x: &[f64]) -> Self {
        let n = (x.len() - 2) / 2;
        Self {
            q: x[0],
            p: x[1],
            y1: x[2..2 + n].to_vec(),
            y2: x[2 + n..].to_vec(),
        }
    }

    pub fn action(&self) -> f64 {
        0.5 * (self.q * self.q + self.p * self.p)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.to_vec()
            .iter()
            .zip(other.to_vec())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// The structure matrix: `+1` at `(q, p)` and at each `(y1_j, y2_j)`.
pub fn symplectic_matrix(n_slow_pairs: usize) -> DMatrix<f64> {
    let dim = 2 + 2 * n_slow_pairs;
    let mut j = DMatrix::zeros(dim, dim);
    j[(0, 1)] = 1.0;
    j[(1, 0)] = -1.0;
    for k in 0..n_slow_pairs {
        j[(2 + k, 2 + n_slow_pairs + k)] = 1.0;
        j[(2 + n_slow_pairs + k, 2 + k)] = -1.0;
    }
    j
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    #[default]
    ImplicitMidpoint,
    Rk4Fixed,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub method: Method,
    pub dt: f64,
    pub t_final: f64,
    /// Newton tolerance of the implicit stage, relative to the state size.
    pub tol: f64,
    /// Record every this many steps (the final state is always recorded).
    #[serde(default = "one")]
    pub sample_every: usize,
}

fn one() -> usize {
    1
}

impl FlowConfig {
    pub fn new(method: Method, dt: f64, t_final: f64) -> Self {
        Self {
            method,
            dt,
            t_final,
            tol: 1e-14,
            sample_every: 1,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.t_final > 0.0 && self.dt < self.t_final) {
            return Err(Error::InvalidFlow(format!(
                "need 0 < dt < t_final, got dt = {}, t_final = {}",
                self.dt, self.t_final
            )));
        }
        if !(self.tol > 0.0 && self.tol <= 1e-6) {
            return Err(Error::InvalidFlow(format!(
                "tol must lie in (0, 1e-6], got {}",
                self.tol
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidFlow("sample_every must be positive".into()));
        }
        Ok(())
    }

    /// Number of steps and the uniform step that lands exactly on `t_final`.
    pub fn steps(&self) -> (usize, f64) {
        let n = (self.t_final / self.dt).ceil().max(1.0) as usize;
        (n, self.t_final / n as f64)
    }
}

/// Samples of one trajectory.
#[derive(Clone, Debug, Serialize)]
pub struct TrajectoryReport {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub energy: Vec<f64>,
    /// `(Q^2 + P^2)/2` after the inverse transformation; empty until filled.
    pub transformed_action: Vec<f64>,
    /// `max |J(t) - J(0)|`; zero until `transformed_action` is filled.
    pub drift: f64,
    pub energy_drift: f64,
}

/// Hamilton's equations for a real polynomial Hamiltonian.
pub struct HamiltonianField {
    h: PhaseFunction,
    j: DMatrix<f64>,
}

impl HamiltonianField {
    pub fn new(h: &TruncatedSeries, eps: f64) -> Result<Self> {
        let n = h.policy().n_slow_pairs as usize;
        Ok(Self {
            h: PhaseFunction::from_series(h, eps)?,
            j: symplectic_matrix(n),
        })
    }

    pub fn energy(&self, x: &[f64]) -> f64 {
        self.h.eval(x)
    }

    pub fn rhs(&self, x: &[f64]) -> DVector<f64> {
        &self.j * self.h.gradient(x)
    }

    fn rhs_jacobian(&self, x: &[f64]) -> DMatrix<f64> {
        &self.j * self.h.hessian(x)
    }

    fn midpoint_step(
        &self,
        x0: &DVector<f64>,
        dt: f64,
        tol: f64,
        time: f64,
    ) -> Result<DVector<f64>> {
        let dim = x0.len();
        let mut x1 = x0 + self.rhs(x0.as_slice()) * dt;
        for _ in 0..50 {
            let mid = (x0 + &x1) * 0.5;
            let residual = &x1 - x0 - self.rhs(mid.as_slice()) * dt;
            let jac = DMatrix::identity(dim, dim) - self.rhs_jacobian(mid.as_slice()) * (0.5 * dt);
            let delta = jac
                .lu()
                .solve(&residual)
                .ok_or(Error::StepSize { time, dt })?;
            x1 -= &delta;
            if !x1.iter().all(|v| v.is_finite()) {
                break;
            }
            if delta.amax() <= tol * (1.0 + x1.amax()) {
                return Ok(x1);
            }
        }
        Err(Error::StepSize { time, dt })
    }

    fn rk4_step(&self, x0: &DVector<f64>, dt: f64) -> DVector<f64> {
        let k1 = self.rhs(x0.as_slice());
        let k2 = self.rhs((x0 + &k1 * (0.5 * dt)).as_slice());
        let k3 = self.rhs((x0 + &k2 * (0.5 * dt)).as_slice());
        let k4 = self.rhs((x0 + &k3 * dt).as_slice());
        x0 + (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0)
    }

    /// Integrates from `x0`, calling `visit(t, x)` at every recorded sample.
    pub fn integrate(
        &self,
        x0: &[f64],
        cfg: &FlowConfig,
        mut visit: impl FnMut(f64, &[f64]) -> Result<()>,
    ) -> Result<()> {
        cfg.validate()?;
        let (n, dt) = cfg.steps();
        let mut x = DVector::from_column_slice(x0);
        visit(0.0, x.as_slice())?;
        for step in 1..=n {
            let t = step as f64 * dt;
            x = match cfg.method {
                Method::ImplicitMidpoint => self.midpoint_step(&x, dt, cfg.tol, t - dt)?,
                Method::Rk4Fixed => self.rk4_step(&x, dt),
            };
            if !x.iter().all(|v| v.is_finite()) {
                return Err(Error::StepSize { time: t, dt });
            }
            if step % cfg.sample_every == 0 || step == n {
                visit(t, x.as_slice())?;
            }
        }
        Ok(())
    }
}

/// Integrates Hamilton's equations `q' = H_p, p' = -H_q, y1' = H_y2, y2' = -H_y1`.
pub fn flow(
    h: &TruncatedSeries,
    x0: &State,
    eps: f64,
    cfg: &FlowConfig,
) -> Result<TrajectoryReport> {
    let n = h.policy().n_slow_pairs as usize;
    if x0.y1.len() != n || x0.y2.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x0.y1.len().max(x0.y2.len()),
        });
    }
    let field = HamiltonianField::new(h, eps)?;
    let mut report = TrajectoryReport {
        times: Vec::new(),
        states: Vec::new(),
        energy: Vec::new(),
        transformed_action: Vec::new(),
        drift: 0.0,
        energy_drift: 0.0,
    };
    let e0 = field.energy(&x0.to_vec());
    field.integrate(&x0.to_vec(), cfg, |t, x| {
        let e = field.energy(x);
        report.times.push(t);
        report.states.push(State::from_slice(x));
        report.energy.push(e);
        report.energy_drift = report.energy_drift.max((e - e0).abs());
        Ok(())
    })?;
    Ok(report)
}
