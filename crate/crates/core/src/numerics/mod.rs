//! Numeric validation: flows of the original Hamiltonian, point-wise
//! evaluation of the composed canonical maps and drift experiments.

mod experiment;
mod flow;
mod poly;
mod transform;

use crate::error::Result;
use crate::normalform::NormalFormResult;
use crate::series::{EvalPoint, TruncatedSeries};

pub use experiment::{
    drift_experiment, drift_rows, linear_fit, local_loglog_slopes, loglog_slope,
    optimal_order_probe, sample_initial_conditions, trajectory_drift, validate_eps_list, DriftRow,
    DriftTable, ExperimentConfig, InitialCondition, LinearFit, ProbeRow, ProbeTable,
    TrajectoryDrift, DEFAULT_SEED,
};
pub use flow::{
    flow, symplectic_matrix, FlowConfig, HamiltonianField, Method, State, TrajectoryReport,
};
pub use poly::{PhaseFunction, PhasePolynomial};
pub use transform::{
    roundtrip_error, symplecticity_check, transform_point, Direction, PointTransform,
    CONTRACTION_LIMIT,
};

/// Fills `transformed_action` and `drift` of a flow report.
pub fn attach_transformed_action(
    report: &mut TrajectoryReport,
    transform: &PointTransform,
) -> Result<()> {
    report.transformed_action = report
        .states
        .iter()
        .map(|x| transform.apply(x, Direction::Inverse).map(|y| y.action()))
        .collect::<Result<_>>()?;
    let j0 = report.transformed_action.first().copied().unwrap_or(0.0);
    report.drift = report
        .transformed_action
        .iter()
        .map(|j| (j - j0).abs())
        .fold(0.0, f64::max);
    Ok(())
}

/// Largest `|s|` over a sample of points at numeric `eps`.
pub fn sup_norm(s: &TruncatedSeries, points: &[State], eps: f64) -> Result<f64> {
    let mut best: f64 = 0.0;
    for x in points {
        let mut y = x.y1.clone();
        y.extend_from_slice(&x.y2);
        best = best.max(s.eval(&EvalPoint::new(x.q, x.p, y, eps))?.norm());
    }
    Ok(best)
}

/// Transformed Hamiltonian at the new point minus the original at the old point.
pub fn hamiltonian_consistency(
    original: &TruncatedSeries,
    nf: &NormalFormResult,
    x_old: &State,
    eps: f64,
) -> Result<f64> {
    let n = x_old.n_slow_pairs();
    let t = PointTransform::new(&nf.generators, eps, n)?;
    let x_new = t.apply(x_old, Direction::Inverse)?;
    let at = |x: &State| {
        let mut y = x.y1.clone();
        y.extend_from_slice(&x.y2);
        EvalPoint::new(x.q, x.p, y, eps)
    };
    let lhs = nf.transformed_hamiltonian().eval_real(&at(&x_new))?;
    let rhs = original.eval_real(&at(x_old))?;
    Ok((lhs - rhs).abs())
}
