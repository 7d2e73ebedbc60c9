//! Pipelines behind `normalize`, `validate` and `probe`, with their CSV and JSON forms.

use serde::Serialize;

use super::ProblemFile;
use crate::error::{Error, Result};
use crate::normalform::{normal_form, HamiltonianSpec, StepSummary};
use crate::numerics::{
    drift_rows, loglog_slope, optimal_order_probe, roundtrip_error, sample_initial_conditions,
    symplecticity_check, validate_eps_list, DriftRow, ExperimentConfig, InitialCondition,
    ProbeTable, DEFAULT_SEED,
};
use crate::series::SeriesDocument;

pub const VALIDATE_HEADER: [&str; 5] = [
    "eps",
    "drift",
    "slope_estimate",
    "symplecticity_defect",
    "roundtrip_error",
];
pub const PROBE_HEADER: [&str; 3] = ["eps", "best_m", "min_drift"];

const DEFAULT_EPS: [f64; 4] = [0.02, 0.01, 0.005, 0.0025];
const SLOPE_TOL: f64 = 0.3;
const SYMPLECTICITY_TOL: f64 = 1e-6;
const SYMPLECTICITY_EPS: f64 = 1e-2;
const ROUNDTRIP_TOL: f64 = 1e-10;

/// Command-line overrides; `None` falls back to the problem file, then to defaults.
#[derive(Clone, Debug, Default)]
pub struct RunOptions {
    pub order: Option<usize>,
    pub eps: Option<Vec<f64>>,
    pub seed: Option<u64>,
    pub dt: Option<f64>,
    pub horizon_factor: Option<f64>,
}

impl RunOptions {
    fn eps_list(&self, problem: &ProblemFile) -> Vec<f64> {
        self.eps
            .clone()
            .or_else(|| problem.experiments.as_ref().map(|e| e.eps_list.clone()))
            .unwrap_or_else(|| DEFAULT_EPS.to_vec())
    }

    fn config(&self, problem: &ProblemFile) -> Result<ExperimentConfig> {
        let mut cfg = ExperimentConfig::default();
        if let Some(flow) = problem.experiments.as_ref().and_then(|e| e.flow.as_ref()) {
            cfg.method = flow.method;
            if let Some(dt) = flow.dt {
                cfg.dt = dt;
            }
            if let Some(c) = flow.horizon_factor {
                cfg.horizon_factor = c;
            }
        }
        cfg.seed = self.seed.unwrap_or(DEFAULT_SEED);
        if let Some(dt) = self.dt {
            cfg.dt = dt;
        }
        if let Some(c) = self.horizon_factor {
            cfg.horizon_factor = c;
        }
        if !(cfg.dt > 0.0 && cfg.dt.is_finite()) {
            return Err(Error::InvalidExperiment(format!(
                "dt must be positive, got {}",
                cfg.dt
            )));
        }
        if !(cfg.horizon_factor > 0.0 && cfg.horizon_factor.is_finite()) {
            return Err(Error::InvalidExperiment(format!(
                "horizon factor must be positive, got {}",
                cfg.horizon_factor
            )));
        }
        Ok(cfg)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct NormalizeReport {
    pub name: String,
    pub order: usize,
    pub steps_taken: usize,
    pub h_final_text: String,
    pub h_final: SeriesDocument,
    pub remainder: SeriesDocument,
    pub remainder_lowest_order: Option<u32>,
    pub generators: Vec<SeriesDocument>,
    pub step_norms: Vec<f64>,
    pub steps: Vec<StepSummary>,
    pub cancellation_residues: Vec<f64>,
}

impl NormalizeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }
}

pub fn run_normalize(problem: &ProblemFile, order: usize) -> Result<NormalizeReport> {
    let spec = problem.to_spec()?;
    let nf = normal_form(&spec, order)?;
    let steps = nf
        .generators
        .iter()
        .zip(&nf.step_norms)
        .map(|(g, &n)| StepSummary {
            step: g.step_index,
            g_norm: n,
            generator_terms: g.s1.len(),
        })
        .collect();
    Ok(NormalizeReport {
        name: problem.name.clone(),
        order,
        steps_taken: nf.generators.len(),
        h_final_text: nf.h_final.to_action_form(),
        h_final: SeriesDocument::from_series(&nf.h_final),
        remainder: SeriesDocument::from_series(&nf.remainder),
        remainder_lowest_order: nf.remainder.lowest_eps_order(),
        generators: nf
            .generators
            .iter()
            .map(|g| SeriesDocument::from_series(&g.s1))
            .collect(),
        step_norms: nf.step_norms,
        steps,
        cancellation_residues: nf.cancellation_residues,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct Gate {
    pub name: String,
    pub value: Option<f64>,
    pub threshold: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateRow {
    pub eps: f64,
    pub drift: Option<f64>,
    pub slope_estimate: Option<f64>,
    pub symplecticity_defect: Option<f64>,
    pub roundtrip_error: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct ValidateReport {
    pub name: String,
    pub order: usize,
    pub config: ExperimentConfig,
    pub rows: Vec<ValidateRow>,
    pub slope: Option<f64>,
    pub local_slopes: Vec<f64>,
    pub drift_rows: Vec<DriftRow>,
    pub gates: Vec<Gate>,
    pub errors: Vec<String>,
    pub initial_conditions: Vec<InitialCondition>,
}

impl ValidateReport {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(VALIDATE_HEADER).map_err(csv_error)?;
        for row in &self.rows {
            w.serialize((
                row.eps,
                row.drift,
                row.slope_estimate,
                row.symplecticity_defect,
                row.roundtrip_error,
            ))
            .map_err(csv_error)?;
        }
        finish(w)
    }
}

fn csv_error(e: csv::Error) -> Error {
    Error::Io(std::io::Error::other(e))
}

fn finish(w: csv::Writer<Vec<u8>>) -> Result<String> {
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Per-eps measurements; an eps beyond the implicit map's reach yields `None`.
fn measure(
    spec: &HamiltonianSpec,
    gens: &[crate::normalform::GeneratingFunction],
    eps: f64,
    ics: &[InitialCondition],
    cfg: &ExperimentConfig,
) -> Result<std::result::Result<(DriftRow, f64, f64), String>> {
    let attempt = || -> Result<(DriftRow, f64, f64)> {
        let mut symp: f64 = 0.0;
        let mut round: f64 = 0.0;
        for ic in ics {
            symp = symp.max(symplecticity_check(gens, &ic.state, eps)?);
            round = round.max(roundtrip_error(gens, &ic.state, eps)?);
        }
        let row = drift_rows(spec, gens, &[eps], ics, cfg)?.remove(0);
        Ok((row, symp, round))
    };
    match attempt() {
        Ok(v) => Ok(Ok(v)),
        Err(e @ Error::EpsTooLarge { .. }) => Ok(Err(e.to_string())),
        Err(e) => Err(e),
    }
}

/// Drift experiment plus canonicity checks at the sampled initial conditions.
pub fn run_validate(problem: &ProblemFile, opts: &RunOptions) -> Result<ValidateReport> {
    let m = opts
        .order
        .or_else(|| {
            problem
                .experiments
                .as_ref()
                .and_then(|e| e.m_values.first().copied())
        })
        .unwrap_or(1);
    if m == 0 {
        return Err(Error::InvalidExperiment("order must be at least 1".into()));
    }
    let eps_list = opts.eps_list(problem);
    validate_eps_list(&eps_list)?;
    let cfg = opts.config(problem)?;
    let spec = problem.to_spec()?;
    let nf = normal_form(&spec, m)?;
    let ics = sample_initial_conditions(&cfg, spec.policy.n_slow_pairs as usize);

    let mut measured = Vec::with_capacity(eps_list.len());
    let mut errors = Vec::new();
    for &eps in &eps_list {
        match measure(&spec, &nf.generators, eps, &ics, &cfg)? {
            Ok(v) => measured.push((eps, Some(v))),
            Err(msg) => {
                errors.push(msg);
                measured.push((eps, None));
            }
        }
    }
    let pts: Vec<(f64, f64)> = measured
        .iter()
        .filter_map(|(eps, v)| v.as_ref().map(|(row, _, _)| (*eps, row.drift)))
        .collect();
    let slope = loglog_slope(&pts);
    let local_slopes = crate::numerics::local_loglog_slopes(&pts);

    let rows: Vec<ValidateRow> = measured
        .iter()
        .map(|(eps, v)| ValidateRow {
            eps: *eps,
            drift: v.as_ref().map(|(r, _, _)| r.drift),
            slope_estimate: v.as_ref().and(slope),
            symplecticity_defect: v.as_ref().map(|(_, s, _)| *s),
            roundtrip_error: v.as_ref().map(|(_, _, r)| *r),
        })
        .collect();

    let mut gates = Vec::new();
    gates.push(Gate {
        name: "eps_in_range".into(),
        value: None,
        threshold: format!("contraction < {}", crate::numerics::CONTRACTION_LIMIT),
        passed: errors.is_empty(),
        detail: if errors.is_empty() {
            "all eps values admit the implicit transformation".into()
        } else {
            errors.join("; ")
        },
    });
    gates.push(match slope {
        Some(s) => Gate {
            name: "drift_slope".into(),
            value: Some(s),
            threshold: format!("{m} +/- {SLOPE_TOL}"),
            passed: (s - m as f64).abs() <= SLOPE_TOL,
            detail: format!("log-log slope over {} eps values", pts.len()),
        },
        None => Gate {
            name: "drift_slope".into(),
            value: None,
            threshold: format!("{m} +/- {SLOPE_TOL}"),
            passed: true,
            detail: "skipped: fewer than two measured eps values".into(),
        },
    });
    let symp = rows
        .iter()
        .filter(|r| r.eps <= SYMPLECTICITY_EPS)
        .filter_map(|r| r.symplecticity_defect)
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.max(x)))
        });
    gates.push(Gate {
        name: "symplecticity".into(),
        value: symp,
        threshold: format!("< {SYMPLECTICITY_TOL:e} for eps <= {SYMPLECTICITY_EPS}"),
        passed: symp.is_none_or(|s| s < SYMPLECTICITY_TOL),
        detail: if symp.is_some() {
            "max over sampled initial conditions".into()
        } else {
            "skipped: no measured eps within range".into()
        },
    });
    let round = rows
        .iter()
        .filter_map(|r| r.roundtrip_error)
        .fold(None, |acc: Option<f64>, x| {
            Some(acc.map_or(x, |a| a.max(x)))
        });
    gates.push(Gate {
        name: "roundtrip".into(),
        value: round,
        threshold: format!("< {ROUNDTRIP_TOL:e}"),
        passed: round.is_none_or(|r| r < ROUNDTRIP_TOL),
        detail: "max over sampled initial conditions".into(),
    });

    Ok(ValidateReport {
        name: problem.name.clone(),
        order: m,
        config: cfg,
        rows,
        slope,
        local_slopes,
        drift_rows: measured
            .into_iter()
            .filter_map(|(_, v)| v.map(|(r, _, _)| r))
            .collect(),
        gates,
        errors,
        initial_conditions: ics,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct ProbeReport {
    pub name: String,
    pub config: ExperimentConfig,
    pub table: ProbeTable,
}

impl ProbeReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports always serialize")
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(PROBE_HEADER).map_err(csv_error)?;
        for row in &self.table.rows {
            w.serialize((row.eps, row.best_m, row.min_drift))
                .map_err(csv_error)?;
        }
        finish(w)
    }
}

pub fn run_probe(problem: &ProblemFile, opts: &RunOptions) -> Result<ProbeReport> {
    let spec = problem.to_spec()?;
    let m_max = opts
        .order
        .unwrap_or_else(|| (spec.policy.max_eps_order as usize).min(4));
    let eps_list = opts.eps_list(problem);
    validate_eps_list(&eps_list)?;
    let cfg = opts.config(problem)?;
    let table = optimal_order_probe(&spec, &eps_list, m_max, &cfg)?;
    Ok(ProbeReport {
        name: problem.name.clone(),
        config: cfg,
        table,
    })
}

/// Writes the CSV to `out` and the full report to `out.json`.
pub fn write_validate(report: &ValidateReport, out: &std::path::Path) -> Result<()> {
    std::fs::write(out, report.to_csv()?)?;
    std::fs::write(sidecar(out), report.to_json())?;
    Ok(())
}

pub fn write_probe(report: &ProbeReport, out: &std::path::Path) -> Result<()> {
    std::fs::write(out, report.to_csv()?)?;
    std::fs::write(sidecar(out), report.to_json())?;
    Ok(())
}

fn sidecar(out: &std::path::Path) -> std::path::PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".json");
    s.into()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::builtin;

    #[test]
    fn validate_csv_header() {
        let report = ValidateReport {
            name: "x".into(),
            order: 1,
            config: ExperimentConfig::default(),
            rows: vec![ValidateRow {
                eps: 0.01,
                drift: Some(1e-3),
                slope_estimate: None,
                symplecticity_defect: Some(1e-9),
                roundtrip_error: Some(0.0),
            }],
            slope: None,
            local_slopes: vec![],
            drift_rows: vec![],
            gates: vec![],
            errors: vec![],
            initial_conditions: vec![],
        };
        let csv = report.to_csv().unwrap();
        let mut lines = csv.lines();
        assert_eq!(lines.next().unwrap(), VALIDATE_HEADER.join(","));
        assert_eq!(lines.next().unwrap(), "0.01,0.001,,1e-9,0.0");
    }

    #[test]
    fn large_eps_is_a_gate_failure() {
        let problem = builtin("landau").unwrap();
        let opts = RunOptions {
            eps: Some(vec![0.5]),
            ..Default::default()
        };
        let report = run_validate(&problem, &opts).unwrap();
        assert!(!report.passed());
        assert!(report.rows[0].drift.is_none());
        assert!(report.errors[0].contains("too large"));
    }
}
