//! Problem files, built-in examples and the report pipelines behind the CLI.

mod builtins;
mod report;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::normalform::HamiltonianSpec;
use crate::numerics::Method;
use crate::series::{TruncatedSeries, TruncationPolicy};

pub use builtins::{builtin, builtin_names};
pub use report::{
    run_normalize, run_probe, run_validate, write_probe, write_validate, Gate, NormalizeReport,
    ProbeReport, RunOptions, ValidateReport, ValidateRow, PROBE_HEADER, VALIDATE_HEADER,
};

pub const SCHEMA_VERSION: u32 = 1;

/// One monomial `coeff * q^q p^p prod y1_j^y1[j] prod y2_j^y2[j]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Term {
    #[serde(default)]
    pub q: u32,
    #[serde(default)]
    pub p: u32,
    #[serde(default)]
    pub y1: Vec<u32>,
    #[serde(default)]
    pub y2: Vec<u32>,
    pub coeff: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Truncation {
    pub max_uv_degree: u32,
    pub max_slow_degree: u32,
    pub max_eps_order: u32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FlowBlock {
    #[serde(default)]
    pub method: Method,
    pub dt: Option<f64>,
    pub horizon_factor: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentBlock {
    pub eps_list: Vec<f64>,
    #[serde(default)]
    pub m_values: Vec<usize>,
    pub flow: Option<FlowBlock>,
}

/// User-facing problem definition: `H = sum_j c_j I^j + eps * g0(q, p, y)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemFile {
    pub schema_version: u32,
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    pub n_slow_pairs: u32,
    pub h0_coeffs: Vec<f64>,
    pub g0_terms: Vec<Term>,
    pub truncation: Truncation,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub experiments: Option<ExperimentBlock>,
}

impl ProblemFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let problem: Self = serde_json::from_str(text)?;
        problem.check()?;
        Ok(problem)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("problem files always serialize")
    }

    /// Reads a file, or falls back to a built-in example of that name.
    pub fn load(path_or_name: &str) -> Result<Self> {
        let path = Path::new(path_or_name);
        if path.exists() {
            return Self::from_json(&std::fs::read_to_string(path)?);
        }
        builtin(path_or_name).ok_or_else(|| {
            Error::Problem(format!(
                "no file or built-in example named '{path_or_name}' (built-ins: {})",
                builtin_names().join(", ")
            ))
        })
    }

    fn check(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::Problem(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.n_slow_pairs == 0 {
            return Err(Error::Problem("n_slow_pairs must be at least 1".into()));
        }
        let n = self.n_slow_pairs as usize;
        for (i, t) in self.g0_terms.iter().enumerate() {
            let ok = |v: &Vec<u32>| v.is_empty() || v.len() == n;
            if !ok(&t.y1) || !ok(&t.y2) {
                return Err(Error::Problem(format!(
                    "g0_terms[{i}]: slow exponent lists must have length {n}"
                )));
            }
            if !t.coeff.is_finite() {
                return Err(Error::Problem(format!(
                    "g0_terms[{i}]: coefficient is not finite"
                )));
            }
        }
        if self.h0_coeffs.iter().any(|c| !c.is_finite()) {
            return Err(Error::Problem("h0_coeffs must be finite".into()));
        }
        Ok(())
    }

    pub fn policy(&self) -> Result<TruncationPolicy> {
        TruncationPolicy::new(
            self.truncation.max_uv_degree,
            self.truncation.max_slow_degree,
            self.truncation.max_eps_order,
            self.n_slow_pairs,
        )
    }

    pub fn to_spec(&self) -> Result<HamiltonianSpec> {
        self.check()?;
        let policy = self.policy()?;
        let n = self.n_slow_pairs as usize;
        let h0 = TruncatedSeries::from_action_polynomial(&self.h0_coeffs, policy)?;
        let mut g0 = TruncatedSeries::zero(policy);
        for t in &self.g0_terms {
            let pad = |v: &Vec<u32>| if v.is_empty() { vec![0; n] } else { v.clone() };
            let degree = t.q + t.p;
            if degree > policy.max_uv_degree {
                return Err(Error::DegreeOverflow {
                    degree: degree as usize,
                    bound: policy.max_uv_degree as usize,
                });
            }
            let (y1, y2) = (pad(&t.y1), pad(&t.y2));
            let slow: u32 = y1.iter().chain(&y2).sum();
            if slow > policy.max_slow_degree {
                return Err(Error::DegreeOverflow {
                    degree: slow as usize,
                    bound: policy.max_slow_degree as usize,
                });
            }
            g0 = g0.add(&TruncatedSeries::phase_monomial(
                policy, t.q, t.p, &y1, &y2, t.coeff,
            )?)?;
        }
        HamiltonianSpec::new(h0, g0, self.name.clone())
    }
}

/// Process exit code for an error: 2 for mathematical failures, 3 otherwise.
pub fn exit_code(err: &Error) -> i32 {
    if err.is_math() {
        2
    } else {
        3
    }
}
