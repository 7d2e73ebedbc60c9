use super::{ExperimentBlock, FlowBlock, ProblemFile, Term, Truncation, SCHEMA_VERSION};
use crate::numerics::Method;

const NAMES: [&str; 4] = ["landau", "anharmonic", "flat", "degenerate"];

pub fn builtin_names() -> &'static [&'static str] {
    &NAMES
}

fn term(q: u32, p: u32, y1: u32, y2: u32, coeff: f64) -> Term {
    Term {
        q,
        p,
        y1: vec![y1],
        y2: vec![y2],
        coeff,
    }
}

fn experiments(m_values: Vec<usize>) -> Option<ExperimentBlock> {
    Some(ExperimentBlock {
        eps_list: vec![0.02, 0.01, 0.005, 0.0025],
        m_values,
        flow: Some(FlowBlock {
            method: Method::ImplicitMidpoint,
            dt: Some(0.02),
            horizon_factor: Some(1.0),
        }),
    })
}

pub fn builtin(name: &str) -> Option<ProblemFile> {
    let problem = match name {
        // charged particle in a constant magnetic field and a weak potential
        // V(x1, x2) = (x1^2 + x2^2)/2 with x = (q + y1, p + y2)
        "landau" => ProblemFile {
            schema_version: SCHEMA_VERSION,
            name: "landau".into(),
            description: Some(
                "gyration in a constant magnetic field with the weak quadratic potential \
                 ((q + y1)^2 + (p + y2)^2)/2"
                    .into(),
            ),
            n_slow_pairs: 1,
            h0_coeffs: vec![0.0, 1.0],
            g0_terms: vec![
                term(2, 0, 0, 0, 0.5),
                term(0, 2, 0, 0, 0.5),
                term(1, 0, 1, 0, 1.0),
                term(0, 1, 0, 1, 1.0),
                term(0, 0, 2, 0, 0.5),
                term(0, 0, 0, 2, 0.5),
            ],
            truncation: Truncation {
                max_uv_degree: 4,
                max_slow_degree: 4,
                max_eps_order: 6,
            },
            experiments: experiments(vec![1, 2, 3]),
        },
        "anharmonic" => ProblemFile {
            schema_version: SCHEMA_VERSION,
            name: "anharmonic".into(),
            description: Some("H0 = I + I^2/2 with a cubic coupling to one slow pair".into()),
            n_slow_pairs: 1,
            h0_coeffs: vec![0.0, 1.0, 0.5],
            g0_terms: vec![
                term(3, 0, 0, 0, 1.0 / 3.0),
                term(1, 0, 1, 0, 1.0),
                term(0, 1, 1, 1, 0.5),
                term(0, 0, 2, 0, 0.5),
                term(0, 0, 0, 2, 0.5),
            ],
            truncation: Truncation {
                max_uv_degree: 6,
                max_slow_degree: 4,
                max_eps_order: 4,
            },
            experiments: experiments(vec![1, 2]),
        },
        "flat" => ProblemFile {
            schema_version: SCHEMA_VERSION,
            name: "flat".into(),
            description: Some(
                "perturbation depending on the action and slow variables only".into(),
            ),
            n_slow_pairs: 1,
            h0_coeffs: vec![0.0, 1.0],
            g0_terms: vec![
                term(4, 0, 0, 0, 0.25),
                term(2, 2, 0, 0, 0.5),
                term(0, 4, 0, 0, 0.25),
                term(0, 0, 2, 0, 0.5),
                term(0, 0, 0, 2, 0.5),
            ],
            truncation: Truncation {
                max_uv_degree: 4,
                max_slow_degree: 4,
                max_eps_order: 4,
            },
            experiments: experiments(vec![1]),
        },
        "degenerate" => ProblemFile {
            schema_version: SCHEMA_VERSION,
            name: "degenerate".into(),
            description: Some("H0 = I^2 has vanishing frequency at I = 0".into()),
            n_slow_pairs: 1,
            h0_coeffs: vec![0.0, 0.0, 1.0],
            g0_terms: vec![term(1, 0, 0, 0, 1.0)],
            truncation: Truncation {
                max_uv_degree: 4,
                max_slow_degree: 2,
                max_eps_order: 2,
            },
            experiments: None,
        },
        _ => return None,
    };
    Some(problem)
}
