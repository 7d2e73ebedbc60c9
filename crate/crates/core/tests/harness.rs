use onephase::harness::{
    builtin, builtin_names, exit_code, run_normalize, run_probe, run_validate, ProblemFile,
    RunOptions, Term, Truncation,
};
use onephase::Error;
use proptest::prelude::*;

fn term_strategy(n: usize) -> impl Strategy<Value = Term> {
    (
        0u32..3,
        0u32..3,
        prop::collection::vec(0u32..2, n),
        prop::collection::vec(0u32..2, n),
        -2.0f64..2.0,
    )
        .prop_map(|(q, p, y1, y2, coeff)| Term {
            q,
            p,
            y1,
            y2,
            coeff,
        })
}

fn problem_strategy() -> impl Strategy<Value = ProblemFile> {
    (1usize..3).prop_flat_map(|n| {
        (
            prop::collection::vec(-1.0f64..1.0, 1..3),
            prop::collection::vec(term_strategy(n), 0..6),
            "[a-z]{1,8}",
        )
            .prop_map(move |(mut h0, terms, name)| {
                h0.insert(0, 0.0);
                ProblemFile {
                    schema_version: 1,
                    name,
                    description: None,
                    n_slow_pairs: n as u32,
                    h0_coeffs: h0,
                    g0_terms: terms,
                    truncation: Truncation {
                        max_uv_degree: 4,
                        max_slow_degree: 4,
                        max_eps_order: 3,
                    },
                    experiments: None,
                }
            })
    })
}

proptest! {
    #[test]
    fn problem_files_roundtrip(problem in problem_strategy()) {
        let text = problem.to_json();
        let back = ProblemFile::from_json(&text).unwrap();
        prop_assert_eq!(&back, &problem);
        prop_assert_eq!(back.to_json(), text);
    }
}

#[test]
fn builtins_build_specs() {
    for name in builtin_names() {
        let p = builtin(name).unwrap();
        match p.to_spec() {
            Ok(spec) => assert_eq!(spec.label, *name),
            Err(e) => {
                assert_eq!(*name, "degenerate");
                assert_eq!(exit_code(&e), 2);
            }
        }
    }
}

#[test]
fn loads_files_and_names() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("anharmonic.json");
    std::fs::write(&path, builtin("anharmonic").unwrap().to_json()).unwrap();
    let from_file = ProblemFile::load(path.to_str().unwrap()).unwrap();
    assert_eq!(from_file, builtin("anharmonic").unwrap());
    let err = ProblemFile::load("missing-problem").unwrap_err();
    assert_eq!(exit_code(&err), 3);
}

#[test]
fn rejects_non_polynomial_and_oversized_input() {
    let text = builtin("landau").unwrap().to_json();
    for bad in [
        text.replacen("\"coeff\": 0.5", "\"coeff\": \"sin(q)\"", 1),
        text.replacen("\"q\": 2", "\"q\": -2", 1),
        text.replacen("\"schema_version\": 1", "\"schema_version\": 2", 1),
        text.replacen("\"y1\": [\n        0\n      ]", "\"y1\": [0, 0]", 1),
    ] {
        assert_ne!(bad, text);
        let err = ProblemFile::from_json(&bad).unwrap_err();
        assert_eq!(exit_code(&err), 3, "{err}");
    }
    let mut p = builtin("landau").unwrap();
    p.g0_terms[0].q = 9;
    assert!(matches!(p.to_spec(), Err(Error::DegreeOverflow { .. })));
}

#[test]
fn normalize_report_has_the_averaged_hamiltonian() {
    let report = run_normalize(&builtin("landau").unwrap(), 1).unwrap();
    assert_eq!(report.steps_taken, 1);
    assert_eq!(report.generators.len(), 1);
    assert_eq!(report.remainder_lowest_order, Some(2));
    let terms: Vec<&str> = report.h_final_text.split(" + ").collect();
    assert_eq!(terms.len(), 4, "{}", report.h_final_text);
    assert_eq!(terms[0], "1*I");
    let (c, rest) = terms[1].split_once('*').unwrap();
    assert!((c.parse::<f64>().unwrap() - 1.0).abs() < 1e-14 && rest == "I*eps");
    assert_eq!(&terms[2..], ["0.5*y1_1^2*eps", "0.5*y2_1^2*eps"]);
}

#[test]
fn probe_with_one_order_reproduces_validate() {
    let problem = builtin("anharmonic").unwrap();
    let opts = RunOptions {
        order: Some(1),
        eps: Some(vec![0.02, 0.01]),
        horizon_factor: Some(0.5),
        ..Default::default()
    };
    let v = run_validate(&problem, &opts).unwrap();
    let p = run_probe(&problem, &opts).unwrap();
    for (a, b) in v.rows.iter().zip(&p.table.rows) {
        assert_eq!(a.eps, b.eps);
        assert_eq!(a.drift, Some(b.min_drift));
        assert_eq!(b.best_m, 1);
    }
    assert_eq!(
        v.to_json(),
        run_validate(&problem, &opts).unwrap().to_json()
    );
}
