use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use onephase::harness::{
    builtin, builtin_names, exit_code, run_normalize, run_probe, run_validate, write_probe,
    write_validate, ProblemFile, RunOptions,
};
use onephase::Error;

#[derive(Parser)]
#[command(
    name = "onephase",
    version,
    about = "Normal forms for Hamiltonians with one fast phase"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Normalize to order m and write the result as JSON.
    Normalize {
        /// Problem file or built-in example name.
        problem: String,
        #[arg(long, default_value_t = 1)]
        order: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Drift experiment with canonicity gates; CSV plus a `.json` sidecar.
    Validate(ExperimentArgs),
    /// Optimal truncation order per eps; CSV plus a `.json` sidecar.
    Probe(ExperimentArgs),
    /// Built-in problems.
    Examples {
        #[command(subcommand)]
        action: ExamplesAction,
    },
}

#[derive(Subcommand)]
enum ExamplesAction {
    List,
    Show { name: String },
}

#[derive(Args)]
struct ExperimentArgs {
    problem: String,
    /// Normalization order (validate) or largest order tried (probe).
    #[arg(long)]
    order: Option<usize>,
    /// Comma-separated, strictly decreasing.
    #[arg(long, value_parser = parse_eps)]
    eps: Option<EpsList>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long)]
    horizon_factor: Option<f64>,
}

#[derive(Clone)]
struct EpsList(Vec<f64>);

fn parse_eps(s: &str) -> Result<EpsList, String> {
    let values = s
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| t.parse::<f64>().map_err(|e| format!("'{t}': {e}")))
        .collect::<Result<Vec<_>, _>>()?;
    if values.is_empty() {
        return Err("eps list is empty".into());
    }
    Ok(EpsList(values))
}

impl ExperimentArgs {
    fn options(&self) -> RunOptions {
        RunOptions {
            order: self.order,
            eps: self.eps.as_ref().map(|e| e.0.clone()),
            seed: self.seed,
            dt: self.dt,
            horizon_factor: self.horizon_factor,
        }
    }
}

fn emit(out: &Option<PathBuf>, text: &str) -> Result<(), Error> {
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<u8, Error> {
    match cli.command {
        Command::Normalize {
            problem,
            order,
            out,
        } => {
            let report = run_normalize(&ProblemFile::load(&problem)?, order)?;
            emit(&out, &(report.to_json() + "\n"))?;
            Ok(0)
        }
        Command::Validate(args) => {
            let report = run_validate(&ProblemFile::load(&args.problem)?, &args.options())?;
            match &args.out {
                Some(path) => write_validate(&report, path)?,
                None => print!("{}", report.to_csv()?),
            }
            for g in &report.gates {
                let mark = if g.passed { "pass" } else { "FAIL" };
                let value = g.value.map_or("-".to_string(), |v| format!("{v:.4e}"));
                eprintln!(
                    "{mark} {} = {value} ({}; {})",
                    g.name, g.threshold, g.detail
                );
            }
            Ok(if report.passed() { 0 } else { 1 })
        }
        Command::Probe(args) => {
            let report = run_probe(&ProblemFile::load(&args.problem)?, &args.options())?;
            match &args.out {
                Some(path) => write_probe(&report, path)?,
                None => print!("{}", report.to_csv()?),
            }
            let t = &report.table;
            for w in &t.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(fit) = &t.fit {
                eprintln!(
                    "log(min_drift) ~ {:.4} + {:.4e} / eps",
                    fit.intercept, fit.slope
                );
            }
            eprintln!("local slopes: {:?}", t.local_slopes);
            eprintln!(
                "best_m non-decreasing: {}; local slopes steepen: {}",
                t.best_m_nondecreasing, t.slopes_steepen
            );
            Ok(if t.best_m_nondecreasing && t.slopes_steepen {
                0
            } else {
                1
            })
        }
        Command::Examples { action } => {
            match action {
                ExamplesAction::List => {
                    for name in builtin_names() {
                        let p = builtin(name).expect("listed built-ins exist");
                        println!("{name}\t{}", p.description.unwrap_or_default());
                    }
                }
                ExamplesAction::Show { name } => {
                    let p = builtin(&name)
                        .ok_or_else(|| Error::Problem(format!("no built-in example '{name}'")))?;
                    println!("{}", p.to_json());
                }
            }
            Ok(0)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 3 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
