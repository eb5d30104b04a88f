//! `fraclin` — solve linear fractional-order initial value problems
//!
//!     D^α x(t) = A(t)·x(t) + u(t),   J^{1−α} x|_{t=t0} = x0,   0 < α < 1,
//!
//! from TOML problem files. Exit codes: 0 success, 1 parse/usage error,
//! 2 solver non-convergence, 3 validation failure.

use clap::{Parser, Subcommand};
use fraclin_cli::output::{closed_form_text, format_sig9, trajectory_csv, OriginRow, Row};
use fraclin_cli::problem::ProblemFile;
use std::path::PathBuf;
use std::process::ExitCode;

use fraclin::solver::{solve, SolutionPath};
use fraclin::specfun::{mittag_leffler_eval, MlOptions, MlParams};
use fraclin::transition::{peano_baker_exact, TransitionConfig};
use fraclin::validate::{all_passed, default_gamma_ref, run_validation, ValidationOptions};

#[derive(Parser)]
#[command(
    name = "fraclin",
    version,
    about = "Linear fractional-order initial value problem solver",
    after_help = "The initial vector x0 is the weighted value J^{1-a}x at t0, not x(t0):\n\
                  solutions behave like (t - t0)^(a-1) near t0 and are singular there,\n\
                  which is why sample times exclude t0 unless --include-origin asks for\n\
                  the regular factor instead."
)]
struct Cli {
    /// Series truncation tolerance (wins over the FRAC_TOL environment
    /// variable, which wins over the problem file's `tol` key).
    #[arg(long, global = true)]
    tol: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve a problem file and emit the trajectory as CSV.
    Solve {
        file: PathBuf,
        /// Equally spaced sample times in (t0, horizon].
        #[arg(long, default_value_t = 16)]
        samples: usize,
        /// Write the CSV to this path instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also print the exact solution series as text (exact lane only).
        #[arg(long)]
        closed_form: bool,
        /// Solve on an N-interval grid instead of the exact series lane.
        #[arg(long)]
        grid: Option<usize>,
        /// Prepend a t0 row carrying the regular factor of the singular
        /// leading power instead of the (infinite) value.
        #[arg(long)]
        include_origin: bool,
    },
    /// Evaluate the state-transition matrix Φ(t, s) of a problem file.
    Phi {
        file: PathBuf,
        #[arg(long)]
        t: f64,
        /// Anchor point; defaults to the file's t0.
        #[arg(long)]
        s: Option<f64>,
    },
    /// Run the self-test battery; exits 3 if any check fails.
    Validate {
        /// Include the large-grid and convergence-order checks.
        #[arg(long)]
        full: bool,
        /// Skew the reference Γ the battery compares against (negative
        /// control: a healthy battery must then fail).
        #[arg(long, hide = true)]
        corrupt_gamma: bool,
    },
    /// Evaluate the two-parameter Mittag-Leffler function E_{alpha,beta}(z).
    Ml { alpha: f64, beta: f64, z: f64 },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            // --help/--version arrive here too and must exit 0; genuine
            // usage mistakes are parse errors (exit 1), not the solver
            // non-convergence code clap would pick by default.
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code)
        }
    }
}

type CmdError = (u8, String);

fn classify(err: fraclin::Error) -> CmdError {
    let code = match &err {
        fraclin::Error::NonConvergence { .. } | fraclin::Error::Diverged { .. } => 2,
        _ => 1,
    };
    (code, err.to_string())
}

/// Flag > FRAC_TOL environment variable > problem-file key > none.
fn resolve_tol(flag: Option<f64>) -> Result<Option<f64>, CmdError> {
    if let Some(t) = flag {
        if !(t > 0.0) || !t.is_finite() {
            return Err((1, format!("--tol must be a positive number, got {t}")));
        }
        return Ok(Some(t));
    }
    match std::env::var("FRAC_TOL") {
        Ok(s) => match s.parse::<f64>() {
            Ok(t) if t > 0.0 && t.is_finite() => Ok(Some(t)),
            _ => Err((1, format!("FRAC_TOL must be a positive number, got {s:?}"))),
        },
        Err(_) => Ok(None),
    }
}

fn run(cli: Cli) -> Result<(), CmdError> {
    let tol = resolve_tol(cli.tol)?;
    match cli.command {
        Command::Solve { file, samples, out, closed_form, grid, include_origin } => {
            cmd_solve(&file, samples, out.as_deref(), closed_form, grid, include_origin, tol)
        }
        Command::Phi { file, t, s } => cmd_phi(&file, t, s, tol),
        Command::Validate { full, corrupt_gamma } => cmd_validate(full, corrupt_gamma),
        Command::Ml { alpha, beta, z } => cmd_ml(alpha, beta, z, tol),
    }
}

fn cmd_solve(
    file: &std::path::Path,
    samples: usize,
    out: Option<&std::path::Path>,
    closed_form: bool,
    grid: Option<usize>,
    include_origin: bool,
    tol: Option<f64>,
) -> Result<(), CmdError> {
    if samples == 0 {
        return Err((1, "--samples must be at least 1".into()));
    }
    let spec = ProblemFile::from_path(file).map_err(|e| (1, e))?;
    let problem = spec.to_problem(tol, grid).map_err(classify)?;
    let solution = solve(&problem).map_err(classify)?;
    let (t0, horizon, n) = (problem.t0(), problem.horizon(), spec.dim());

    let mut rows = Vec::with_capacity(samples);
    match solution.path() {
        SolutionPath::Exact => {
            for j in 1..=samples {
                let t = t0 + (horizon - t0) * j as f64 / samples as f64;
                let x = solution.eval(t).map_err(classify)?;
                rows.push(Row { t, values: x.iter().copied().collect() });
            }
        }
        SolutionPath::Grid => {
            // Emit the grid nodes nearest the requested times (deduplicated,
            // increasing) — grid solutions exist only at their nodes.
            let g = solution.samples().expect("grid path carries samples").grid().clone();
            let mut last = 0usize;
            for j in 1..=samples {
                let frac = j as f64 / samples as f64;
                let i = ((frac * g.n() as f64).round() as usize).clamp(1, g.n());
                if i <= last {
                    continue;
                }
                last = i;
                let x = solution.samples().expect("grid path").value(i).map_err(classify)?;
                rows.push(Row { t: g.node(i), values: x.iter().copied().collect() });
            }
        }
    }

    let origin = if include_origin {
        Some(origin_row(&solution, t0).map_err(classify)?)
    } else {
        None
    };
    let csv = trajectory_csv(n, origin.as_ref(), &rows);
    match out {
        Some(path) => std::fs::write(path, csv.as_bytes())
            .map_err(|e| (1, format!("{}: {e}", path.display())))?,
        None => print!("{csv}"),
    }

    if closed_form {
        match solution.series() {
            Some(series) => print!("{}", closed_form_text(series, t0)),
            None => return Err((1, "--closed-form needs the exact series lane (drop --grid and the file's grid key)".into())),
        }
    }
    Ok(())
}

/// Leading-power row: x(t) ≈ g·(t − t0)^p as t → t0⁺.
fn origin_row(solution: &fraclin::solver::Solution, t0: f64) -> fraclin::Result<OriginRow> {
    match solution.path() {
        SolutionPath::Exact => {
            let series = solution.series().expect("exact path carries a series");
            let n = series.rows();
            let (exponent_p, regular_factor) = match series.min_exponent() {
                None => (0.0, vec![0.0; n]),
                Some(gamma_min) => {
                    let mut g = vec![0.0; n];
                    for term in series.terms() {
                        if term.exponent - gamma_min < 1e-9 {
                            for i in 0..n {
                                g[i] += term.coeff[(i, 0)];
                            }
                        }
                    }
                    (gamma_min - 1.0, g)
                }
            };
            Ok(OriginRow { t0, exponent_p, regular_factor })
        }
        SolutionPath::Grid => {
            let samples = solution.samples().expect("grid path carries samples");
            let sigma = samples.left_exponent().unwrap_or(1.0);
            Ok(OriginRow {
                t0,
                exponent_p: sigma - 1.0,
                regular_factor: samples.regular(0).iter().copied().collect(),
            })
        }
    }
}

fn cmd_phi(
    file: &std::path::Path,
    t: f64,
    s: Option<f64>,
    tol: Option<f64>,
) -> Result<(), CmdError> {
    let spec = ProblemFile::from_path(file).map_err(|e| (1, e))?;
    let problem = spec.to_problem(tol, None).map_err(classify)?;
    let a = match problem.coefficients() {
        fraclin::solver::Coefficients::Polynomial(a) => a.clone(),
        fraclin::solver::Coefficients::Sampled(_) => unreachable!("file coefficients are polynomial"),
    };
    let s = s.unwrap_or(problem.t0());
    if !(t > s) || s < problem.t0() {
        return Err((1, format!("phi needs t > s >= t0, got t = {t}, s = {s}, t0 = {}", problem.t0())));
    }
    // Re-anchor at s and rebuild; the horizon must cover the evaluation
    // point for the tail estimate to mean anything.
    let horizon = problem.horizon().max(t);
    let anchored = a.reanchored(s).map_err(classify)?;
    let phi = peano_baker_exact(
        &anchored,
        problem.alpha(),
        horizon,
        &TransitionConfig { tol: problem.config().tol, ..TransitionConfig::default() },
    )
    .map_err(classify)?;
    let value = phi.eval(t).map_err(classify)?;

    println!("phi({t}, {s}) =");
    for i in 0..value.nrows() {
        let cells: Vec<String> = (0..value.ncols()).map(|j| format_sig9(value[(i, j)])).collect();
        println!("{}", cells.join(","));
    }
    println!("terms_used: {}", phi.terms_used());
    println!("tail_estimate: {:.3e}", phi.tail_estimate());
    Ok(())
}

fn cmd_validate(full: bool, corrupt_gamma: bool) -> Result<(), CmdError> {
    fn skewed_gamma(x: f64) -> f64 {
        // Multiplicative skew growing with x: a constant factor would cancel
        // in the Γ-ratios the power rules check.
        default_gamma_ref(x) * (1.0 + 1e-3 * x)
    }
    let opts = ValidationOptions {
        full,
        gamma_ref: if corrupt_gamma { skewed_gamma } else { default_gamma_ref },
    };
    let results = run_validation(&opts);
    for r in &results {
        println!("{r}");
    }
    let failed = results.iter().filter(|r| !r.passed).count();
    println!(
        "validation: {} checks, {} failed{}",
        results.len(),
        failed,
        if corrupt_gamma { " (reference Γ deliberately skewed)" } else { "" }
    );
    if all_passed(&results) {
        Ok(())
    } else {
        Err((3, "validation failed".into()))
    }
}

fn cmd_ml(alpha: f64, beta: f64, z: f64, tol: Option<f64>) -> Result<(), CmdError> {
    let params = MlParams::new(alpha, beta).map_err(classify)?;
    let opts = match tol {
        Some(t) => MlOptions { tol: t, ..MlOptions::default() },
        None => MlOptions::default(),
    };
    let eval = mittag_leffler_eval(params, z, &opts).map_err(classify)?;
    println!("E_({alpha},{beta})({z}) = {}", format_sig9(eval.value));
    println!("terms_used: {}", eval.terms_used);
    println!("tail_bound: {:.3e}", eval.tail_bound);
    Ok(())
}
