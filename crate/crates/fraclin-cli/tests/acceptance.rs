//! Acceptance suite: one test per shipping criterion, each printing a
//! `acceptance: …: PASS` line when it holds. Tolerances are frozen here on
//! purpose — loosening one is a release decision, not a test fix.

use fraclin::series::MatrixPolynomial;
use fraclin::solver::{residual_check, solve, Forcing, IvpProblem, SolutionResidual};
use fraclin::specfun::{alpha_exp, gamma};
use fraclin::transition::{peano_baker_exact, peano_baker_grid, TransitionConfig};
use fraclin::validate::{run_validation, ValidationOptions};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Worked two-state system: A(t) = [[0, t], [0, 0]], anchored at 0.
fn shift_system() -> MatrixPolynomial {
    MatrixPolynomial::new(
        0.0,
        2,
        vec![(1, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]))],
    )
    .unwrap()
}

fn rel(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs().max(f64::MIN_POSITIVE)
}

#[test]
fn worked_nilpotent_transition_reproduces_the_closed_form() {
    let clock = Instant::now();
    for alpha in [0.3, 0.5, 0.7] {
        let phi =
            peano_baker_exact(&shift_system(), alpha, 1.0, &TransitionConfig::default()).unwrap();
        assert!(phi.terminated_exactly(), "series must terminate exactly");
        assert_eq!(phi.terms_used(), 2, "exactly two terms survive");

        // Exponent/coefficient sets: {(α, 1/Γ(α)) on the diagonal,
        // (2α+1, α/Γ(2α+1)) at (1,2)} and nothing else.
        let terms = phi.series().terms();
        assert_eq!(terms.len(), 2);
        assert!((terms[0].exponent - alpha).abs() < 1e-12);
        assert!((terms[1].exponent - (2.0 * alpha + 1.0)).abs() < 1e-12);
        let want_diag = 1.0 / gamma(alpha).unwrap();
        let want_off = alpha / gamma(2.0 * alpha + 1.0).unwrap();
        for (i, j) in [(0, 0), (0, 1), (1, 0), (1, 1)] {
            let got0 = terms[0].coeff[(i, j)];
            let got1 = terms[1].coeff[(i, j)];
            if i == j {
                assert!(rel(got0, want_diag) <= 1e-12, "base diag at ({i},{j})");
                assert_eq!(got1, 0.0, "second term vanishes on the diagonal");
            } else if (i, j) == (0, 1) {
                assert_eq!(got0, 0.0, "base term is diagonal");
                assert!(rel(got1, want_off) <= 1e-12, "off-diagonal coefficient");
            } else {
                assert_eq!(got0, 0.0);
                assert_eq!(got1, 0.0);
            }
        }
    }
    assert!(clock.elapsed().as_secs_f64() < 1.0, "budget is one second");
    println!("acceptance: worked transition matrix closed form (three orders): PASS");
}

// Frozen from a 40-digit computation of the worked solution's spot values at
// α = 1/2, t = 1: 0.5/Γ(2) + 1/Γ(3/2) and 1/Γ(1/2).
const SPOT_X1: f64 = 1.6283791670955126;
const SPOT_X2: f64 = 0.5641895835477563;

#[test]
fn worked_forced_solution_matches_its_closed_form_and_spot_values() {
    for alpha in [0.3, 0.5, 0.7] {
        let p = IvpProblem::exact(
            alpha,
            shift_system(),
            DVector::from_column_slice(&[0.0, 1.0]),
            1.0,
        )
        .unwrap()
        .with_forcing(Forcing::Series(
            fraclin::series::FracPowerSeries::new(
                0.0,
                2,
                1,
                vec![(1.0, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))],
            )
            .unwrap(),
        ))
        .unwrap();
        let sol = solve(&p).unwrap();
        let series = sol.series().expect("exact lane");

        // x1 = α·t^{2α}/Γ(2α+1) + t^α/Γ(α+1), x2 = t^{α−1}/Γ(α): exactly
        // three powers {α, α+1, 2α+1} across the two components.
        let terms = series.terms();
        assert_eq!(terms.len(), 3, "exactly three powers in the closed form");
        let by_exponent = |g: f64| {
            terms
                .iter()
                .find(|t| (t.exponent - g).abs() < 1e-12)
                .unwrap_or_else(|| panic!("missing power {g}"))
        };
        let base = by_exponent(alpha);
        assert!(rel(base.coeff[(1, 0)], 1.0 / gamma(alpha).unwrap()) <= 1e-12);
        assert_eq!(base.coeff[(0, 0)], 0.0);
        let drift = by_exponent(alpha + 1.0);
        assert!(rel(drift.coeff[(0, 0)], 1.0 / gamma(alpha + 1.0).unwrap()) <= 1e-12);
        assert_eq!(drift.coeff[(1, 0)], 0.0);
        let quad = by_exponent(2.0 * alpha + 1.0);
        assert!(rel(quad.coeff[(0, 0)], alpha / gamma(2.0 * alpha + 1.0).unwrap()) <= 1e-12);
        assert_eq!(quad.coeff[(1, 0)], 0.0);

        if alpha == 0.5 {
            let x = sol.eval(1.0).unwrap();
            assert!((x[0] - SPOT_X1).abs() <= 1e-9, "x1 spot value");
            assert!((x[1] - SPOT_X2).abs() <= 1e-9, "x2 spot value");
        }
    }
    println!("acceptance: worked forced solution closed form and spot values: PASS");
}

#[test]
fn operator_identity_suite_passes_exact_and_large_grid_tolerances() {
    let clock = Instant::now();
    let results = run_validation(&ValidationOptions { full: true, ..Default::default() });
    // The battery pins the exact-lane identities at 1e−12/1e−13 and the
    // N = 1024 grid checks at 1e−3 (smooth) / 1e−6 (factored singular).
    for name in [
        "integral power rule (exact lane)",
        "derivative power rule (exact lane)",
        "kernel unit normalization (exact lane)",
        "kernel annihilation (exact lane)",
        "derivative inverts the integral (exact lane)",
        "integration is a semigroup (exact lane)",
        "grid integral power rule (smooth, N=1024)",
        "grid kernel checks (singular factored, N=1024)",
    ] {
        let r = results.iter().find(|r| r.name == name).expect("check present");
        assert!(r.passed, "{r}");
    }
    for r in &results {
        assert!(r.passed, "{r}");
    }
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 30.0, "budget is thirty seconds, took {elapsed:.1}");
    println!("acceptance: operator identity suite (exact and N=1024 grid): PASS");
}

#[test]
fn truncation_residual_is_confined_to_the_omitted_tail() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x0f1e2d3c);
    for case in 0..20 {
        let n = rng.random_range(1..=3);
        let degree = rng.random_range(0..=2u32);
        let coeffs = (0..=degree)
            .map(|m| {
                let mut c = DMatrix::zeros(n, n);
                c.apply(|v| *v = rng.random_range(-1.0..=1.0));
                (m, c)
            })
            .collect();
        let a = MatrixPolynomial::new(0.0, n, coeffs).unwrap();
        // Orders where the term-ratio test settles before the cap even for
        // the strongest admissible coefficients.
        let alpha = if case % 2 == 0 { 0.7 } else { 0.9 };
        let phi = peano_baker_exact(&a, alpha, 1.0, &TransitionConfig::default()).unwrap();

        for k in 0..phi.terms_used() - 1 {
            let lhs = phi.term(k + 1).unwrap().rl_derivative(alpha).unwrap();
            let rhs = a.mul_series(phi.term(k).unwrap()).unwrap();
            let scale = rhs.max_coeff_norm().max(1.0);
            assert!(
                lhs.term_distance(&rhs) <= 1e-12 * scale,
                "case {case}: telescoping defect at term {k}"
            );
        }

        let report = phi.residual_report(&a).unwrap();
        let scale = phi.series().max_coeff_norm().max(1.0);
        assert!(
            report.telescoping_defect <= 1e-12 * scale,
            "case {case}: assembled residual must sit on the omitted tail, defect {:e}",
            report.telescoping_defect
        );
        assert!(
            report.tail_residual_measure <= report.tail_estimate,
            "case {case}: tail magnitude {:e} exceeds the advertised estimate {:e}",
            report.tail_residual_measure,
            report.tail_estimate
        );
    }
    println!("acceptance: truncation residual confined to the omitted tail (20 systems): PASS");
}

#[test]
fn constant_coefficient_transitions_match_the_alpha_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    for case in 0..10 {
        // Entries in [−0.75, 0.75] keep the row-sum norm within 1.5.
        let mut m = DMatrix::zeros(2, 2);
        m.apply(|v| *v = rng.random_range(-0.75..=0.75));
        let a = MatrixPolynomial::constant(0.0, m.clone()).unwrap();
        for alpha in [0.4, 0.8] {
            let phi = peano_baker_exact(&a, alpha, 1.0, &TransitionConfig::default()).unwrap();
            for t in [0.25, 0.5, 1.0] {
                let want = alpha_exp(alpha, &m, t).unwrap();
                let defect = (phi.eval(t).unwrap() - want).amax();
                assert!(defect <= 1e-9, "case {case}, α = {alpha}, t = {t}: defect {defect:e}");
            }
        }
    }
    println!("acceptance: constant-coefficient transitions match the α-exponential: PASS");
}

#[test]
fn differentiation_under_the_integral_holds_on_the_grid() {
    use fraclin::grid::{check_diff_under_integral, BivariateSamples, Grid};
    use fraclin::specfun::recip_gamma;

    let alpha = 0.3;
    let residual = |n: usize, kernel: bool| {
        let g = Grid::new(0.0, 1.0, n).unwrap();
        let phi = if kernel {
            BivariateSamples::from_fn(g, Some(alpha), |_, _| {
                DMatrix::from_element(1, 1, recip_gamma(alpha))
            })
            .unwrap()
        } else {
            BivariateSamples::from_fn(g, None, |_, _| DMatrix::from_element(1, 1, 1.0)).unwrap()
        };
        check_diff_under_integral(&phi, alpha).unwrap().max_residual
    };

    for kernel in [false, true] {
        let at_512 = residual(512, kernel);
        let at_1024 = residual(1024, kernel);
        let which = if kernel { "kernel" } else { "constant" };
        assert!(at_512 <= 1e-3, "{which}: residual {at_512:e} at N=512");
        // The convolution kernel cancels exactly, so its residual sits at
        // rounding noise long before these sizes; a decrease is only
        // observable while above the noise floor.
        assert!(
            at_1024 < at_512 || at_1024 <= 1e-6,
            "{which}: doubling N must shrink the residual ({at_512:e} → {at_1024:e})"
        );
    }
    println!("acceptance: differentiation under the integral on the grid: PASS");
}

#[test]
fn grid_transition_agrees_with_the_exact_series() {
    use fraclin::grid::{Grid, SampledMatrixFunction};

    let alpha = 0.5;
    let exact = peano_baker_exact(&shift_system(), alpha, 1.0, &TransitionConfig::default()).unwrap();
    let g = Grid::new(0.0, 1.0, 512).unwrap();
    let samples = SampledMatrixFunction::from_fn(g, |t| {
        DMatrix::from_row_slice(2, 2, &[0.0, t, 0.0, 0.0])
    })
    .unwrap();
    let (phi, _) = peano_baker_grid(&samples, alpha, &TransitionConfig::default()).unwrap();
    for i in 1..=512 {
        let t = phi.grid().node(i);
        if t < 0.05 {
            continue;
        }
        let defect = (phi.value(i).unwrap() - exact.eval(t).unwrap()).amax();
        assert!(defect <= 1e-3, "node {i} (t = {t}): defect {defect:e}");
    }
    println!("acceptance: grid transition matches the exact series at N=512: PASS");
}

const GOLDEN_CSV: &str = "t,x1,x2\n\
    0.250000000,0.689189584,1.12837917\n\
    0.500000000,1.04788456,0.797884561\n\
    0.750000000,1.35220502,0.651470016\n\
    1.00000000,1.62837917,0.564189584\n";

#[test]
fn cli_solve_is_byte_stable_and_full_validation_passes() {
    let clock = Instant::now();
    let file = std::path::PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("problems/nilpotent.toml");
    let run = |args: &[&str]| {
        std::process::Command::new(env!("CARGO_BIN_EXE_fraclin"))
            .env_remove("FRAC_TOL")
            .args(args)
            .output()
            .expect("binary runs")
    };

    let first = run(&["solve", file.to_str().unwrap(), "--samples", "4"]);
    assert!(first.status.success());
    assert_eq!(String::from_utf8(first.stdout.clone()).unwrap(), GOLDEN_CSV);
    let second = run(&["solve", file.to_str().unwrap(), "--samples", "4"]);
    assert_eq!(first.stdout, second.stdout, "byte-stable output");

    let validate = run(&["validate", "--full"]);
    assert_eq!(
        validate.status.code(),
        Some(0),
        "validate --full: {}",
        String::from_utf8_lossy(&validate.stdout)
    );

    // 2-minute ceiling for the end-to-end criterion (and in practice the
    // whole acceptance suite sits far below it).
    let elapsed = clock.elapsed().as_secs_f64();
    assert!(elapsed < 120.0, "budget is two minutes, took {elapsed:.1}");
    println!("acceptance: CLI golden CSV byte-stable and full validation clean: PASS");
}

#[test]
fn solution_residuals_vanish_on_the_worked_problem() {
    // Companion to the closed-form criteria: the solver's own a-posteriori
    // check agrees that the worked solution solves the problem exactly.
    let p = IvpProblem::exact(
        0.5,
        shift_system(),
        DVector::from_column_slice(&[0.0, 1.0]),
        1.0,
    )
    .unwrap()
    .with_forcing(Forcing::Series(
        fraclin::series::FracPowerSeries::new(
            0.0,
            2,
            1,
            vec![(1.0, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))],
        )
        .unwrap(),
    ))
    .unwrap();
    let sol = solve(&p).unwrap();
    match residual_check(&p, &sol).unwrap() {
        SolutionResidual::Exact { telescoping_defect, tail_residual_measure, init_defect } => {
            assert!(telescoping_defect <= 1e-13);
            assert_eq!(tail_residual_measure, 0.0, "terminating series has no tail");
            assert!(init_defect <= 1e-13);
        }
        SolutionResidual::Grid { .. } => unreachable!("exact lane"),
    }
    println!("acceptance: worked-problem residuals vanish: PASS");
}
