//! Self-test battery behind the CLI's `validate` command.
//!
//! Each check measures a residual of an identity the library is supposed to
//! satisfy and compares it against a frozen tolerance. Expected values are
//! computed through a caller-supplied reference Γ so the harness itself can
//! be negative-tested: corrupt the reference and the power-rule checks must
//! start failing — if they don't, the battery is vacuous.
//!
//! The quick battery runs the exact-lane identities plus small-grid numeric
//! checks (well under a second); `full` adds the large-grid operator checks,
//! the differentiation-under-the-integral probe on both of its test
//! functions, an order-of-accuracy measurement, and the weighted kernel
//! limit.

use nalgebra::{DMatrix, DVector};
use std::fmt;

use crate::grid::{
    check_diff_under_integral, grid_rl_derivative, grid_rl_integral, BivariateSamples, Grid,
    SampledMatrixFunction,
};
use crate::series::{FracPowerSeries, MatrixPolynomial};
use crate::solver::{residual_check, solve, Forcing, IvpProblem};
use crate::specfun::{alpha_exp, gamma, mittag_leffler, recip_gamma, MlParams};
use crate::transition::{peano_baker_exact, peano_baker_grid, TransitionConfig, TwoPointSeries};

/// Reference Γ used to compute expected values (not the library's own
/// gamma, so the two can disagree when one is broken).
pub type GammaRef = fn(f64) -> f64;

/// The stock reference: the library Γ itself. Validation then checks the
/// *identities*, with the negative-control hook left to the caller.
pub fn default_gamma_ref(x: f64) -> f64 {
    gamma(x).unwrap_or(f64::NAN)
}

#[derive(Debug, Clone, Copy)]
pub struct ValidationOptions {
    /// Include the large-grid and convergence-order checks.
    pub full: bool,
    pub gamma_ref: GammaRef,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { full: false, gamma_ref: default_gamma_ref }
    }
}

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub residual: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl fmt::Display for CheckResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{:<44} residual {:>12.3e}  tol {:>8.1e}  {}",
            self.name,
            self.residual,
            self.tolerance,
            if self.passed { "ok" } else { "FAIL" }
        )
    }
}

pub fn all_passed(results: &[CheckResult]) -> bool {
    results.iter().all(|r| r.passed)
}

struct Battery {
    gamma_ref: GammaRef,
    results: Vec<CheckResult>,
}

impl Battery {
    /// Runs one check; an internal error counts as a failure (NaN residual),
    /// never a panic — validation must always produce its report.
    fn check(
        &mut self,
        name: &'static str,
        tolerance: f64,
        body: impl FnOnce(GammaRef) -> crate::Result<f64>,
    ) {
        let residual = body(self.gamma_ref).unwrap_or(f64::NAN);
        self.results.push(CheckResult {
            name,
            residual,
            tolerance,
            passed: residual <= tolerance,
        });
    }
}

fn scalar_series(origin: f64, terms: &[(f64, f64)]) -> FracPowerSeries {
    let terms = terms
        .iter()
        .map(|&(g, c)| (g, DMatrix::from_element(1, 1, c)))
        .collect();
    FracPowerSeries::new(origin, 1, 1, terms).expect("fixed test series is valid")
}

fn shift_matrix() -> MatrixPolynomial {
    MatrixPolynomial::new(
        0.0,
        2,
        vec![(1, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 0.0, 0.0]))],
    )
    .expect("fixed coefficient matrix is valid")
}

fn rel(err: f64, scale: f64) -> f64 {
    err / scale.abs().max(f64::MIN_POSITIVE)
}

pub fn run_validation(opts: &ValidationOptions) -> Vec<CheckResult> {
    let mut b = Battery { gamma_ref: opts.gamma_ref, results: Vec::new() };

    b.check("gamma recurrence x·Γ(x) = Γ(x+1)", 1e-12, |_| {
        let mut worst = 0.0f64;
        let mut x = 0.1;
        while x <= 30.0 {
            let lhs = x * gamma(x)?;
            let rhs = gamma(x + 1.0)?;
            worst = worst.max(rel((lhs - rhs).abs(), rhs));
            x += 0.37;
        }
        Ok(worst)
    });

    b.check("gamma fixed points", 1e-13, |_| {
        let cases = [
            (0.5, 1.7724538509055160273),
            (1.0, 1.0),
            (5.0, 24.0),
            (7.5, 1871.2543057977883),
        ];
        let mut worst = 0.0f64;
        for (x, want) in cases {
            worst = worst.max(rel((gamma(x)? - want).abs(), want));
        }
        Ok(worst)
    });

    b.check("integral power rule (exact lane)", 1e-12, |gref| {
        let mut worst = 0.0f64;
        for (g, a) in [(0.7, 0.5), (1.0, 0.3), (2.5, 1.25)] {
            let f = scalar_series(0.0, &[(g, 1.0)]);
            let jf = f.rl_integral(a)?;
            let want = gref(g) / gref(g + a);
            worst = worst.max(rel((jf.terms()[0].coeff[(0, 0)] - want).abs(), want));
        }
        Ok(worst)
    });

    b.check("derivative power rule (exact lane)", 1e-12, |gref| {
        let mut worst = 0.0f64;
        for (g, a) in [(1.7, 0.5), (2.0, 0.3), (0.9, 0.25)] {
            let f = scalar_series(0.0, &[(g, 1.0)]);
            let df = f.rl_derivative(a)?;
            let want = gref(g) / gref(g - a);
            worst = worst.max(rel((df.terms()[0].coeff[(0, 0)] - want).abs(), want));
        }
        Ok(worst)
    });

    b.check("kernel unit normalization (exact lane)", 1e-13, |gref| {
        // J^{1−α} (t−t0)^{α−1}/Γ(α) ≡ 1; the kernel is built from the
        // reference Γ so a corrupted reference breaks the normalization.
        let mut worst = 0.0f64;
        for alpha in [0.3, 0.5, 0.7] {
            let kernel = scalar_series(0.0, &[(alpha, 1.0 / gref(alpha))]);
            let j = kernel.rl_integral(1.0 - alpha)?;
            worst = worst.max((j.eval(0.8)?[(0, 0)] - 1.0).abs());
        }
        Ok(worst)
    });

    b.check("kernel annihilation (exact lane)", 0.0, |gref| {
        // D^α (t−t0)^{α−1}/Γ(α) ≡ 0 via the Γ-pole of the power rule.
        let mut worst = 0.0f64;
        for alpha in [0.3, 0.5, 0.7] {
            let kernel = scalar_series(0.0, &[(alpha, 1.0 / gref(alpha))]);
            let d = kernel.rl_derivative(alpha)?;
            worst = worst.max(d.max_coeff_norm());
        }
        Ok(worst)
    });

    b.check("derivative inverts the integral (exact lane)", 1e-13, |_| {
        let f = scalar_series(0.0, &[(0.6, 1.25), (1.0, -0.5), (2.3, 0.75)]);
        let mut worst = 0.0f64;
        for a in [0.25, 0.5, 0.85] {
            let round = f.rl_integral(a)?.rl_derivative(a)?;
            worst = worst.max(rel(round.term_distance(&f), f.max_coeff_norm()));
        }
        Ok(worst)
    });

    b.check("integration is a semigroup (exact lane)", 1e-13, |_| {
        let f = scalar_series(0.0, &[(0.6, 1.25), (1.4, -0.5), (2.3, 0.75)]);
        let mut worst = 0.0f64;
        for (a, bb) in [(0.3, 0.45), (0.7, 0.7), (1.2, 0.4)] {
            let two_step = f.rl_integral(bb)?.rl_integral(a)?;
            let one_step = f.rl_integral(a + bb)?;
            worst = worst.max(rel(
                two_step.term_distance(&one_step),
                one_step.max_coeff_norm(),
            ));
        }
        Ok(worst)
    });

    b.check("nilpotent transition coefficients", 1e-12, |gref| {
        // A(t) = [[0, t], [0, 0]] terminates after two terms with known
        // closed-form coefficients.
        let mut worst = 0.0f64;
        for alpha in [0.3, 0.5, 0.7] {
            let phi = peano_baker_exact(&shift_matrix(), alpha, 1.0, &TransitionConfig::default())?;
            if !phi.terminated_exactly() || phi.terms_used() != 2 {
                return Ok(f64::INFINITY);
            }
            let terms = phi.series().terms();
            let want_diag = 1.0 / gref(alpha);
            let want_off = alpha / gref(2.0 * alpha + 1.0);
            worst = worst.max(rel((terms[0].coeff[(0, 0)] - want_diag).abs(), want_diag));
            worst = worst.max(rel((terms[1].coeff[(0, 1)] - want_off).abs(), want_off));
        }
        Ok(worst)
    });

    b.check("worked solution spot values", 1e-9, |gref| {
        // Forced nilpotent system at α = 0.5, t = 1: the two components have
        // closed forms through Γ alone.
        let p = IvpProblem::exact(
            0.5,
            shift_matrix(),
            DVector::from_column_slice(&[0.0, 1.0]),
            1.0,
        )?
        .with_forcing(Forcing::Series(FracPowerSeries::new(
            0.0,
            2,
            1,
            vec![(1.0, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]))],
        )?))?;
        let x = solve(&p)?.eval(1.0)?;
        let want1 = 0.5 / gref(2.0) + 1.0 / gref(1.5);
        let want2 = 1.0 / gref(0.5);
        Ok(rel((x[0] - want1).abs(), want1).max(rel((x[1] - want2).abs(), want2)))
    });

    b.check("constant coefficients match the α-exponential", 1e-9, |_| {
        let mats = [
            DMatrix::from_row_slice(2, 2, &[0.2, -0.5, 0.4, 0.1]),
            DMatrix::from_row_slice(2, 2, &[0.8, 0.3, -0.4, 0.6]),
        ];
        let mut worst = 0.0f64;
        for m in &mats {
            for alpha in [0.4, 0.8] {
                let a = MatrixPolynomial::constant(0.0, m.clone())?;
                let phi = peano_baker_exact(&a, alpha, 1.0, &TransitionConfig::default())?;
                for t in [0.25, 1.0] {
                    let want = alpha_exp(alpha, m, t)?;
                    worst = worst.max((phi.eval(t)? - want).amax());
                }
            }
        }
        Ok(worst)
    });

    b.check("mittag-leffler fixed points", 1e-12, |gref| {
        let e = mittag_leffler(MlParams::new(1.0, 1.0)?, 1.0)?;
        let mut worst = (e - std::f64::consts::E).abs() / std::f64::consts::E;
        let at_zero = mittag_leffler(MlParams::new(0.5, 0.5)?, 0.0)?;
        let want = 1.0 / gref(0.5);
        worst = worst.max(rel((at_zero - want).abs(), want));
        Ok(worst)
    });

    b.check("telescoping inside the series construction", 1e-12, |_| {
        let a = MatrixPolynomial::new(
            0.0,
            2,
            vec![
                (0, DMatrix::from_row_slice(2, 2, &[0.4, -0.7, 0.2, 0.1])),
                (2, DMatrix::from_row_slice(2, 2, &[-0.3, 0.5, 0.9, -0.2])),
            ],
        )?;
        let alpha = 0.5;
        let phi = peano_baker_exact(&a, alpha, 1.0, &TransitionConfig::default())?;
        let mut worst = 0.0f64;
        for k in 0..phi.terms_used() - 1 {
            let lhs = phi.term(k + 1).expect("kept term").rl_derivative(alpha)?;
            let rhs = a.mul_series(phi.term(k).expect("kept term"))?;
            worst = worst.max(rel(lhs.term_distance(&rhs), rhs.max_coeff_norm()));
        }
        Ok(worst)
    });

    // Small-grid numeric checks (always on: they are cheap and catch wiring
    // mistakes between the lanes).

    b.check("grid kernel normalization", 1e-12, |gref| {
        let mut worst = 0.0f64;
        for alpha in [0.3, 0.7] {
            let g = Grid::new(0.0, 1.0, 64)?;
            let kernel = SampledMatrixFunction::singular_from_fn(g, alpha, |_| {
                DMatrix::from_element(1, 1, 1.0 / gref(alpha))
            })?;
            let j = grid_rl_integral(&kernel, 1.0 - alpha)?;
            for i in 1..=64 {
                worst = worst.max((j.value(i)?[(0, 0)] - 1.0).abs());
            }
        }
        Ok(worst)
    });

    b.check("grid kernel annihilation", 1e-6, |gref| {
        let alpha = 0.5;
        let g = Grid::new(0.0, 1.0, 64)?;
        let kernel = SampledMatrixFunction::singular_from_fn(g, alpha, |_| {
            DMatrix::from_element(1, 1, 1.0 / gref(alpha))
        })?;
        let d = grid_rl_derivative(&kernel, alpha)?;
        let mut worst = 0.0f64;
        for i in 1..64 {
            worst = worst.max(d.regular(i).amax());
        }
        Ok(worst)
    });

    b.check("grid integral power rule (smooth)", 1e-3, |gref| {
        // g(t) = t², σ = 1: interpolation error only.
        let g = Grid::new(0.0, 1.0, 64)?;
        let f = SampledMatrixFunction::from_fn(g, |t| DMatrix::from_element(1, 1, t * t))?;
        let a = 0.5;
        let jf = grid_rl_integral(&f, a)?;
        let c = gref(3.0) / gref(3.0 + a);
        let mut worst = 0.0f64;
        for i in 1..=64 {
            let t = jf.grid().node(i);
            worst = worst.max(rel((jf.value(i)?[(0, 0)] - c * t.powf(2.0 + a)).abs(), c));
        }
        Ok(worst)
    });

    b.check("grid integral power rule (singular factored)", 1e-6, |gref| {
        // f = (1 + t)·t^{σ−1}, σ = 0.5: the weights integrate the factored
        // singularity exactly, leaving rounding only.
        let g = Grid::new(0.0, 1.0, 64)?;
        let f = SampledMatrixFunction::singular_from_fn(g, 0.5, |t| {
            DMatrix::from_element(1, 1, 1.0 + t)
        })?;
        let a = 0.45;
        let jf = grid_rl_integral(&f, a)?;
        let c0 = gref(0.5) / gref(0.5 + a);
        let c1 = gref(1.5) / gref(1.5 + a);
        let mut worst = 0.0f64;
        for i in 1..=64 {
            let t = jf.grid().node(i);
            let want = c0 * t.powf(a - 0.5) + c1 * t.powf(a + 0.5);
            worst = worst.max(rel((jf.value(i)?[(0, 0)] - want).abs(), want));
        }
        Ok(worst)
    });

    b.check("grid derivative power rule", 1e-3, |gref| {
        let g = Grid::new(0.0, 1.0, 64)?;
        let f = SampledMatrixFunction::from_fn(g, |t| DMatrix::from_element(1, 1, t))?;
        let a = 0.3;
        let df = grid_rl_derivative(&f, a)?;
        let c = gref(2.0) / gref(2.0 - a);
        let mut worst = 0.0f64;
        for i in 32..64 {
            let t = df.grid().node(i);
            worst = worst.max(rel((df.regular(i)[(0, 0)] - c * t.powf(1.0 - a)).abs(), c));
        }
        Ok(worst)
    });

    b.check("grid transition matches the exact lane", 1.5e-3, |_| {
        let alpha = 0.5;
        let exact = peano_baker_exact(&shift_matrix(), alpha, 1.0, &TransitionConfig::default())?;
        let g = Grid::new(0.0, 1.0, 128)?;
        let samples = SampledMatrixFunction::from_fn(g, |t| {
            DMatrix::from_row_slice(2, 2, &[0.0, t, 0.0, 0.0])
        })?;
        let (phi, _) = peano_baker_grid(&samples, alpha, &TransitionConfig::default())?;
        let mut worst = 0.0f64;
        for i in 1..=128 {
            let t = phi.grid().node(i);
            if t < 0.05 {
                continue;
            }
            worst = worst.max((phi.value(i)? - exact.eval(t)?).amax());
        }
        Ok(worst)
    });

    b.check("grid solution residual (forced system)", 2e-2, |_| {
        let alpha = 0.5;
        let g = Grid::new(0.0, 1.0, 64)?;
        let a = SampledMatrixFunction::from_fn(g.clone(), |t| {
            DMatrix::from_row_slice(2, 2, &[0.0, t, 0.0, 0.0])
        })?;
        let u = SampledMatrixFunction::from_fn(g, |_| {
            DMatrix::from_column_slice(2, 1, &[1.0, 0.0])
        })?;
        let p = IvpProblem::sampled(alpha, a, DVector::from_column_slice(&[0.0, 1.0]))?
            .with_forcing(Forcing::Sampled(u))?;
        let sol = solve(&p)?;
        let res = residual_check(&p, &sol)?;
        Ok(res.max_residual_from(0.1).max(res.init_defect()))
    });

    if !opts.full {
        return b.results;
    }

    // Large-grid checks: the frozen operator tolerances at production size.

    b.check("grid integral power rule (smooth, N=1024)", 1e-3, |gref| {
        let g = Grid::new(0.0, 1.0, 1024)?;
        let f = SampledMatrixFunction::from_fn(g, |t| DMatrix::from_element(1, 1, t * t))?;
        let a = 0.5;
        let jf = grid_rl_integral(&f, a)?;
        let c = gref(3.0) / gref(3.0 + a);
        let mut worst = 0.0f64;
        for i in 1..=1024 {
            let t = jf.grid().node(i);
            worst = worst.max(rel((jf.value(i)?[(0, 0)] - c * t.powf(2.0 + a)).abs(), c));
        }
        Ok(worst)
    });

    b.check("grid kernel checks (singular factored, N=1024)", 1e-6, |gref| {
        let alpha = 0.5;
        let g = Grid::new(0.0, 1.0, 1024)?;
        let kernel = SampledMatrixFunction::singular_from_fn(g, alpha, |_| {
            DMatrix::from_element(1, 1, 1.0 / gref(alpha))
        })?;
        let j = grid_rl_integral(&kernel, 1.0 - alpha)?;
        let d = grid_rl_derivative(&kernel, alpha)?;
        let mut worst = 0.0f64;
        for i in 1..=1024 {
            worst = worst.max((j.value(i)?[(0, 0)] - 1.0).abs());
            if i < 1024 {
                worst = worst.max(d.regular(i).amax());
            }
        }
        Ok(worst)
    });

    b.check("differentiation under the integral (constant)", 1e-3, |_| {
        let g = Grid::new(0.0, 1.0, 512)?;
        let phi = BivariateSamples::from_fn(g, None, |_, _| DMatrix::from_element(1, 1, 1.0))?;
        let report = check_diff_under_integral(&phi, 0.3)?;
        Ok(report.max_residual)
    });

    b.check("differentiation under the integral (kernel)", 1e-3, |_| {
        let alpha = 0.3;
        let g = Grid::new(0.0, 1.0, 512)?;
        let phi = BivariateSamples::from_fn(g, Some(alpha), |_, _| {
            DMatrix::from_element(1, 1, recip_gamma(alpha))
        })?;
        let report = check_diff_under_integral(&phi, alpha)?;
        Ok(report.max_residual)
    });

    b.check("integral order of accuracy (ratio − 4)", 1.0, |_| {
        // Error against e^t·erf(√t) should shrink ≈ 4× when h halves.
        let err_at = |n: usize| -> crate::Result<f64> {
            let g = Grid::new(0.0, 1.0, n)?;
            let f = SampledMatrixFunction::from_fn(g, |t| DMatrix::from_element(1, 1, t.exp()))?;
            let jf = grid_rl_integral(&f, 0.5)?;
            let mid = (jf.value(n / 2)?[(0, 0)] - 1.1255646869698814f64).abs();
            let end = (jf.value(n)?[(0, 0)] - 2.2906982523032382f64).abs();
            Ok(mid.max(end))
        };
        Ok((err_at(64)? / err_at(128)? - 4.0).abs())
    });

    b.check("weighted kernel limit (monotone ratio < 1)", 1.0 - 1e-9, |_| {
        let kernel = TwoPointSeries::new(&shift_matrix(), 0.5, 1.0, &TransitionConfig::default())?;
        let mut defects = Vec::new();
        for eps in [1e-2, 1e-3, 1e-4] {
            let d = (kernel.weighted_initial_factor(1.0, eps)? - DMatrix::identity(2, 2)).amax();
            defects.push(d);
        }
        let worst_ratio = defects
            .windows(2)
            .map(|w| w[1] / w[0])
            .fold(0.0f64, f64::max);
        Ok(worst_ratio)
    });

    b.check("grid transition at production size (N=512)", 1e-3, |_| {
        let alpha = 0.5;
        let exact = peano_baker_exact(&shift_matrix(), alpha, 1.0, &TransitionConfig::default())?;
        let g = Grid::new(0.0, 1.0, 512)?;
        let samples = SampledMatrixFunction::from_fn(g, |t| {
            DMatrix::from_row_slice(2, 2, &[0.0, t, 0.0, 0.0])
        })?;
        let (phi, _) = peano_baker_grid(&samples, alpha, &TransitionConfig::default())?;
        let mut worst = 0.0f64;
        for i in 1..=512 {
            let t = phi.grid().node(i);
            if t < 0.05 {
                continue;
            }
            worst = worst.max((phi.value(i)? - exact.eval(t)?).amax());
        }
        Ok(worst)
    });

    b.results
}
