//! Initial value problems
//!
//!   D^α x(t) = A(t) x(t) + u(t),   J^{1−α} x(t)|_{t→t0+} = x0,
//!
//! solved through the transition matrix: x(t) = Φ(t, t0) x0 for the
//! homogeneous problem, plus ∫_{t0}^{t} Φ(t, τ) u(τ) dτ when a forcing term
//! is present. Everything runs on one of two parallel lanes:
//!
//! * exact — A a matrix polynomial and u a fractional power series: the
//!   solution is itself a series, the convolution collapses termwise through
//!   the Beta identity, and the residual of the equation can be read off
//!   symbolically;
//! * grid — A (and u) given as node samples: the transition columns
//!   Φ(·, τ_j) are rebuilt per source node and the τ-integral is assembled
//!   by product integration against the (t − τ)^{α−1} right-end weight.
//!
//! `x0` is the *weighted* initial value J^{1−α} x|_{t0}, not x(t0): the
//! solution itself behaves like (t − t0)^{α−1} near t0 and is unbounded
//! there whenever x0 ≠ 0.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::grid::{
    grid_rl_derivative, grid_rl_integral, node_weights, ProductWeights, SampledMatrixFunction,
};
use crate::series::{FracPowerSeries, MatrixPolynomial};
use crate::specfun::recip_gamma;
use crate::transition::{
    peano_baker_exact, peano_baker_grid, peano_baker_grid_with, ConvergenceReport,
    TransitionConfig, TransitionMatrix, TwoPointSeries,
};

/// Exponents may sit this far below 1 and still count as continuous at t0.
const CONTINUITY_TOL: f64 = 1e-12;

/// The coefficient matrix A(t), in whichever form the caller has it.
#[derive(Debug, Clone)]
pub enum Coefficients {
    Polynomial(MatrixPolynomial),
    Sampled(SampledMatrixFunction),
}

impl Coefficients {
    pub fn origin(&self) -> f64 {
        match self {
            Coefficients::Polynomial(a) => a.origin(),
            Coefficients::Sampled(a) => a.grid().t0(),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Coefficients::Polynomial(a) => a.dim(),
            Coefficients::Sampled(a) => a.rows(),
        }
    }
}

/// The forcing term u(t); `None` marks the homogeneous problem.
#[derive(Debug, Clone, Default)]
pub enum Forcing {
    #[default]
    None,
    Series(FracPowerSeries),
    Sampled(SampledMatrixFunction),
}

impl Forcing {
    pub fn is_none(&self) -> bool {
        matches!(self, Forcing::None)
    }
}

/// A validated problem statement. Dimensions, anchors, and the lane pairing
/// (polynomial A ↔ series u, sampled A ↔ sampled u) are checked on
/// construction so the solve entry points can assume consistency.
#[derive(Debug, Clone)]
pub struct IvpProblem {
    alpha: f64,
    coefficients: Coefficients,
    forcing: Forcing,
    x0: DVector<f64>,
    horizon: f64,
    config: TransitionConfig,
}

impl IvpProblem {
    /// Exact-lane problem: polynomial coefficients anchored at t0 = A's
    /// origin, solved on [t0, horizon].
    pub fn exact(
        alpha: f64,
        a: MatrixPolynomial,
        x0: DVector<f64>,
        horizon: f64,
    ) -> Result<Self> {
        let origin = a.origin();
        if !(horizon > origin) || !horizon.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "horizon {horizon} must lie beyond the origin {origin}"
            )));
        }
        Self::validated(alpha, Coefficients::Polynomial(a), x0, horizon)
    }

    /// Grid-lane problem: sampled coefficients; the horizon is the grid's
    /// right endpoint.
    pub fn sampled(alpha: f64, a: SampledMatrixFunction, x0: DVector<f64>) -> Result<Self> {
        if a.left_exponent().is_some() {
            return Err(Error::InvalidParameter(
                "coefficient samples must be regular (no left singularity)".into(),
            ));
        }
        let horizon = a.grid().t_end();
        Self::validated(alpha, Coefficients::Sampled(a), x0, horizon)
    }

    fn validated(
        alpha: f64,
        coefficients: Coefficients,
        x0: DVector<f64>,
        horizon: f64,
    ) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::InvalidParameter(format!(
                "derivative order must lie in (0, 1), got {alpha}"
            )));
        }
        if coefficients.dim() != x0.len() {
            return Err(Error::DimensionMismatch(format!(
                "coefficients are {0}x{0} but x0 has {1} entries",
                coefficients.dim(),
                x0.len()
            )));
        }
        Ok(Self {
            alpha,
            coefficients,
            forcing: Forcing::None,
            x0,
            horizon,
            config: TransitionConfig::default(),
        })
    }

    /// Attaches a forcing term, enforcing the lane pairing and continuity.
    ///
    /// A series u must be continuous on the closed interval, i.e. every
    /// exponent ≥ 1; sampled u is implicitly piecewise linear and therefore
    /// continuous, so it only needs to be regular and share A's grid.
    pub fn with_forcing(mut self, forcing: Forcing) -> Result<Self> {
        let n = self.dim();
        match (&self.coefficients, &forcing) {
            (_, Forcing::None) => {}
            (Coefficients::Polynomial(_), Forcing::Series(u)) => {
                if u.rows() != n || u.cols() != 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "forcing must be {n}x1, got {}x{}",
                        u.rows(),
                        u.cols()
                    )));
                }
                if u.origin() != self.t0() {
                    return Err(Error::OriginMismatch { left: self.t0(), right: u.origin() });
                }
                if let Some(g) = u.min_exponent() {
                    if g < 1.0 - CONTINUITY_TOL {
                        return Err(Error::InvalidParameter(format!(
                            "forcing term exponent {g} < 1 is discontinuous at t0; \
                             the solution formula assumes continuous u"
                        )));
                    }
                }
            }
            (Coefficients::Sampled(a), Forcing::Sampled(u)) => {
                if u.rows() != n || u.cols() != 1 {
                    return Err(Error::DimensionMismatch(format!(
                        "forcing must be {n}x1, got {}x{}",
                        u.rows(),
                        u.cols()
                    )));
                }
                if u.grid() != a.grid() {
                    return Err(Error::InvalidParameter(
                        "forcing samples must live on the coefficient grid".into(),
                    ));
                }
                if u.left_exponent().is_some() {
                    return Err(Error::InvalidParameter(
                        "forcing samples must be regular; a singular u is not continuous"
                            .into(),
                    ));
                }
            }
            (Coefficients::Polynomial(_), Forcing::Sampled(_)) => {
                return Err(Error::InvalidParameter(
                    "polynomial coefficients take a series forcing; \
                     sample the coefficients too to solve on the grid"
                        .into(),
                ));
            }
            (Coefficients::Sampled(_), Forcing::Series(_)) => {
                return Err(Error::InvalidParameter(
                    "sampled coefficients take a sampled forcing; \
                     evaluate the series at the grid nodes first"
                        .into(),
                ));
            }
        }
        self.forcing = forcing;
        Ok(self)
    }

    pub fn with_config(mut self, config: TransitionConfig) -> Self {
        self.config = config;
        self
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn coefficients(&self) -> &Coefficients {
        &self.coefficients
    }

    pub fn forcing(&self) -> &Forcing {
        &self.forcing
    }

    pub fn x0(&self) -> &DVector<f64> {
        &self.x0
    }

    pub fn t0(&self) -> f64 {
        self.coefficients.origin()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn dim(&self) -> usize {
        self.coefficients.dim()
    }

    pub fn config(&self) -> &TransitionConfig {
        &self.config
    }

    fn x0_column(&self) -> DMatrix<f64> {
        DMatrix::from_column_slice(self.dim(), 1, self.x0.as_slice())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolutionPath {
    Exact,
    Grid,
}

/// The solution trajectory in the representation its lane produced.
#[derive(Debug, Clone)]
pub enum Representation {
    Exact(FracPowerSeries),
    Grid(SampledMatrixFunction),
}

#[derive(Debug, Clone)]
pub struct Solution {
    representation: Representation,
    transition: Option<TransitionMatrix>,
    kernel: Option<TwoPointSeries>,
    report: ConvergenceReport,
}

impl Solution {
    pub fn representation(&self) -> &Representation {
        &self.representation
    }

    pub fn path(&self) -> SolutionPath {
        match self.representation {
            Representation::Exact(_) => SolutionPath::Exact,
            Representation::Grid(_) => SolutionPath::Grid,
        }
    }

    pub fn series(&self) -> Option<&FracPowerSeries> {
        match &self.representation {
            Representation::Exact(s) => Some(s),
            Representation::Grid(_) => None,
        }
    }

    pub fn samples(&self) -> Option<&SampledMatrixFunction> {
        match &self.representation {
            Representation::Grid(s) => Some(s),
            Representation::Exact(_) => None,
        }
    }

    /// The transition matrix behind an exact-lane solution.
    pub fn transition(&self) -> Option<&TransitionMatrix> {
        self.transition.as_ref()
    }

    /// The two-variable kernel behind an exact-lane inhomogeneous solution.
    pub fn kernel(&self) -> Option<&TwoPointSeries> {
        self.kernel.as_ref()
    }

    /// Convergence of the underlying series construction (the full-span
    /// build on the grid lane).
    pub fn report(&self) -> &ConvergenceReport {
        &self.report
    }

    /// Point evaluation; exact lane only. Grid solutions are read through
    /// [`Solution::samples`] at their nodes.
    pub fn eval(&self, t: f64) -> Result<DVector<f64>> {
        match &self.representation {
            Representation::Exact(s) => {
                let m = s.eval(t)?;
                Ok(DVector::from_column_slice(m.as_slice()))
            }
            Representation::Grid(_) => Err(Error::InvalidParameter(
                "grid solutions are defined at their nodes; read them via samples()".into(),
            )),
        }
    }
}

/// Solves the problem on whichever lane it was posed, with or without
/// forcing.
pub fn solve(p: &IvpProblem) -> Result<Solution> {
    if p.forcing.is_none() {
        solve_homogeneous(p)
    } else {
        solve_inhomogeneous(p)
    }
}

/// x(t) = Φ(t, t0) x0.
pub fn solve_homogeneous(p: &IvpProblem) -> Result<Solution> {
    if !p.forcing.is_none() {
        return Err(Error::InvalidParameter(
            "problem has a forcing term; use solve or solve_inhomogeneous".into(),
        ));
    }
    match &p.coefficients {
        Coefficients::Polynomial(a) => {
            let phi = peano_baker_exact(a, p.alpha, p.horizon, &p.config)?;
            let x = phi.series().mul_right_matrix(&p.x0_column())?;
            Ok(Solution {
                representation: Representation::Exact(x),
                report: phi.report().clone(),
                transition: Some(phi),
                kernel: None,
            })
        }
        Coefficients::Sampled(a) => {
            let (phi, report) = peano_baker_grid(a, p.alpha, &p.config)?;
            let x = scale_columns(&phi, &p.x0_column())?;
            Ok(Solution {
                representation: Representation::Grid(x),
                report,
                transition: None,
                kernel: None,
            })
        }
    }
}

/// x(t) = Φ(t, t0) x0 + ∫_{t0}^{t} Φ(t, τ) u(τ) dτ.
pub fn solve_inhomogeneous(p: &IvpProblem) -> Result<Solution> {
    match (&p.coefficients, &p.forcing) {
        (_, Forcing::None) => Err(Error::InvalidParameter(
            "problem has no forcing term; use solve or solve_homogeneous".into(),
        )),
        (Coefficients::Polynomial(a), Forcing::Series(u)) => {
            let phi = peano_baker_exact(a, p.alpha, p.horizon, &p.config)?;
            let kernel = TwoPointSeries::new(a, p.alpha, p.horizon, &p.config)?;
            let x = phi
                .series()
                .mul_right_matrix(&p.x0_column())?
                .add(&kernel.convolve(u)?)?;
            Ok(Solution {
                representation: Representation::Exact(x),
                report: phi.report().clone(),
                transition: Some(phi),
                kernel: Some(kernel),
            })
        }
        (Coefficients::Sampled(a), Forcing::Sampled(u)) => solve_sampled_inhomogeneous(p, a, u),
        // with_forcing rejects mixed lanes, but the enums admit them.
        _ => Err(Error::InvalidParameter(
            "coefficients and forcing must be on the same lane".into(),
        )),
    }
}

/// Per-node regular factors of the grid transition, right-multiplied (used
/// to turn Φ's samples into Φ·x0 without touching the left exponent).
fn scale_columns(
    phi: &SampledMatrixFunction,
    m: &DMatrix<f64>,
) -> Result<SampledMatrixFunction> {
    let values = phi.regular_values().iter().map(|g| g * m).collect();
    SampledMatrixFunction::from_values(phi.grid().clone(), Some(phi.sigma()), values)
}

fn solve_sampled_inhomogeneous(
    p: &IvpProblem,
    a: &SampledMatrixFunction,
    u: &SampledMatrixFunction,
) -> Result<Solution> {
    let grid = a.grid();
    let n = grid.n();
    let h = grid.h();
    let alpha = p.alpha;
    let dim = p.dim();

    // Transition columns Φ(·, τ_j), one per source node, on the trailing
    // subgrid [τ_j, T]. The recursion's weight tables are h-free, so one set
    // (built at full size by the j = 0 pass) serves every column.
    let mut tables: Vec<ProductWeights> = Vec::new();
    let mut columns: Vec<SampledMatrixFunction> = Vec::with_capacity(n);
    let mut full_report = None;
    for j in 0..n {
        let sub = crate::grid::Grid::relaxed(grid.node(j), grid.t_end(), n - j)?;
        let a_sub =
            SampledMatrixFunction::from_values(sub, None, a.regular_values()[j..].to_vec())?;
        let (phi, report) = peano_baker_grid_with(&a_sub, alpha, &p.config, &mut tables)?;
        if j == 0 {
            full_report = Some(report);
        }
        columns.push(phi);
    }
    let report = full_report.expect("grids have at least one interval");

    // Homogeneous part Φ(·, t0)·x0 keeps the (t−t0)^{α−1} left factor.
    let hom = scale_columns(&columns[0], &p.x0_column())?;

    // Inhomogeneous part: ∫_{t0}^{t_i} (t_i−τ)^{α−1} ρ(τ) dτ with the
    // regularized integrand ρ(τ) = Φ(t_i, τ)(t_i−τ)^{1−α} u(τ) — exactly the
    // stored regular factor of the τ-column times u. Its τ → t_i limit is
    // u(t_i)/Γ(α) (the kernel's unit normalization), so the weights close
    // the integral at s = i with no one-sided extrapolation.
    let w_out = ProductWeights::new(alpha, 1.0, n)?;
    let h_alpha = h.powf(alpha);
    let mut wbuf = Vec::new();
    let mut inh_values = vec![DMatrix::zeros(dim, 1)];
    for i in 1..=n {
        node_weights(&w_out, i, i, &mut wbuf);
        let mut acc = DMatrix::zeros(dim, 1);
        for (k, &wk) in wbuf.iter().enumerate() {
            if wk == 0.0 {
                continue;
            }
            let rho = if k == i {
                u.regular(k) * recip_gamma(alpha)
            } else {
                columns[k].regular(i - k) * u.regular(k)
            };
            acc += rho * wk;
        }
        inh_values.push(acc * h_alpha);
    }
    let inh = SampledMatrixFunction::from_values(grid.clone(), None, inh_values)?;

    Ok(Solution {
        representation: Representation::Grid(hom.add(&inh)?),
        report,
        transition: None,
        kernel: None,
    })
}

/// How well a solution satisfies its problem.
#[derive(Debug, Clone)]
pub enum SolutionResidual {
    /// Exact lane: the symbolic residual D^α x − A x − u telescopes to
    /// −A·(last kept contribution); `telescoping_defect` is the distance to
    /// that analytic value (rounding only), `tail_residual_measure` its sup
    /// measure over the horizon (0 when the series terminated), and
    /// `init_defect` the deviation of J^{1−α} x at t0 from x0.
    Exact {
        telescoping_defect: f64,
        tail_residual_measure: f64,
        init_defect: f64,
    },
    /// Grid lane: per-node (t_i, ‖D^α x − A x − u‖_max) at the interior
    /// nodes. The equation is singular at t0 like (t−t0)^{α−1}, so the
    /// residual is only meaningful a few nodes in; judge it through
    /// [`SolutionResidual::max_residual_from`].
    Grid {
        residuals: Vec<(f64, f64)>,
        init_defect: f64,
    },
}

impl SolutionResidual {
    pub fn init_defect(&self) -> f64 {
        match self {
            SolutionResidual::Exact { init_defect, .. }
            | SolutionResidual::Grid { init_defect, .. } => *init_defect,
        }
    }

    /// Largest equation residual at nodes with t ≥ t_min (grid lane); the
    /// telescoping defect on the exact lane.
    pub fn max_residual_from(&self, t_min: f64) -> f64 {
        match self {
            SolutionResidual::Exact { telescoping_defect, .. } => *telescoping_defect,
            SolutionResidual::Grid { residuals, .. } => residuals
                .iter()
                .filter(|(t, _)| *t >= t_min)
                .map(|(_, r)| *r)
                .fold(0.0, f64::max),
        }
    }
}

/// Checks `sol` against `p`: equation residual plus the weighted initial
/// condition J^{1−α} x|_{t0} = x0.
pub fn residual_check(p: &IvpProblem, sol: &Solution) -> Result<SolutionResidual> {
    match &sol.representation {
        Representation::Exact(x) => residual_check_exact(p, sol, x),
        Representation::Grid(x) => residual_check_grid(p, x),
    }
}

fn residual_check_exact(
    p: &IvpProblem,
    sol: &Solution,
    x: &FracPowerSeries,
) -> Result<SolutionResidual> {
    let Coefficients::Polynomial(a) = &p.coefficients else {
        return Err(Error::InvalidParameter(
            "exact solution paired with sampled coefficients".into(),
        ));
    };
    let alpha = p.alpha;
    let span = p.horizon - p.t0();
    let mut res = x.rl_derivative(alpha)?.sub(&a.mul_series(x)?)?;
    if let Forcing::Series(u) = &p.forcing {
        res = res.sub(u)?;
    }
    // Analytic value of the truncation residual: −A·(tail source), where the
    // tail source is the last kept Φ-term times x0, plus — when forced — the
    // kernel's last generation convolved with u.
    let mut tail_source = match sol.transition() {
        Some(phi) if !phi.terminated_exactly() => {
            let last = phi.term(phi.terms_used() - 1).expect("kept terms are stored");
            last.mul_right_matrix(&p.x0_column())?
        }
        _ => FracPowerSeries::zero(p.t0(), p.dim(), 1),
    };
    if let (Some(kernel), Forcing::Series(u)) = (sol.kernel(), &p.forcing) {
        if !kernel.terminated_exactly() {
            tail_source = tail_source.add(&kernel.convolve_last_generation(u)?)?;
        }
    }
    let expected = a.mul_series(&tail_source)?.scale(-1.0);
    let telescoping_defect = res.term_distance(&expected);
    let tail_residual_measure = expected.sup_measure(span);
    let weighted = x.rl_integral(1.0 - alpha)?;
    let init_defect = (weighted.eval(p.t0())? - p.x0_column()).amax();
    Ok(SolutionResidual::Exact { telescoping_defect, tail_residual_measure, init_defect })
}

fn residual_check_grid(p: &IvpProblem, x: &SampledMatrixFunction) -> Result<SolutionResidual> {
    let Coefficients::Sampled(a) = &p.coefficients else {
        return Err(Error::InvalidParameter(
            "grid solution paired with polynomial coefficients".into(),
        ));
    };
    let alpha = p.alpha;
    let n = x.grid().n();
    let dax = grid_rl_derivative(x, alpha)?;
    let ax = a.pointwise_product(x)?;
    let mut residuals = Vec::with_capacity(n.saturating_sub(1));
    for i in 1..n {
        let mut r = dax.regular(i) - ax.value(i)?;
        if let Forcing::Sampled(u) = &p.forcing {
            r -= u.regular(i);
        }
        residuals.push((x.grid().node(i), r.amax()));
    }
    // J^{1−α} x is regular; its left-endpoint value is the weighted initial
    // state.
    let weighted = grid_rl_integral(x, 1.0 - alpha)?;
    let init_defect = (weighted.value(0)? - p.x0_column()).amax();
    Ok(SolutionResidual::Grid { residuals, init_defect })
}
